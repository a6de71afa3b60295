// Segmental evaluation suite: frame-wise accuracy, segmental edit score, and
// segmental F1 at IoU overlap thresholds.

#pragma once

#include <vector>

#include "contraseg/common.hpp"

namespace contraseg::metrics {

struct Segment {
    int label = 0;
    int start = 0;  // inclusive
    int end = 0;    // exclusive
    int length() const { return end - start; }
};

using SegmentList = std::vector<Segment>;

struct MetricReport {
    double acc = 0.0;
    double edit = 0.0;
    double f1_10 = 0.0;
    double f1_25 = 0.0;
    double f1_50 = 0.0;
};

// Maximal-run RLE of a label sequence; segments tile [0, T).
SegmentList segments_from_labels(const std::vector<int>& labels);

std::vector<int> labels_from_segments(const SegmentList& segments);

// 100 * matching frames / T. Frames whose GT label is in `ignore` are skipped.
double frame_accuracy(const std::vector<int>& pred, const std::vector<int>& gt,
                      const std::vector<int>& ignore = {});

// 100 * (1 - Levenshtein(segment labels) / max(|segments|)), clamped to [0, 100].
double edit_score(const std::vector<int>& pred, const std::vector<int>& gt,
                  const std::vector<int>& ignore = {});

// Greedy one-to-one matching in predicted-segment order: a predicted segment
// is a true positive when some unmatched GT segment of the same label reaches
// IoU >= threshold (the highest-IoU one is consumed). 100 when both sides
// have no segments.
double f1_at_overlap(const std::vector<int>& pred, const std::vector<int>& gt, double threshold,
                     const std::vector<int>& ignore = {});

// Upsample a coarse prediction to t_original frames, then compute the suite.
MetricReport evaluate(const std::vector<int>& pred_down, const std::vector<int>& gt_full,
                      const std::vector<int>& ignore = {});

MetricReport evaluate_full_resolution(const std::vector<int>& pred_full,
                                      const std::vector<int>& gt_full,
                                      const std::vector<int>& ignore = {});

// Per-video average of each metric.
MetricReport average(const std::vector<MetricReport>& reports);

}  // namespace contraseg::metrics
