#include "contraseg/metrics.hpp"

#include <algorithm>

#include "contraseg/dataio.hpp"

namespace contraseg::metrics {

namespace {

bool ignored(int label, const std::vector<int>& ignore) {
    return std::find(ignore.begin(), ignore.end(), label) != ignore.end();
}

SegmentList drop_ignored(const SegmentList& segs, const std::vector<int>& ignore) {
    if (ignore.empty()) return segs;
    SegmentList out;
    for (const auto& s : segs)
        if (!ignored(s.label, ignore)) out.push_back(s);
    return out;
}

int levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());
    std::vector<int> prev(m + 1), cur(m + 1);
    for (int j = 0; j <= m; ++j) prev[j] = j;
    for (int i = 1; i <= n; ++i) {
        cur[0] = i;
        for (int j = 1; j <= m; ++j) {
            const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

}  // namespace

SegmentList segments_from_labels(const std::vector<int>& labels) {
    if (labels.empty()) throw DataError("cannot segment an empty label sequence");
    SegmentList segs;
    int start = 0;
    for (int t = 1; t <= static_cast<int>(labels.size()); ++t) {
        if (t == static_cast<int>(labels.size()) || labels[t] != labels[start]) {
            segs.push_back({labels[start], start, t});
            start = t;
        }
    }
    return segs;
}

std::vector<int> labels_from_segments(const SegmentList& segments) {
    std::vector<int> out;
    for (const auto& s : segments)
        for (int t = s.start; t < s.end; ++t) out.push_back(s.label);
    return out;
}

double frame_accuracy(const std::vector<int>& pred, const std::vector<int>& gt,
                      const std::vector<int>& ignore) {
    if (pred.size() != gt.size())
        throw DataError("frame_accuracy: length mismatch, " + std::to_string(pred.size()) +
                        " vs " + std::to_string(gt.size()));
    if (gt.empty()) throw DataError("frame_accuracy: empty sequences");
    int64_t total = 0, correct = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
        if (ignored(gt[i], ignore)) continue;
        ++total;
        if (pred[i] == gt[i]) ++correct;
    }
    if (total == 0) return 100.0;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

double edit_score(const std::vector<int>& pred, const std::vector<int>& gt,
                  const std::vector<int>& ignore) {
    if (pred.empty() || gt.empty()) throw DataError("edit_score: empty sequences");
    SegmentList ps = drop_ignored(segments_from_labels(pred), ignore);
    SegmentList gs = drop_ignored(segments_from_labels(gt), ignore);
    std::vector<int> pl, gl;
    for (const auto& s : ps) pl.push_back(s.label);
    for (const auto& s : gs) gl.push_back(s.label);
    const size_t denom = std::max(pl.size(), gl.size());
    if (denom == 0) return 100.0;
    const double score =
        100.0 * (1.0 - static_cast<double>(levenshtein(pl, gl)) / static_cast<double>(denom));
    return std::clamp(score, 0.0, 100.0);
}

double f1_at_overlap(const std::vector<int>& pred, const std::vector<int>& gt, double threshold,
                     const std::vector<int>& ignore) {
    if (threshold <= 0.0 || threshold >= 1.0)
        throw ConfigError("f1 overlap threshold must lie in (0, 1), got " +
                          std::to_string(threshold));
    SegmentList ps = drop_ignored(segments_from_labels(pred), ignore);
    SegmentList gs = drop_ignored(segments_from_labels(gt), ignore);
    if (ps.empty() && gs.empty()) return 100.0;

    std::vector<bool> consumed(gs.size(), false);
    int tp = 0, fp = 0;
    for (const auto& p : ps) {
        int best = -1;
        double best_iou = -1.0;
        for (size_t j = 0; j < gs.size(); ++j) {
            if (consumed[j] || gs[j].label != p.label) continue;
            const int inter = std::max(0, std::min(p.end, gs[j].end) - std::max(p.start, gs[j].start));
            const int uni = std::max(p.end, gs[j].end) - std::min(p.start, gs[j].start);
            const double iou = uni > 0 ? static_cast<double>(inter) / uni : 0.0;
            if (iou > best_iou) {
                best_iou = iou;
                best = static_cast<int>(j);
            }
        }
        if (best >= 0 && best_iou >= threshold) {
            consumed[best] = true;
            ++tp;
        } else {
            ++fp;
        }
    }
    int fn = 0;
    for (bool c : consumed)
        if (!c) ++fn;
    if (2 * tp + fp + fn == 0) return 100.0;
    return 100.0 * 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
}

MetricReport evaluate_full_resolution(const std::vector<int>& pred_full,
                                      const std::vector<int>& gt_full,
                                      const std::vector<int>& ignore) {
    MetricReport r;
    r.acc = frame_accuracy(pred_full, gt_full, ignore);
    r.edit = edit_score(pred_full, gt_full, ignore);
    r.f1_10 = f1_at_overlap(pred_full, gt_full, 0.10, ignore);
    r.f1_25 = f1_at_overlap(pred_full, gt_full, 0.25, ignore);
    r.f1_50 = f1_at_overlap(pred_full, gt_full, 0.50, ignore);
    return r;
}

MetricReport evaluate(const std::vector<int>& pred_down, const std::vector<int>& gt_full,
                      const std::vector<int>& ignore) {
    const std::vector<int> pred_full =
        io::upsample_predictions(pred_down, static_cast<int>(gt_full.size()));
    return evaluate_full_resolution(pred_full, gt_full, ignore);
}

MetricReport average(const std::vector<MetricReport>& reports) {
    MetricReport avg;
    if (reports.empty()) return avg;
    for (const auto& r : reports) {
        avg.acc += r.acc;
        avg.edit += r.edit;
        avg.f1_10 += r.f1_10;
        avg.f1_25 += r.f1_25;
        avg.f1_50 += r.f1_50;
    }
    const double n = static_cast<double>(reports.size());
    avg.acc /= n;
    avg.edit /= n;
    avg.f1_10 /= n;
    avg.f1_25 /= n;
    avg.f1_50 /= n;
    return avg;
}

}  // namespace contraseg::metrics
