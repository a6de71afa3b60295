// Domain value types shared by every module.

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "contraseg/common.hpp"

namespace contraseg {

// ============================================================================
// One video's pre-extracted frame features (plus optional per-frame labels)
// ============================================================================
struct FeatureSequence {
    std::string video_id;
    MatD features;                          // [T_ori x F]
    std::optional<std::vector<int>> labels; // length T_ori, values in [0, num_classes)
    std::optional<std::string> source_path;

    int frames() const { return features.rows; }
    int dim() const { return features.cols; }

    // Validating factory: rejects empty shapes, non-finite features, and
    // label vectors of the wrong length or range.
    static FeatureSequence make(std::string video_id, MatD features,
                                std::optional<std::vector<int>> labels, int num_classes,
                                std::optional<std::string> source_path = std::nullopt);
};

// ============================================================================
// Features reduced to exactly the configured coarse length
// ============================================================================
struct DownsampledSequence {
    MatD features;                          // [T x F]
    std::optional<std::vector<int>> labels; // length T
    int t_original = 0;
    bool degraded = false;  // target_T exceeded T_ori; frames were repeated

    int frames() const { return features.rows; }
};

// ============================================================================
// Hidden-label vault
//
// Labels of the unlabelled partition are stored here and are readable only
// inside an EvalScope. Any other read throws TaintError, which is how the
// no-leak audit proves training never touches them.
// ============================================================================
class HiddenLabels {
public:
    void put(const std::string& video_id, std::vector<int> labels) {
        store_[video_id] = std::move(labels);
    }

    bool has(const std::string& video_id) const { return store_.count(video_id) > 0; }

    const std::vector<int>& get(const std::string& video_id) const {
        if (scope_depth() == 0)
            throw TaintError("hidden labels of '" + video_id +
                             "' read outside an evaluation scope");
        ++reads_;
        auto it = store_.find(video_id);
        if (it == store_.end())
            throw DataError("no hidden labels stored for video '" + video_id + "'");
        return it->second;
    }

    size_t size() const { return store_.size(); }
    uint64_t scoped_reads() const { return reads_; }

    class EvalScope {
    public:
        EvalScope() { ++scope_depth(); }
        ~EvalScope() { --scope_depth(); }
        EvalScope(const EvalScope&) = delete;
        EvalScope& operator=(const EvalScope&) = delete;
    };

private:
    static int& scope_depth() {
        thread_local int depth = 0;
        return depth;
    }

    std::map<std::string, std::vector<int>> store_;
    mutable uint64_t reads_ = 0;
};

// ============================================================================
// Dataset split: labelled and unlabelled partitions with disjoint video ids
// ============================================================================
struct DatasetSplit {
    std::vector<FeatureSequence> labelled;   // labels present
    std::vector<FeatureSequence> unlabelled; // labels stripped (held in `hidden`)
    std::vector<std::string> class_names;    // index = class id
    int num_classes = 0;
    std::shared_ptr<HiddenLabels> hidden = std::make_shared<HiddenLabels>();

    size_t total_videos() const { return labelled.size() + unlabelled.size(); }
};

// Partition fully-labelled sequences into a DatasetSplit: ceil(n * fraction)
// whole videos are drawn into the labelled subset by seeded sampling; the
// rest have their labels moved into the vault.
DatasetSplit make_split(std::vector<FeatureSequence> videos, std::vector<std::string> class_names,
                        double labelled_fraction, uint64_t seed);

}  // namespace contraseg
