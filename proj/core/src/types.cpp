#include "contraseg/types.hpp"

#include <algorithm>
#include <cmath>

#include "contraseg/rng.hpp"

namespace contraseg {

FeatureSequence FeatureSequence::make(std::string video_id, MatD features,
                                      std::optional<std::vector<int>> labels, int num_classes,
                                      std::optional<std::string> source_path) {
    if (features.rows < 1 || features.cols < 1)
        throw DataError("video '" + video_id + "': features must be at least 1x1, got " +
                        std::to_string(features.rows) + "x" + std::to_string(features.cols));
    if (!all_finite(features))
        throw DataError("video '" + video_id + "': features contain NaN or Inf");
    if (labels) {
        if (static_cast<int>(labels->size()) != features.rows)
            throw DataError("video '" + video_id + "': " + std::to_string(labels->size()) +
                            " labels for " + std::to_string(features.rows) + " frames");
        for (int y : *labels)
            if (y < 0 || y >= num_classes)
                throw DataError("video '" + video_id + "': label " + std::to_string(y) +
                                " outside [0, " + std::to_string(num_classes) + ")");
    }
    FeatureSequence seq;
    seq.video_id = std::move(video_id);
    seq.features = std::move(features);
    seq.labels = std::move(labels);
    seq.source_path = std::move(source_path);
    return seq;
}

DatasetSplit make_split(std::vector<FeatureSequence> videos, std::vector<std::string> class_names,
                        double labelled_fraction, uint64_t seed) {
    if (videos.empty()) throw DataError("cannot split an empty dataset");
    if (labelled_fraction <= 0.0 || labelled_fraction > 1.0)
        throw ConfigError("config field 'labelled_fraction': value " +
                          std::to_string(labelled_fraction) + " violates (0, 1]");
    for (const auto& v : videos)
        if (!v.labels)
            throw DataError("video '" + v.video_id + "' has no labels; cannot form a split");

    std::sort(videos.begin(), videos.end(),
              [](const FeatureSequence& a, const FeatureSequence& b) {
                  return a.video_id < b.video_id;
              });

    const int n = static_cast<int>(videos.size());
    const int n_labelled = std::min<int>(
        n, static_cast<int>(std::ceil(labelled_fraction * static_cast<double>(n))));

    Rng rng(seed);
    std::vector<int> order = rng.derive("labelled-selection").sample_without_replacement(n, n);

    std::vector<bool> is_labelled(n, false);
    for (int i = 0; i < n_labelled; ++i) is_labelled[order[i]] = true;

    DatasetSplit split;
    split.class_names = std::move(class_names);
    split.num_classes = static_cast<int>(split.class_names.size());
    for (int i = 0; i < n; ++i) {
        if (is_labelled[i]) {
            split.labelled.push_back(std::move(videos[i]));
        } else {
            FeatureSequence v = std::move(videos[i]);
            split.hidden->put(v.video_id, std::move(*v.labels));
            v.labels.reset();
            split.unlabelled.push_back(std::move(v));
        }
    }
    return split;
}

}  // namespace contraseg
