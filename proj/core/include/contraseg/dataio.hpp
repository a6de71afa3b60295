// Dataset loading/storing in the standard action-segmentation layout:
//
//   features/<video_id>.bin   little-endian float32, row-major, T_ori x F
//   features/<video_id>.json  {"frames": T_ori, "dim": F}
//   groundTruth/<video_id>.txt  one action name per line, T_ori lines
//   mapping.txt               "<id> <action-name>", ids 0..A-1 contiguous
//
// plus the temporal down-/up-sampling contract used throughout training.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "contraseg/types.hpp"

namespace contraseg::io {

// Load every video under root_dir (sorted by video_id) and partition it by
// seeded whole-video sampling. Throws DataError on missing files, frame/label
// count mismatches, and label names absent from mapping.txt.
DatasetSplit load_dataset(const std::filesystem::path& root_dir, double labelled_fraction,
                          uint64_t seed);

// Chunk-wise mean pooling over contiguous near-equal chunks; labels reduced
// by per-chunk majority vote with ties broken toward the earlier frame's
// label. target_T > T_ori degrades to nearest-frame repetition and sets the
// `degraded` flag.
DownsampledSequence downsample(const FeatureSequence& seq, int target_T);

// Nearest-neighbour expansion: output frame i takes pred[floor(i*T/T_ori)].
std::vector<int> upsample_predictions(const std::vector<int>& pred, int t_original);

// --- file-level helpers (also used by synth and the CLI) -------------------

void write_feature_file(const std::filesystem::path& features_dir, const std::string& video_id,
                        const MatD& features);
MatD read_feature_file(const std::filesystem::path& features_dir, const std::string& video_id);

void write_label_file(const std::filesystem::path& path, const std::vector<int>& labels,
                      const std::vector<std::string>& class_names);
std::vector<int> read_label_file(const std::filesystem::path& path,
                                 const std::vector<std::string>& class_names);

void write_mapping(const std::filesystem::path& path, const std::vector<std::string>& class_names);
std::vector<std::string> read_mapping(const std::filesystem::path& path);

}  // namespace contraseg::io
