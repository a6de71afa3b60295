// Synthetic labelled feature-sequence datasets with controllable class
// structure and temporal statistics. Labels follow a first-order Markov
// chain with geometric segment dwell; features are class prototypes plus
// isotropic noise plus a slow shared drift so temporal context matters.

#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "contraseg/types.hpp"

namespace contraseg::synth {

struct SynthSpec {
    int num_videos = 10;
    int frames_per_video = 512;  // T_ori
    int num_classes = 6;         // A
    int feature_dim = 16;        // F
    double class_prototype_scale = 2.0;  // separation of class means
    double noise_sigma = 0.5;
    double mean_segment_length = 64.0;   // geometric dwell
    std::optional<MatD> transition_matrix;  // A x A row-stochastic; default uniform off-diagonal
    double drift_amplitude = 1.0;  // scaled by noise_sigma, so sigma=0 disables drift
    double drift_period = 256.0;   // frames per drift cycle
    uint64_t seed = 0;
};

SynthSpec validate_spec(const SynthSpec& spec);
SynthSpec load_spec_file(const std::filesystem::path& path);
SynthSpec parse_spec_json(const std::string& text);
std::string default_spec_json();

struct GeneratedDataset {
    std::vector<FeatureSequence> videos;  // all labelled
    std::vector<std::string> class_names; // "action_0" .. "action_{A-1}"
};

// Deterministic given spec.seed.
GeneratedDataset generate_dataset(const SynthSpec& spec);

// Emit the dataio directory layout (features/, groundTruth/, mapping.txt).
void write_dataset(const GeneratedDataset& ds, const std::filesystem::path& out_dir);

// Convenience: generate then split, without touching the filesystem.
DatasetSplit generate_split(const SynthSpec& spec, double labelled_fraction, uint64_t split_seed);

// Same generative world (prototypes, drift statistics), disjoint videos: the
// last holdout_videos become a fully-labelled test split, the rest the
// training split.
struct TrainTest {
    DatasetSplit train;
    DatasetSplit test;
};
TrainTest generate_train_test(const SynthSpec& spec, int holdout_videos,
                              double labelled_fraction, uint64_t split_seed);

// Stationary distribution of a row-stochastic matrix by power iteration.
std::vector<double> stationary_distribution(const MatD& transition, int iters = 10000);

// The transition matrix generate_dataset uses when the spec leaves it unset.
MatD uniform_offdiagonal_transitions(int num_classes);

}  // namespace contraseg::synth
