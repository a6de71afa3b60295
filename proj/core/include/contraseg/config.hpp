// Experiment configuration: one flat struct, loaded from a flat JSON document.
// Unknown keys in the file are a hard error; validate_config() enforces every
// invariant and names the offending field in the message.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "contraseg/common.hpp"

namespace contraseg {

struct ExperimentConfig {
    // Data/model dimensions
    int feature_dim = 16;        // F, input feature channels
    int embedding_dim = 64;      // D, output of temporal and semantic encoders
    int downsample_length = 128; // T, frames after downsampling
    int frames_per_video = 32;   // T_s, sampled frames per video for contrast
    int batch_videos = 5;        // N, videos per minibatch

    // Contrast
    double scale_factor = 1.0;   // xi, logit scale for the pairwise losses
    double temperature = 0.1;    // tau, InfoNCE baseline only
    int num_clusters = 0;        // k for the pair-mining k-means; 0 = number of classes
    bool dynamic_clustering = true;  // false: mask from input-feature clustering only
    bool normalize_embeddings = false;

    // Neighbourhood consistency
    int nca_window = 8;          // W, frames per neighbourhood window (even)
    int nca_anchors = 1;         // K, anchors per labelled video
    int nca_partners = 10;       // M, same/different-label partners per anchor

    // Schedule
    int iterations = 4;          // I, outer classify/contrast iterations
    int epochs_pretrain = 100;   // E1
    int epochs_stage1 = 100;     // E2 per iteration
    int epochs_stage2 = 100;     // E3 per iteration
    int probe_steps = 400;       // full-batch steps when fitting a linear probe
    int eval_every = 1;          // epochs between test-metric snapshots

    // Optimizer groups (learning rate / weight decay)
    double lr_ts = 1e-3;         // (T:S) pretraining group
    double lr_c = 1e-2;          // classifier group
    double lr_tgs = 1e-5;        // (T:G:S) semi-supervised group
    double wd_ts = 1e-3;
    double wd_c = 1e-3;
    double wd_tgs = 1e-3;

    // Loss weights
    double w_ap_p = 1.0;
    double w_ap_n = 1.0;
    double w_aa_n = 1.0;
    double w_pp_n = 1.0;
    double w_nca = 1.0;
    double w_ce = 1.0;

    // Networks
    int encoder_depth = 3;       // temporal encoder/decoder stages
    int encoder_hidden = 64;     // channels per temporal stage
    int semantic_hidden = 64;    // hidden width of the per-frame extractor
    int semantic_layers = 1;     // hidden layers in the extractor (shallow default)
    int scorer_hidden = 64;      // hidden width of the consistency scorer

    // Semi-supervision
    double labelled_fraction = 1.0;
    double pl_confidence_threshold = 0.0;  // 0 = keep every pseudo-label
    bool supervised_only = false;          // ablation: stage1 repeated, no pretrain/stage2

    // Run control
    uint64_t rng_seed = 0;
    std::string precision = "float64";     // float64 | float32
    bool log_timing = true;                // false writes 0.000 seconds for byte-stable logs
};

// Returns the config with derived defaults resolved; throws ConfigError naming
// the offending field otherwise.
ExperimentConfig validate_config(const ExperimentConfig& cfg);

// Strict JSON load: every key must match a field name exactly.
ExperimentConfig load_config_file(const std::filesystem::path& path);
ExperimentConfig parse_config_json(const std::string& text);

std::string config_to_json(const ExperimentConfig& cfg);

// FNV-1a hash of a file's raw bytes, hex encoded. Used for run manifests and
// checkpoint metadata.
std::string hash_bytes_hex(const std::string& bytes);
std::string hash_file_hex(const std::filesystem::path& path);

}  // namespace contraseg
