#include "contraseg/synth.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "contraseg/dataio.hpp"
#include "contraseg/rng.hpp"

namespace contraseg::synth {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

void require(bool ok, const std::string& field, const std::string& detail) {
    if (!ok) throw ConfigError("synth spec field '" + field + "': " + detail);
}
}  // namespace

SynthSpec validate_spec(const SynthSpec& spec) {
    SynthSpec s = spec;
    require(s.num_videos >= 1, "num_videos", "must be >= 1");
    require(s.frames_per_video >= 1, "frames_per_video", "must be >= 1");
    require(s.num_classes >= 2, "num_classes", "must be >= 2");
    require(s.feature_dim >= 1, "feature_dim", "must be >= 1");
    require(s.class_prototype_scale >= 0.0, "class_prototype_scale", "must be >= 0");
    require(s.noise_sigma >= 0.0, "noise_sigma", "must be >= 0");
    require(s.mean_segment_length >= 1.0, "mean_segment_length", "must be >= 1");
    require(s.drift_amplitude >= 0.0, "drift_amplitude", "must be >= 0");
    require(s.drift_period > 0.0, "drift_period", "must be > 0");
    if (s.transition_matrix) {
        const MatD& p = *s.transition_matrix;
        require(p.rows == s.num_classes && p.cols == s.num_classes, "transition_matrix",
                "must be num_classes x num_classes");
        for (int i = 0; i < p.rows; ++i) {
            double row_sum = 0.0;
            for (int j = 0; j < p.cols; ++j) {
                require(p.at(i, j) >= 0.0, "transition_matrix", "entries must be >= 0");
                row_sum += p.at(i, j);
            }
            require(std::abs(row_sum - 1.0) <= 1e-9, "transition_matrix",
                    "row " + std::to_string(i) + " sums to " + std::to_string(row_sum) +
                        ", not 1 +- 1e-9");
        }
    }
    return s;
}

MatD uniform_offdiagonal_transitions(int num_classes) {
    MatD p(num_classes, num_classes, 0.0);
    const double w = 1.0 / (num_classes - 1);
    for (int i = 0; i < num_classes; ++i)
        for (int j = 0; j < num_classes; ++j)
            if (i != j) p.at(i, j) = w;
    return p;
}

std::vector<double> stationary_distribution(const MatD& transition, int iters) {
    const int a = transition.rows;
    std::vector<double> pi(a, 1.0 / a), next(a);
    for (int it = 0; it < iters; ++it) {
        for (int j = 0; j < a; ++j) {
            double acc = 0.0;
            for (int i = 0; i < a; ++i) acc += pi[i] * transition.at(i, j);
            next[j] = acc;
        }
        double delta = 0.0, norm = 0.0;
        for (int j = 0; j < a; ++j) {
            delta += std::abs(next[j] - pi[j]);
            norm += next[j];
        }
        for (int j = 0; j < a; ++j) pi[j] = next[j] / norm;
        if (delta < 1e-14) break;
    }
    return pi;
}

namespace {

int sample_categorical(const double* weights, int n, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    return n - 1;
}

// Geometric dwell with support {1, 2, ...} and mean = mean_segment_length.
int sample_dwell(double mean_len, Rng& rng) {
    if (mean_len <= 1.0) return 1;
    const double p = 1.0 / mean_len;
    // Inverse CDF of the shifted geometric.
    const double u = rng.uniform();
    const int d = 1 + static_cast<int>(std::floor(std::log1p(-u) / std::log1p(-p)));
    return std::max(1, d);
}

}  // namespace

GeneratedDataset generate_dataset(const SynthSpec& raw) {
    const SynthSpec spec = validate_spec(raw);
    const int a = spec.num_classes;
    const int f = spec.feature_dim;
    const MatD transitions =
        spec.transition_matrix ? *spec.transition_matrix : uniform_offdiagonal_transitions(a);

    Rng root(spec.seed);

    // Fixed random unit-norm prototypes, shared by every video.
    Rng proto_rng = root.derive("prototypes");
    MatD prototypes(a, f);
    for (int c = 0; c < a; ++c) {
        double norm_sq = 0.0;
        for (int k = 0; k < f; ++k) {
            const double x = proto_rng.normal();
            prototypes.at(c, k) = x;
            norm_sq += x * x;
        }
        const double inv = 1.0 / std::sqrt(std::max(norm_sq, 1e-30));
        for (int k = 0; k < f; ++k)
            prototypes.at(c, k) *= inv * spec.class_prototype_scale;
    }

    GeneratedDataset ds;
    for (int c = 0; c < a; ++c) ds.class_names.push_back("action_" + std::to_string(c));

    const std::vector<double> pi = stationary_distribution(transitions);
    const double drift_amp = spec.drift_amplitude * spec.noise_sigma;

    for (int vid = 0; vid < spec.num_videos; ++vid) {
        Rng vr = root.derive("video", static_cast<uint64_t>(vid));

        // Label track: Markov chain over classes, geometric dwell per segment.
        std::vector<int> labels(spec.frames_per_video);
        int state = sample_categorical(pi.data(), a, vr);
        int t = 0;
        while (t < spec.frames_per_video) {
            const int dwell = sample_dwell(spec.mean_segment_length, vr);
            for (int d = 0; d < dwell && t < spec.frames_per_video; ++d) labels[t++] = state;
            state = sample_categorical(transitions.row(state), a, vr);
        }

        // Per-dimension drift phases, shared across classes within the video.
        std::vector<double> phase(f);
        for (int k = 0; k < f; ++k) phase[k] = vr.uniform() * kTwoPi;

        MatD features(spec.frames_per_video, f);
        for (int fr = 0; fr < spec.frames_per_video; ++fr) {
            const double* proto = prototypes.row(labels[fr]);
            for (int k = 0; k < f; ++k) {
                double x = proto[k];
                if (drift_amp > 0.0)
                    x += drift_amp * std::sin(kTwoPi * fr / spec.drift_period + phase[k]);
                if (spec.noise_sigma > 0.0) x += spec.noise_sigma * vr.normal();
                features.at(fr, k) = x;
            }
        }

        char name[32];
        std::snprintf(name, sizeof(name), "video_%04d", vid);
        ds.videos.push_back(
            FeatureSequence::make(name, std::move(features), std::move(labels), a));
    }
    return ds;
}

void write_dataset(const GeneratedDataset& ds, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    io::write_mapping(out_dir / "mapping.txt", ds.class_names);
    for (const auto& v : ds.videos) {
        io::write_feature_file(out_dir / "features", v.video_id, v.features);
        io::write_label_file(out_dir / "groundTruth" / (v.video_id + ".txt"), *v.labels,
                             ds.class_names);
    }
}

DatasetSplit generate_split(const SynthSpec& spec, double labelled_fraction, uint64_t split_seed) {
    GeneratedDataset ds = generate_dataset(spec);
    return make_split(std::move(ds.videos), std::move(ds.class_names), labelled_fraction,
                      split_seed);
}

TrainTest generate_train_test(const SynthSpec& spec, int holdout_videos,
                              double labelled_fraction, uint64_t split_seed) {
    if (holdout_videos < 1 || holdout_videos >= spec.num_videos)
        throw ConfigError("holdout_videos must lie in [1, num_videos)");
    GeneratedDataset ds = generate_dataset(spec);
    std::vector<FeatureSequence> test_videos(
        std::make_move_iterator(ds.videos.end() - holdout_videos),
        std::make_move_iterator(ds.videos.end()));
    ds.videos.erase(ds.videos.end() - holdout_videos, ds.videos.end());

    TrainTest out;
    out.train = make_split(std::move(ds.videos), ds.class_names, labelled_fraction, split_seed);
    out.test = make_split(std::move(test_videos), ds.class_names, 1.0, 0);
    return out;
}

// ----------------------------------------------------------------------------
// Spec JSON
// ----------------------------------------------------------------------------

namespace {
using nlohmann::json;
}

SynthSpec parse_spec_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth spec is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("synth spec root must be a JSON object");

    SynthSpec s;
    const char* known[] = {"num_videos",     "frames_per_video",      "num_classes",
                           "feature_dim",    "class_prototype_scale", "noise_sigma",
                           "mean_segment_length", "transition_matrix", "drift_amplitude",
                           "drift_period",   "seed"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) ok = true;
        if (!ok) throw ConfigError("synth spec field '" + it.key() + "': unknown key");
    }
    try {
        if (j.contains("num_videos")) s.num_videos = j["num_videos"].get<int>();
        if (j.contains("frames_per_video")) s.frames_per_video = j["frames_per_video"].get<int>();
        if (j.contains("num_classes")) s.num_classes = j["num_classes"].get<int>();
        if (j.contains("feature_dim")) s.feature_dim = j["feature_dim"].get<int>();
        if (j.contains("class_prototype_scale"))
            s.class_prototype_scale = j["class_prototype_scale"].get<double>();
        if (j.contains("noise_sigma")) s.noise_sigma = j["noise_sigma"].get<double>();
        if (j.contains("mean_segment_length"))
            s.mean_segment_length = j["mean_segment_length"].get<double>();
        if (j.contains("drift_amplitude")) s.drift_amplitude = j["drift_amplitude"].get<double>();
        if (j.contains("drift_period")) s.drift_period = j["drift_period"].get<double>();
        if (j.contains("seed")) s.seed = j["seed"].get<uint64_t>();
        if (j.contains("transition_matrix")) {
            const auto& rows = j["transition_matrix"];
            MatD p(static_cast<int>(rows.size()),
                   rows.empty() ? 0 : static_cast<int>(rows[0].size()));
            for (int i = 0; i < p.rows; ++i)
                for (int jj = 0; jj < p.cols; ++jj) p.at(i, jj) = rows[i][jj].get<double>();
            s.transition_matrix = std::move(p);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth spec: ") + e.what());
    }
    return validate_spec(s);
}

SynthSpec load_spec_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open synth spec file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_spec_json(ss.str());
}

std::string default_spec_json() {
    SynthSpec s;
    json j;
    j["num_videos"] = s.num_videos;
    j["frames_per_video"] = s.frames_per_video;
    j["num_classes"] = s.num_classes;
    j["feature_dim"] = s.feature_dim;
    j["class_prototype_scale"] = s.class_prototype_scale;
    j["noise_sigma"] = s.noise_sigma;
    j["mean_segment_length"] = s.mean_segment_length;
    j["drift_amplitude"] = s.drift_amplitude;
    j["drift_period"] = s.drift_period;
    j["seed"] = s.seed;
    return j.dump(2);
}

}  // namespace contraseg::synth
