#include "contraseg/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace contraseg {

namespace {

void require(bool ok, const std::string& field, const std::string& detail) {
    if (!ok) throw ConfigError("config field '" + field + "': " + detail);
}

template <class T>
std::string str(T v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

ExperimentConfig validate_config(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;

    require(c.feature_dim >= 1, "feature_dim", "value " + str(c.feature_dim) + " violates >= 1");
    require(c.embedding_dim >= 1, "embedding_dim", "value " + str(c.embedding_dim) + " violates >= 1");
    require(c.downsample_length >= 1, "downsample_length",
            "value " + str(c.downsample_length) + " violates >= 1");
    require(c.frames_per_video >= 1, "frames_per_video",
            "value " + str(c.frames_per_video) + " violates >= 1");
    require(c.frames_per_video <= c.downsample_length, "frames_per_video",
            "value " + str(c.frames_per_video) + " violates T_s <= T (T = " +
                str(c.downsample_length) + ")");
    require(c.batch_videos >= 1, "batch_videos", "value " + str(c.batch_videos) + " violates >= 1");

    require(c.scale_factor > 0.0 && c.scale_factor <= 1.0, "scale_factor",
            "value " + str(c.scale_factor) + " violates (0, 1]");
    require(c.temperature > 0.0, "temperature", "value " + str(c.temperature) + " violates > 0");
    require(c.num_clusters == 0 || c.num_clusters >= 2, "num_clusters",
            "value " + str(c.num_clusters) + " violates k >= 2 (or 0 for auto)");

    require(c.nca_window % 2 == 0, "nca_window",
            "value " + str(c.nca_window) + " violates even parity");
    require(c.nca_window >= 2, "nca_window", "value " + str(c.nca_window) + " violates >= 2");
    require(c.nca_window < c.downsample_length, "nca_window",
            "value " + str(c.nca_window) + " violates W < T (T = " + str(c.downsample_length) + ")");
    require(c.nca_anchors >= 1, "nca_anchors", "value " + str(c.nca_anchors) + " violates K >= 1");
    require(c.nca_partners >= 1, "nca_partners", "value " + str(c.nca_partners) + " violates M >= 1");

    require(c.iterations >= 1, "iterations", "value " + str(c.iterations) + " violates >= 1");
    require(c.epochs_pretrain >= 0, "epochs_pretrain",
            "value " + str(c.epochs_pretrain) + " violates >= 0");
    require(c.epochs_stage1 >= 0, "epochs_stage1", "value " + str(c.epochs_stage1) + " violates >= 0");
    require(c.epochs_stage2 >= 0, "epochs_stage2", "value " + str(c.epochs_stage2) + " violates >= 0");
    require(c.probe_steps >= 1, "probe_steps", "value " + str(c.probe_steps) + " violates >= 1");
    require(c.eval_every >= 1, "eval_every", "value " + str(c.eval_every) + " violates >= 1");

    for (auto [v, name] : {std::pair<double, const char*>{c.lr_ts, "lr_ts"},
                           {c.lr_c, "lr_c"},
                           {c.lr_tgs, "lr_tgs"}})
        require(v > 0.0, name, "value " + str(v) + " violates > 0");
    for (auto [v, name] : {std::pair<double, const char*>{c.wd_ts, "wd_ts"},
                           {c.wd_c, "wd_c"},
                           {c.wd_tgs, "wd_tgs"}})
        require(v >= 0.0, name, "value " + str(v) + " violates >= 0");
    for (auto [v, name] : {std::pair<double, const char*>{c.w_ap_p, "w_ap_p"},
                           {c.w_ap_n, "w_ap_n"},
                           {c.w_aa_n, "w_aa_n"},
                           {c.w_pp_n, "w_pp_n"},
                           {c.w_nca, "w_nca"},
                           {c.w_ce, "w_ce"}})
        require(v >= 0.0, name, "value " + str(v) + " violates >= 0");

    require(c.encoder_depth >= 1, "encoder_depth", "value " + str(c.encoder_depth) + " violates >= 1");
    require(c.encoder_hidden >= 1, "encoder_hidden",
            "value " + str(c.encoder_hidden) + " violates >= 1");
    require(c.semantic_hidden >= 1, "semantic_hidden",
            "value " + str(c.semantic_hidden) + " violates >= 1");
    require(c.semantic_layers >= 1, "semantic_layers",
            "value " + str(c.semantic_layers) + " violates >= 1");
    require(c.scorer_hidden >= 1, "scorer_hidden", "value " + str(c.scorer_hidden) + " violates >= 1");

    require(c.labelled_fraction > 0.0 && c.labelled_fraction <= 1.0, "labelled_fraction",
            "value " + str(c.labelled_fraction) + " violates (0, 1]");
    require(c.pl_confidence_threshold >= 0.0 && c.pl_confidence_threshold < 1.0,
            "pl_confidence_threshold",
            "value " + str(c.pl_confidence_threshold) + " violates [0, 1)");

    require(c.precision == "float64" || c.precision == "float32", "precision",
            "value '" + c.precision + "' is not one of float64|float32");

    return c;
}

namespace {

using nlohmann::json;

struct FieldBinder {
    json j;
    std::vector<std::string> seen;

    template <class T>
    void bind(const char* name, T& field) {
        seen.emplace_back(name);
        if (!j.contains(name)) return;
        try {
            field = j.at(name).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config field '") + name + "': " + e.what());
        }
    }

    void check_unknown() const {
        for (auto it = j.begin(); it != j.end(); ++it) {
            bool known = false;
            for (const auto& s : seen)
                if (s == it.key()) {
                    known = true;
                    break;
                }
            if (!known) throw ConfigError("config field '" + it.key() + "': unknown key");
        }
    }
};

void bind_all(FieldBinder& b, ExperimentConfig& c) {
    b.bind("feature_dim", c.feature_dim);
    b.bind("embedding_dim", c.embedding_dim);
    b.bind("downsample_length", c.downsample_length);
    b.bind("frames_per_video", c.frames_per_video);
    b.bind("batch_videos", c.batch_videos);
    b.bind("scale_factor", c.scale_factor);
    b.bind("temperature", c.temperature);
    b.bind("num_clusters", c.num_clusters);
    b.bind("dynamic_clustering", c.dynamic_clustering);
    b.bind("normalize_embeddings", c.normalize_embeddings);
    b.bind("nca_window", c.nca_window);
    b.bind("nca_anchors", c.nca_anchors);
    b.bind("nca_partners", c.nca_partners);
    b.bind("iterations", c.iterations);
    b.bind("epochs_pretrain", c.epochs_pretrain);
    b.bind("epochs_stage1", c.epochs_stage1);
    b.bind("epochs_stage2", c.epochs_stage2);
    b.bind("probe_steps", c.probe_steps);
    b.bind("eval_every", c.eval_every);
    b.bind("lr_ts", c.lr_ts);
    b.bind("lr_c", c.lr_c);
    b.bind("lr_tgs", c.lr_tgs);
    b.bind("wd_ts", c.wd_ts);
    b.bind("wd_c", c.wd_c);
    b.bind("wd_tgs", c.wd_tgs);
    b.bind("w_ap_p", c.w_ap_p);
    b.bind("w_ap_n", c.w_ap_n);
    b.bind("w_aa_n", c.w_aa_n);
    b.bind("w_pp_n", c.w_pp_n);
    b.bind("w_nca", c.w_nca);
    b.bind("w_ce", c.w_ce);
    b.bind("encoder_depth", c.encoder_depth);
    b.bind("encoder_hidden", c.encoder_hidden);
    b.bind("semantic_hidden", c.semantic_hidden);
    b.bind("semantic_layers", c.semantic_layers);
    b.bind("scorer_hidden", c.scorer_hidden);
    b.bind("labelled_fraction", c.labelled_fraction);
    b.bind("pl_confidence_threshold", c.pl_confidence_threshold);
    b.bind("supervised_only", c.supervised_only);
    b.bind("rng_seed", c.rng_seed);
    b.bind("precision", c.precision);
    b.bind("log_timing", c.log_timing);
}

}  // namespace

ExperimentConfig parse_config_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");

    ExperimentConfig c;
    FieldBinder b{j, {}};
    bind_all(b, c);
    b.check_unknown();
    return validate_config(c);
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_json(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["feature_dim"] = c.feature_dim;
    j["embedding_dim"] = c.embedding_dim;
    j["downsample_length"] = c.downsample_length;
    j["frames_per_video"] = c.frames_per_video;
    j["batch_videos"] = c.batch_videos;
    j["scale_factor"] = c.scale_factor;
    j["temperature"] = c.temperature;
    j["num_clusters"] = c.num_clusters;
    j["dynamic_clustering"] = c.dynamic_clustering;
    j["normalize_embeddings"] = c.normalize_embeddings;
    j["nca_window"] = c.nca_window;
    j["nca_anchors"] = c.nca_anchors;
    j["nca_partners"] = c.nca_partners;
    j["iterations"] = c.iterations;
    j["epochs_pretrain"] = c.epochs_pretrain;
    j["epochs_stage1"] = c.epochs_stage1;
    j["epochs_stage2"] = c.epochs_stage2;
    j["probe_steps"] = c.probe_steps;
    j["eval_every"] = c.eval_every;
    j["lr_ts"] = c.lr_ts;
    j["lr_c"] = c.lr_c;
    j["lr_tgs"] = c.lr_tgs;
    j["wd_ts"] = c.wd_ts;
    j["wd_c"] = c.wd_c;
    j["wd_tgs"] = c.wd_tgs;
    j["w_ap_p"] = c.w_ap_p;
    j["w_ap_n"] = c.w_ap_n;
    j["w_aa_n"] = c.w_aa_n;
    j["w_pp_n"] = c.w_pp_n;
    j["w_nca"] = c.w_nca;
    j["w_ce"] = c.w_ce;
    j["encoder_depth"] = c.encoder_depth;
    j["encoder_hidden"] = c.encoder_hidden;
    j["semantic_hidden"] = c.semantic_hidden;
    j["semantic_layers"] = c.semantic_layers;
    j["scorer_hidden"] = c.scorer_hidden;
    j["labelled_fraction"] = c.labelled_fraction;
    j["pl_confidence_threshold"] = c.pl_confidence_threshold;
    j["supervised_only"] = c.supervised_only;
    j["rng_seed"] = c.rng_seed;
    j["precision"] = c.precision;
    j["log_timing"] = c.log_timing;
    return j.dump(2);
}

std::string hash_bytes_hex(const std::string& bytes) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::string hash_file_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for hashing: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return hash_bytes_hex(ss.str());
}

}  // namespace contraseg
