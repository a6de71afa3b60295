// Command-line entry point: dataset synthesis, pretraining, probing,
// semi-supervised training, evaluation, and SVG plot emission.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "contraseg/config.hpp"
#include "contraseg/dataio.hpp"
#include "contraseg/metrics.hpp"
#include "contraseg/svg.hpp"
#include "contraseg/synth.hpp"
#include "contraseg/trainer.hpp"

namespace fs = std::filesystem;
using namespace contraseg;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string data_dir;
    std::string test_data_dir;
    std::string run_name;
    int64_t seed = -1;  // -1: keep config value
    double labelled_fraction = -1.0;
    std::string ablate;
    bool overwrite = false;
};

void add_common_flags(CLI::App* cmd, GlobalOpts& g) {
    cmd->add_option("--config", g.config_path, "experiment config JSON");
    cmd->add_option("--data", g.data_dir, "dataset directory (features/, groundTruth/, mapping.txt)");
    cmd->add_option("--test-data", g.test_data_dir, "held-out dataset directory for metrics");
    cmd->add_option("--run", g.run_name, "run name; artifacts land in runs/<name>/");
    cmd->add_option("--seed", g.seed, "rng seed override");
    cmd->add_option("--labelled-fraction", g.labelled_fraction, "labelled video fraction override");
    cmd->add_option("--ablate", g.ablate,
                    "one of: no-nca, no-dynamic-clustering, no-aa, no-pp, no-ap-neg, supervised-only")
        ->check(CLI::IsMember({"", "no-nca", "no-dynamic-clustering", "no-aa", "no-pp",
                               "no-ap-neg", "supervised-only"}));
    cmd->add_flag("--overwrite", g.overwrite, "allow clobbering existing outputs");
}

ExperimentConfig resolve_config(const GlobalOpts& g) {
    ExperimentConfig cfg;
    if (!g.config_path.empty()) cfg = load_config_file(g.config_path);
    if (g.seed >= 0) cfg.rng_seed = static_cast<uint64_t>(g.seed);
    if (g.labelled_fraction > 0.0) cfg.labelled_fraction = g.labelled_fraction;

    if (g.ablate == "no-nca") cfg.w_nca = 0.0;
    else if (g.ablate == "no-aa") cfg.w_aa_n = 0.0;
    else if (g.ablate == "no-pp") cfg.w_pp_n = 0.0;
    else if (g.ablate == "no-ap-neg") cfg.w_ap_n = 0.0;
    else if (g.ablate == "no-dynamic-clustering") cfg.dynamic_clustering = false;
    else if (g.ablate == "supervised-only") cfg.supervised_only = true;

    return validate_config(cfg);
}

fs::path prepare_run_dir(const GlobalOpts& g) {
    if (g.run_name.empty()) throw ConfigError("--run NAME is required for this subcommand");
    const fs::path dir = fs::path("runs") / g.run_name;
    if (fs::exists(dir)) {
        if (!g.overwrite)
            throw DataError("run directory exists: " + dir.string() + " (use --overwrite)");
        fs::remove_all(dir);
    }
    fs::create_directories(dir);
    return dir;
}

void write_manifest(const fs::path& run_dir, const GlobalOpts& g, const ExperimentConfig& cfg,
                    const std::vector<std::pair<std::string, std::string>>& artifacts) {
    nlohmann::json j;
    j["run"] = g.run_name;
    j["config_path"] = g.config_path;
    j["config_hash"] = g.config_path.empty() ? hash_bytes_hex(config_to_json(cfg))
                                             : hash_file_hex(g.config_path);
    j["dataset_root"] = g.data_dir;
    j["test_dataset_root"] = g.test_data_dir;
    const auto stamp = std::chrono::system_clock::now().time_since_epoch();
    j["launched_unix_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(stamp).count();
    nlohmann::json arts = nlohmann::json::object();
    for (const auto& [k, v] : artifacts) arts[k] = v;
    j["artifacts"] = arts;
    std::ofstream out(run_dir / "manifest.json");
    out << j.dump(2) << "\n";
    std::ofstream cfg_out(run_dir / "config.json");
    cfg_out << config_to_json(cfg) << "\n";
}

DatasetSplit load_train(const GlobalOpts& g, const ExperimentConfig& cfg) {
    if (g.data_dir.empty()) throw ConfigError("--data DIR is required for this subcommand");
    return io::load_dataset(g.data_dir, cfg.labelled_fraction, cfg.rng_seed);
}

std::optional<DatasetSplit> load_test(const GlobalOpts& g) {
    if (g.test_data_dir.empty()) return std::nullopt;
    return io::load_dataset(g.test_data_dir, 1.0, 0);
}

// ----------------------------------------------------------------------------
// Subcommands
// ----------------------------------------------------------------------------

int cmd_synth(const std::string& spec_path, const std::string& out_dir, int holdout,
              const std::string& holdout_dir, const GlobalOpts& g) {
    synth::SynthSpec spec =
        spec_path.empty() ? synth::parse_spec_json(synth::default_spec_json())
                          : synth::load_spec_file(spec_path);
    if (g.seed >= 0) spec.seed = static_cast<uint64_t>(g.seed);
    if (holdout > 0 && holdout_dir.empty())
        throw ConfigError("--holdout requires --holdout-out DIR");

    auto prepare = [&](const fs::path& dir) {
        if (fs::exists(dir) && !fs::is_empty(dir)) {
            if (!g.overwrite)
                throw DataError("output directory exists: " + dir.string() + " (use --overwrite)");
            fs::remove_all(dir);
        }
    };
    const fs::path out(out_dir);
    prepare(out);

    synth::GeneratedDataset ds = synth::generate_dataset(spec);
    if (holdout > 0) {
        if (holdout >= spec.num_videos)
            throw ConfigError("--holdout must be smaller than num_videos");
        const fs::path hold_out(holdout_dir);
        prepare(hold_out);
        synth::GeneratedDataset test;
        test.class_names = ds.class_names;
        test.videos.assign(std::make_move_iterator(ds.videos.end() - holdout),
                           std::make_move_iterator(ds.videos.end()));
        ds.videos.erase(ds.videos.end() - holdout, ds.videos.end());
        synth::write_dataset(test, hold_out);
        std::cout << "wrote " << holdout << " held-out videos to " << hold_out.string() << "\n";
    }
    synth::write_dataset(ds, out);
    std::cout << "wrote synthetic dataset to " << out.string() << "\n";
    return 0;
}

int cmd_pretrain(const GlobalOpts& g) {
    const ExperimentConfig cfg = resolve_config(g);
    const DatasetSplit train_split = load_train(g, cfg);
    const auto test_split = load_test(g);
    const fs::path run_dir = prepare_run_dir(g);
    write_manifest(run_dir, g, cfg,
                   {{"log", (run_dir / "log.csv").string()},
                    {"checkpoint", (run_dir / "ckpt_pretrain_0.bin").string()}});
    const train::RunResult res =
        train::run_pretrain_only(train_split, test_split ? &*test_split : nullptr, cfg, &run_dir);
    std::cout << "pretrain done; probe acc on labelled set " << res.best_probe_acc << "\n";
    return 0;
}

int cmd_train(const GlobalOpts& g) {
    const ExperimentConfig cfg = resolve_config(g);
    const DatasetSplit train_split = load_train(g, cfg);
    const auto test_split = load_test(g);
    const fs::path run_dir = prepare_run_dir(g);
    write_manifest(run_dir, g, cfg, {{"log", (run_dir / "log.csv").string()}});
    const train::RunResult res =
        train::run_semi_supervised(train_split, test_split ? &*test_split : nullptr, cfg, &run_dir);
    const auto& m = res.final_metrics;
    std::cout << "train done; final test metrics: acc " << m.acc << " edit " << m.edit << " f1@10 "
              << m.f1_10 << " f1@25 " << m.f1_25 << " f1@50 " << m.f1_50 << "\n";
    return 0;
}

template <class S>
train::ProbeResult probe_with(const ExperimentConfig& cfg, const DatasetSplit& train_split,
                              const DatasetSplit* test_split, const std::string& ckpt_path) {
    train::Trainer<S> trainer(cfg, train_split, test_split);
    if (!ckpt_path.empty()) trainer.load_checkpoint(ckpt_path);
    return trainer.linear_probe();
}

int cmd_probe(const std::string& ckpt_path, const GlobalOpts& g) {
    const ExperimentConfig cfg = resolve_config(g);
    const DatasetSplit train_split = load_train(g, cfg);
    const auto test_split = load_test(g);
    const DatasetSplit* test = test_split ? &*test_split : nullptr;

    const train::ProbeResult res = cfg.precision == "float32"
                                       ? probe_with<float>(cfg, train_split, test, ckpt_path)
                                       : probe_with<double>(cfg, train_split, test, ckpt_path);
    std::cout << "probe labelled-set acc: " << res.labelled_acc << "\n";
    if (test_split) {
        const auto& m = res.test_metrics;
        std::cout << "probe test metrics: acc " << m.acc << " edit " << m.edit << " f1@10 "
                  << m.f1_10 << " f1@25 " << m.f1_25 << " f1@50 " << m.f1_50 << "\n";
    }
    return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& out_csv) {
    const fs::path gt_root(gt_dir);
    const fs::path mapping = gt_root / "mapping.txt";
    std::vector<std::string> class_names = io::read_mapping(
        fs::exists(mapping) ? mapping : gt_root.parent_path() / "mapping.txt");

    const fs::path gt_labels_dir =
        fs::is_directory(gt_root / "groundTruth") ? gt_root / "groundTruth" : gt_root;

    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(gt_labels_dir))
        if (entry.path().extension() == ".txt") ids.push_back(entry.path().stem().string());
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw DataError("no ground-truth label files under " + gt_labels_dir.string());

    std::ostringstream csv;
    csv << "video,acc,edit,f1_10,f1_25,f1_50\n";
    std::vector<metrics::MetricReport> rows;
    for (const auto& id : ids) {
        const std::vector<int> gt = io::read_label_file(gt_labels_dir / (id + ".txt"), class_names);
        const std::vector<int> pred =
            io::read_label_file(fs::path(pred_dir) / (id + ".txt"), class_names);
        if (pred.size() != gt.size())
            throw DataError("video '" + id + "': prediction has " + std::to_string(pred.size()) +
                            " frames, ground truth " + std::to_string(gt.size()));
        const metrics::MetricReport r = metrics::evaluate_full_resolution(pred, gt);
        rows.push_back(r);
        char line[256];
        std::snprintf(line, sizeof(line), "%s,%.4f,%.4f,%.4f,%.4f,%.4f\n", id.c_str(), r.acc,
                      r.edit, r.f1_10, r.f1_25, r.f1_50);
        csv << line;
    }
    const metrics::MetricReport avg = metrics::average(rows);
    char line[256];
    std::snprintf(line, sizeof(line), "AVERAGE,%.4f,%.4f,%.4f,%.4f,%.4f\n", avg.acc, avg.edit,
                  avg.f1_10, avg.f1_25, avg.f1_50);
    csv << line;

    std::cout << csv.str();
    if (!out_csv.empty()) {
        std::ofstream out(out_csv);
        out << csv.str();
    }
    return 0;
}

int cmd_plot(const std::string& run_name, const std::string& pred_dir, const std::string& gt_dir,
             const std::string& out_dir_s, bool overwrite) {
    const fs::path out_dir = out_dir_s.empty() ? fs::path("plots") : fs::path(out_dir_s);
    fs::create_directories(out_dir);

    if (!run_name.empty()) {
        const fs::path log_path = fs::path("runs") / run_name / "log.csv";
        std::ifstream in(log_path);
        if (!in) throw DataError("missing log: " + log_path.string());
        std::string line;
        std::getline(in, line);  // header
        svg::Series loss{"l_total", {}}, acc{"acc", {}};
        while (std::getline(in, line)) {
            std::istringstream ss(line);
            std::string cell;
            std::vector<std::string> cells;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            if (cells.size() < 16 || cells[0] == "final") continue;
            loss.values.push_back(std::stod(cells[3]));
            acc.values.push_back(std::stod(cells[10]));
        }
        const fs::path out_path = out_dir / (run_name + "_curve.svg");
        if (fs::exists(out_path) && !overwrite)
            throw DataError("plot exists: " + out_path.string() + " (use --overwrite)");
        std::ofstream out(out_path);
        out << svg::curve_svg({loss, acc}, run_name);
        std::cout << "wrote " << out_path.string() << "\n";
        return 0;
    }

    if (pred_dir.empty() || gt_dir.empty())
        throw ConfigError("plot needs either --run NAME or both --pred DIR and --gt DIR");

    const fs::path gt_root(gt_dir);
    std::vector<std::string> class_names = io::read_mapping(
        fs::exists(gt_root / "mapping.txt") ? gt_root / "mapping.txt"
                                            : gt_root.parent_path() / "mapping.txt");
    const fs::path gt_labels_dir =
        fs::is_directory(gt_root / "groundTruth") ? gt_root / "groundTruth" : gt_root;
    for (const auto& entry : fs::directory_iterator(gt_labels_dir)) {
        if (entry.path().extension() != ".txt") continue;
        const std::string id = entry.path().stem().string();
        const std::vector<int> gt = io::read_label_file(entry.path(), class_names);
        const std::vector<int> pred =
            io::read_label_file(fs::path(pred_dir) / (id + ".txt"), class_names);
        const fs::path out_path = out_dir / (id + "_timeline.svg");
        if (fs::exists(out_path) && !overwrite)
            throw DataError("plot exists: " + out_path.string() + " (use --overwrite)");
        std::ofstream out(out_path);
        out << svg::timeline_svg(gt, pred, id);
    }
    std::cout << "wrote timelines to " << out_dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contrastive temporal segmentation pipeline"};
    app.require_subcommand(1);

    GlobalOpts g;

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string spec_path, out_dir, holdout_dir;
    int holdout = 0;
    synth_cmd->add_option("--spec", spec_path, "synth spec JSON (defaults built in)");
    synth_cmd->add_option("--out", out_dir, "output dataset directory")->required();
    synth_cmd->add_option("--holdout", holdout, "hold out the last N videos as a test set");
    synth_cmd->add_option("--holdout-out", holdout_dir, "directory for the held-out videos");
    add_common_flags(synth_cmd, g);

    auto* pretrain_cmd = app.add_subcommand("pretrain", "unsupervised representation learning");
    add_common_flags(pretrain_cmd, g);

    auto* train_cmd = app.add_subcommand("train", "full semi-supervised schedule");
    add_common_flags(train_cmd, g);

    auto* probe_cmd = app.add_subcommand("probe", "linear probe of a checkpoint");
    std::string ckpt_path;
    probe_cmd->add_option("--checkpoint", ckpt_path, "checkpoint to load");
    add_common_flags(probe_cmd, g);

    auto* eval_cmd = app.add_subcommand("eval", "score predictions against ground truth");
    std::string pred_dir, gt_dir, out_csv;
    eval_cmd->add_option("--pred", pred_dir, "directory of prediction .txt files")->required();
    eval_cmd->add_option("--gt", gt_dir, "dataset dir or groundTruth dir")->required();
    eval_cmd->add_option("--out", out_csv, "also write the CSV here");
    add_common_flags(eval_cmd, g);

    auto* plot_cmd = app.add_subcommand("plot", "emit SVG timelines or training curves");
    std::string plot_pred, plot_gt, plot_out;
    plot_cmd->add_option("--pred", plot_pred, "prediction directory (timelines)");
    plot_cmd->add_option("--gt", plot_gt, "ground-truth directory (timelines)");
    plot_cmd->add_option("--out", plot_out, "output directory (default plots/)");
    add_common_flags(plot_cmd, g);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(spec_path, out_dir, holdout, holdout_dir, g);
        if (pretrain_cmd->parsed()) return cmd_pretrain(g);
        if (train_cmd->parsed()) return cmd_train(g);
        if (probe_cmd->parsed()) return cmd_probe(ckpt_path, g);
        if (eval_cmd->parsed()) return cmd_eval(pred_dir, gt_dir, out_csv);
        if (plot_cmd->parsed()) return cmd_plot(g.run_name, plot_pred, plot_gt, plot_out, g.overwrite);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
