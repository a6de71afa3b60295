#include "contraseg/trainer.hpp"

#include <cstdio>

namespace contraseg::train {

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

RunLogger::RunLogger(const std::filesystem::path& run_dir, bool log_timing)
    : log_timing_(log_timing) {
    std::filesystem::create_directories(run_dir);
    log_.open(run_dir / "log.csv");
    if (!log_) throw DataError("cannot open " + (run_dir / "log.csv").string());
    log_ << "phase,iter,epoch,l_total,l_ap_p,l_ap_n,l_aa_n,l_pp_n,l_nca,l_ce,"
            "acc,edit,f1_10,f1_25,f1_50,seconds\n";
    steps_.open(run_dir / "steps.csv");
    if (!steps_) throw DataError("cannot open " + (run_dir / "steps.csv").string());
    steps_ << "step,loss_total,l_ap_p,l_ap_n,l_aa_n,l_pp_n\n";
}

void RunLogger::epoch_row(const PhaseReport& r) {
    char seconds[32];
    std::snprintf(seconds, sizeof(seconds), "%.3f", log_timing_ ? r.seconds : 0.0);
    log_ << r.phase << "," << r.iteration << "," << r.epoch << "," << fixed6(r.l_total) << ","
         << fixed6(r.l_ap_p) << "," << fixed6(r.l_ap_n) << "," << fixed6(r.l_aa_n) << ","
         << fixed6(r.l_pp_n) << "," << fixed6(r.l_nca) << "," << fixed6(r.l_ce) << ","
         << fixed6(r.eval.acc) << "," << fixed6(r.eval.edit) << "," << fixed6(r.eval.f1_10) << ","
         << fixed6(r.eval.f1_25) << "," << fixed6(r.eval.f1_50) << "," << seconds << "\n";
    log_.flush();
}

void RunLogger::step_row(int64_t step, double total, double ap_p, double ap_n, double aa_n,
                         double pp_n) {
    steps_ << step << "," << fixed6(total) << "," << fixed6(ap_p) << "," << fixed6(ap_n) << ","
           << fixed6(aa_n) << "," << fixed6(pp_n) << "\n";
}

namespace {

template <class S>
RunResult run_full(const DatasetSplit& train_split, const DatasetSplit* test_split,
                   const ExperimentConfig& cfg, const std::filesystem::path* run_dir) {
    std::optional<RunLogger> logger;
    if (run_dir) logger.emplace(*run_dir, cfg.log_timing);
    Trainer<S> trainer(cfg, train_split, test_split, logger ? &*logger : nullptr);
    if (run_dir) trainer.set_run_dir(*run_dir);
    RunResult result = trainer.run();

    if (run_dir) {
        // Final predictions in the groundTruth text format, ready for the
        // eval and plot subcommands.
        const DatasetSplit& target = test_split ? *test_split : train_split;
        const auto preds = trainer.predict_split(target);
        for (const auto& [id, labels] : preds)
            io::write_label_file(*run_dir / "predictions" / (id + ".txt"), labels,
                                 target.class_names);
    }
    return result;
}

template <class S>
RunResult run_pretrain(const DatasetSplit& train_split, const DatasetSplit* test_split,
                       const ExperimentConfig& cfg, const std::filesystem::path* run_dir) {
    std::optional<RunLogger> logger;
    if (run_dir) logger.emplace(*run_dir, cfg.log_timing);
    Trainer<S> trainer(cfg, train_split, test_split, logger ? &*logger : nullptr);
    trainer.pretrain();
    if (run_dir) trainer.save_checkpoint(*run_dir / "ckpt_pretrain_0.bin", "pretrain", 0, 0);

    RunResult result;
    const ProbeResult probe = trainer.linear_probe();
    result.best_probe_acc = probe.labelled_acc;
    result.final_metrics = probe.test_metrics;
    result.reports = trainer.reports();
    return result;
}

}  // namespace

RunResult run_semi_supervised(const DatasetSplit& train_split, const DatasetSplit* test_split,
                              const ExperimentConfig& cfg,
                              const std::filesystem::path* run_dir) {
    const ExperimentConfig c = validate_config(cfg);
    if (c.precision == "float32") return run_full<float>(train_split, test_split, c, run_dir);
    return run_full<double>(train_split, test_split, c, run_dir);
}

RunResult run_pretrain_only(const DatasetSplit& train_split, const DatasetSplit* test_split,
                            const ExperimentConfig& cfg, const std::filesystem::path* run_dir) {
    const ExperimentConfig c = validate_config(cfg);
    if (c.precision == "float32") return run_pretrain<float>(train_split, test_split, c, run_dir);
    return run_pretrain<double>(train_split, test_split, c, run_dir);
}

}  // namespace contraseg::train
