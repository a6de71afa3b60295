// Training orchestration: unsupervised pretraining of the temporal/semantic
// pair with linear-probe model selection, then iterated two-stage
// semi-supervised training with pseudo-label refresh between the stages.

#pragma once

#include <chrono>
#include <limits>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "contraseg/checkpoint.hpp"
#include "contraseg/config.hpp"
#include "contraseg/consistency.hpp"
#include "contraseg/contrast.hpp"
#include "contraseg/dataio.hpp"
#include "contraseg/metrics.hpp"
#include "contraseg/models.hpp"
#include "contraseg/types.hpp"

namespace contraseg::train {

struct PhaseReport {
    std::string phase;  // pretrain | stage1 | stage2 | probe | final
    int iteration = 0;
    int epoch = 0;
    double l_total = 0, l_ap_p = 0, l_ap_n = 0, l_aa_n = 0, l_pp_n = 0, l_nca = 0, l_ce = 0;
    metrics::MetricReport eval;
    double seconds = 0.0;
};

struct PseudoLabelStore {
    std::map<std::string, std::vector<int>> labels;       // coarse resolution; -1 = filtered
    std::map<std::string, std::vector<double>> confidence;  // per-frame max softmax

    bool has(const std::string& id) const { return labels.count(id) > 0; }
    bool empty() const { return labels.empty(); }
};

struct ProbeResult {
    metrics::MetricReport test_metrics;
    double labelled_acc = 0.0;  // frame accuracy on held-out labelled frames
    double labelled_ce = 0.0;   // cross-entropy on the same frames (selection signal)
};

struct RunResult {
    std::vector<PhaseReport> reports;
    metrics::MetricReport final_metrics;
    double best_probe_acc = 0.0;
};

// CSV sinks for the per-epoch log and the per-step loss components.
class RunLogger {
public:
    RunLogger(const std::filesystem::path& run_dir, bool log_timing);
    void epoch_row(const PhaseReport& r);
    void step_row(int64_t step, double total, double ap_p, double ap_n, double aa_n, double pp_n);

private:
    std::ofstream log_;
    std::ofstream steps_;
    bool log_timing_;
};

// ============================================================================
// Loss helpers shared by trainer, probe, and tests
// ============================================================================

// Per-frame softmax cross-entropy over [rows x classes] logits; labels of -1
// are skipped. Gradient of (weight * mean CE) is added into dlogits.
template <class S>
double cross_entropy_grad(const Matrix<S>& logits, const std::vector<int>& labels, double weight,
                          Matrix<S>* dlogits) {
    const int a = logits.cols;
    int64_t valid = 0;
    for (int y : labels)
        if (y >= 0) ++valid;
    if (valid == 0) return 0.0;

    double loss = 0.0;
    for (int r = 0; r < logits.rows; ++r) {
        const int y = labels[r];
        if (y < 0) continue;
        const S* z = logits.row(r);
        double max_z = static_cast<double>(z[0]);
        for (int c = 1; c < a; ++c) max_z = std::max(max_z, static_cast<double>(z[c]));
        double denom = 0.0;
        for (int c = 0; c < a; ++c) denom += std::exp(static_cast<double>(z[c]) - max_z);
        const double lse = max_z + std::log(denom);
        loss += lse - static_cast<double>(z[y]);
        if (dlogits) {
            const double coeff = weight / static_cast<double>(valid);
            for (int c = 0; c < a; ++c) {
                const double p = std::exp(static_cast<double>(z[c]) - lse);
                dlogits->at(r, c) += static_cast<S>(coeff * (p - (c == y ? 1.0 : 0.0)));
            }
        }
    }
    return loss / static_cast<double>(valid);
}

template <class S>
double cross_entropy(const Matrix<S>& logits, const std::vector<int>& labels) {
    return cross_entropy_grad<S>(logits, labels, 0.0, nullptr);
}

// Per-frame argmax; ties break toward the lower class id.
template <class S>
std::vector<int> argmax_rows(const Matrix<S>& logits) {
    std::vector<int> out(logits.rows);
    for (int r = 0; r < logits.rows; ++r) {
        const S* z = logits.row(r);
        int best = 0;
        for (int c = 1; c < logits.cols; ++c)
            if (z[c] > z[best]) best = c;
        out[r] = best;
    }
    return out;
}

// Max softmax probability per row.
template <class S>
std::vector<double> max_softmax_rows(const Matrix<S>& logits) {
    std::vector<double> out(logits.rows);
    for (int r = 0; r < logits.rows; ++r) {
        const S* z = logits.row(r);
        double max_z = static_cast<double>(z[0]);
        for (int c = 1; c < logits.cols; ++c) max_z = std::max(max_z, static_cast<double>(z[c]));
        double denom = 0.0;
        for (int c = 0; c < logits.cols; ++c)
            denom += std::exp(static_cast<double>(z[c]) - max_z);
        out[r] = 1.0 / denom;
    }
    return out;
}

// ============================================================================
// Model state: the four networks plus counters; checkpointable
// ============================================================================
template <class S>
struct ModelState {
    nn::TemporalEncoder<S> temporal;
    nn::SemanticEncoder<S> semantic;
    nn::ConsistencyScorer<S> scorer;
    nn::FrameClassifier<S> classifier;
    int num_classes = 0;

    void init(const ExperimentConfig& cfg, int classes, const Rng& root) {
        num_classes = classes;
        temporal.init(cfg, root.derive("init-temporal"));
        semantic.init(cfg, root.derive("init-semantic"));
        scorer.init(cfg, root.derive("init-scorer"));
        classifier.init(cfg, classes, root.derive("init-classifier"));
    }

    std::vector<nn::Param<S>*> all_params() {
        std::vector<nn::Param<S>*> out;
        for (auto* p : temporal.params()) out.push_back(p);
        for (auto* p : semantic.params()) out.push_back(p);
        for (auto* p : scorer.params()) out.push_back(p);
        for (auto* p : classifier.params()) out.push_back(p);
        return out;
    }
};

// ============================================================================
// Trainer
// ============================================================================
template <class S>
class Trainer {
public:
    struct PreppedVideo {
        std::string id;
        MatD features;                          // [T x F] downsampled
        std::optional<std::vector<int>> labels; // coarse GT, labelled videos only
        int t_original = 0;
        bool is_labelled = false;
    };

    Trainer(ExperimentConfig cfg, const DatasetSplit& train_split, const DatasetSplit* test_split,
            RunLogger* logger = nullptr)
        : cfg_(validate_config(cfg)),
          root_(cfg_.rng_seed),
          train_(&train_split),
          test_(test_split),
          logger_(logger) {
        num_classes_ = train_split.num_classes;
        k_clusters_ = cfg_.num_clusters > 0 ? cfg_.num_clusters : num_classes_;
        if (k_clusters_ < 2) k_clusters_ = 2;
        prep_videos();
        state_.init(cfg_, num_classes_, root_);
    }

    ModelState<S>& state() { return state_; }
    const std::vector<PhaseReport>& reports() const { return reports_; }
    const PseudoLabelStore& pseudo_labels() const { return pl_; }
    const ExperimentConfig& config() const { return cfg_; }
    int num_labelled() const { return n_labelled_; }

    // Enables checkpoint emission at phase boundaries.
    void set_run_dir(std::filesystem::path dir) { run_dir_ = std::move(dir); }

    void save_checkpoint(const std::filesystem::path& path, const std::string& phase,
                         int iteration, int epoch) {
        ckpt::CheckpointMeta meta;
        meta.config_hash = hash_bytes_hex(config_to_json(cfg_));
        meta.seed = cfg_.rng_seed;
        meta.precision = cfg_.precision;
        meta.phase = phase;
        meta.iteration = iteration;
        meta.epoch = epoch;
        meta.best_probe_acc = best_probe_acc_;
        ckpt::save_checkpoint<S>(path, meta, state_.all_params());
    }

    ckpt::CheckpointMeta load_checkpoint(const std::filesystem::path& path) {
        auto params = state_.all_params();
        ckpt::CheckpointMeta meta = ckpt::load_checkpoint<S>(path, params);
        best_probe_acc_ = meta.best_probe_acc;
        return meta;
    }

    // --- full schedule ------------------------------------------------------
    RunResult run() {
        if (cfg_.supervised_only) {
            for (int it = 1; it <= cfg_.iterations; ++it) {
                stage1(it);
                select_best_by_probe(it);
                checkpoint_phase("stage1", it);
            }
        } else {
            pretrain();
            checkpoint_phase("pretrain", 0);
            for (int it = 1; it <= cfg_.iterations; ++it) {
                stage1(it);
                checkpoint_phase("stage1", it);
                refresh_pseudo_labels();
                stage2(it);
                checkpoint_phase("stage2", it);
                select_best_by_probe(it);
            }
        }
        if (best_state_) state_ = *best_state_;

        RunResult result;
        result.final_metrics = evaluate_test(state_.classifier);
        result.best_probe_acc = best_probe_acc_;
        PhaseReport final_row;
        final_row.phase = "final";
        final_row.iteration = cfg_.iterations;
        final_row.eval = result.final_metrics;
        push_report(final_row);
        checkpoint_phase("final", cfg_.iterations);
        result.reports = reports_;
        return result;
    }

    // --- phases ---------------------------------------------------------------

    // Unsupervised contrast over every video; after each epoch a linear probe
    // on the labelled subset selects the best temporal/semantic state.
    // Selection signal: cross-entropy of the probe on held-out labelled
    // frames. Accuracy over the small validation slice quantizes too coarsely
    // to rank nearby states; its CE is continuous and tracks the same error.
    void pretrain() {
        best_pretrain_.reset();
        best_probe_ce_ = std::numeric_limits<double>::infinity();
        if (cfg_.epochs_pretrain == 0) return;
        for (int epoch = 1; epoch <= cfg_.epochs_pretrain; ++epoch) {
            const auto t0 = now();
            PhaseReport r = run_epoch("pretrain", 0, epoch, all_indices(), Mode::kPretrain);
            const bool with_test = epoch % cfg_.eval_every == 0;
            const ProbeResult probe = linear_probe(epoch, with_test);
            if (probe.labelled_ce <= best_probe_ce_) {
                best_probe_ce_ = probe.labelled_ce;
                best_probe_acc_ = probe.labelled_acc;
                best_pretrain_ = state_;
            }
            if (with_test) last_eval_ = probe.test_metrics;
            r.eval = last_eval_;
            r.seconds = since(t0);
            push_report(r);
        }
        if (best_pretrain_) state_ = *best_pretrain_;
    }

    // Supervised contrast + consistency + cross-entropy on labelled videos.
    void stage1(int iteration) {
        if (labelled_indices().empty()) throw DataError("stage1 requires labelled videos");
        for (int epoch = 1; epoch <= cfg_.epochs_stage1; ++epoch) {
            const auto t0 = now();
            PhaseReport r = run_epoch("stage1", iteration, epoch, labelled_indices(), Mode::kStage1);
            maybe_eval(r, epoch);
            r.seconds = since(t0);
            push_report(r);
        }
    }

    // One bare pretraining epoch without probe selection; the building block
    // the resume test replays around a checkpoint boundary.
    PhaseReport pretrain_epoch(int epoch) {
        PhaseReport r = run_epoch("pretrain", 0, epoch, all_indices(), Mode::kPretrain);
        push_report(r);
        return r;
    }

    // Harness hook: override the pseudo-label store (e.g. oracle labels).
    void set_pseudo_labels(PseudoLabelStore pl) { pl_ = std::move(pl); }

    // Classifier argmax on every unlabelled video, ties toward lower ids.
    void refresh_pseudo_labels() {
        pl_.labels.clear();
        pl_.confidence.clear();
        for (const auto& v : videos_) {
            if (v.is_labelled) continue;
            Matrix<S> emb = embed_video(v);
            Matrix<S> logits = classify(emb);
            std::vector<int> labels = argmax_rows(logits);
            std::vector<double> conf = max_softmax_rows(logits);
            if (cfg_.pl_confidence_threshold > 0.0)
                for (size_t i = 0; i < labels.size(); ++i)
                    if (conf[i] < cfg_.pl_confidence_threshold) labels[i] = -1;
            pl_.labels[v.id] = std::move(labels);
            pl_.confidence[v.id] = std::move(conf);
        }
    }

    // Contrast + consistency over all videos with PL/GT labels; classifier
    // frozen.
    void stage2(int iteration) {
        for (const auto& v : videos_)
            if (!v.is_labelled && !pl_.has(v.id))
                throw DataError("stage2 requires pseudo-labels for video '" + v.id + "'");
        for (int epoch = 1; epoch <= cfg_.epochs_stage2; ++epoch) {
            const auto t0 = now();
            PhaseReport r = run_epoch("stage2", iteration, epoch, all_indices(), Mode::kStage2);
            maybe_eval(r, epoch);
            r.seconds = since(t0);
            push_report(r);
        }
    }

    // --- evaluation -----------------------------------------------------------

    // Fresh linear classifier on frozen temporal embeddings of the labelled
    // videos; metric suite on the test split when one is attached. The
    // labelled-set accuracy is measured on held-out (odd-indexed) frames the
    // probe was not fit on, so it can drive model selection.
    ProbeResult linear_probe(int salt = 0, bool with_test_metrics = true) {
        ProbeResult out;
        Matrix<S> emb;
        std::vector<int> labels;
        collect_labelled_embeddings(emb, labels);

        const int rows = emb.rows;
        const int fit_rows = (rows + 1) / 2;
        Matrix<S> fit_emb(fit_rows, emb.cols), val_emb(rows - fit_rows, emb.cols);
        std::vector<int> fit_labels, val_labels;
        for (int r = 0; r < rows; ++r) {
            if (r % 2 == 0) {
                std::copy(emb.row(r), emb.row(r) + emb.cols,
                          fit_emb.row(static_cast<int>(fit_labels.size())));
                fit_labels.push_back(labels[r]);
            } else {
                std::copy(emb.row(r), emb.row(r) + emb.cols,
                          val_emb.row(static_cast<int>(val_labels.size())));
                val_labels.push_back(labels[r]);
            }
        }

        nn::Dense<S> probe;
        Rng init = root_.derive("probe-init", static_cast<uint64_t>(salt));
        probe.init("probe", cfg_.embedding_dim, num_classes_, init);
        fit_classifier(probe, fit_emb, fit_labels, cfg_.probe_steps);

        if (val_labels.empty()) {
            Matrix<S> logits = probe.forward(fit_emb, false);
            out.labelled_acc = metrics::frame_accuracy(argmax_rows(logits), fit_labels);
            out.labelled_ce = cross_entropy(logits, fit_labels);
        } else {
            Matrix<S> logits = probe.forward(val_emb, false);
            out.labelled_acc = metrics::frame_accuracy(argmax_rows(logits), val_labels);
            out.labelled_ce = cross_entropy(logits, val_labels);
        }
        if (with_test_metrics) out.test_metrics = evaluate_probe_on_test(probe);
        return out;
    }

    // Evaluate an arbitrary per-frame classifier head on the test split at the
    // original resolution.
    metrics::MetricReport evaluate_test(nn::FrameClassifier<S>& classifier) {
        if (!test_) return {};
        std::vector<metrics::MetricReport> rows;
        for (const auto& v : test_videos_) {
            Matrix<S> emb = embed_matrix(v.features);
            Matrix<S> logits = classifier.forward(nn::unflatten_frames(emb, 1, emb.rows), false)
                                   .video(0);
            rows.push_back(metrics::evaluate(argmax_rows(logits), *v.gt_full));
        }
        return metrics::average(rows);
    }

    // Per-video coarse predictions from the pipeline classifier.
    std::vector<int> predict_video(const MatD& features_down) {
        Matrix<S> emb = embed_matrix(features_down);
        return argmax_rows(classify(emb));
    }

    // Full-resolution predictions for every video of a split (classifier
    // argmax upsampled to the original frame count).
    std::map<std::string, std::vector<int>> predict_split(const DatasetSplit& split) {
        std::map<std::string, std::vector<int>> out;
        auto handle = [&](const FeatureSequence& seq) {
            FeatureSequence tmp;
            tmp.video_id = seq.video_id;
            tmp.features = seq.features;
            DownsampledSequence down = io::downsample(tmp, cfg_.downsample_length);
            out[seq.video_id] =
                io::upsample_predictions(predict_video(down.features), seq.frames());
        };
        for (const auto& seq : split.labelled) handle(seq);
        for (const auto& seq : split.unlabelled) handle(seq);
        return out;
    }

    double labelled_accuracy() {
        Matrix<S> emb;
        std::vector<int> labels;
        collect_labelled_embeddings(emb, labels);
        return metrics::frame_accuracy(argmax_rows(classify(emb)), labels);
    }

private:
    enum class Mode { kPretrain, kStage1, kStage2 };

    // --- data preparation ----------------------------------------------------

    void prep_videos() {
        auto prep = [&](const FeatureSequence& seq, bool is_labelled) {
            FeatureSequence tmp;  // downsample() reads a FeatureSequence
            tmp.video_id = seq.video_id;
            tmp.features = seq.features;
            tmp.labels = seq.labels;
            DownsampledSequence down = io::downsample(tmp, cfg_.downsample_length);
            PreppedVideo v;
            v.id = seq.video_id;
            v.features = std::move(down.features);
            v.labels = std::move(down.labels);
            v.t_original = down.t_original;
            v.is_labelled = is_labelled;
            if (seq.features.cols != cfg_.feature_dim)
                throw DataError("video '" + seq.video_id + "' has " +
                                std::to_string(seq.features.cols) + " feature dims, config says " +
                                std::to_string(cfg_.feature_dim));
            videos_.push_back(std::move(v));
        };
        for (const auto& seq : train_->labelled) prep(seq, true);
        for (const auto& seq : train_->unlabelled) prep(seq, false);
        n_labelled_ = static_cast<int>(train_->labelled.size());

        if (test_) {
            for (const auto& seq : test_->labelled) {
                TestVideo tv;
                FeatureSequence tmp;
                tmp.video_id = seq.video_id;
                tmp.features = seq.features;
                DownsampledSequence down = io::downsample(tmp, cfg_.downsample_length);
                tv.features = std::move(down.features);
                tv.gt_full = &*seq.labels;
                test_videos_.push_back(std::move(tv));
            }
        }
    }

    std::vector<int> all_indices() const {
        std::vector<int> idx(videos_.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        return idx;
    }

    std::vector<int> labelled_indices() const {
        std::vector<int> idx;
        for (size_t i = 0; i < videos_.size(); ++i)
            if (videos_[i].is_labelled) idx.push_back(static_cast<int>(i));
        return idx;
    }

    // Labels used for masks/consistency in a given mode; nullptr if none.
    const std::vector<int>* mode_labels(const PreppedVideo& v, Mode mode) const {
        if (mode == Mode::kPretrain) return nullptr;
        if (v.is_labelled) return &*v.labels;
        // stage2 unlabelled: pseudo-labels
        auto it = pl_.labels.find(v.id);
        return it == pl_.labels.end() ? nullptr : &it->second;
    }

    // --- epoch/step machinery --------------------------------------------------

    PhaseReport run_epoch(const std::string& phase, int iteration, int epoch,
                          std::vector<int> order, Mode mode) {
        Rng erng = root_.derive(phase, static_cast<uint64_t>(iteration),
                                static_cast<uint64_t>(epoch));
        Rng shuffle_rng = erng.derive("shuffle");
        shuffle_rng.shuffle(order);

        PhaseReport report;
        report.phase = phase;
        report.iteration = iteration;
        report.epoch = epoch;

        int steps = 0;
        for (size_t pos = 0; pos < order.size(); pos += cfg_.batch_videos) {
            const size_t end = std::min(order.size(), pos + cfg_.batch_videos);
            std::vector<int> batch(order.begin() + pos, order.begin() + end);
            Rng srng = erng.derive("step", static_cast<uint64_t>(steps));
            run_step(batch, mode, srng, report);
            ++steps;
        }
        if (steps > 0) {
            report.l_total /= steps;
            report.l_ap_p /= steps;
            report.l_ap_n /= steps;
            report.l_aa_n /= steps;
            report.l_pp_n /= steps;
            report.l_nca /= steps;
            report.l_ce /= steps;
        }
        return report;
    }

    void run_step(const std::vector<int>& batch, Mode mode, Rng& srng, PhaseReport& report) {
        const int n = static_cast<int>(batch.size());
        const int t = cfg_.downsample_length;
        const int f = cfg_.feature_dim;

        Tensor3<double> inputs_d(n, t, f);
        Tensor3<S> inputs(n, t, f);
        std::vector<std::vector<int>> batch_labels;
        bool have_labels = mode != Mode::kPretrain;
        for (int b = 0; b < n; ++b) {
            const PreppedVideo& v = videos_[batch[b]];
            for (int ti = 0; ti < t; ++ti)
                for (int k = 0; k < f; ++k) {
                    const double x = v.features.at(ti, k);
                    inputs_d.at(b, ti, k) = x;
                    inputs.at(b, ti, k) = static_cast<S>(x);
                }
            if (have_labels) {
                const std::vector<int>* lbl = mode_labels(v, mode);
                if (!lbl) throw DataError("missing labels for video '" + v.id + "'");
                batch_labels.push_back(*lbl);
            }
        }

        for (auto* p : state_.all_params()) p->zero_grad();

        Tensor3<S> x = state_.temporal.forward(inputs, true);
        Tensor3<S> h = state_.semantic.forward(inputs, true);

        Rng sample_rng = srng.derive("frame-sample");
        contrast::SampledBatch<S> sampled = contrast::sample_frames(
            x, h, inputs_d, cfg_.frames_per_video, sample_rng,
            have_labels ? &batch_labels : nullptr);

        contrast::PairMask mask;
        if (mode == Mode::kPretrain) {
            Rng crng = srng.derive("clusters");
            mask = contrast::dynamic_mask(sampled, k_clusters_, crng, cfg_.dynamic_clustering);
        } else {
            mask = contrast::supervised_mask(*sampled.labels);
        }

        // Optional row normalization sits between sampling and the losses.
        contrast::RowNormCache<S> ncache_h, ncache_x;
        contrast::SampledBatch<S>* loss_batch = &sampled;
        contrast::SampledBatch<S> normalized;
        if (cfg_.normalize_embeddings) {
            normalized = sampled;
            normalized.semantic = contrast::l2_normalize_rows(sampled.semantic, ncache_h);
            normalized.temporal = contrast::l2_normalize_rows(sampled.temporal, ncache_x);
            loss_batch = &normalized;
        }

        contrast::MultiLevelWeights weights{cfg_.w_ap_p, cfg_.w_ap_n, cfg_.w_aa_n, cfg_.w_pp_n};
        Matrix<S> d_hs, d_xs;
        contrast::MultiLevelComponents contrast_out =
            contrast::multilevel_loss_grad(*loss_batch, mask, cfg_.scale_factor, weights, d_hs, d_xs);

        if (cfg_.normalize_embeddings) {
            d_hs = contrast::l2_normalize_rows_backward(d_hs, ncache_h);
            d_xs = contrast::l2_normalize_rows_backward(d_xs, ncache_x);
        }

        // Scatter sampled-row gradients back into the full embedding tensors.
        Tensor3<S> dx(n, t, cfg_.embedding_dim, S(0));
        Tensor3<S> dh(n, t, cfg_.embedding_dim, S(0));
        for (int r = 0; r < sampled.rows(); ++r) {
            const auto [vb, fi] = sampled.provenance[r];
            for (int c = 0; c < cfg_.embedding_dim; ++c) {
                dx.at(vb, fi, c) += d_xs.at(r, c);
                dh.at(vb, fi, c) += d_hs.at(r, c);
            }
        }

        // Neighbourhood consistency on each labelled/pseudo-labelled video.
        double nca_value = 0.0;
        if (mode != Mode::kPretrain && cfg_.w_nca > 0.0) {
            Rng nrng = srng.derive("consistency");
            std::vector<consistency::NeighbourhoodSample<S>> samples(n);
            int live = 0;
            for (int b = 0; b < n; ++b) {
                Matrix<S> xv = x.video(b);
                samples[b] = consistency::sample_neighbourhoods(
                    xv, batch_labels[b], cfg_.nca_window, cfg_.nca_anchors, cfg_.nca_partners,
                    nrng);
                if (!samples[b].empty()) ++live;
            }
            if (live > 0) {
                const double per_video_w = cfg_.w_nca / live;
                for (int b = 0; b < n; ++b) {
                    if (samples[b].empty()) continue;
                    Matrix<S> dxv(t, cfg_.embedding_dim, S(0));
                    nca_value += consistency::consistency_loss_grad(state_.scorer, samples[b],
                                                                    per_video_w, &dxv) /
                                 live;
                    for (int ti = 0; ti < t; ++ti)
                        for (int c = 0; c < cfg_.embedding_dim; ++c)
                            dx.at(b, ti, c) += dxv.at(ti, c);
                }
            }
        }

        // Cross-entropy through the classifier (stage 1 only).
        double ce_value = 0.0;
        if (mode == Mode::kStage1 && cfg_.w_ce > 0.0) {
            Tensor3<S> logits = state_.classifier.forward(x, true);
            std::vector<int> flat_labels;
            flat_labels.reserve(static_cast<size_t>(n) * t);
            for (int b = 0; b < n; ++b)
                flat_labels.insert(flat_labels.end(), batch_labels[b].begin(),
                                   batch_labels[b].end());
            Matrix<S> flat_logits = nn::flatten_frames(logits);
            Matrix<S> dlogits(flat_logits.rows, flat_logits.cols, S(0));
            ce_value = cross_entropy_grad(flat_logits, flat_labels, cfg_.w_ce, &dlogits);
            Tensor3<S> dx_ce =
                state_.classifier.backward(nn::unflatten_frames(dlogits, n, t));
            for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dx_ce.v[i];
        }

        state_.semantic.backward(dh);
        state_.temporal.backward(dx);

        // Optimizer groups: pretraining updates (T:S); stage 1 updates
        // (T:G:S) plus the classifier; stage 2 updates (T:G:S) only.
        if (mode == Mode::kPretrain) {
            adam_group(state_.temporal.params(), cfg_.lr_ts, cfg_.wd_ts);
            adam_group(state_.semantic.params(), cfg_.lr_ts, cfg_.wd_ts);
        } else {
            adam_group(state_.temporal.params(), cfg_.lr_tgs, cfg_.wd_tgs);
            adam_group(state_.semantic.params(), cfg_.lr_tgs, cfg_.wd_tgs);
            adam_group(state_.scorer.params(), cfg_.lr_tgs, cfg_.wd_tgs);
            if (mode == Mode::kStage1)
                adam_group(state_.classifier.params(), cfg_.lr_c, cfg_.wd_c);
        }

        // Components are logged unweighted; the minimized total is weighted.
        const double total = contrast_out.total + cfg_.w_nca * nca_value + cfg_.w_ce * ce_value;
        report.l_total += total;
        report.l_ap_p += contrast_out.ap_p;
        report.l_ap_n += contrast_out.ap_n;
        report.l_aa_n += contrast_out.aa_n;
        report.l_pp_n += contrast_out.pp_n;
        report.l_nca += nca_value;
        report.l_ce += ce_value;

        if (logger_) logger_->step_row(global_step_, total, contrast_out.ap_p, contrast_out.ap_n, contrast_out.aa_n, contrast_out.pp_n);
        ++global_step_;

        if (!std::isfinite(total))
            throw std::runtime_error("non-finite training loss at step " +
                                     std::to_string(global_step_));
    }

    static void adam_group(std::vector<nn::Param<S>*> params, double lr, double wd) {
        for (auto* p : params) nn::adam_step(*p, lr, wd);
    }

    // --- embedding/classifier helpers -------------------------------------------

    Matrix<S> embed_matrix(const MatD& features_down) {
        Tensor3<S> in(1, features_down.rows, features_down.cols);
        for (int ti = 0; ti < features_down.rows; ++ti)
            for (int k = 0; k < features_down.cols; ++k)
                in.at(0, ti, k) = static_cast<S>(features_down.at(ti, k));
        return state_.temporal.forward(in, false).video(0);
    }

    Matrix<S> embed_video(const PreppedVideo& v) { return embed_matrix(v.features); }

    Matrix<S> classify(const Matrix<S>& emb) {
        return state_.classifier.forward(nn::unflatten_frames(emb, 1, emb.rows), false).video(0);
    }

    void collect_labelled_embeddings(Matrix<S>& emb, std::vector<int>& labels) {
        std::vector<Matrix<S>> per_video;
        int rows = 0;
        labels.clear();
        for (const auto& v : videos_) {
            if (!v.is_labelled) continue;
            per_video.push_back(embed_video(v));
            rows += per_video.back().rows;
            labels.insert(labels.end(), v.labels->begin(), v.labels->end());
        }
        if (per_video.empty()) throw DataError("no labelled videos to probe");
        emb = Matrix<S>(rows, cfg_.embedding_dim);
        int r = 0;
        for (const auto& m : per_video) {
            std::copy(m.v.begin(), m.v.end(), emb.row(r));
            r += m.rows;
        }
    }

    void fit_classifier(nn::Dense<S>& head, const Matrix<S>& emb, const std::vector<int>& labels,
                        int steps) {
        for (int s = 0; s < steps; ++s) {
            head.w.zero_grad();
            head.b.zero_grad();
            Matrix<S> logits = head.forward(emb, true);
            Matrix<S> dlogits(logits.rows, logits.cols, S(0));
            cross_entropy_grad(logits, labels, 1.0, &dlogits);
            head.backward(dlogits);
            nn::adam_step(head.w, cfg_.lr_c, cfg_.wd_c);
            nn::adam_step(head.b, cfg_.lr_c, cfg_.wd_c);
        }
    }

    metrics::MetricReport evaluate_probe_on_test(nn::Dense<S>& probe) {
        if (!test_) return {};
        std::vector<metrics::MetricReport> rows;
        for (const auto& v : test_videos_) {
            Matrix<S> emb = embed_matrix(v.features);
            Matrix<S> logits = probe.forward(emb, false);
            rows.push_back(metrics::evaluate(argmax_rows(logits), *v.gt_full));
        }
        return metrics::average(rows);
    }

    void maybe_eval(PhaseReport& r, int epoch) {
        if (!test_) return;
        if (epoch % cfg_.eval_every == 0) {
            last_eval_ = evaluate_test(state_.classifier);
        }
        r.eval = last_eval_;
    }

    // Iteration-level selection mirrors the pretraining rule: a fresh probe
    // on the labelled set, ranked by held-out cross-entropy.
    void select_best_by_probe(int iteration) {
        const ProbeResult probe = linear_probe(100000 + iteration, false);
        if (probe.labelled_ce <= best_iter_ce_) {
            best_iter_ce_ = probe.labelled_ce;
            best_probe_acc_ = probe.labelled_acc;
            best_state_ = state_;
        }
    }

    void checkpoint_phase(const std::string& phase, int iteration) {
        if (!run_dir_) return;
        const std::string name = "ckpt_" + phase + "_" + std::to_string(iteration) + ".bin";
        save_checkpoint(*run_dir_ / name, phase, iteration, 0);
    }

    void push_report(const PhaseReport& r) {
        reports_.push_back(r);
        if (logger_) logger_->epoch_row(r);
    }

    static std::chrono::steady_clock::time_point now() { return std::chrono::steady_clock::now(); }
    static double since(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double>(now() - t0).count();
    }

    struct TestVideo {
        MatD features;  // downsampled
        const std::vector<int>* gt_full = nullptr;
    };

    ExperimentConfig cfg_;
    Rng root_;
    const DatasetSplit* train_;
    const DatasetSplit* test_;
    RunLogger* logger_;
    std::optional<std::filesystem::path> run_dir_;

    int num_classes_ = 0;
    int k_clusters_ = 2;
    int n_labelled_ = 0;
    std::vector<PreppedVideo> videos_;
    std::vector<TestVideo> test_videos_;

    ModelState<S> state_;
    std::optional<ModelState<S>> best_pretrain_;
    std::optional<ModelState<S>> best_state_;
    double best_probe_acc_ = -1.0;
    double best_probe_ce_ = std::numeric_limits<double>::infinity();
    double best_iter_ce_ = std::numeric_limits<double>::infinity();
    PseudoLabelStore pl_;
    std::vector<PhaseReport> reports_;
    metrics::MetricReport last_eval_;
    int64_t global_step_ = 0;
};

// ============================================================================
// Precision-dispatched entry points (implemented in trainer.cpp)
// ============================================================================

RunResult run_semi_supervised(const DatasetSplit& train_split, const DatasetSplit* test_split,
                              const ExperimentConfig& cfg,
                              const std::filesystem::path* run_dir = nullptr);

RunResult run_pretrain_only(const DatasetSplit& train_split, const DatasetSplit* test_split,
                            const ExperimentConfig& cfg,
                            const std::filesystem::path* run_dir = nullptr);

}  // namespace contraseg::train
