#include <doctest.h>

#include <filesystem>
#include <set>

#include "contraseg/synth.hpp"
#include "contraseg/trainer.hpp"
#include "helpers.hpp"

using namespace contraseg;
using namespace contraseg::train;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_cfg() {
    ExperimentConfig cfg;
    cfg.feature_dim = 6;
    cfg.embedding_dim = 12;
    cfg.downsample_length = 32;
    cfg.frames_per_video = 12;
    cfg.batch_videos = 3;
    cfg.encoder_depth = 2;
    cfg.encoder_hidden = 10;
    cfg.semantic_hidden = 10;
    cfg.scorer_hidden = 8;
    cfg.num_clusters = 3;
    cfg.nca_window = 6;
    cfg.nca_partners = 4;
    cfg.iterations = 1;
    cfg.epochs_pretrain = 2;
    cfg.epochs_stage1 = 2;
    cfg.epochs_stage2 = 2;
    cfg.probe_steps = 40;
    cfg.labelled_fraction = 0.5;
    cfg.rng_seed = 77;
    return cfg;
}

synth::SynthSpec tiny_spec() {
    synth::SynthSpec spec;
    spec.num_videos = 6;
    spec.frames_per_video = 96;
    spec.num_classes = 3;
    spec.feature_dim = 6;
    spec.class_prototype_scale = 2.0;
    spec.noise_sigma = 0.4;
    spec.mean_segment_length = 24;
    spec.seed = 100;
    return spec;
}

std::vector<double> param_snapshot(ModelState<double>& state) {
    std::vector<double> out;
    for (auto* p : state.all_params()) out.insert(out.end(), p->value.begin(), p->value.end());
    return out;
}

}  // namespace

TEST_CASE("cross entropy of uniform logits is log(num_classes)") {
    Matrix<double> logits(5, 4, 0.0);
    std::vector<int> labels = {0, 1, 2, 3, 0};
    CHECK(cross_entropy(logits, labels) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy gradient matches finite differences and skips -1") {
    Rng rng(1);
    Matrix<double> logits = testutil::random_matrix(6, 3, rng);
    std::vector<int> labels = {0, 2, -1, 1, 1, -1};
    Matrix<double> dlogits(6, 3, 0.0);
    cross_entropy_grad(logits, labels, 1.0, &dlogits);
    auto f = [&]() { return cross_entropy(logits, labels); };
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 3; ++c)
            CHECK(testutil::rel_err(dlogits.at(r, c), testutil::central_diff(f, logits.at(r, c))) <
                  1e-4);
    // ignored rows receive no gradient
    for (int c = 0; c < 3; ++c) {
        CHECK(dlogits.at(2, c) == 0.0);
        CHECK(dlogits.at(5, c) == 0.0);
    }
}

TEST_CASE("argmax breaks ties toward the lower class id") {
    Matrix<double> logits(2, 4, 0.0);
    logits.at(0, 1) = 3.0;
    logits.at(0, 3) = 3.0;  // tie between 1 and 3
    CHECK(argmax_rows(logits) == std::vector<int>{1, 0});
}

TEST_CASE("zero pretrain epochs leave the initialized state untouched") {
    auto split = synth::generate_split(tiny_spec(), 0.5, 1);
    ExperimentConfig cfg = tiny_cfg();
    cfg.epochs_pretrain = 0;

    Trainer<double> a(cfg, split, nullptr);
    Trainer<double> b(cfg, split, nullptr);
    const auto before = param_snapshot(b.state());
    a.pretrain();
    CHECK(param_snapshot(a.state()) == before);
}

TEST_CASE("full pipeline is deterministic given config and seed") {
    auto split = synth::generate_split(tiny_spec(), 0.5, 1);
    ExperimentConfig cfg = tiny_cfg();

    Trainer<double> a(cfg, split, nullptr);
    RunResult ra = a.run();
    Trainer<double> b(cfg, split, nullptr);
    RunResult rb = b.run();

    REQUIRE(ra.reports.size() == rb.reports.size());
    for (size_t i = 0; i < ra.reports.size(); ++i) {
        CHECK(ra.reports[i].l_total == rb.reports[i].l_total);
        CHECK(ra.reports[i].l_nca == rb.reports[i].l_nca);
        CHECK(ra.reports[i].eval.acc == rb.reports[i].eval.acc);
    }
    CHECK(param_snapshot(a.state()) == param_snapshot(b.state()));
}

TEST_CASE("training never touches hidden labels; the vault stays silent") {
    auto split = synth::generate_split(tiny_spec(), 0.5, 1);
    REQUIRE(split.hidden->size() > 0);
    ExperimentConfig cfg = tiny_cfg();
    Trainer<double> trainer(cfg, split, nullptr);
    trainer.run();  // would throw TaintError on any unauthorized access
    CHECK(split.hidden->scoped_reads() == 0);

    CHECK_THROWS_AS(split.hidden->get(split.unlabelled[0].video_id), TaintError);
    {
        HiddenLabels::EvalScope scope;
        CHECK_NOTHROW(split.hidden->get(split.unlabelled[0].video_id));
    }
}

TEST_CASE("pseudo-label refresh is the classifier argmax at coarse resolution") {
    auto split = synth::generate_split(tiny_spec(), 0.5, 1);
    ExperimentConfig cfg = tiny_cfg();
    Trainer<double> trainer(cfg, split, nullptr);
    trainer.stage1(1);
    trainer.refresh_pseudo_labels();

    const auto& pl = trainer.pseudo_labels();
    CHECK(pl.labels.size() == split.unlabelled.size());
    for (const auto& v : split.unlabelled) {
        REQUIRE(pl.has(v.video_id));
        const auto& labels = pl.labels.at(v.video_id);
        CHECK(static_cast<int>(labels.size()) == cfg.downsample_length);
        for (int y : labels) {
            CHECK(y >= 0);
            CHECK(y < split.num_classes);
        }
        // Matches a direct forward pass.
        FeatureSequence tmp;
        tmp.video_id = v.video_id;
        tmp.features = v.features;
        auto down = io::downsample(tmp, cfg.downsample_length);
        CHECK(trainer.predict_video(down.features) == labels);
    }
}

TEST_CASE("stage2 with oracle pseudo-labels equals all-labelled contrast") {
    // Find a split seed whose labelled half is a lexicographic prefix, so the
    // video ordering matches the all-labelled trainer exactly.
    auto spec = tiny_spec();
    spec.num_videos = 4;
    uint64_t split_seed = 0;
    std::optional<DatasetSplit> half;
    for (uint64_t s = 0; s < 200; ++s) {
        DatasetSplit cand = synth::generate_split(spec, 0.5, s);
        bool prefix = true;
        for (const auto& lv : cand.labelled)
            for (const auto& uv : cand.unlabelled)
                if (lv.video_id > uv.video_id) prefix = false;
        if (prefix) {
            split_seed = s;
            half = std::move(cand);
            break;
        }
    }
    REQUIRE(half.has_value());
    (void)split_seed;

    DatasetSplit full = synth::generate_split(spec, 1.0, 3);

    ExperimentConfig cfg = tiny_cfg();
    cfg.batch_videos = 2;
    cfg.epochs_stage2 = 1;

    Trainer<double> t_half(cfg, *half, nullptr);
    Trainer<double> t_full(cfg, full, nullptr);

    // Inject oracle pseudo-labels: coarse ground truth from the vault.
    {
        HiddenLabels::EvalScope scope;
        PseudoLabelStore pl;
        for (const auto& v : half->unlabelled) {
            FeatureSequence tmp;
            tmp.video_id = v.video_id;
            tmp.features = v.features;
            tmp.labels = half->hidden->get(v.video_id);
            auto down = io::downsample(tmp, cfg.downsample_length);
            pl.labels[v.video_id] = *down.labels;
        }
        t_half.set_pseudo_labels(std::move(pl));
    }

    t_half.stage2(1);
    t_full.stage2(1);
    REQUIRE(t_half.reports().size() == 1);
    REQUIRE(t_full.reports().size() == 1);
    CHECK(t_half.reports()[0].l_total == doctest::Approx(t_full.reports()[0].l_total));
    CHECK(param_snapshot(t_half.state()) == param_snapshot(t_full.state()));
}

TEST_CASE("zero stage2 epochs change nothing") {
    auto split = synth::generate_split(tiny_spec(), 1.0, 1);
    ExperimentConfig cfg = tiny_cfg();
    cfg.epochs_stage2 = 0;
    Trainer<double> trainer(cfg, split, nullptr);
    const auto before = param_snapshot(trainer.state());
    trainer.stage2(1);
    CHECK(param_snapshot(trainer.state()) == before);
}

TEST_CASE("fully labelled runs have an empty vault and a no-op refresh") {
    auto split = synth::generate_split(tiny_spec(), 1.0, 1);
    CHECK(split.unlabelled.empty());
    CHECK(split.hidden->size() == 0);
    ExperimentConfig cfg = tiny_cfg();
    cfg.labelled_fraction = 1.0;
    Trainer<double> trainer(cfg, split, nullptr);
    trainer.refresh_pseudo_labels();
    CHECK(trainer.pseudo_labels().empty());
    CHECK_NOTHROW(trainer.run());
}

TEST_CASE("stage boundaries update exactly their parameter groups") {
    auto split = synth::generate_split(tiny_spec(), 0.5, 1);
    ExperimentConfig cfg = tiny_cfg();
    cfg.epochs_stage1 = 1;
    cfg.epochs_stage2 = 1;
    Trainer<double> trainer(cfg, split, nullptr);

    // Parameter names are unique, so no tensor can sit in two groups.
    std::set<std::string> names;
    for (auto* p : trainer.state().all_params()) {
        CHECK(names.insert(p->name).second);
    }

    // Pretraining must not move the scorer or classifier.
    auto scorer_before = trainer.state().scorer.params()[0]->value;
    auto clf_before = trainer.state().classifier.params()[0]->value;
    trainer.pretrain();
    CHECK(trainer.state().scorer.params()[0]->value == scorer_before);
    CHECK(trainer.state().classifier.params()[0]->value == clf_before);

    // Stage 1 moves the classifier; stage 2 freezes it again.
    trainer.stage1(1);
    CHECK(trainer.state().classifier.params()[0]->value != clf_before);
    auto clf_after_stage1 = trainer.state().classifier.params()[0]->value;
    trainer.refresh_pseudo_labels();
    trainer.stage2(1);
    CHECK(trainer.state().classifier.params()[0]->value == clf_after_stage1);
}

TEST_CASE("checkpoint restore resumes bit-exactly") {
    auto split = synth::generate_split(tiny_spec(), 0.5, 1);
    ExperimentConfig cfg = tiny_cfg();

    // Straight run: two bare pretrain epochs.
    Trainer<double> straight(cfg, split, nullptr);
    const double e1_loss = straight.pretrain_epoch(1).l_total;
    straight.pretrain_epoch(2);

    // Interrupted run: one epoch, checkpoint, reload into a fresh trainer,
    // then the second epoch. Epoch rng streams are derived from (seed,
    // phase, epoch), so the continuation is exact.
    Trainer<double> first(cfg, split, nullptr);
    CHECK(first.pretrain_epoch(1).l_total == e1_loss);
    const fs::path path = fs::temp_directory_path() / "contraseg_resume.bin";
    first.save_checkpoint(path, "pretrain", 0, 1);

    Trainer<double> second(cfg, split, nullptr);
    const auto meta = second.load_checkpoint(path);
    CHECK(meta.phase == "pretrain");
    CHECK(meta.epoch == 1);
    second.pretrain_epoch(2);

    CHECK(param_snapshot(straight.state()) == param_snapshot(second.state()));
}

TEST_CASE("pseudo-labels recover hidden ground truth on easy data") {
    synth::SynthSpec spec = tiny_spec();
    spec.noise_sigma = 0.0;  // classes exactly on their prototypes
    spec.num_videos = 8;
    spec.mean_segment_length = 32;  // few boundary chunks after downsampling
    auto split = synth::generate_split(spec, 0.5, 1);

    ExperimentConfig cfg = tiny_cfg();
    cfg.downsample_length = 48;
    cfg.epochs_pretrain = 0;
    cfg.epochs_stage1 = 80;
    cfg.lr_tgs = 1e-3;
    Trainer<double> trainer(cfg, split, nullptr);
    trainer.stage1(1);
    trainer.refresh_pseudo_labels();

    int64_t agree = 0, total = 0;
    {
        HiddenLabels::EvalScope scope;
        for (const auto& v : split.unlabelled) {
            FeatureSequence tmp;
            tmp.video_id = v.video_id;
            tmp.features = v.features;
            tmp.labels = split.hidden->get(v.video_id);
            auto down = io::downsample(tmp, cfg.downsample_length);
            const auto& pl = trainer.pseudo_labels().labels.at(v.video_id);
            for (size_t i = 0; i < pl.size(); ++i) {
                ++total;
                if (pl[i] == (*down.labels)[i]) ++agree;
            }
        }
    }
    CHECK(static_cast<double>(agree) / static_cast<double>(total) > 0.95);
}

TEST_CASE("float32 precision path runs deterministically") {
    auto split = synth::generate_split(tiny_spec(), 0.5, 1);
    ExperimentConfig cfg = tiny_cfg();
    cfg.precision = "float32";

    Trainer<float> a(cfg, split, nullptr);
    RunResult ra = a.run();
    Trainer<float> b(cfg, split, nullptr);
    RunResult rb = b.run();

    REQUIRE(ra.reports.size() == rb.reports.size());
    for (size_t i = 0; i < ra.reports.size(); ++i) {
        CHECK(std::isfinite(ra.reports[i].l_total));
        CHECK(ra.reports[i].l_total == rb.reports[i].l_total);
    }

    // Dispatch through the precision switch works end to end.
    RunResult rd = run_semi_supervised(split, nullptr, cfg);
    CHECK(std::isfinite(rd.reports.back().l_total));

    // float32 checkpoints round trip bit-exactly.
    const fs::path path = fs::temp_directory_path() / "contraseg_f32.bin";
    a.save_checkpoint(path, "final", 1, 0);
    Trainer<float> c(cfg, split, nullptr);
    c.load_checkpoint(path);
    std::vector<float> va, vc;
    for (auto* p : a.state().all_params()) va.insert(va.end(), p->value.begin(), p->value.end());
    for (auto* p : c.state().all_params()) vc.insert(vc.end(), p->value.begin(), p->value.end());
    CHECK(va == vc);

    // Mixed-precision loads are rejected.
    Trainer<double> d(tiny_cfg(), split, nullptr);
    CHECK_THROWS_AS(d.load_checkpoint(path), DataError);
}

TEST_CASE("pretraining lifts probe accuracy over a random init") {
    synth::SynthSpec spec;
    spec.num_videos = 16;  // last 4 held out for the probe metric
    spec.frames_per_video = 256;
    spec.num_classes = 4;
    spec.feature_dim = 8;
    spec.class_prototype_scale = 2.0;
    spec.noise_sigma = 0.5;
    spec.mean_segment_length = 32;
    spec.seed = 500;
    auto data = synth::generate_train_test(spec, 4, 0.25, 2);

    ExperimentConfig cfg = tiny_cfg();
    cfg.feature_dim = 8;
    cfg.embedding_dim = 16;
    cfg.encoder_hidden = 16;
    cfg.semantic_hidden = 16;
    cfg.downsample_length = 64;
    cfg.frames_per_video = 32;
    cfg.num_clusters = 4;
    cfg.batch_videos = 6;
    cfg.epochs_pretrain = 40;
    cfg.probe_steps = 120;
    cfg.labelled_fraction = 0.25;
    cfg.rng_seed = 3;

    Trainer<double> random_init(cfg, data.train, &data.test);
    const double acc_random = random_init.linear_probe(0, true).test_metrics.acc;

    Trainer<double> pretrained(cfg, data.train, &data.test);
    pretrained.pretrain();
    const double acc_pre = pretrained.linear_probe(0, true).test_metrics.acc;

    // Loss at the selected epoch is finite and below the first epoch's.
    const auto& reports = pretrained.reports();
    REQUIRE_FALSE(reports.empty());
    for (const auto& r : reports) CHECK(std::isfinite(r.l_total));
    double best = 1e300;
    for (const auto& r : reports) best = std::min(best, r.l_total);
    CHECK(best < reports.front().l_total);

    CHECK(acc_pre >= acc_random + 10.0);

    // Supervised stage 1 on top of the pretrained encoder beats the
    // probe-only readout.
    ExperimentConfig s1 = cfg;
    s1.epochs_stage1 = 100;
    s1.lr_tgs = 1e-4;
    Trainer<double> staged(s1, data.train, &data.test);
    staged.state() = pretrained.state();
    staged.stage1(1);
    const double acc_stage1 = staged.evaluate_test(staged.state().classifier).acc;
    CHECK(acc_stage1 > acc_pre);
}
