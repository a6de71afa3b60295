#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "contraseg/dataio.hpp"
#include "contraseg/metrics.hpp"
#include "contraseg/synth.hpp"
#include "contraseg/trainer.hpp"
#include "helpers.hpp"

using namespace contraseg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

}  // namespace

TEST_CASE("zero noise puts every frame exactly on its class prototype") {
    synth::SynthSpec spec;
    spec.num_videos = 3;
    spec.frames_per_video = 120;
    spec.num_classes = 4;
    spec.feature_dim = 6;
    spec.noise_sigma = 0.0;
    spec.mean_segment_length = 10;
    spec.seed = 2;
    auto ds = synth::generate_dataset(spec);

    // Collect the distinct per-class feature vectors.
    std::map<int, std::vector<double>> proto;
    for (const auto& v : ds.videos)
        for (int t = 0; t < v.frames(); ++t) {
            const int y = (*v.labels)[t];
            std::vector<double> row(v.features.row(t), v.features.row(t) + v.dim());
            auto [it, inserted] = proto.emplace(y, row);
            if (!inserted) CHECK(it->second == row);
        }

    // 1-nearest-prototype classification is perfect.
    int correct = 0, total = 0;
    for (const auto& v : ds.videos)
        for (int t = 0; t < v.frames(); ++t) {
            int best = -1;
            double best_d = 1e300;
            for (const auto& [y, p] : proto) {
                double d = 0;
                for (int c = 0; c < v.dim(); ++c) {
                    const double diff = v.features.at(t, c) - p[c];
                    d += diff * diff;
                }
                if (d < best_d) {
                    best_d = d;
                    best = y;
                }
            }
            total++;
            if (best == (*v.labels)[t]) correct++;
        }
    CHECK(correct == total);
}

TEST_CASE("empirical mean segment length tracks the configured dwell") {
    synth::SynthSpec spec;
    spec.num_videos = 60;
    spec.frames_per_video = 2500;  // 150k frames total
    spec.num_classes = 5;
    spec.feature_dim = 2;
    spec.mean_segment_length = 20.0;
    spec.noise_sigma = 0.1;
    spec.seed = 7;
    auto ds = synth::generate_dataset(spec);

    int64_t segments = 0, frames = 0;
    for (const auto& v : ds.videos) {
        auto segs = metrics::segments_from_labels(*v.labels);
        // The last segment of each video is dwell-truncated; drop it.
        segments += static_cast<int64_t>(segs.size()) - 1;
        frames += v.frames() - segs.back().length();
    }
    const double mean_len = static_cast<double>(frames) / static_cast<double>(segments);
    CHECK(mean_len == doctest::Approx(20.0).epsilon(0.05));
}

TEST_CASE("same seed regenerates byte-identical dataset trees") {
    synth::SynthSpec spec;
    spec.num_videos = 4;
    spec.frames_per_video = 64;
    spec.num_classes = 3;
    spec.feature_dim = 5;
    spec.seed = 9;

    const fs::path a = fs::temp_directory_path() / "contraseg_synth_a";
    const fs::path b = fs::temp_directory_path() / "contraseg_synth_b";
    fs::remove_all(a);
    fs::remove_all(b);
    synth::write_dataset(synth::generate_dataset(spec), a);
    synth::write_dataset(synth::generate_dataset(spec), b);

    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), a);
        CHECK(slurp(entry.path()) == slurp(b / rel));
    }

    synth::SynthSpec other = spec;
    other.seed = 10;
    synth::write_dataset(synth::generate_dataset(other), b);
    CHECK(slurp(a / "features" / "video_0000.bin") != slurp(b / "features" / "video_0000.bin"));
}

TEST_CASE("segment-level class counts match the stationary distribution") {
    // Frames within a segment are perfectly correlated, so the chi-square
    // statistic is computed over segments (one draw of the embedded chain
    // per segment), not frames.
    synth::SynthSpec spec;
    spec.num_videos = 50;
    spec.frames_per_video = 2200;  // ~110k frames, ~11k segments
    spec.num_classes = 4;
    spec.feature_dim = 2;
    spec.mean_segment_length = 10.0;
    spec.seed = 21;
    MatD p(4, 4, 0.0);
    // Asymmetric chain so the stationary distribution is not uniform.
    const double rows[4][4] = {{0.0, 0.7, 0.2, 0.1},
                               {0.3, 0.0, 0.5, 0.2},
                               {0.2, 0.3, 0.0, 0.5},
                               {0.6, 0.2, 0.2, 0.0}};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) p.at(i, j) = rows[i][j];
    spec.transition_matrix = p;

    auto ds = synth::generate_dataset(spec);
    std::vector<double> pi = synth::stationary_distribution(p);

    std::vector<int64_t> counts(4, 0);
    int64_t total = 0;
    for (const auto& v : ds.videos)
        for (const auto& seg : metrics::segments_from_labels(*v.labels)) {
            ++counts[seg.label];
            ++total;
        }

    double chi2 = 0.0;
    for (int c = 0; c < 4; ++c) {
        const double expected = pi[c] * static_cast<double>(total);
        chi2 += (counts[c] - expected) * (counts[c] - expected) / expected;
    }
    // df = 3, alpha = 0.01 -> critical value 11.345
    CHECK(chi2 < 11.345);
}

TEST_CASE("raising noise monotonically degrades a linear probe on raw features") {
    auto probe_accuracy = [](double sigma) {
        synth::SynthSpec spec;
        spec.num_videos = 8;
        spec.frames_per_video = 150;
        spec.num_classes = 4;
        spec.feature_dim = 8;
        spec.class_prototype_scale = 1.0;
        spec.noise_sigma = sigma;
        spec.mean_segment_length = 15;
        spec.seed = 31;
        auto ds = synth::generate_dataset(spec);

        // First 6 videos fit the probe, the remaining 2 score it.
        Matrix<double> train_x(6 * 150, 8), test_x(2 * 150, 8);
        std::vector<int> train_y, test_y;
        int tr = 0, te = 0;
        for (int v = 0; v < 8; ++v)
            for (int t = 0; t < 150; ++t) {
                if (v < 6) {
                    std::copy(ds.videos[v].features.row(t), ds.videos[v].features.row(t) + 8,
                              train_x.row(tr++));
                    train_y.push_back((*ds.videos[v].labels)[t]);
                } else {
                    std::copy(ds.videos[v].features.row(t), ds.videos[v].features.row(t) + 8,
                              test_x.row(te++));
                    test_y.push_back((*ds.videos[v].labels)[t]);
                }
            }

        nn::Dense<double> head;
        Rng rng(1);
        head.init("probe", 8, 4, rng);
        for (int step = 0; step < 250; ++step) {
            head.w.zero_grad();
            head.b.zero_grad();
            Matrix<double> logits = head.forward(train_x, true);
            Matrix<double> dlogits(logits.rows, logits.cols, 0.0);
            train::cross_entropy_grad(logits, train_y, 1.0, &dlogits);
            head.backward(dlogits);
            nn::adam_step(head.w, 1e-2, 1e-4);
            nn::adam_step(head.b, 1e-2, 1e-4);
        }
        Matrix<double> logits = head.forward(test_x, false);
        return metrics::frame_accuracy(train::argmax_rows(logits), test_y);
    };

    const double acc_low = probe_accuracy(0.25);
    const double acc_mid = probe_accuracy(1.0);
    const double acc_high = probe_accuracy(4.0);
    CHECK(acc_low > acc_mid);
    CHECK(acc_mid > acc_high);
}

TEST_CASE("row-stochastic validation rejects bad transition matrices") {
    synth::SynthSpec spec;
    spec.num_classes = 2;
    MatD p(2, 2, 0.0);
    p.at(0, 0) = 0.5;
    p.at(0, 1) = 0.6;
    p.at(1, 0) = 1.0;
    spec.transition_matrix = p;
    CHECK_THROWS_WITH_AS(synth::validate_spec(spec), doctest::Contains("transition_matrix"),
                         ConfigError);
}

TEST_CASE("synth spec json parses and rejects unknown keys") {
    auto spec = synth::parse_spec_json(R"({"num_videos": 3, "num_classes": 5, "seed": 4})");
    CHECK(spec.num_videos == 3);
    CHECK(spec.num_classes == 5);
    CHECK_THROWS_AS(synth::parse_spec_json(R"({"nun_videos": 3})"), ConfigError);
    CHECK_NOTHROW(synth::parse_spec_json(synth::default_spec_json()));
}
