#include <doctest.h>

#include "contraseg/contrast.hpp"
#include "helpers.hpp"

using namespace contraseg;
using namespace contraseg::contrast;
using testutil::rel_err;

namespace {

SampledBatch<double> random_batch(int rows, int dim, uint64_t seed, double scale = 0.5) {
    Rng rng(seed);
    SampledBatch<double> b;
    b.inputs = testutil::random_matrix(rows, dim, rng, scale);
    b.temporal = testutil::random_matrix(rows, dim, rng, scale);
    b.semantic = testutil::random_matrix(rows, dim, rng, scale);
    for (int r = 0; r < rows; ++r) b.provenance.emplace_back(0, r);
    return b;
}

PairMask random_mask(int n, uint64_t seed, double density = 0.4) {
    Rng rng(seed);
    PairMask m(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const uint8_t v = rng.uniform() < density ? 1 : 0;
            m.at(i, j) = v;
            m.at(j, i) = v;
        }
    return m;
}

std::vector<int> random_assignment(int n, int k, Rng& rng) {
    std::vector<int> out(n);
    for (auto& v : out) v = static_cast<int>(rng.uniform_int(0, k - 1));
    return out;
}

}  // namespace

TEST_CASE("sample_frames with T_s = T is the identity slice in order") {
    Rng rng(1);
    Tensor3<double> x(2, 6, 3), h(2, 6, 3), v(2, 6, 4);
    for (auto& e : x.v) e = rng.normal();
    for (auto& e : h.v) e = rng.normal();
    for (auto& e : v.v) e = rng.normal();

    Rng srng(2);
    auto batch = sample_frames(x, h, v, 6, srng);
    REQUIRE(batch.rows() == 12);
    for (int r = 0; r < 12; ++r) {
        const auto [vid, frame] = batch.provenance[r];
        CHECK(vid == r / 6);
        CHECK(frame == r % 6);
        for (int c = 0; c < 3; ++c) {
            CHECK(batch.temporal.at(r, c) == x.at(vid, frame, c));
            CHECK(batch.semantic.at(r, c) == h.at(vid, frame, c));
        }
        for (int c = 0; c < 4; ++c) CHECK(batch.inputs.at(r, c) == v.at(vid, frame, c));
    }
}

TEST_CASE("sample_frames draws sorted distinct frames per video, deterministically") {
    Rng rng(3);
    Tensor3<double> x(2, 40, 2), h(2, 40, 2), v(2, 40, 2);
    for (auto& e : x.v) e = rng.normal();
    h.v = x.v;
    v.v = x.v;

    Rng a(7), b(7);
    auto ba = sample_frames(x, h, v, 11, a);
    auto bb = sample_frames(x, h, v, 11, b);
    CHECK(ba.provenance == bb.provenance);

    for (int vid = 0; vid < 2; ++vid) {
        for (int r = 1; r < 11; ++r) {
            CHECK(ba.provenance[vid * 11 + r].second > ba.provenance[vid * 11 + r - 1].second);
            CHECK(ba.provenance[vid * 11 + r].first == vid);
        }
    }
    Rng c(8);
    CHECK_THROWS_AS(sample_frames(x, h, v, 41, c), DataError);
}

TEST_CASE("kmeans separates well-separated 1-d clusters") {
    MatD pts(4, 1);
    pts.at(0, 0) = 0.0;
    pts.at(1, 0) = 0.1;
    pts.at(2, 0) = 10.0;
    pts.at(3, 0) = 10.1;
    Rng rng(4);
    auto assign = kmeans(pts, 2, rng);
    CHECK(assign.labels[0] == assign.labels[1]);
    CHECK(assign.labels[2] == assign.labels[3]);
    CHECK(assign.labels[0] != assign.labels[2]);
}

TEST_CASE("kmeans with k=1 returns the mean") {
    Rng rng(5);
    MatD pts = testutil::random_matrix(20, 3, rng);
    Rng krng(6);
    auto assign = kmeans(pts, 1, krng);
    for (int c = 0; c < 3; ++c) {
        double mean = 0;
        for (int r = 0; r < 20; ++r) mean += pts.at(r, c);
        mean /= 20;
        CHECK(assign.centroids.at(0, c) == doctest::Approx(mean));
    }
    for (int v : assign.labels) CHECK(v == 0);
}

TEST_CASE("kmeans inertia beats 50 random assignments") {
    Rng rng(7);
    MatD pts = testutil::random_matrix(60, 4, rng);
    Rng krng(8);
    auto assign = kmeans(pts, 5, krng);

    Rng orng(9);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> labels = random_assignment(60, 5, orng);
        // Random assignment's best-case inertia: centroids at cluster means.
        MatD centroids(5, 4, 0.0);
        std::vector<int> counts(5, 0);
        for (int r = 0; r < 60; ++r) {
            ++counts[labels[r]];
            for (int c = 0; c < 4; ++c) centroids.at(labels[r], c) += pts.at(r, c);
        }
        for (int k = 0; k < 5; ++k)
            if (counts[k])
                for (int c = 0; c < 4; ++c) centroids.at(k, c) /= counts[k];
        double inertia = 0;
        for (int r = 0; r < 60; ++r)
            for (int c = 0; c < 4; ++c) {
                const double d = pts.at(r, c) - centroids.at(labels[r], c);
                inertia += d * d;
            }
        CHECK(assign.inertia <= inertia);
    }
}

TEST_CASE("kmeans leaves every point with its nearest centroid") {
    Rng rng(10);
    MatD pts = testutil::random_matrix(50, 3, rng);
    Rng krng(11);
    auto assign = kmeans(pts, 4, krng);
    for (int r = 0; r < 50; ++r) {
        double own = 0, best = 1e300;
        for (int k = 0; k < 4; ++k) {
            double d = 0;
            for (int c = 0; c < 3; ++c) {
                const double diff = pts.at(r, c) - assign.centroids.at(k, c);
                d += diff * diff;
            }
            if (k == assign.labels[r]) own = d;
            best = std::min(best, d);
        }
        CHECK(own <= best + 1e-9);
    }
}

TEST_CASE("label_mask matches the defining double loop") {
    CHECK(label_mask({0, 0, 1}).m == std::vector<uint8_t>{1, 1, 0, 1, 1, 0, 0, 0, 1});
    CHECK(label_mask({2, 2, 2}).m == std::vector<uint8_t>(9, 1));

    Rng rng(12);
    auto labels = random_assignment(50, 5, rng);
    auto mask = label_mask(labels);
    for (int i = 0; i < 50; ++i)
        for (int j = 0; j < 50; ++j)
            CHECK(mask.at(i, j) == (labels[i] == labels[j] ? 1 : 0));
}

TEST_CASE("supervised_mask is the elementwise complement of label_mask") {
    CHECK(supervised_mask({0, 0, 1}).m == std::vector<uint8_t>{0, 0, 1, 0, 0, 1, 1, 1, 0});
    CHECK(supervised_mask({1, 1, 1}).count() == 0);

    Rng rng(13);
    auto labels = random_assignment(30, 4, rng);
    auto pos = label_mask(labels);
    auto neg = supervised_mask(labels);
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 30; ++j) CHECK(neg.at(i, j) == 1 - pos.at(i, j));
}

TEST_CASE("intersect mask equals the brute-force triple loop") {
    Rng rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        auto a = random_assignment(50, 4, rng);
        auto b = random_assignment(50, 4, rng);
        auto c = random_assignment(50, 4, rng);
        auto mask = intersect_disagreement_mask(a, b, c);
        for (int i = 0; i < 50; ++i)
            for (int j = 0; j < 50; ++j) {
                const int m_in = a[i] == a[j] ? 1 : 0;
                const int m_te = b[i] == b[j] ? 1 : 0;
                const int m_se = c[i] == c[j] ? 1 : 0;
                CHECK(mask.at(i, j) == (1 - m_in) * (1 - m_te) * (1 - m_se));
            }
        // Symmetric, zero diagonal.
        for (int i = 0; i < 50; ++i) {
            CHECK(mask.at(i, i) == 0);
            for (int j = 0; j < 50; ++j) CHECK(mask.at(i, j) == mask.at(j, i));
        }
    }
}

TEST_CASE("dynamic_mask on forced clusterings complements the label mask") {
    // Rows 0 and 1 coincide, row 2 is far away, in all three views; with k=2
    // every view clusters them as {0,1} vs {2}.
    SampledBatch<double> batch;
    batch.inputs = MatD(3, 2);
    batch.temporal = MatD(3, 2);
    batch.semantic = MatD(3, 2);
    for (auto* m : {&batch.inputs, &batch.temporal, &batch.semantic}) {
        m->at(0, 0) = 0.0;
        m->at(0, 1) = 0.0;
        m->at(1, 0) = 0.01;
        m->at(1, 1) = 0.0;
        m->at(2, 0) = 9.0;
        m->at(2, 1) = 9.0;
    }
    Rng rng(15);
    auto mask = dynamic_mask(batch, 2, rng);
    CHECK(mask.m == std::vector<uint8_t>{0, 0, 1, 0, 0, 1, 1, 1, 0});
}

TEST_CASE("dynamic_mask never selects a pair that any view groups together") {
    Rng rng(16);
    auto batch = random_batch(24, 3, 17);
    Rng mrng(18);
    auto mask = dynamic_mask(batch, 3, mrng);

    Rng r_in = mrng.derive("cluster-input");
    auto in = kmeans(batch.inputs, 3, r_in);
    auto in_mask = label_mask(in.labels);
    for (int i = 0; i < 24; ++i)
        for (int j = 0; j < 24; ++j)
            CHECK(mask.at(i, j) <= 1 - in_mask.at(i, j));
    (void)rng;
}

TEST_CASE("positive loss closed forms") {
    MatD h(1, 2), x(1, 2);
    h.at(0, 0) = 1.0;  // orthogonal rows: dot = 0
    x.at(0, 1) = 1.0;
    CHECK(positive_loss(h, x, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    x.at(0, 0) = 1.0;  // dot = 1
    x.at(0, 1) = 0.0;
    CHECK(positive_loss(h, x, 1.0) == doctest::Approx(0.313262).epsilon(1e-5));
    CHECK(positive_loss(h, x, 0.1) == doctest::Approx(4.53989e-5).epsilon(1e-4));
}

TEST_CASE("negative loss closed forms and degenerate mask") {
    MatD a(2, 2), b(2, 2);
    a.at(0, 0) = 1.0;
    a.at(1, 1) = 1.0;
    b.at(0, 0) = 1.0;
    b.at(1, 1) = 1.0;
    PairMask zero(2);
    CHECK(negative_loss(a, b, zero, 1.0) == 0.0);

    PairMask anti(2);
    anti.at(0, 1) = 1;
    anti.at(1, 0) = 1;
    // <a0,b1> = <a1,b0> = 0
    CHECK(negative_loss(a, b, anti, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("losses match naive loop oracles to 1e-10") {
    Rng rng(19);
    for (int trial = 0; trial < 30; ++trial) {
        auto batch = random_batch(20, 6, 100 + trial);
        auto mask = random_mask(20, 200 + trial);
        CHECK(std::abs(positive_loss(batch.semantic, batch.temporal, 1.0) -
                       testutil::oracle_positive_loss(batch.semantic, batch.temporal, 1.0)) <
              1e-10);
        CHECK(std::abs(negative_loss(batch.semantic, batch.temporal, mask, 0.5) -
                       testutil::oracle_negative_loss(batch.semantic, batch.temporal, mask, 0.5)) <
              1e-10);
        CHECK(std::abs(negative_loss(batch.semantic, batch.semantic, mask, 1.0) -
                       testutil::oracle_negative_loss(batch.semantic, batch.semantic, mask, 1.0)) <
              1e-10);
    }
    (void)rng;
}

TEST_CASE("multi-level loss composes its components") {
    auto batch = random_batch(16, 5, 20);
    auto mask = random_mask(16, 21);

    SUBCASE("weights (1,0,0,0) reduce to the positive loss") {
        auto out = multilevel_loss(batch, mask, 1.0, {1.0, 0.0, 0.0, 0.0});
        CHECK(out.total == doctest::Approx(positive_loss(batch.semantic, batch.temporal, 1.0))
                               .epsilon(1e-15));
    }
    SUBCASE("zero mask keeps only the positive term") {
        PairMask zero(16);
        auto out = multilevel_loss(batch, zero, 1.0, {});
        CHECK(out.total ==
              doctest::Approx(positive_loss(batch.semantic, batch.temporal, 1.0)).epsilon(1e-15));
        CHECK(out.ap_n == 0.0);
        CHECK(out.aa_n == 0.0);
        CHECK(out.pp_n == 0.0);
    }
    SUBCASE("total equals the sum of independently computed components") {
        auto out = multilevel_loss(batch, mask, 0.7, {});
        const double expect = positive_loss(batch.semantic, batch.temporal, 0.7) +
                              negative_loss(batch.semantic, batch.temporal, mask, 0.7) +
                              negative_loss(batch.semantic, batch.semantic, mask, 0.7) +
                              negative_loss(batch.temporal, batch.temporal, mask, 0.7);
        CHECK(std::abs(out.total - expect) < 1e-12);
    }
}

TEST_CASE("multi-level loss gradients match central finite differences") {
    auto batch = random_batch(8, 4, 22);
    auto mask = random_mask(8, 23, 0.5);
    MultiLevelWeights w{1.0, 1.0, 1.0, 1.0};
    MatD dh, dx;
    multilevel_loss_grad(batch, mask, 0.8, w, dh, dx);

    auto loss = [&]() { return multilevel_loss(batch, mask, 0.8, w).total; };
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 4; ++c) {
            CHECK(rel_err(dh.at(r, c), testutil::central_diff(loss, batch.semantic.at(r, c))) <
                  1e-4);
            CHECK(rel_err(dx.at(r, c), testutil::central_diff(loss, batch.temporal.at(r, c))) <
                  1e-4);
        }
}

TEST_CASE("row normalization gradients match finite differences") {
    Rng rng(24);
    MatD x = testutil::random_matrix(5, 4, rng);
    MatD readout = testutil::random_matrix(5, 4, rng);

    RowNormCache<double> cache;
    auto f = [&]() {
        RowNormCache<double> c;
        MatD y = l2_normalize_rows(x, c);
        double acc = 0;
        for (size_t i = 0; i < y.v.size(); ++i) acc += readout.v[i] * y.v[i];
        return acc;
    };
    l2_normalize_rows(x, cache);
    MatD din = l2_normalize_rows_backward(readout, cache);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 4; ++c)
            CHECK(rel_err(din.at(r, c), testutil::central_diff(f, x.at(r, c))) < 1e-4);
}

TEST_CASE("negative_loss(a,a,M) is invariant under joint row permutation") {
    Rng rng(25);
    MatD a = testutil::random_matrix(12, 3, rng);
    auto mask = random_mask(12, 26);
    const double base = negative_loss(a, a, mask, 1.0);

    std::vector<int> perm(12);
    for (int i = 0; i < 12; ++i) perm[i] = i;
    rng.shuffle(perm);
    MatD ap(12, 3);
    PairMask mp(12);
    for (int i = 0; i < 12; ++i) {
        for (int c = 0; c < 3; ++c) ap.at(i, c) = a.at(perm[i], c);
        for (int j = 0; j < 12; ++j) mp.at(i, j) = mask.at(perm[i], perm[j]);
    }
    CHECK(negative_loss(ap, ap, mp, 1.0) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("masks depend on the partition, not the cluster id values") {
    Rng rng(27);
    auto labels = random_assignment(30, 4, rng);
    std::vector<int> renamed(30);
    for (int i = 0; i < 30; ++i) renamed[i] = 3 - labels[i];
    CHECK(intersect_disagreement_mask(labels, labels, labels).m ==
          intersect_disagreement_mask(renamed, renamed, renamed).m);

    auto batch = random_batch(30, 4, 28);
    auto mask_a = intersect_disagreement_mask(labels, renamed, labels);
    auto mask_b = intersect_disagreement_mask(renamed, labels, renamed);
    CHECK(multilevel_loss(batch, mask_a, 1.0, {}).total ==
          doctest::Approx(multilevel_loss(batch, mask_b, 1.0, {}).total));
}

TEST_CASE("losses are non-negative and finite") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        auto batch = random_batch(10, 4, 300 + seed, 2.0);
        auto mask = random_mask(10, 400 + seed);
        auto out = multilevel_loss(batch, mask, 0.3, {});
        for (double v : {out.ap_p, out.ap_n, out.aa_n, out.pp_n, out.total}) {
            CHECK(v >= 0.0);
            CHECK(std::isfinite(v));
        }
    }
}

TEST_CASE("info_nce baseline") {
    MatD x(3, 2);
    x.at(0, 0) = 1.0;           // anchor
    x.at(1, 1) = 1.0;           // positive, cosine 0
    x.at(2, 1) = -1.0;          // negative, cosine 0
    CHECK(info_nce(x, 0, {1}, {}, 0.5) == doctest::Approx(0.0));
    CHECK(info_nce(x, 0, {1}, {2}, 1.0) == doctest::Approx(std::log(2.0)));
    CHECK_THROWS_AS(info_nce(x, 0, {}, {1}, 1.0), DataError);

    Rng rng(29);
    for (int trial = 0; trial < 30; ++trial) {
        MatD feats = testutil::random_matrix(12, 5, rng);
        std::vector<int> pos = {1, 2, 3}, neg = {4, 5, 6, 7};
        CHECK(std::abs(info_nce(feats, 0, pos, neg, 0.4) -
                       testutil::oracle_info_nce(feats, 0, pos, neg, 0.4)) < 1e-10);
    }
}

TEST_CASE("triplet loss primitive") {
    CHECK(triplet_loss({1, 0}, {0, 1}, {0, -1}) ==
          doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
    // Saturation: strongly aligned positive, strongly opposed negative.
    CHECK(triplet_loss({30, 0}, {1, 0}, {-1, 0}) == doctest::Approx(0.0).epsilon(1e-10));

    Rng rng(30);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(4), p(4), n(4);
        for (auto* v : {&a, &p, &n})
            for (auto& e : *v) e = rng.normal();
        CHECK(std::abs(triplet_loss(a, p, n) - testutil::oracle_triplet(a, p, n)) < 1e-12);
    }
}
