// Multi-level contrast machinery: frame sampling, clustering-driven pair
// masks, the positive loss and the three negative losses over frame-pair
// Gram matrices, plus the InfoNCE / triplet baselines.
//
// Loss values are accumulated in double regardless of the scalar type;
// gradients come back in the caller's scalar type.

#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "contraseg/common.hpp"
#include "contraseg/rng.hpp"

namespace contraseg::contrast {

// ============================================================================
// Types
// ============================================================================

// Symmetric binary pair-selection matrix with zero diagonal.
struct PairMask {
    int n = 0;
    std::vector<uint8_t> m;

    PairMask() = default;
    explicit PairMask(int n_) : n(n_), m(static_cast<size_t>(n_) * n_, 0) {}

    uint8_t& at(int i, int j) { return m[static_cast<size_t>(i) * n + j]; }
    uint8_t at(int i, int j) const { return m[static_cast<size_t>(i) * n + j]; }

    int64_t count() const {
        int64_t c = 0;
        for (uint8_t x : m) c += x;
        return c;
    }
};

struct ClusterAssignment {
    std::vector<int> labels;  // [n], values in [0, k)
    MatD centroids;           // [k x dim]
    double inertia = 0.0;
};

// Sampled frames from N videos, concatenated along the frame axis. Row i of
// inputs/temporal/semantic all describe the same (video, frame), which is
// what makes (semantic[i], temporal[i]) a positive pair.
template <class S>
struct SampledBatch {
    MatD inputs;             // V_s, [N*T_s x F]
    Matrix<S> temporal;      // X_s, [N*T_s x D]
    Matrix<S> semantic;      // H_s, [N*T_s x D]
    std::vector<std::pair<int, int>> provenance;  // (video_index, frame_index)
    std::optional<std::vector<int>> labels;

    int rows() const { return temporal.rows; }
};

struct MultiLevelComponents {
    double ap_p = 0.0;  // positive semantic-temporal term
    double ap_n = 0.0;  // negative semantic-temporal term
    double aa_n = 0.0;  // negative semantic-semantic term
    double pp_n = 0.0;  // negative temporal-temporal term
    double total = 0.0;
    int64_t pair_count = 0;  // negatives selected by the mask
};

struct MultiLevelWeights {
    double ap_p = 1.0, ap_n = 1.0, aa_n = 1.0, pp_n = 1.0;
};

// ============================================================================
// Sampling and clustering
// ============================================================================

// Per video: T_s distinct frame indices drawn uniformly, sorted ascending;
// the same indices slice inputs, temporal and semantic tensors.
template <class S>
SampledBatch<S> sample_frames(const Tensor3<S>& temporal, const Tensor3<S>& semantic,
                              const Tensor3<double>& inputs, int frames_per_video, Rng& rng,
                              const std::vector<std::vector<int>>* labels = nullptr) {
    const int n = temporal.n, t = temporal.t;
    if (frames_per_video > t)
        throw DataError("cannot sample " + std::to_string(frames_per_video) + " frames from " +
                        std::to_string(t));
    SampledBatch<S> out;
    const int rows = n * frames_per_video;
    out.inputs = MatD(rows, inputs.c);
    out.temporal = Matrix<S>(rows, temporal.c);
    out.semantic = Matrix<S>(rows, semantic.c);
    out.provenance.reserve(rows);
    if (labels) out.labels = std::vector<int>(rows);

    int row = 0;
    for (int nv = 0; nv < n; ++nv) {
        std::vector<int> idx = rng.sample_without_replacement(t, frames_per_video);
        std::sort(idx.begin(), idx.end());
        for (int fi : idx) {
            std::copy(inputs.frame(nv, fi), inputs.frame(nv, fi) + inputs.c, out.inputs.row(row));
            std::copy(temporal.frame(nv, fi), temporal.frame(nv, fi) + temporal.c,
                      out.temporal.row(row));
            std::copy(semantic.frame(nv, fi), semantic.frame(nv, fi) + semantic.c,
                      out.semantic.row(row));
            out.provenance.emplace_back(nv, fi);
            if (labels) (*out.labels)[row] = (*labels)[nv][fi];
            ++row;
        }
    }
    return out;
}

// Lloyd's algorithm with k-means++ seeding; empty clusters are reseeded to
// the point farthest from its centroid. Deterministic given the rng.
ClusterAssignment kmeans(const MatD& points, int k, Rng& rng, int max_iters = 100,
                         double tol = 1e-6);

// out[i][j] = 1 iff labels[i] == labels[j]; always 1 on the diagonal.
PairMask label_mask(const std::vector<int>& labels);

// Mask algebra for three cluster-assignment views: a pair is negative only
// when every view places the two frames in different clusters,
// M = (1 - M_in) o (1 - M_te) o (1 - M_se).
PairMask intersect_disagreement_mask(const std::vector<int>& input_labels,
                                     const std::vector<int>& temporal_labels,
                                     const std::vector<int>& semantic_labels);

// Negative-pair mask from clustering disagreement: k-means runs on the input,
// temporal and semantic views and a pair is negative only when all three
// views place it in different clusters. With dynamic_views=false only the
// input view is clustered (the static-baseline ablation).
template <class S>
PairMask dynamic_mask(const SampledBatch<S>& batch, int k, Rng& rng, bool dynamic_views = true) {
    const int n = batch.rows();
    Rng r_in = rng.derive("cluster-input");
    ClusterAssignment in = kmeans(batch.inputs, k, r_in);
    PairMask mask(n);
    if (!dynamic_views) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                mask.at(i, j) = in.labels[i] != in.labels[j] ? 1 : 0;
        return mask;
    }
    Rng r_te = rng.derive("cluster-temporal");
    Rng r_se = rng.derive("cluster-semantic");
    ClusterAssignment te = kmeans(batch.temporal.template cast<double>(), k, r_te);
    ClusterAssignment se = kmeans(batch.semantic.template cast<double>(), k, r_se);
    return intersect_disagreement_mask(in.labels, te.labels, se.labels);
}

// Label-disagreement mask used when (pseudo-)labels exist: 1 - label_mask.
PairMask supervised_mask(const std::vector<int>& labels);

// ============================================================================
// Losses
// ============================================================================

// Mean over rows of -log(sigmoid(<semantic[i], temporal[i]> / xi)).
template <class S>
double positive_loss(const Matrix<S>& semantic, const Matrix<S>& temporal, double xi) {
    double acc = 0.0;
    for (int i = 0; i < semantic.rows; ++i)
        acc += neg_log_sigmoid(dot(semantic.row(i), temporal.row(i), semantic.cols) / xi);
    return acc / semantic.rows;
}

// Adds d(loss)/d(semantic) and d(loss)/d(temporal) into the given matrices.
template <class S>
double positive_loss_grad(const Matrix<S>& semantic, const Matrix<S>& temporal, double xi,
                          double weight, Matrix<S>& d_semantic, Matrix<S>& d_temporal) {
    double acc = 0.0;
    const double inv_n = 1.0 / semantic.rows;
    for (int i = 0; i < semantic.rows; ++i) {
        const double z = dot(semantic.row(i), temporal.row(i), semantic.cols) / xi;
        acc += neg_log_sigmoid(z);
        const double coeff = weight * inv_n * (-sigmoid(-z)) / xi;
        const S* h = semantic.row(i);
        const S* x = temporal.row(i);
        S* dh = d_semantic.row(i);
        S* dx = d_temporal.row(i);
        for (int c = 0; c < semantic.cols; ++c) {
            dh[c] += static_cast<S>(coeff * static_cast<double>(x[c]));
            dx[c] += static_cast<S>(coeff * static_cast<double>(h[c]));
        }
    }
    return acc * inv_n;
}

// (1/N_ap) * sum over masked pairs of -log(sigmoid(-<a[i], b[j]> / xi));
// exactly 0 when the mask selects nothing.
template <class S>
double negative_loss(const Matrix<S>& a, const Matrix<S>& b, const PairMask& mask, double xi) {
    if (mask.n != a.rows || a.rows != b.rows)
        throw DataError("negative_loss: mask size " + std::to_string(mask.n) +
                        " does not match rows " + std::to_string(a.rows));
    const int64_t n_pairs = mask.count();
    if (n_pairs == 0) return 0.0;
    double acc = 0.0;
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.rows; ++j)
            if (mask.at(i, j))
                acc += softplus(dot(a.row(i), b.row(j), a.cols) / xi);
    return acc / static_cast<double>(n_pairs);
}

// Gradient form; da and db may alias the same accumulator via two calls when
// a and b are the same matrix (the caller passes the same buffer twice).
template <class S>
double negative_loss_grad(const Matrix<S>& a, const Matrix<S>& b, const PairMask& mask, double xi,
                          double weight, Matrix<S>& da, Matrix<S>& db) {
    const int64_t n_pairs = mask.count();
    if (n_pairs == 0) return 0.0;
    const double inv = 1.0 / static_cast<double>(n_pairs);
    double acc = 0.0;
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < b.rows; ++j) {
            if (!mask.at(i, j)) continue;
            const double z = dot(a.row(i), b.row(j), a.cols) / xi;
            acc += softplus(z);
            const double coeff = weight * inv * sigmoid(z) / xi;
            const S* ai = a.row(i);
            const S* bj = b.row(j);
            S* dai = da.row(i);
            S* dbj = db.row(j);
            for (int c = 0; c < a.cols; ++c) {
                dai[c] += static_cast<S>(coeff * static_cast<double>(bj[c]));
                dbj[c] += static_cast<S>(coeff * static_cast<double>(ai[c]));
            }
        }
    }
    return acc * inv;
}

// Weighted four-term combination; components are reported unweighted.
template <class S>
MultiLevelComponents multilevel_loss(const SampledBatch<S>& batch, const PairMask& mask, double xi,
                       const MultiLevelWeights& w = {}) {
    MultiLevelComponents out;
    out.pair_count = mask.count();
    out.ap_p = positive_loss(batch.semantic, batch.temporal, xi);
    out.ap_n = negative_loss(batch.semantic, batch.temporal, mask, xi);
    out.aa_n = negative_loss(batch.semantic, batch.semantic, mask, xi);
    out.pp_n = negative_loss(batch.temporal, batch.temporal, mask, xi);
    out.total = w.ap_p * out.ap_p + w.ap_n * out.ap_n + w.aa_n * out.aa_n + w.pp_n * out.pp_n;
    return out;
}

// Gradients of the weighted total w.r.t. the semantic and temporal rows.
template <class S>
MultiLevelComponents multilevel_loss_grad(const SampledBatch<S>& batch, const PairMask& mask, double xi,
                            const MultiLevelWeights& w, Matrix<S>& d_semantic, Matrix<S>& d_temporal) {
    d_semantic = Matrix<S>(batch.semantic.rows, batch.semantic.cols, S(0));
    d_temporal = Matrix<S>(batch.temporal.rows, batch.temporal.cols, S(0));
    MultiLevelComponents out;
    out.pair_count = mask.count();
    out.ap_p = positive_loss_grad(batch.semantic, batch.temporal, xi, w.ap_p, d_semantic,
                                  d_temporal);
    out.ap_n = negative_loss_grad(batch.semantic, batch.temporal, mask, xi, w.ap_n, d_semantic,
                                  d_temporal);
    out.aa_n = negative_loss_grad(batch.semantic, batch.semantic, mask, xi, w.aa_n, d_semantic,
                                  d_semantic);
    out.pp_n = negative_loss_grad(batch.temporal, batch.temporal, mask, xi, w.pp_n, d_temporal,
                                  d_temporal);
    out.total = w.ap_p * out.ap_p + w.ap_n * out.ap_n + w.aa_n * out.aa_n + w.pp_n * out.pp_n;
    return out;
}

// ============================================================================
// Baselines
// ============================================================================

// InfoNCE with cosine similarity: mean over positives j of
// -log( e^{s_ij/tau} / (e^{s_ij/tau} + sum_k e^{s_ik/tau}) ).
double info_nce(const MatD& features, int anchor, const std::vector<int>& positives,
                const std::vector<int>& negatives, double tau);

// -log(sigmoid(<a,p>)) - log(sigmoid(-<a,n>)) — the primitive the multi-level
// losses instantiate.
double triplet_loss(const std::vector<double>& a, const std::vector<double>& p,
                    const std::vector<double>& n);

// ============================================================================
// Optional row L2 normalization (config switch, default off)
// ============================================================================

template <class S>
struct RowNormCache {
    Matrix<S> input;
    std::vector<double> norms;
};

template <class S>
Matrix<S> l2_normalize_rows(const Matrix<S>& x, RowNormCache<S>& cache, double eps = 1e-12) {
    cache.input = x;
    cache.norms.assign(x.rows, 0.0);
    Matrix<S> y(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        const double n = std::sqrt(std::max(dot(x.row(i), x.row(i), x.cols), eps * eps));
        cache.norms[i] = n;
        for (int c = 0; c < x.cols; ++c)
            y.at(i, c) = static_cast<S>(static_cast<double>(x.at(i, c)) / n);
    }
    return y;
}

template <class S>
Matrix<S> l2_normalize_rows_backward(const Matrix<S>& dout, const RowNormCache<S>& cache) {
    Matrix<S> din(dout.rows, dout.cols);
    for (int i = 0; i < dout.rows; ++i) {
        const double n = cache.norms[i];
        const double inv = 1.0 / n;
        const double xg = dot(cache.input.row(i), dout.row(i), dout.cols);
        for (int c = 0; c < dout.cols; ++c) {
            const double x = static_cast<double>(cache.input.at(i, c));
            din.at(i, c) = static_cast<S>(inv * static_cast<double>(dout.at(i, c)) -
                                          x * xg * inv * inv * inv);
        }
    }
    return din;
}

}  // namespace contraseg::contrast
