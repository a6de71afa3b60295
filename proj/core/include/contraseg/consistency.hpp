// Neighbourhood-consistency unit: samples same-/different-label windows
// around anchor frames and scores pooled window pairs with a small MLP.
// Same-label neighbourhoods are pushed toward score 1, different-label
// neighbourhoods toward 0, which penalizes fragmented predictions.

#pragma once

#include <vector>

#include "contraseg/models.hpp"
#include "contraseg/rng.hpp"

namespace contraseg::consistency {

template <class S>
struct Window {
    Matrix<S> frames;  // [W x D]
    int center = 0;    // frame index in the source sequence
};

template <class S>
struct NeighbourhoodSample {
    std::vector<Window<S>> anchors;                 // K windows (possibly fewer; see below)
    std::vector<std::vector<Window<S>>> positives;  // per anchor, M same-label windows
    std::vector<std::vector<Window<S>>> negatives;  // per anchor, M different-label windows
    int window = 0;

    bool empty() const { return anchors.empty(); }
};

// Valid center range for a length-W half-open window [t - W/2, t + W/2).
inline int min_center(int window) { return window / 2; }
inline int max_center(int frames, int window) { return frames - window / 2; }

// Draw K anchors uniformly from the valid range; for each, M same-label and
// M different-label partner centers (without replacement when the candidate
// pool is large enough, with replacement otherwise). An anchor whose
// different-label pool is empty is redrawn up to 10 times; if any anchor slot
// cannot be filled the sequence contributes nothing this step.
template <class S>
NeighbourhoodSample<S> sample_neighbourhoods(const Matrix<S>& x, const std::vector<int>& labels,
                                             int window, int num_anchors, int num_partners,
                                             Rng& rng) {
    const int t_len = x.rows;
    if (t_len < window)
        throw DataError("sequence of " + std::to_string(t_len) + " frames is shorter than window " +
                        std::to_string(window));
    if (static_cast<int>(labels.size()) != t_len)
        throw DataError("labels/frames mismatch in neighbourhood sampling");

    const int lo = min_center(window);
    const int hi = max_center(t_len, window);

    auto cut = [&](int center) {
        Window<S> w;
        w.center = center;
        w.frames = Matrix<S>(window, x.cols);
        const int start = center - window / 2;
        for (int r = 0; r < window; ++r)
            std::copy(x.row(start + r), x.row(start + r) + x.cols, w.frames.row(r));
        return w;
    };

    auto draw_partners = [&](const std::vector<int>& pool, int m) {
        std::vector<int> centers;
        centers.reserve(m);
        if (static_cast<int>(pool.size()) >= m) {
            std::vector<int> picks =
                rng.sample_without_replacement(static_cast<int>(pool.size()), m);
            for (int p : picks) centers.push_back(pool[p]);
        } else {
            for (int i = 0; i < m; ++i)
                centers.push_back(
                    pool[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))]);
        }
        return centers;
    };

    NeighbourhoodSample<S> out;
    out.window = window;
    for (int a = 0; a < num_anchors; ++a) {
        bool placed = false;
        for (int attempt = 0; attempt < 10 && !placed; ++attempt) {
            const int center = static_cast<int>(rng.uniform_int(lo, hi));
            if (labels[center] < 0) continue;  // filtered pseudo-label
            std::vector<int> same, diff;
            for (int c = lo; c <= hi; ++c) {
                if (labels[c] < 0) continue;
                (labels[c] == labels[center] ? same : diff).push_back(c);
            }
            if (same.empty() || diff.empty()) continue;

            out.anchors.push_back(cut(center));
            std::vector<Window<S>> pos, neg;
            for (int c : draw_partners(same, num_partners)) pos.push_back(cut(c));
            for (int c : draw_partners(diff, num_partners)) neg.push_back(cut(c));
            out.positives.push_back(std::move(pos));
            out.negatives.push_back(std::move(neg));
            placed = true;
        }
        if (!placed) return NeighbourhoodSample<S>{};  // degenerate sequence
    }
    return out;
}

// Per-dimension max over the window's frames; argmax rows for the backward.
template <class S>
void max_pool_window(const Matrix<S>& w, std::vector<S>& pooled, std::vector<int>& argmax) {
    pooled.assign(w.cols, S(0));
    argmax.assign(w.cols, 0);
    for (int c = 0; c < w.cols; ++c) {
        S best = w.at(0, c);
        int best_r = 0;
        for (int r = 1; r < w.rows; ++r)
            if (w.at(r, c) > best) {
                best = w.at(r, c);
                best_r = r;
            }
        pooled[c] = best;
        argmax[c] = best_r;
    }
}

// Probability that two windows share a feature distribution.
template <class S>
double consistency_score(nn::ConsistencyScorer<S>& scorer, const Matrix<S>& n1,
                         const Matrix<S>& n2) {
    if (n1.rows != n2.rows || n1.cols != n2.cols)
        throw DataError("consistency_score: window shape mismatch");
    std::vector<S> p1, p2;
    std::vector<int> a1, a2;
    max_pool_window(n1, p1, a1);
    max_pool_window(n2, p2, a2);
    Matrix<S> pair(1, 2 * n1.cols);
    std::copy(p1.begin(), p1.end(), pair.row(0));
    std::copy(p2.begin(), p2.end(), pair.row(0) + n1.cols);
    return scorer.score(pair);
}

// -(1/(K*M)) sum_i sum_j [ log G(anchor_i, pos_ij) + log(1 - G(anchor_i, neg_ij)) ]
// where K*M counts the pairs actually sampled; 0 for empty samples.
template <class S>
double consistency_loss(nn::ConsistencyScorer<S>& scorer, const NeighbourhoodSample<S>& sample) {
    if (sample.empty()) return 0.0;
    const int k = static_cast<int>(sample.anchors.size());
    const int m = static_cast<int>(sample.positives[0].size());
    double acc = 0.0;
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < m; ++j) {
            const double g_pos =
                consistency_score(scorer, sample.anchors[i].frames, sample.positives[i][j].frames);
            const double g_neg =
                consistency_score(scorer, sample.anchors[i].frames, sample.negatives[i][j].frames);
            acc += -std::log(g_pos) - std::log1p(-g_neg);
        }
    }
    return acc / (static_cast<double>(k) * m);
}

// Loss plus gradients: scorer parameter gradients accumulate inside the
// scorer; window-content gradients are scattered into d_x (the [T x D]
// gradient of the source sequence) through the max-pool argmax routing.
template <class S>
double consistency_loss_grad(nn::ConsistencyScorer<S>& scorer,
                             const NeighbourhoodSample<S>& sample, double weight,
                             Matrix<S>* d_x) {
    if (sample.empty()) return 0.0;
    const int k = static_cast<int>(sample.anchors.size());
    const int m = static_cast<int>(sample.positives[0].size());
    const int d = sample.anchors[0].frames.cols;
    const int pairs = 2 * k * m;

    // Batch every (anchor, partner) pooled pair into one scorer pass:
    // rows [0, k*m) are positive pairs, rows [k*m, 2*k*m) negative pairs.
    Matrix<S> pooled(pairs, 2 * d);
    std::vector<std::vector<int>> arg_a(pairs), arg_p(pairs);
    std::vector<const Window<S>*> win_a(pairs), win_p(pairs);

    std::vector<S> buf;
    int row = 0;
    for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i < k; ++i) {
            const auto& partners = pass == 0 ? sample.positives[i] : sample.negatives[i];
            for (int j = 0; j < m; ++j) {
                max_pool_window(sample.anchors[i].frames, buf, arg_a[row]);
                std::copy(buf.begin(), buf.end(), pooled.row(row));
                max_pool_window(partners[j].frames, buf, arg_p[row]);
                std::copy(buf.begin(), buf.end(), pooled.row(row) + d);
                win_a[row] = &sample.anchors[i];
                win_p[row] = &partners[j];
                ++row;
            }
        }
    }

    Matrix<S> logits = scorer.forward_logits(pooled, true);

    const double inv = 1.0 / (static_cast<double>(k) * m);
    double loss = 0.0;
    Matrix<S> dlogits(pairs, 1);
    for (int r = 0; r < pairs; ++r) {
        const double z = static_cast<double>(logits.v[r]);
        if (r < k * m) {
            loss += softplus(-z);  // -log G
            dlogits.v[r] = static_cast<S>(weight * inv * (-sigmoid(-z)));
        } else {
            loss += softplus(z);  // -log(1 - G)
            dlogits.v[r] = static_cast<S>(weight * inv * sigmoid(z));
        }
    }
    loss *= inv;

    Matrix<S> dpooled = scorer.backward(dlogits);

    if (d_x) {
        const int w = sample.window;
        for (int r = 0; r < pairs; ++r) {
            const int start_a = win_a[r]->center - w / 2;
            const int start_p = win_p[r]->center - w / 2;
            for (int c = 0; c < d; ++c) {
                d_x->at(start_a + arg_a[r][c], c) += dpooled.at(r, c);
                d_x->at(start_p + arg_p[r][c], c) += dpooled.at(r, d + c);
            }
        }
    }
    return loss;
}

}  // namespace contraseg::consistency
