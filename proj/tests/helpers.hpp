// Shared test utilities: independent loop-based loss oracles, finite
// difference gradient checking, and small data builders. Everything here is
// deliberately written the naive way, separate from the library kernels.

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "contraseg/contrast.hpp"
#include "contraseg/rng.hpp"

namespace testutil {

using contraseg::MatD;
using contraseg::Rng;

inline MatD random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
    MatD m(rows, cols);
    for (auto& x : m.v) x = scale * rng.normal();
    return m;
}

// --- naive oracles (direct formula transcription, no softplus tricks) -------

inline double naive_sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double oracle_positive_loss(const MatD& h, const MatD& x, double xi) {
    double acc = 0.0;
    for (int i = 0; i < h.rows; ++i) {
        double dot = 0.0;
        for (int c = 0; c < h.cols; ++c) dot += h.at(i, c) * x.at(i, c);
        acc += -std::log(naive_sigmoid(dot / xi));
    }
    return acc / h.rows;
}

inline double oracle_negative_loss(const MatD& a, const MatD& b,
                                   const contraseg::contrast::PairMask& mask, double xi) {
    double acc = 0.0;
    long pairs = 0;
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.rows; ++j) {
            if (!mask.at(i, j)) continue;
            ++pairs;
            double dot = 0.0;
            for (int c = 0; c < a.cols; ++c) dot += a.at(i, c) * b.at(j, c);
            acc += -std::log(naive_sigmoid(-dot / xi));
        }
    if (pairs == 0) return 0.0;
    return acc / static_cast<double>(pairs);
}

inline double oracle_info_nce(const MatD& x, int anchor, const std::vector<int>& pos,
                              const std::vector<int>& neg, double tau) {
    auto cosine = [&](int i, int j) {
        double d = 0, ni = 0, nj = 0;
        for (int c = 0; c < x.cols; ++c) {
            d += x.at(i, c) * x.at(j, c);
            ni += x.at(i, c) * x.at(i, c);
            nj += x.at(j, c) * x.at(j, c);
        }
        return d / (std::sqrt(ni) * std::sqrt(nj));
    };
    double acc = 0.0;
    for (int j : pos) {
        double denom = std::exp(cosine(anchor, j) / tau);
        for (int k : neg) denom += std::exp(cosine(anchor, k) / tau);
        acc += -std::log(std::exp(cosine(anchor, j) / tau) / denom);
    }
    return acc / static_cast<double>(pos.size());
}

inline double oracle_triplet(const std::vector<double>& a, const std::vector<double>& p,
                             const std::vector<double>& n) {
    double dp = 0, dn = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dp += a[i] * p[i];
        dn += a[i] * n[i];
    }
    return -std::log(naive_sigmoid(dp)) - std::log(naive_sigmoid(-dn));
}

// --- finite differences -----------------------------------------------------

// Central-difference gradient of f at x, one coordinate at a time.
inline double central_diff(const std::function<double()>& f, double& slot, double h = 1e-6) {
    const double saved = slot;
    slot = saved + h;
    const double fp = f();
    slot = saved - h;
    const double fm = f();
    slot = saved;
    return (fp - fm) / (2.0 * h);
}

// Relative error with a floor so exact zeros compare cleanly.
inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    return std::abs(analytic - numeric) / denom;
}

}  // namespace testutil
