#include "contraseg/contrast.hpp"

#include <algorithm>
#include <cmath>

namespace contraseg::contrast {

namespace {

double sq_dist(const double* a, const double* b, int d) {
    double acc = 0.0;
    for (int i = 0; i < d; ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return acc;
}

}  // namespace

ClusterAssignment kmeans(const MatD& points, int k, Rng& rng, int max_iters, double tol) {
    const int n = points.rows;
    const int d = points.cols;
    if (n < k)
        throw DataError("kmeans: " + std::to_string(n) + " points for k=" + std::to_string(k));
    if (k < 1) throw DataError("kmeans: k must be >= 1");

    // k-means++ seeding.
    MatD centroids(k, d);
    std::vector<double> min_dist(n, 0.0);
    {
        const int first = static_cast<int>(rng.uniform_int(0, n - 1));
        std::copy(points.row(first), points.row(first) + d, centroids.row(0));
        for (int i = 0; i < n; ++i) min_dist[i] = sq_dist(points.row(i), centroids.row(0), d);
        for (int c = 1; c < k; ++c) {
            double total = 0.0;
            for (double x : min_dist) total += x;
            int chosen;
            if (total <= 0.0) {
                chosen = static_cast<int>(rng.uniform_int(0, n - 1));
            } else {
                const double u = rng.uniform() * total;
                double acc = 0.0;
                chosen = n - 1;
                for (int i = 0; i < n; ++i) {
                    acc += min_dist[i];
                    if (u < acc) {
                        chosen = i;
                        break;
                    }
                }
            }
            std::copy(points.row(chosen), points.row(chosen) + d, centroids.row(c));
            for (int i = 0; i < n; ++i)
                min_dist[i] = std::min(min_dist[i], sq_dist(points.row(i), centroids.row(c), d));
        }
    }

    std::vector<int> labels(n, 0);
    std::vector<int> counts(k, 0);
    MatD next(k, d);

    auto assign = [&]() {
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(points.row(i), centroids.row(0), d);
            for (int c = 1; c < k; ++c) {
                const double dist = sq_dist(points.row(i), centroids.row(c), d);
                if (dist < best_d) {  // ties keep the lower cluster id
                    best_d = dist;
                    best = c;
                }
            }
            labels[i] = best;
        }
    };

    for (int iter = 0; iter < max_iters; ++iter) {
        assign();

        next.fill(0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) {
            ++counts[labels[i]];
            const double* p = points.row(i);
            double* c = next.row(labels[i]);
            for (int j = 0; j < d; ++j) c[j] += p[j];
        }

        // Reseed empty clusters to the point farthest from its own centroid.
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            int far = 0;
            double far_d = -1.0;
            for (int i = 0; i < n; ++i) {
                if (counts[labels[i]] <= 1) continue;  // donor cluster must stay populated
                const double dist = sq_dist(points.row(i), centroids.row(labels[i]), d);
                if (dist > far_d) {
                    far_d = dist;
                    far = i;
                }
            }
            --counts[labels[far]];
            double* donor = next.row(labels[far]);
            const double* p = points.row(far);
            for (int j = 0; j < d; ++j) donor[j] -= p[j];
            labels[far] = c;
            counts[c] = 1;
            std::copy(p, p + d, next.row(c));
        }

        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            double* ct = next.row(c);
            for (int j = 0; j < d; ++j) ct[j] /= counts[c];
            shift = std::max(shift, std::sqrt(sq_dist(ct, centroids.row(c), d)));
        }
        centroids.v.swap(next.v);
        if (shift < tol) break;
    }

    // Final assignment pass so every point sits with its nearest centroid.
    assign();

    ClusterAssignment out;
    out.labels = std::move(labels);
    out.centroids = std::move(centroids);
    out.inertia = 0.0;
    for (int i = 0; i < n; ++i)
        out.inertia += sq_dist(points.row(i), out.centroids.row(out.labels[i]), d);
    return out;
}

PairMask label_mask(const std::vector<int>& labels) {
    const int n = static_cast<int>(labels.size());
    PairMask mask(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) mask.at(i, j) = labels[i] == labels[j] ? 1 : 0;
    return mask;
}

PairMask intersect_disagreement_mask(const std::vector<int>& input_labels,
                                     const std::vector<int>& temporal_labels,
                                     const std::vector<int>& semantic_labels) {
    const int n = static_cast<int>(input_labels.size());
    if (static_cast<int>(temporal_labels.size()) != n ||
        static_cast<int>(semantic_labels.size()) != n)
        throw DataError("intersect_disagreement_mask: view length mismatch");
    PairMask mask(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            mask.at(i, j) = (input_labels[i] != input_labels[j] &&
                             temporal_labels[i] != temporal_labels[j] &&
                             semantic_labels[i] != semantic_labels[j])
                                ? 1
                                : 0;
    return mask;
}

PairMask supervised_mask(const std::vector<int>& labels) {
    const int n = static_cast<int>(labels.size());
    PairMask mask(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            mask.at(i, j) = (labels[i] >= 0 && labels[j] >= 0 && labels[i] != labels[j]) ? 1 : 0;
    return mask;
}

double info_nce(const MatD& features, int anchor, const std::vector<int>& positives,
                const std::vector<int>& negatives, double tau) {
    if (positives.empty()) throw DataError("info_nce: empty positive set");
    const int d = features.cols;

    auto cosine = [&](int i, int j) {
        const double na = std::sqrt(std::max(dot(features.row(i), features.row(i), d), 1e-24));
        const double nb = std::sqrt(std::max(dot(features.row(j), features.row(j), d), 1e-24));
        return dot(features.row(i), features.row(j), d) / (na * nb);
    };

    // -log softmax via logsumexp over {positive} + negatives.
    double acc = 0.0;
    for (int j : positives) {
        const double s_pos = cosine(anchor, j) / tau;
        double max_z = s_pos;
        std::vector<double> zs;
        zs.reserve(negatives.size());
        for (int kk : negatives) {
            zs.push_back(cosine(anchor, kk) / tau);
            max_z = std::max(max_z, zs.back());
        }
        double denom = std::exp(s_pos - max_z);
        for (double z : zs) denom += std::exp(z - max_z);
        acc += -(s_pos - max_z) + std::log(denom);
    }
    return acc / static_cast<double>(positives.size());
}

double triplet_loss(const std::vector<double>& a, const std::vector<double>& p,
                    const std::vector<double>& n) {
    if (a.size() != p.size() || a.size() != n.size())
        throw DataError("triplet_loss: dimension mismatch");
    const int d = static_cast<int>(a.size());
    return neg_log_sigmoid(dot(a.data(), p.data(), d)) +
           softplus(dot(a.data(), n.data(), d));
}

}  // namespace contraseg::contrast
