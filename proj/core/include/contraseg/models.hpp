// The four differentiable networks:
//   TemporalEncoder    — encoder/decoder temporal conv net with multi-
//                        resolution fusion (long receptive field)
//   SemanticEncoder    — per-frame MLP, no temporal mixing
//   FrameClassifier    — one affine map per frame
//   ConsistencyScorer  — MLP over a pooled window pair, sigmoid output

#pragma once

#include <vector>

#include "contraseg/config.hpp"
#include "contraseg/layers.hpp"

namespace contraseg::nn {

// ============================================================================
// Temporal encoder: `depth` conv+pool stages down, `depth` upsample+conv
// stages back up; every decoder stage is upsampled to full length,
// concatenated, and projected to the embedding dimension.
// ============================================================================
template <class S>
class TemporalEncoder {
public:
    void init(const ExperimentConfig& cfg, Rng rng) {
        depth_ = cfg.encoder_depth;
        hidden_ = cfg.encoder_hidden;
        in_dim_ = cfg.feature_dim;
        out_dim_ = cfg.embedding_dim;
        enc_.resize(depth_);
        dec_.resize(depth_);
        for (int s = 0; s < depth_; ++s) {
            Rng r = rng.derive("enc", static_cast<uint64_t>(s));
            enc_[s].init("temporal.enc" + std::to_string(s), s == 0 ? in_dim_ : hidden_, hidden_, 3,
                         r);
            Rng r2 = rng.derive("dec", static_cast<uint64_t>(s));
            dec_[s].init("temporal.dec" + std::to_string(s), hidden_, hidden_, 3, r2);
        }
        Rng r3 = rng.derive("proj");
        proj_.init("temporal.proj", depth_ * hidden_, out_dim_, r3);
    }

    int out_dim() const { return out_dim_; }
    int depth() const { return depth_; }

    // Frames a single input frame can influence: conv spread accumulated over
    // all encoder/decoder levels plus pooling alignment slack.
    int receptive_radius() const { return 4 << depth_; }

    Tensor3<S> forward(const Tensor3<S>& v, bool cache = true) {
        if (v.c != in_dim_)
            throw DataError("temporal encoder expects " + std::to_string(in_dim_) +
                            " input channels, got " + std::to_string(v.c));
        t_orig_ = v.t;
        const int mult = 1 << depth_;
        Tensor3<S> cur = pad_to_multiple(v, mult);
        t_padded_ = cur.t;

        enc_out_.assign(depth_, {});
        for (int s = 0; s < depth_; ++s) {
            Tensor3<S> a = enc_[s].forward(cur, cache);
            enc_out_[s] = relu(a);
            cur = avg_pool2(enc_out_[s]);
        }

        dec_out_.assign(depth_, {});
        for (int s = depth_ - 1; s >= 0; --s) {
            Tensor3<S> up = upsample_repeat(cur, 2);
            Tensor3<S> a = dec_[s].forward(up, cache);
            dec_out_[s] = relu(a);
            cur = dec_out_[s];
        }

        // Fuse decoder taps at full (padded) length.
        Tensor3<S> fused(v.n, t_padded_, depth_ * hidden_);
        for (int s = 0; s < depth_; ++s) {
            const Tensor3<S> up = s == 0 ? dec_out_[s] : upsample_repeat(dec_out_[s], 1 << s);
            for (int nv = 0; nv < v.n; ++nv)
                for (int t = 0; t < t_padded_; ++t)
                    std::copy(up.frame(nv, t), up.frame(nv, t) + hidden_,
                              fused.frame(nv, t) + static_cast<size_t>(s) * hidden_);
        }

        Matrix<S> flat = flatten_frames(fused);
        Matrix<S> proj = proj_.forward(flat, cache);
        Tensor3<S> out = unflatten_frames(proj, v.n, t_padded_);

        if (t_padded_ != t_orig_) {
            Tensor3<S> cropped(v.n, t_orig_, out_dim_);
            for (int nv = 0; nv < v.n; ++nv)
                for (int t = 0; t < t_orig_; ++t)
                    std::copy(out.frame(nv, t), out.frame(nv, t) + out_dim_,
                              cropped.frame(nv, t));
            return cropped;
        }
        return out;
    }

    Tensor3<S> backward(const Tensor3<S>& dout) {
        // Undo the crop.
        Tensor3<S> dproj_out(dout.n, t_padded_, out_dim_, S(0));
        for (int nv = 0; nv < dout.n; ++nv)
            for (int t = 0; t < dout.t; ++t)
                std::copy(dout.frame(nv, t), dout.frame(nv, t) + out_dim_,
                          dproj_out.frame(nv, t));

        Matrix<S> dflat = proj_.backward(flatten_frames(dproj_out));
        Tensor3<S> dfused = unflatten_frames(dflat, dout.n, t_padded_);

        // Split fused gradient back into per-stage taps.
        std::vector<Tensor3<S>> dtap(depth_);
        for (int s = 0; s < depth_; ++s) {
            Tensor3<S> full(dout.n, t_padded_, hidden_);
            for (int nv = 0; nv < dout.n; ++nv)
                for (int t = 0; t < t_padded_; ++t)
                    std::copy(dfused.frame(nv, t) + static_cast<size_t>(s) * hidden_,
                              dfused.frame(nv, t) + static_cast<size_t>(s + 1) * hidden_,
                              full.frame(nv, t));
            dtap[s] = s == 0 ? std::move(full) : upsample_repeat_backward(full, 1 << s);
        }

        // Decoder chain: stage 0 is the last one applied.
        Tensor3<S> dcur(dout.n, t_padded_, hidden_, S(0));
        for (int s = 0; s < depth_; ++s) {
            for (size_t i = 0; i < dcur.v.size(); ++i) dcur.v[i] += dtap[s].v[i];
            Tensor3<S> da = relu_backward(dcur, dec_out_[s]);
            Tensor3<S> dup = dec_[s].backward(da);
            dcur = upsample_repeat_backward(dup, 2);
        }

        // Encoder chain in reverse.
        for (int s = depth_ - 1; s >= 0; --s) {
            Tensor3<S> dpool = avg_pool2_backward(dcur);
            Tensor3<S> da = relu_backward(dpool, enc_out_[s]);
            dcur = enc_[s].backward(da);
        }

        return pad_to_multiple_backward(dcur, t_orig_);
    }

    std::vector<Param<S>*> params() {
        std::vector<Param<S>*> out;
        for (auto& c : enc_)
            for (auto* p : c.params()) out.push_back(p);
        for (auto& c : dec_)
            for (auto* p : c.params()) out.push_back(p);
        for (auto* p : proj_.params()) out.push_back(p);
        return out;
    }

private:
    int depth_ = 0, hidden_ = 0, in_dim_ = 0, out_dim_ = 0;
    int t_orig_ = 0, t_padded_ = 0;
    std::vector<Conv1d<S>> enc_, dec_;
    Dense<S> proj_;
    std::vector<Tensor3<S>> enc_out_, dec_out_;
};

// ============================================================================
// Semantic encoder: per-frame MLP (hidden ReLU layers, linear head)
// ============================================================================
template <class S>
class SemanticEncoder {
public:
    void init(const ExperimentConfig& cfg, Rng rng) {
        in_dim_ = cfg.feature_dim;
        out_dim_ = cfg.embedding_dim;
        hidden_.resize(cfg.semantic_layers);
        for (int l = 0; l < cfg.semantic_layers; ++l) {
            Rng r = rng.derive("hidden", static_cast<uint64_t>(l));
            hidden_[l].init("semantic.h" + std::to_string(l),
                            l == 0 ? in_dim_ : cfg.semantic_hidden, cfg.semantic_hidden, r);
        }
        Rng r = rng.derive("head");
        head_.init("semantic.head", cfg.semantic_hidden, out_dim_, r);
    }

    Tensor3<S> forward(const Tensor3<S>& v, bool cache = true) {
        if (v.c != in_dim_)
            throw DataError("semantic encoder expects " + std::to_string(in_dim_) +
                            " input channels, got " + std::to_string(v.c));
        Matrix<S> cur = flatten_frames(v);
        acts_.clear();
        for (auto& layer : hidden_) {
            cur = relu(layer.forward(cur, cache));
            if (cache) acts_.push_back(cur);
        }
        Matrix<S> out = head_.forward(cur, cache);
        return unflatten_frames(out, v.n, v.t);
    }

    Tensor3<S> backward(const Tensor3<S>& dout) {
        Matrix<S> dcur = head_.backward(flatten_frames(dout));
        for (int l = static_cast<int>(hidden_.size()) - 1; l >= 0; --l) {
            dcur = relu_backward(dcur, acts_[l]);
            dcur = hidden_[l].backward(dcur);
        }
        return unflatten_frames(dcur, dout.n, dout.t);
    }

    std::vector<Param<S>*> params() {
        std::vector<Param<S>*> out;
        for (auto& l : hidden_)
            for (auto* p : l.params()) out.push_back(p);
        for (auto* p : head_.params()) out.push_back(p);
        return out;
    }

private:
    int in_dim_ = 0, out_dim_ = 0;
    std::vector<Dense<S>> hidden_;
    Dense<S> head_;
    std::vector<Matrix<S>> acts_;
};

// ============================================================================
// Frame classifier: a single affine map per frame
// ============================================================================
template <class S>
class FrameClassifier {
public:
    void init(const ExperimentConfig& cfg, int num_classes, Rng rng) {
        layer_.init("classifier", cfg.embedding_dim, num_classes, rng);
    }

    int num_classes() const { return layer_.out_dim(); }

    Tensor3<S> forward(const Tensor3<S>& x, bool cache = true) {
        Matrix<S> out = layer_.forward(flatten_frames(x), cache);
        return unflatten_frames(out, x.n, x.t);
    }

    Tensor3<S> backward(const Tensor3<S>& dout) {
        Matrix<S> din = layer_.backward(flatten_frames(dout));
        return unflatten_frames(din, dout.n, dout.t);
    }

    std::vector<Param<S>*> params() { return layer_.params(); }

private:
    Dense<S> layer_;
};

// ============================================================================
// Consistency scorer: MLP over the concatenation of two max-pooled windows;
// sigmoid keeps the output strictly inside (0, 1).
// ============================================================================
template <class S>
class ConsistencyScorer {
public:
    void init(const ExperimentConfig& cfg, Rng rng) {
        Rng r1 = rng.derive("hidden");
        hidden_.init("scorer.h", 2 * cfg.embedding_dim, cfg.scorer_hidden, r1);
        Rng r2 = rng.derive("head");
        head_.init("scorer.head", cfg.scorer_hidden, 1, r2);
    }

    int in_dim() const { return hidden_.in_dim(); }

    // Pre-sigmoid logits for a batch of pooled pairs (rows of size 2D).
    Matrix<S> forward_logits(const Matrix<S>& pooled_pairs, bool cache = true) {
        if (pooled_pairs.cols != hidden_.in_dim())
            throw DataError("scorer expects rows of size " + std::to_string(hidden_.in_dim()) +
                            ", got " + std::to_string(pooled_pairs.cols));
        act_ = relu(hidden_.forward(pooled_pairs, cache));
        return head_.forward(act_, cache);
    }

    double score(const Matrix<S>& pooled_pair) {
        Matrix<S> logit = forward_logits(pooled_pair, false);
        return sigmoid(static_cast<double>(logit.v[0]));
    }

    Matrix<S> backward(const Matrix<S>& dlogits) {
        Matrix<S> dact = head_.backward(dlogits);
        dact = relu_backward(dact, act_);
        return hidden_.backward(dact);
    }

    std::vector<Param<S>*> params() {
        std::vector<Param<S>*> out;
        for (auto* p : hidden_.params()) out.push_back(p);
        for (auto* p : head_.params()) out.push_back(p);
        return out;
    }

private:
    Dense<S> hidden_;
    Dense<S> head_;
    Matrix<S> act_;
};

}  // namespace contraseg::nn
