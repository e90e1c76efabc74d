#pragma once

// Fixed-shape neural building blocks with exact reverse-mode gradients:
// Dense + LayerNorm + Swish + Dropout stacks, Hadamard fusion or per-channel
// dot-product coupling, an MLP decoder, AdamW, standardization and
// MC-dropout inference. All parameters live in one flat vector so the
// optimizer, checkpointing and finite-difference checks stay trivial.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "shockfusion/common.hpp"

namespace shockfusion::nn {

enum class Activation { swish, identity };
enum class FusionVariant { hadamard_fusion, dot_product };
enum class Mode { train, infer, mc_dropout };

struct BlockSpec {
    int in_dim = 0;
    int out_dim = 0;
    double dropout_rate = 0.0;
    bool has_layernorm = true;
    Activation activation = Activation::swish;

    void validate() const {
        if (in_dim < 1 || out_dim < 1) throw ConfigError("block dims must be positive");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0)
            throw ConfigError("dropout rate must lie in [0,1)");
    }
};

struct ArchitectureSpec {
    FusionVariant variant = FusionVariant::hadamard_fusion;
    std::vector<BlockSpec> branch_blocks;
    std::vector<BlockSpec> trunk_blocks;
    int fusion_dim = 0;
    std::vector<BlockSpec> decoder_blocks;  // unused by dot_product
    int out_dim = 0;

    void validate() const {
        if (branch_blocks.empty() || trunk_blocks.empty())
            throw ConfigError("branch and trunk stacks must be non-empty");
        if (fusion_dim < 1 || out_dim < 1) throw ConfigError("fusion/out dims must be positive");
        auto check_chain = [](const std::vector<BlockSpec>& blocks, const char* name) {
            for (std::size_t i = 0; i < blocks.size(); ++i) {
                blocks[i].validate();
                if (i > 0 && blocks[i].in_dim != blocks[i - 1].out_dim)
                    throw ConfigError(std::string(name) + ": block dims do not chain");
            }
        };
        check_chain(branch_blocks, "branch");
        check_chain(trunk_blocks, "trunk");
        if (trunk_blocks.back().out_dim != fusion_dim)
            throw ConfigError("trunk must end at the fusion width");
        if (variant == FusionVariant::hadamard_fusion) {
            if (branch_blocks.back().out_dim != fusion_dim)
                throw ConfigError("branch must end at the fusion width");
            check_chain(decoder_blocks, "decoder");
            if (decoder_blocks.empty() || decoder_blocks.front().in_dim != fusion_dim ||
                decoder_blocks.back().out_dim != out_dim)
                throw ConfigError("decoder must map the fusion width to out_dim");
        } else {
            if (branch_blocks.back().out_dim != fusion_dim * out_dim)
                throw ConfigError("dot-product branch must end at fusion_dim * out_dim");
        }
    }
};

/// Fusion stack used throughout: widths 64/96/128, LayerNorm + Swish +
/// Dropout in each hidden block, plain linear decoder head.
inline ArchitectureSpec make_fusion_spec(int trunk_in, int out_dim, double dropout,
                                         int fusion_dim = 128,
                                         std::vector<int> widths = {64, 96},
                                         std::vector<int> decoder_widths = {128}) {
    ArchitectureSpec spec;
    spec.variant = FusionVariant::hadamard_fusion;
    spec.fusion_dim = fusion_dim;
    spec.out_dim = out_dim;
    auto stack = [&](int in) {
        std::vector<BlockSpec> blocks;
        int prev = in;
        for (int w : widths) {
            blocks.push_back({prev, w, dropout, true, Activation::swish});
            prev = w;
        }
        blocks.push_back({prev, fusion_dim, dropout, true, Activation::swish});
        return blocks;
    };
    spec.branch_blocks = stack(1);
    spec.trunk_blocks = stack(trunk_in);
    int prev = fusion_dim;
    for (int w : decoder_widths) {
        spec.decoder_blocks.push_back({prev, w, dropout, true, Activation::swish});
        prev = w;
    }
    spec.decoder_blocks.push_back({prev, out_dim, 0.0, false, Activation::identity});
    spec.validate();
    return spec;
}

/// Classical operator-network coupling: branch ends at fusion_dim * out_dim and each
/// output channel is an inner product against the trunk embedding.
inline ArchitectureSpec make_vanilla_spec(int trunk_in, int out_dim, double dropout,
                                          int fusion_dim = 128,
                                          std::vector<int> widths = {64, 96}) {
    ArchitectureSpec spec;
    spec.variant = FusionVariant::dot_product;
    spec.fusion_dim = fusion_dim;
    spec.out_dim = out_dim;
    auto stack = [&](int in, int final) {
        std::vector<BlockSpec> blocks;
        int prev = in;
        for (int w : widths) {
            blocks.push_back({prev, w, dropout, true, Activation::swish});
            prev = w;
        }
        blocks.push_back({prev, final, dropout, true, Activation::swish});
        return blocks;
    };
    spec.branch_blocks = stack(1, fusion_dim * out_dim);
    spec.trunk_blocks = stack(trunk_in, fusion_dim);
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// Standardizer
// ---------------------------------------------------------------------------

struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;  // floored at 1e-8

    static Standardizer fit(const Eigen::MatrixXd& rows) {
        if (rows.rows() < 2) throw ShapeMismatch("standardizer needs at least two rows");
        Standardizer s;
        s.mean = rows.colwise().mean();
        Eigen::MatrixXd centered = rows.rowwise() - s.mean.transpose();
        s.std = (centered.array().square().colwise().mean()).sqrt().matrix();
        for (Eigen::Index i = 0; i < s.std.size(); ++i) s.std[i] = std::max(s.std[i], 1e-8);
        return s;
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const {
        if (rows.cols() != mean.size()) throw ShapeMismatch("standardizer width mismatch");
        return (rows.rowwise() - mean.transpose()).array().rowwise() /
               std.transpose().array();
    }

    Eigen::MatrixXd invert(const Eigen::MatrixXd& rows) const {
        if (rows.cols() != mean.size()) throw ShapeMismatch("standardizer width mismatch");
        return (rows.array().rowwise() * std.transpose().array()).matrix().rowwise() +
               mean.transpose();
    }
};

// ---------------------------------------------------------------------------
// FusionModel
// ---------------------------------------------------------------------------

namespace detail {

struct DenseLayout {
    BlockSpec spec;
    int w_off = 0;      // (out x in) row-major within the flat vector
    int b_off = 0;      // out
    int gain_off = -1;  // out, LayerNorm gain (when present)
    int offset_off = -1;
};

struct BlockCache {
    Eigen::MatrixXd x;        // block input
    Eigen::MatrixXd xhat;     // LayerNorm-normalized rows (LN blocks only)
    Eigen::VectorXd inv_std;  // per-row inverse std (LN blocks only)
    Eigen::MatrixXd y;        // pre-activation
    Eigen::MatrixXd mask;     // inverted-dropout mask (empty when inactive)
};

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace detail

struct ForwardCache {
    std::vector<detail::BlockCache> branch, trunk, decoder;
    Eigen::MatrixXd branch_out, trunk_out;
    Eigen::Index batch = 0;
    bool train_mode = false;
    bool valid = false;
};

class FusionModel {
  public:
    ArchitectureSpec spec;
    Eigen::VectorXd params;
    Standardizer cond_std, trunk_std, out_std;  // fitted on the training split only
    std::uint64_t rng_seed = 0;

    FusionModel() = default;

    explicit FusionModel(ArchitectureSpec s) : spec(std::move(s)) {
        spec.validate();
        int cursor = 0;
        auto lay = [&](const std::vector<BlockSpec>& blocks) {
            std::vector<detail::DenseLayout> out;
            for (const auto& b : blocks) {
                detail::DenseLayout l;
                l.spec = b;
                l.w_off = cursor; cursor += b.out_dim * b.in_dim;
                l.b_off = cursor; cursor += b.out_dim;
                if (b.has_layernorm) {
                    l.gain_off = cursor; cursor += b.out_dim;
                    l.offset_off = cursor; cursor += b.out_dim;
                }
                out.push_back(l);
            }
            return out;
        };
        branch_ = lay(spec.branch_blocks);
        trunk_ = lay(spec.trunk_blocks);
        if (spec.variant == FusionVariant::hadamard_fusion) {
            decoder_ = lay(spec.decoder_blocks);
        } else {
            out_bias_off_ = cursor;
            cursor += spec.out_dim;
        }
        params = Eigen::VectorXd::Zero(cursor);
    }

    int parameter_count() const { return int(params.size()); }

    /// Glorot-uniform dense weights, zero biases, unit LayerNorm gains.
    void init_parameters(std::uint64_t seed) {
        rng_seed = seed;
        auto rng = make_rng(seed, "init");
        auto init_stack = [&](const std::vector<detail::DenseLayout>& stack) {
            for (const auto& l : stack) {
                const double limit = std::sqrt(6.0 / double(l.spec.in_dim + l.spec.out_dim));
                std::uniform_real_distribution<double> u(-limit, limit);
                for (int i = 0; i < l.spec.out_dim * l.spec.in_dim; ++i)
                    params[l.w_off + i] = u(rng);
                for (int i = 0; i < l.spec.out_dim; ++i) params[l.b_off + i] = 0.0;
                if (l.gain_off >= 0)
                    for (int i = 0; i < l.spec.out_dim; ++i) {
                        params[l.gain_off + i] = 1.0;
                        params[l.offset_off + i] = 0.0;
                    }
            }
        };
        init_stack(branch_);
        init_stack(trunk_);
        init_stack(decoder_);
        if (out_bias_off_ >= 0)
            for (int i = 0; i < spec.out_dim; ++i) params[out_bias_off_ + i] = 0.0;
    }

    bool has_stochastic_layers() const {
        auto any = [](const std::vector<BlockSpec>& blocks) {
            for (const auto& b : blocks)
                if (b.dropout_rate > 0.0) return true;
            return false;
        };
        return any(spec.branch_blocks) || any(spec.trunk_blocks) || any(spec.decoder_blocks);
    }

    /// Inputs are standardized batches (rows = samples). In train mode an rng
    /// is required for dropout masks and trunk input noise; infer mode is
    /// deterministic; mc_dropout keeps dropout active without input noise.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& cond, const Eigen::MatrixXd& trunk, Mode mode,
                            std::mt19937_64* rng = nullptr, ForwardCache* cache = nullptr,
                            double noise_std = 0.0) const {
        if (cond.rows() != trunk.rows()) throw ShapeMismatch("condition/trunk batch mismatch");
        if (cond.cols() != spec.branch_blocks.front().in_dim)
            throw ShapeMismatch("condition width does not match the branch input");
        if (trunk.cols() != spec.trunk_blocks.front().in_dim)
            throw ShapeMismatch("trunk feature width does not match the trunk input");
        const bool dropout_on = mode != Mode::infer;
        if (dropout_on && rng == nullptr && has_stochastic_layers())
            throw ShapeMismatch("stochastic forward requires an rng");

        ForwardCache local;
        ForwardCache& c = cache ? *cache : local;
        c.branch.clear(); c.trunk.clear(); c.decoder.clear();
        c.batch = cond.rows();
        c.train_mode = mode == Mode::train;
        c.valid = cache != nullptr && mode == Mode::train;

        Eigen::MatrixXd trunk_in = trunk;
        if (mode == Mode::train && noise_std > 0.0) {
            std::normal_distribution<double> g(0.0, noise_std);
            for (Eigen::Index i = 0; i < trunk_in.rows(); ++i)
                for (Eigen::Index j = 0; j < trunk_in.cols(); ++j) trunk_in(i, j) += g(*rng);
        }

        c.branch_out = run_stack(branch_, cond, dropout_on, rng, &c.branch);
        c.trunk_out = run_stack(trunk_, trunk_in, dropout_on, rng, &c.trunk);

        if (spec.variant == FusionVariant::hadamard_fusion) {
            Eigen::MatrixXd fused = c.branch_out.cwiseProduct(c.trunk_out);
            return run_stack(decoder_, fused, dropout_on, rng, &c.decoder);
        }
        // dot_product: out_k = <branch slice k, trunk embedding> + bias_k
        const int d = spec.fusion_dim;
        Eigen::MatrixXd out(c.batch, spec.out_dim);
        for (Eigen::Index n = 0; n < c.batch; ++n)
            for (int k = 0; k < spec.out_dim; ++k)
                out(n, k) = c.branch_out.row(n).segment(k * d, d).dot(c.trunk_out.row(n)) +
                            params[out_bias_off_ + k];
        return out;
    }

    /// Exact reverse-mode gradients for a train-mode forward cache.
    Eigen::VectorXd backward(const ForwardCache& cache, const Eigen::MatrixXd& dout) const {
        if (!cache.valid || !cache.train_mode)
            throw StaleCache("backward requires a cache from a train-mode forward");
        if (dout.rows() != cache.batch || dout.cols() != spec.out_dim)
            throw ShapeMismatch("output gradient shape mismatch");
        Eigen::VectorXd grads = Eigen::VectorXd::Zero(params.size());

        Eigen::MatrixXd d_branch, d_trunk;
        if (spec.variant == FusionVariant::hadamard_fusion) {
            Eigen::MatrixXd d_fused = backprop_stack(decoder_, cache.decoder, dout, grads);
            d_branch = d_fused.cwiseProduct(cache.trunk_out);
            d_trunk = d_fused.cwiseProduct(cache.branch_out);
        } else {
            const int d = spec.fusion_dim;
            d_branch = Eigen::MatrixXd::Zero(cache.batch, spec.branch_blocks.back().out_dim);
            d_trunk = Eigen::MatrixXd::Zero(cache.batch, d);
            for (Eigen::Index n = 0; n < cache.batch; ++n)
                for (int k = 0; k < spec.out_dim; ++k) {
                    const double g = dout(n, k);
                    d_branch.row(n).segment(k * d, d) += g * cache.trunk_out.row(n);
                    d_trunk.row(n) += g * cache.branch_out.row(n).segment(k * d, d);
                    grads[out_bias_off_ + k] += g;
                }
        }
        backprop_stack(branch_, cache.branch, d_branch, grads);
        backprop_stack(trunk_, cache.trunk, d_trunk, grads);
        return grads;
    }

    /// Physical-unit deterministic prediction from raw inputs.
    Eigen::MatrixXd predict(const Eigen::MatrixXd& cond_raw, const Eigen::MatrixXd& trunk_raw) const {
        return out_std.invert(forward(cond_std.apply(cond_raw), trunk_std.apply(trunk_raw),
                                      Mode::infer));
    }

  private:
    std::vector<detail::DenseLayout> branch_, trunk_, decoder_;
    int out_bias_off_ = -1;

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
    weight(const detail::DenseLayout& l) const {
        return {params.data() + l.w_off, l.spec.out_dim, l.spec.in_dim};
    }

    Eigen::MatrixXd run_stack(const std::vector<detail::DenseLayout>& stack,
                              const Eigen::MatrixXd& input, bool dropout_on, std::mt19937_64* rng,
                              std::vector<detail::BlockCache>* caches) const {
        Eigen::MatrixXd x = input;
        for (const auto& l : stack) {
            detail::BlockCache bc;
            bc.x = x;
            const auto W = weight(l);
            const auto b = params.segment(l.b_off, l.spec.out_dim);
            Eigen::MatrixXd h = x * W.transpose();
            h.rowwise() += b.transpose();
            if (l.spec.has_layernorm) {
                const auto gain = params.segment(l.gain_off, l.spec.out_dim);
                const auto offs = params.segment(l.offset_off, l.spec.out_dim);
                const Eigen::Index D = h.cols();
                bc.xhat.resize(h.rows(), D);
                bc.inv_std.resize(h.rows());
                for (Eigen::Index n = 0; n < h.rows(); ++n) {
                    const double mu = h.row(n).mean();
                    const double var = (h.row(n).array() - mu).square().mean();
                    const double inv = 1.0 / std::sqrt(var + 1e-12);
                    bc.inv_std[n] = inv;
                    bc.xhat.row(n) = (h.row(n).array() - mu) * inv;
                }
                bc.y = (bc.xhat.array().rowwise() * gain.transpose().array()).matrix();
                bc.y.rowwise() += offs.transpose();
            } else {
                bc.y = std::move(h);
            }
            Eigen::MatrixXd a;
            if (l.spec.activation == Activation::swish)
                a = bc.y.unaryExpr([](double z) { return z * detail::sigmoid(z); });
            else
                a = bc.y;
            if (dropout_on && l.spec.dropout_rate > 0.0) {
                const double keep = 1.0 - l.spec.dropout_rate;
                std::bernoulli_distribution coin(keep);
                bc.mask.resize(a.rows(), a.cols());
                for (Eigen::Index i = 0; i < a.rows(); ++i)
                    for (Eigen::Index j = 0; j < a.cols(); ++j)
                        bc.mask(i, j) = coin(*rng) ? 1.0 / keep : 0.0;
                a = a.cwiseProduct(bc.mask);
            }
            if (caches) caches->push_back(std::move(bc));
            x = std::move(a);
        }
        return x;
    }

    // Returns the gradient w.r.t. the stack input; accumulates parameter
    // gradients into `grads`.
    Eigen::MatrixXd backprop_stack(const std::vector<detail::DenseLayout>& stack,
                                   const std::vector<detail::BlockCache>& caches,
                                   Eigen::MatrixXd d_out, Eigen::VectorXd& grads) const {
        if (caches.size() != stack.size()) throw StaleCache("cache depth mismatch");
        for (std::size_t idx = stack.size(); idx-- > 0;) {
            const auto& l = stack[idx];
            const auto& bc = caches[idx];
            if (bc.mask.size() > 0) d_out = d_out.cwiseProduct(bc.mask);
            if (l.spec.activation == Activation::swish) {
                d_out = d_out.binaryExpr(bc.y, [](double g, double z) {
                    const double s = detail::sigmoid(z);
                    return g * s * (1.0 + z * (1.0 - s));
                });
            }
            Eigen::MatrixXd dh;
            if (l.spec.has_layernorm) {
                const auto gain = params.segment(l.gain_off, l.spec.out_dim);
                // gain/offset gradients
                Eigen::VectorXd dgain = (d_out.cwiseProduct(bc.xhat)).colwise().sum();
                Eigen::VectorXd doffs = d_out.colwise().sum();
                grads.segment(l.gain_off, l.spec.out_dim) += dgain;
                grads.segment(l.offset_off, l.spec.out_dim) += doffs;
                Eigen::MatrixXd dxhat =
                    (d_out.array().rowwise() * gain.transpose().array()).matrix();
                dh.resize(dxhat.rows(), dxhat.cols());
                const double D = double(dxhat.cols());
                for (Eigen::Index n = 0; n < dxhat.rows(); ++n) {
                    const double m1 = dxhat.row(n).sum() / D;
                    const double m2 = dxhat.row(n).cwiseProduct(bc.xhat.row(n)).sum() / D;
                    dh.row(n) = bc.inv_std[n] *
                                (dxhat.row(n).array() - m1 - bc.xhat.row(n).array() * m2);
                }
            } else {
                dh = std::move(d_out);
            }
            const auto W = weight(l);
            Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dW(
                grads.data() + l.w_off, l.spec.out_dim, l.spec.in_dim);
            dW += dh.transpose() * bc.x;
            grads.segment(l.b_off, l.spec.out_dim) += dh.colwise().sum();
            d_out = dh * W;
        }
        return d_out;
    }
};

// ---------------------------------------------------------------------------
// AdamW with global-norm gradient clipping (clip precedes the moment update,
// decay is decoupled from the adaptive step).
// ---------------------------------------------------------------------------

struct AdamW {
    double lr = 8e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 3e-4;
    double clipnorm = 1.0;  // <=0 disables clipping

    long step_count = 0;
    Eigen::VectorXd m, v;

    void step(Eigen::VectorXd& params, Eigen::VectorXd grads) {
        if (m.size() == 0) {
            m = Eigen::VectorXd::Zero(params.size());
            v = Eigen::VectorXd::Zero(params.size());
        }
        if (grads.size() != params.size() || m.size() != params.size())
            throw ShapeMismatch("optimizer state does not match the parameter vector");
        if (clipnorm > 0.0) {
            const double norm = grads.norm();
            if (norm > clipnorm) grads *= clipnorm / norm;
        }
        ++step_count;
        m = beta1 * m + (1.0 - beta1) * grads;
        v = beta2 * v.array() + (1.0 - beta2) * grads.array().square();
        const double bc1 = 1.0 - std::pow(beta1, double(step_count));
        const double bc2 = 1.0 - std::pow(beta2, double(step_count));
        params.array() -= lr * ((m.array() / bc1) / ((v.array() / bc2).sqrt() + eps) +
                                weight_decay * params.array());
    }
};

// ---------------------------------------------------------------------------
// MC-dropout inference
// ---------------------------------------------------------------------------

struct McDropoutResult {
    Eigen::MatrixXd mean;   // physical units
    Eigen::MatrixXd sigma;  // per-point sample standard deviation
};

inline McDropoutResult mc_dropout_predict(const FusionModel& model, const Eigen::MatrixXd& cond_raw,
                                          const Eigen::MatrixXd& trunk_raw, int n_samples,
                                          std::mt19937_64& rng) {
    if (n_samples < 2) throw ConfigError("MC dropout needs at least two samples");
    if (!model.has_stochastic_layers())
        throw NoStochasticLayers("all dropout rates are zero; the MC spread would be trivially 0");
    const Eigen::MatrixXd cond = model.cond_std.apply(cond_raw);
    const Eigen::MatrixXd trunk = model.trunk_std.apply(trunk_raw);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(cond.rows(), model.spec.out_dim);
    Eigen::MatrixXd sum_sq = sum;
    for (int s = 0; s < n_samples; ++s) {
        Eigen::MatrixXd pred =
            model.out_std.invert(model.forward(cond, trunk, Mode::mc_dropout, &rng));
        sum += pred;
        sum_sq += pred.cwiseProduct(pred);
    }
    McDropoutResult res;
    res.mean = sum / double(n_samples);
    Eigen::MatrixXd var =
        (sum_sq - double(n_samples) * res.mean.cwiseProduct(res.mean)) / double(n_samples - 1);
    res.sigma = var.cwiseMax(0.0).cwiseSqrt();
    return res;
}

}  // namespace shockfusion::nn
