#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgc/filter.hpp"
#include "lgc/parallel.hpp"

namespace lgc {

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// swish(x) = x * sigmoid(x)
inline double swish(double x) { return x * sigmoid(x); }

/// d/dx swish(x) = sigmoid(x) + x * sigmoid(x) * (1 - sigmoid(x))
inline double swish_derivative(double x) {
    const double s = sigmoid(x);
    return s + x * s * (1.0 - s);
}

enum class PoolMode { Max, Mean, Flatten };

inline std::string pool_name(PoolMode p) {
    switch (p) {
        case PoolMode::Max: return "max";
        case PoolMode::Mean: return "mean";
        case PoolMode::Flatten: return "flatten";
    }
    return "?";
}

inline PoolMode pool_from_name(const std::string& s) {
    if (s == "max") return PoolMode::Max;
    if (s == "mean") return PoolMode::Mean;
    if (s == "flatten") return PoolMode::Flatten;
    throw std::runtime_error("unknown pool mode '" + s + "'");
}

struct TrainConfig {
    std::size_t iterations = 100;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    std::size_t eval_every = 10;
};

struct AdamState {
    std::vector<double> m, v;
    std::size_t step = 0;
};

/// Standard Adam with bias correction; weight decay (when nonzero) enters as
/// a classic L2 gradient term.
inline void adam_step(std::vector<double>& params, const std::vector<double>& grads,
                      AdamState& state, const TrainConfig& cfg) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: shape mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: stale state");
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i] + cfg.weight_decay * params[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
}

/// Mean softmax cross-entropy over logit rows; fills dlogits (already divided
/// by the batch size) when requested.
inline double softmax_cross_entropy(const std::vector<double>& logits, std::size_t classes,
                                    const std::vector<int>& labels,
                                    std::vector<double>* dlogits = nullptr) {
    const std::size_t batch = labels.size();
    if (logits.size() != batch * classes)
        throw std::invalid_argument("softmax_cross_entropy: shape mismatch");
    if (dlogits) dlogits->assign(logits.size(), 0.0);
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = &logits[b * classes];
        const int label = labels[b];
        if (label < 0 || static_cast<std::size_t>(label) >= classes)
            throw std::invalid_argument("softmax_cross_entropy: label out of range");
        double mx = row[0];
        for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
        total += -(row[label] - mx - std::log(z));
        if (dlogits) {
            double* drow = &(*dlogits)[b * classes];
            for (std::size_t c = 0; c < classes; ++c)
                drow[c] = (std::exp(row[c] - mx) / z - (c == label ? 1.0 : 0.0)) /
                          static_cast<double>(batch);
        }
    }
    return total / static_cast<double>(batch);
}

struct FilterNetworkConfig {
    std::vector<std::size_t> widths{1, 8, 8}; // channels per stage; layers = size - 1
    std::size_t classes = 2;
    PoolMode pool = PoolMode::Max;
};

/// Stack of (group filter, swish) layers over one operator bank, followed by
/// pooling and a dense readout. Parameters live in one flat vector:
/// [layer coefficients ...][readout weights][readout bias].
///
/// The filter layers are evaluated through per-layer compiled tensors
/// M[i][j][co][ci] = sum_g a(g,ci,co) T_g[i,j]; coefficient gradients contract
/// the batch outer products PHI[i][j][co][ci] = sum_b dz_b[co][i] x_b[ci][j]
/// against the bank in a single element-major pass.
class FilterNetwork {
public:
    FilterNetwork(const OperatorBank& bank, FilterNetworkConfig cfg, Rng init_rng)
        : bank_(&bank), cfg_(std::move(cfg)), n_(bank.domain_size) {
        if (cfg_.widths.size() < 2)
            throw std::invalid_argument("FilterNetwork: need at least one layer");
        const std::size_t layers = cfg_.widths.size() - 1;
        const std::size_t e = bank.size();

        std::size_t offset = 0;
        for (std::size_t l = 0; l < layers; ++l) {
            LayerPlan plan;
            plan.ci = cfg_.widths[l];
            plan.co = cfg_.widths[l + 1];
            plan.offset = offset;
            offset += e * plan.ci * plan.co;
            plan.dense.assign(n_ * n_ * plan.ci * plan.co, 0.0);
            layers_.push_back(std::move(plan));
        }
        feature_dim_ = cfg_.pool == PoolMode::Flatten ? cfg_.widths.back() * n_ : cfg_.widths.back();
        readout_w_offset_ = offset;
        offset += cfg_.classes * feature_dim_;
        readout_b_offset_ = offset;
        offset += cfg_.classes;
        params_.assign(offset, 0.0);

        // fan-in uniform initialization; filter taps use 1/sqrt(E * C_in)
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const double s = 1.0 / std::sqrt(static_cast<double>(e * layers_[l].ci));
            const std::size_t count = e * layers_[l].ci * layers_[l].co;
            for (std::size_t i = 0; i < count; ++i)
                params_[layers_[l].offset + i] = init_rng.uniform(-s, s);
        }
        const double sw = 1.0 / std::sqrt(static_cast<double>(feature_dim_));
        for (std::size_t i = 0; i < cfg_.classes * feature_dim_; ++i)
            params_[readout_w_offset_ + i] = init_rng.uniform(-sw, sw);
        // readout bias stays zero
        dirty_ = true;
    }

    const OperatorBank& bank() const { return *bank_; }
    const FilterNetworkConfig& config() const { return cfg_; }
    std::size_t classes() const { return cfg_.classes; }
    std::size_t layer_count() const { return layers_.size(); }

    const std::vector<double>& parameters() const { return params_; }
    std::vector<double>& parameters() {
        dirty_ = true;
        return params_;
    }

    FilterCoefficients layer_coefficients(std::size_t l) const {
        const auto& plan = layers_.at(l);
        FilterCoefficients c(bank_->size(), plan.ci, plan.co);
        std::copy_n(params_.begin() + plan.offset, c.values.size(), c.values.begin());
        return c;
    }

    void set_layer_coefficients(std::size_t l, const FilterCoefficients& c) {
        auto& plan = layers_.at(l);
        if (c.elements != bank_->size() || c.in_channels != plan.ci || c.out_channels != plan.co)
            throw std::invalid_argument("set_layer_coefficients: shape mismatch");
        std::copy(c.values.begin(), c.values.end(), params_.begin() + plan.offset);
        dirty_ = true;
    }

    /// Logits for one input signal.
    std::vector<double> forward(const DiscreteSignal& f) const {
        ensure_compiled();
        Workspace ws;
        forward_sample(f, ws);
        return ws.logits;
    }

    /// Mean cross-entropy over the batch plus gradients for every parameter.
    double loss_and_grad(const std::vector<const DiscreteSignal*>& batch,
                         const std::vector<int>& labels, std::vector<double>& grad) const {
        if (batch.empty() || batch.size() != labels.size())
            throw std::invalid_argument("loss_and_grad: batch empty or label mismatch");
        ensure_compiled();
        const std::size_t bsize = batch.size();
        grad.assign(params_.size(), 0.0);

        std::vector<Workspace> ws(bsize);
        std::vector<double> logits(bsize * cfg_.classes);
        parallel_for(bsize, [&](std::size_t b) {
            forward_sample(*batch[b], ws[b]);
            std::copy(ws[b].logits.begin(), ws[b].logits.end(), &logits[b * cfg_.classes]);
        });

        std::vector<double> dlogits;
        const double loss = softmax_cross_entropy(logits, cfg_.classes, labels, &dlogits);

        parallel_for(bsize, [&](std::size_t b) {
            backward_sample(ws[b], &dlogits[b * cfg_.classes]);
        });

        // readout gradients, accumulated in fixed batch order
        double* gw = &grad[readout_w_offset_];
        double* gb = &grad[readout_b_offset_];
        for (std::size_t b = 0; b < bsize; ++b) {
            const double* dl = &dlogits[b * cfg_.classes];
            for (std::size_t c = 0; c < cfg_.classes; ++c) {
                gb[c] += dl[c];
                for (std::size_t j = 0; j < feature_dim_; ++j)
                    gw[c * feature_dim_ + j] += dl[c] * ws[b].features[j];
            }
        }

        // batch outer products, then one element-major pass per layer
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto& plan = layers_[l];
            const std::size_t pairs = plan.ci * plan.co;
            phi_.assign(n_ * n_ * pairs, 0.0);
            for (std::size_t b = 0; b < bsize; ++b) {
                const double* dz = ws[b].dz[l].data();      // [co][i]
                const double* xt = ws[b].inputs_t[l].data(); // [j][ci]
                for (std::size_t co = 0; co < plan.co; ++co)
                    for (std::size_t i = 0; i < n_; ++i) {
                        const double c0 = dz[co * n_ + i];
                        if (c0 == 0.0) continue;
                        double* dst = &phi_[(i * n_) * pairs + co * plan.ci];
                        const double* src = xt;
                        for (std::size_t j = 0; j < n_; ++j) {
                            for (std::size_t ci = 0; ci < plan.ci; ++ci) dst[ci] += c0 * src[ci];
                            dst += pairs;
                            src += plan.ci;
                        }
                    }
            }
            contract_bank(phi_, plan, &grad[plan.offset]);
        }
        return loss;
    }

    void save_parameters(std::ostream& out) const {
        out << "PARAMS v1 " << params_.size() << '\n';
        for (double v : params_) out << shortest_double(v) << '\n';
    }

    void load_parameters(std::istream& in) {
        std::string tag, version;
        std::size_t count;
        if (!(in >> tag >> version >> count) || tag != "PARAMS" || version != "v1" ||
            count != params_.size())
            throw std::runtime_error("load_parameters: bad header or size mismatch");
        for (double& v : params_) {
            std::string tok;
            if (!(in >> tok)) throw std::runtime_error("load_parameters: truncated");
            v = parse_double(tok);
        }
        dirty_ = true;
    }

private:
    struct LayerPlan {
        std::size_t ci = 0, co = 0;
        std::size_t offset = 0;            // into the flat parameter vector
        mutable std::vector<double> dense; // [i][j][co][ci]
    };

    struct Workspace {
        std::vector<std::vector<double>> inputs_t; // per layer, [j][ci]
        std::vector<std::vector<double>> z;        // per layer, [co][i]
        std::vector<std::vector<double>> dz;       // per layer, [co][i]
        std::vector<double> features;
        std::vector<std::size_t> argmax; // per channel, for max pooling
        std::vector<double> logits;
    };

    void ensure_compiled() const {
        if (!dirty_) return;
        for (const auto& plan : layers_) compile_layer(plan);
        dirty_ = false;
    }

    /// dense[i][j][co][ci] = sum_g a(g, ci, co) * T_g[i, j]; parallel over row
    /// ranges (threads own disjoint i blocks, so the result is deterministic).
    void compile_layer(const LayerPlan& plan) const {
        const std::size_t pairs = plan.ci * plan.co;
        std::fill(plan.dense.begin(), plan.dense.end(), 0.0);
        const std::size_t chunk = 16;
        const std::size_t nchunks = (n_ + chunk - 1) / chunk;
        parallel_for(nchunks, [&](std::size_t c) {
            const std::size_t lo = c * chunk;
            const std::size_t hi = std::min(n_, lo + chunk);
            std::vector<double> at(pairs); // [co][ci] transposed tap block
            for (std::size_t g = 0; g < bank_->size(); ++g) {
                const double* a = &params_[plan.offset + g * pairs];
                bool all_zero = true;
                for (std::size_t ci = 0; ci < plan.ci; ++ci)
                    for (std::size_t co = 0; co < plan.co; ++co) {
                        const double v = a[ci * plan.co + co];
                        at[co * plan.ci + ci] = v;
                        all_zero &= (v == 0.0);
                    }
                if (all_zero) continue;
                const auto& op = bank_->operators[g];
                const auto row_ptr = op.row_ptr();
                const auto col_idx = op.col_idx();
                const auto values = op.values();
                for (std::size_t i = lo; i < hi; ++i)
                    for (std::uint32_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
                        const double v = values[k];
                        double* dst = &plan.dense[(i * n_ + col_idx[k]) * pairs];
                        for (std::size_t p = 0; p < pairs; ++p) dst[p] += v * at[p];
                    }
            }
        });
    }

    /// grad[g][ci][co] = sum_{(i,j,v) in T_g} v * phi[i][j][co][ci];
    /// parallel over elements (disjoint gradient slots).
    void contract_bank(const std::vector<double>& phi, const LayerPlan& plan, double* grad) const {
        const std::size_t pairs = plan.ci * plan.co;
        parallel_for(bank_->size(), [&](std::size_t g) {
            const auto& op = bank_->operators[g];
            const auto row_ptr = op.row_ptr();
            const auto col_idx = op.col_idx();
            const auto values = op.values();
            double* acc = &grad[g * pairs]; // [ci][co]
            for (std::size_t i = 0; i < n_; ++i)
                for (std::uint32_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
                    const double v = values[k];
                    const double* block = &phi[(i * n_ + col_idx[k]) * pairs];
                    for (std::size_t co = 0; co < plan.co; ++co)
                        for (std::size_t ci = 0; ci < plan.ci; ++ci)
                            acc[ci * plan.co + co] += v * block[co * plan.ci + ci];
                }
        });
    }

    void forward_sample(const DiscreteSignal& f, Workspace& ws) const {
        if (f.points() != n_ || f.channels != layers_.front().ci)
            throw std::invalid_argument("forward: signal shape does not match the network");
        const std::size_t layers = layers_.size();
        ws.inputs_t.assign(layers, {});
        ws.z.assign(layers, {});
        ws.dz.assign(layers, {});

        // transpose input to [j][ci]
        std::vector<double> xt(n_ * f.channels);
        for (std::size_t c = 0; c < f.channels; ++c) {
            const auto ch = f.channel(c);
            for (std::size_t j = 0; j < n_; ++j) xt[j * f.channels + c] = ch[j];
        }

        for (std::size_t l = 0; l < layers; ++l) {
            const auto& plan = layers_[l];
            const std::size_t pairs = plan.ci * plan.co;
            ws.inputs_t[l] = std::move(xt);
            auto& z = ws.z[l];
            z.assign(plan.co * n_, 0.0);
            const double* in = ws.inputs_t[l].data();
            std::vector<double> acc(plan.co);
            for (std::size_t i = 0; i < n_; ++i) {
                const double* block = &plan.dense[(i * n_) * pairs];
                std::fill(acc.begin(), acc.end(), 0.0);
                const double* src = in;
                for (std::size_t j = 0; j < n_; ++j) {
                    for (std::size_t co = 0; co < plan.co; ++co) {
                        const double* brow = block + co * plan.ci;
                        double a = 0.0;
                        for (std::size_t ci = 0; ci < plan.ci; ++ci) a += brow[ci] * src[ci];
                        acc[co] += a;
                    }
                    block += pairs;
                    src += plan.ci;
                }
                for (std::size_t co = 0; co < plan.co; ++co) z[co * n_ + i] = acc[co];
            }
            // swish activations become the next layer's input
            xt.assign(n_ * plan.co, 0.0);
            for (std::size_t co = 0; co < plan.co; ++co)
                for (std::size_t i = 0; i < n_; ++i) xt[i * plan.co + co] = swish(z[co * n_ + i]);
        }

        // pool
        const std::size_t last_c = layers_.back().co;
        ws.argmax.assign(last_c, 0);
        if (cfg_.pool == PoolMode::Flatten) {
            ws.features.assign(last_c * n_, 0.0);
            for (std::size_t c = 0; c < last_c; ++c)
                for (std::size_t i = 0; i < n_; ++i) ws.features[c * n_ + i] = xt[i * last_c + c];
        } else if (cfg_.pool == PoolMode::Mean) {
            ws.features.assign(last_c, 0.0);
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t c = 0; c < last_c; ++c) ws.features[c] += xt[i * last_c + c];
            for (double& v : ws.features) v /= static_cast<double>(n_);
        } else {
            ws.features.assign(last_c, -std::numeric_limits<double>::infinity());
            for (std::size_t c = 0; c < last_c; ++c) {
                for (std::size_t i = 0; i < n_; ++i) {
                    const double v = xt[i * last_c + c];
                    if (v > ws.features[c]) { // strict: ties go to the lowest index
                        ws.features[c] = v;
                        ws.argmax[c] = i;
                    }
                }
            }
        }
        ws.inputs_t.push_back(std::move(xt)); // activations of the last layer

        const double* w = &params_[readout_w_offset_];
        const double* bias = &params_[readout_b_offset_];
        ws.logits.assign(cfg_.classes, 0.0);
        for (std::size_t c = 0; c < cfg_.classes; ++c) {
            double acc = bias[c];
            for (std::size_t j = 0; j < feature_dim_; ++j) acc += w[c * feature_dim_ + j] * ws.features[j];
            ws.logits[c] = acc;
        }
    }

    /// Backpropagate one sample down to dz per layer (stored in the
    /// workspace); parameter gradients are accumulated separately.
    void backward_sample(Workspace& ws, const double* dlogits) const {
        const std::size_t last_c = layers_.back().co;
        const double* w = &params_[readout_w_offset_];
        std::vector<double> dfeat(feature_dim_, 0.0);
        for (std::size_t c = 0; c < cfg_.classes; ++c)
            for (std::size_t j = 0; j < feature_dim_; ++j)
                dfeat[j] += w[c * feature_dim_ + j] * dlogits[c];

        // gradient w.r.t. the last activations, [i][c] layout
        std::vector<double> dact(n_ * last_c, 0.0);
        if (cfg_.pool == PoolMode::Flatten) {
            for (std::size_t c = 0; c < last_c; ++c)
                for (std::size_t i = 0; i < n_; ++i) dact[i * last_c + c] = dfeat[c * n_ + i];
        } else if (cfg_.pool == PoolMode::Mean) {
            for (std::size_t c = 0; c < last_c; ++c)
                for (std::size_t i = 0; i < n_; ++i)
                    dact[i * last_c + c] = dfeat[c] / static_cast<double>(n_);
        } else {
            for (std::size_t c = 0; c < last_c; ++c) dact[ws.argmax[c] * last_c + c] = dfeat[c];
        }

        for (std::size_t l = layers_.size(); l-- > 0;) {
            const auto& plan = layers_[l];
            const std::size_t pairs = plan.ci * plan.co;
            auto& dz = ws.dz[l];
            dz.assign(plan.co * n_, 0.0);
            const auto& z = ws.z[l];
            for (std::size_t co = 0; co < plan.co; ++co)
                for (std::size_t i = 0; i < n_; ++i)
                    dz[co * n_ + i] = dact[i * plan.co + co] * swish_derivative(z[co * n_ + i]);
            if (l == 0) break;

            // input gradient: dx[j][ci] = sum_i sum_co M[i][j][co][ci] dz[co][i]
            dact.assign(n_ * plan.ci, 0.0);
            for (std::size_t i = 0; i < n_; ++i) {
                const double* block = &plan.dense[(i * n_) * pairs];
                for (std::size_t j = 0; j < n_; ++j) {
                    double* out = &dact[j * plan.ci];
                    for (std::size_t co = 0; co < plan.co; ++co) {
                        const double d = dz[co * n_ + i];
                        if (d == 0.0) continue;
                        const double* brow = block + co * plan.ci;
                        for (std::size_t ci = 0; ci < plan.ci; ++ci) out[ci] += d * brow[ci];
                    }
                    block += pairs;
                }
            }
        }
    }

    const OperatorBank* bank_;
    FilterNetworkConfig cfg_;
    std::size_t n_;
    std::vector<LayerPlan> layers_;
    std::size_t feature_dim_ = 0;
    std::size_t readout_w_offset_ = 0;
    std::size_t readout_b_offset_ = 0;
    std::vector<double> params_;
    mutable bool dirty_ = true;
    mutable std::vector<double> phi_;
};

/// Fully connected baseline: flatten -> dense(hidden) -> swish -> dense(classes).
class FcnnBaseline {
public:
    FcnnBaseline(std::size_t input_dim, std::size_t classes, Rng init_rng, std::size_t hidden = 50)
        : input_(input_dim), hidden_(hidden), classes_(classes) {
        w1_offset_ = 0;
        b1_offset_ = hidden_ * input_;
        w2_offset_ = b1_offset_ + hidden_;
        b2_offset_ = w2_offset_ + classes_ * hidden_;
        params_.assign(b2_offset_ + classes_, 0.0);
        const double s1 = 1.0 / std::sqrt(static_cast<double>(input_));
        for (std::size_t i = 0; i < hidden_ * input_; ++i)
            params_[w1_offset_ + i] = init_rng.uniform(-s1, s1);
        const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
        for (std::size_t i = 0; i < classes_ * hidden_; ++i)
            params_[w2_offset_ + i] = init_rng.uniform(-s2, s2);
    }

    std::size_t classes() const { return classes_; }
    const std::vector<double>& parameters() const { return params_; }
    std::vector<double>& parameters() { return params_; }

    std::vector<double> forward(const DiscreteSignal& f) const {
        if (f.values.size() != input_)
            throw std::invalid_argument("FcnnBaseline::forward: input size mismatch");
        std::vector<double> h(hidden_), logits(classes_);
        for (std::size_t i = 0; i < hidden_; ++i) {
            double acc = params_[b1_offset_ + i];
            const double* w = &params_[w1_offset_ + i * input_];
            for (std::size_t j = 0; j < input_; ++j) acc += w[j] * f.values[j];
            h[i] = swish(acc);
        }
        for (std::size_t c = 0; c < classes_; ++c) {
            double acc = params_[b2_offset_ + c];
            const double* w = &params_[w2_offset_ + c * hidden_];
            for (std::size_t i = 0; i < hidden_; ++i) acc += w[i] * h[i];
            logits[c] = acc;
        }
        return logits;
    }

    double loss_and_grad(const std::vector<const DiscreteSignal*>& batch,
                         const std::vector<int>& labels, std::vector<double>& grad) const {
        const std::size_t bsize = batch.size();
        if (bsize == 0 || bsize != labels.size())
            throw std::invalid_argument("loss_and_grad: batch empty or label mismatch");
        grad.assign(params_.size(), 0.0);
        std::vector<double> logits(bsize * classes_), pre(bsize * hidden_), act(bsize * hidden_);
        for (std::size_t b = 0; b < bsize; ++b) {
            const auto& f = *batch[b];
            if (f.values.size() != input_)
                throw std::invalid_argument("loss_and_grad: input size mismatch");
            for (std::size_t i = 0; i < hidden_; ++i) {
                double acc = params_[b1_offset_ + i];
                const double* w = &params_[w1_offset_ + i * input_];
                for (std::size_t j = 0; j < input_; ++j) acc += w[j] * f.values[j];
                pre[b * hidden_ + i] = acc;
                act[b * hidden_ + i] = swish(acc);
            }
            for (std::size_t c = 0; c < classes_; ++c) {
                double acc = params_[b2_offset_ + c];
                const double* w = &params_[w2_offset_ + c * hidden_];
                for (std::size_t i = 0; i < hidden_; ++i) acc += w[i] * act[b * hidden_ + i];
                logits[b * classes_ + c] = acc;
            }
        }
        std::vector<double> dlogits;
        const double loss = softmax_cross_entropy(logits, classes_, labels, &dlogits);
        std::vector<double> dh(hidden_);
        for (std::size_t b = 0; b < bsize; ++b) {
            const auto& f = *batch[b];
            std::fill(dh.begin(), dh.end(), 0.0);
            for (std::size_t c = 0; c < classes_; ++c) {
                const double d = dlogits[b * classes_ + c];
                grad[b2_offset_ + c] += d;
                for (std::size_t i = 0; i < hidden_; ++i) {
                    grad[w2_offset_ + c * hidden_ + i] += d * act[b * hidden_ + i];
                    dh[i] += d * params_[w2_offset_ + c * hidden_ + i];
                }
            }
            for (std::size_t i = 0; i < hidden_; ++i) {
                const double dpre = dh[i] * swish_derivative(pre[b * hidden_ + i]);
                grad[b1_offset_ + i] += dpre;
                const double* x = f.values.data();
                double* gw = &grad[w1_offset_ + i * input_];
                for (std::size_t j = 0; j < input_; ++j) gw[j] += dpre * x[j];
            }
        }
        return loss;
    }

    void save_parameters(std::ostream& out) const {
        out << "PARAMS v1 " << params_.size() << '\n';
        for (double v : params_) out << shortest_double(v) << '\n';
    }

    void load_parameters(std::istream& in) {
        std::string tag, version;
        std::size_t count;
        if (!(in >> tag >> version >> count) || tag != "PARAMS" || version != "v1" ||
            count != params_.size())
            throw std::runtime_error("load_parameters: bad header or size mismatch");
        for (double& v : params_) {
            std::string tok;
            if (!(in >> tok)) throw std::runtime_error("load_parameters: truncated");
            v = parse_double(tok);
        }
    }

private:
    std::size_t input_, hidden_, classes_;
    std::size_t w1_offset_, b1_offset_, w2_offset_, b2_offset_;
    std::vector<double> params_;
};

struct TrainLogRow {
    std::size_t step;
    double loss;
    double test_acc; // NaN when not evaluated at this step
};

struct TrainResult {
    std::vector<TrainLogRow> log;
    double final_loss = 0.0;
    double final_test_acc = 0.0;
};

template <typename Model>
double accuracy(const Model& model, const std::vector<DiscreteSignal>& xs,
                const std::vector<int>& ys) {
    if (xs.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto logits = model.forward(xs[i]);
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.size(); ++c)
            if (logits[c] > logits[best]) best = c;
        hits += (static_cast<int>(best) == ys[i]);
    }
    return static_cast<double>(hits) / static_cast<double>(xs.size());
}

/// Optimizer-step training loop over shuffled minibatches (reshuffled when
/// the pass over the data is exhausted, shuffle order seeded). Fully
/// deterministic per seed.
template <typename Model>
TrainResult train(Model& model, const std::vector<DiscreteSignal>& train_x,
                  const std::vector<int>& train_y, const std::vector<DiscreteSignal>& test_x,
                  const std::vector<int>& test_y, const TrainConfig& cfg) {
    if (train_x.empty() || train_x.size() != train_y.size())
        throw std::invalid_argument("train: empty dataset or label mismatch");
    TrainResult result;
    AdamState state;
    Rng order_rng = Rng(cfg.seed).fork(0x5u);

    std::vector<std::size_t> order(train_x.size());
    std::iota(order.begin(), order.end(), 0u);
    std::size_t cursor = order.size(); // force an initial shuffle

    std::vector<double> grad;
    std::vector<const DiscreteSignal*> batch;
    std::vector<int> labels;
    const std::size_t bsize = std::min<std::size_t>(cfg.batch_size, train_x.size());

    for (std::size_t step = 1; step <= cfg.iterations; ++step) {
        batch.clear();
        labels.clear();
        for (std::size_t i = 0; i < bsize; ++i) {
            if (cursor >= order.size()) {
                // Fisher-Yates
                for (std::size_t j = order.size(); j-- > 1;)
                    std::swap(order[j], order[order_rng.below(j + 1)]);
                cursor = 0;
            }
            const std::size_t idx = order[cursor++];
            batch.push_back(&train_x[idx]);
            labels.push_back(train_y[idx]);
        }
        const double loss = model.loss_and_grad(batch, labels, grad);
        adam_step(model.parameters(), grad, state, cfg);

        TrainLogRow row{step, loss, std::numeric_limits<double>::quiet_NaN()};
        if ((cfg.eval_every > 0 && step % cfg.eval_every == 0) || step == cfg.iterations) {
            row.test_acc = test_x.empty() ? 0.0 : accuracy(model, test_x, test_y);
        }
        result.log.push_back(row);
        result.final_loss = loss;
        if (!std::isnan(row.test_acc)) result.final_test_acc = row.test_acc;
    }
    return result;
}

} // namespace lgc
