#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "breed/rng.hpp"
#include "breed/types.hpp"

namespace breed {

struct OutOfBounds : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonFiniteLoss : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MlpConfig {
    int hidden_size = 16;  // H
    int num_layers = 1;    // L hidden layers
    int input_dim = 6;     // five temperatures + timestep
    int output_dim = 0;    // M*M
    double lr = 1e-3;
    int batch_size = 128;  // B
    std::uint64_t seed = 0;

    void validate() const {
        if (hidden_size < 1) throw std::invalid_argument("MlpConfig: hidden_size must be >= 1");
        if (num_layers < 1) throw std::invalid_argument("MlpConfig: num_layers must be >= 1");
        if (input_dim < 1) throw std::invalid_argument("MlpConfig: input_dim must be >= 1");
        if (output_dim < 1) throw std::invalid_argument("MlpConfig: output_dim must be >= 1");
        if (lr <= 0.0) throw std::invalid_argument("MlpConfig: lr must be > 0");
        if (batch_size < 1) throw std::invalid_argument("MlpConfig: batch_size must be >= 1");
    }
};

// Maps (params, t) into the unit cube: temperatures affinely from
// [low, high], the timestep by t / T_steps.
inline std::array<double, 6> normalize(const SimParams& params, std::uint32_t t,
                                       const Bounds& bounds, int t_steps) {
    if (!params.within(bounds))
        throw OutOfBounds("normalize: temperature outside configured bounds");
    if (static_cast<int>(t) > t_steps)
        throw OutOfBounds("normalize: timestep " + std::to_string(t) + " exceeds T_steps");
    std::array<double, 6> out{};
    for (int d = 0; d < kParamDim; ++d)
        out[d] = (params[d] - bounds.low) / bounds.span();
    out[5] = t_steps > 0 ? static_cast<double>(t) / t_steps : 0.0;
    return out;
}

// Targets live in the same normalized temperature space as the inputs.
inline std::vector<float> normalize_target(std::span<const float> field, const Bounds& bounds) {
    std::vector<float> out(field.size());
    const float low = static_cast<float>(bounds.low);
    const float inv = static_cast<float>(1.0 / bounds.span());
    for (std::size_t i = 0; i < field.size(); ++i) out[i] = (field[i] - low) * inv;
    return out;
}

// Mean squared error over the components, accumulated in double.
template <class Scalar>
double per_sample_loss(std::span<const Scalar> pred, std::span<const Scalar> target) {
    if (pred.size() != target.size())
        throw ShapeMismatch("per_sample_loss: prediction/target size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

// Fully connected ReLU network with a linear output layer and a fused Adam
// optimizer. Parameters and activations use Scalar (float in production);
// loss statistics are always double.
template <class Scalar = float>
class Mlp {
public:
    struct Layer {
        int in = 0;
        int out = 0;
        std::vector<Scalar> w;  // out x in, row-major
        std::vector<Scalar> b;
        std::vector<Scalar> m_w, v_w, m_b, v_b;  // Adam moments
    };

    struct Sample {
        SampleKey key;
        std::array<Scalar, 6> input{};
        std::vector<Scalar> target;
    };

    explicit Mlp(const MlpConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        std::mt19937_64 rng(cfg.seed);
        int prev = cfg.input_dim;
        for (int l = 0; l < cfg.num_layers; ++l) {
            layers_.push_back(make_layer(prev, cfg.hidden_size, rng));
            prev = cfg.hidden_size;
        }
        layers_.push_back(make_layer(prev, cfg.output_dim, rng));
    }

    const MlpConfig& config() const { return cfg_; }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::uint64_t adam_steps() const { return adam_steps_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += l.w.size() + l.b.size();
        return n;
    }

    std::vector<Scalar> forward(std::span<const Scalar> input) const {
        std::vector<std::vector<Scalar>> acts;
        return forward_with_activations(input, acts);
    }

    // Per-sample losses plus the gradient of the batch-mean loss. Kept
    // separate from the optimizer update so tests can check the gradient
    // against finite differences of forward() alone.
    struct Gradients {
        std::vector<std::vector<Scalar>> gw;
        std::vector<std::vector<Scalar>> gb;
        std::vector<double> losses;
    };

    Gradients batch_gradients(std::span<const Sample> batch) const {
        Gradients g;
        g.gw.resize(layers_.size());
        g.gb.resize(layers_.size());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            g.gw[l].assign(layers_[l].w.size(), Scalar(0));
            g.gb[l].assign(layers_[l].b.size(), Scalar(0));
        }
        g.losses.reserve(batch.size());

        const double batch_scale = 1.0 / static_cast<double>(batch.size());
        std::vector<std::vector<Scalar>> acts;  // per layer outputs, reused
        std::vector<Scalar> delta, delta_prev;

        for (const Sample& s : batch) {
            if (static_cast<int>(s.target.size()) != cfg_.output_dim)
                throw ShapeMismatch("train_step: target size mismatch");
            const std::vector<Scalar> out = forward_with_activations(
                std::span<const Scalar>(s.input.data(), s.input.size()), acts);
            g.losses.push_back(per_sample_loss<Scalar>(out, s.target));

            // d(batch mean loss)/d(out_k) = 2 (out_k - target_k) / (dim * B)
            const double out_scale = 2.0 * batch_scale / cfg_.output_dim;
            delta.resize(out.size());
            for (std::size_t k = 0; k < out.size(); ++k)
                delta[k] = static_cast<Scalar>(
                    out_scale * (static_cast<double>(out[k]) - static_cast<double>(s.target[k])));

            for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
                const Layer& layer = layers_[l];
                const Scalar* in_act = l == 0 ? s.input.data() : acts[l - 1].data();
                std::vector<Scalar>& gw = g.gw[l];
                std::vector<Scalar>& gb = g.gb[l];
                for (int o = 0; o < layer.out; ++o) {
                    const Scalar d = delta[o];
                    if (d == Scalar(0)) continue;
                    Scalar* gw_row = gw.data() + static_cast<std::size_t>(o) * layer.in;
                    for (int i = 0; i < layer.in; ++i) gw_row[i] += d * in_act[i];
                    gb[o] += d;
                }
                if (l == 0) break;
                delta_prev.assign(layer.in, Scalar(0));
                for (int o = 0; o < layer.out; ++o) {
                    const Scalar d = delta[o];
                    if (d == Scalar(0)) continue;
                    const Scalar* w_row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
                    for (int i = 0; i < layer.in; ++i) delta_prev[i] += d * w_row[i];
                }
                // ReLU mask of the producing hidden layer.
                const std::vector<Scalar>& hidden = acts[l - 1];
                for (int i = 0; i < layer.in; ++i)
                    if (hidden[i] <= Scalar(0)) delta_prev[i] = Scalar(0);
                delta.swap(delta_prev);
            }
        }
        return g;
    }

    TrainRecord train_step(std::span<const Sample> batch, std::uint64_t iteration) {
        if (static_cast<int>(batch.size()) != cfg_.batch_size)
            throw ShapeMismatch("train_step: batch size " + std::to_string(batch.size()) +
                                " != configured B " + std::to_string(cfg_.batch_size));
        Gradients g = batch_gradients(batch);

        TrainRecord rec;
        rec.iteration = iteration;
        rec.losses.reserve(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (!std::isfinite(g.losses[i]))
                throw NonFiniteLoss("train_step: non-finite loss for sim " +
                                    std::to_string(batch[i].key.sim_id));
            rec.losses.push_back({batch[i].key, g.losses[i]});
        }
        batch_stats(g.losses, rec.mu, rec.sigma);

        adam_update(g);
        return rec;
    }

    // Mean per-sample loss over a fixed set; the network is not modified.
    double evaluate(std::span<const Sample> samples) const {
        if (samples.empty())
            throw std::invalid_argument("evaluate: empty validation set");
        double acc = 0.0;
        std::vector<std::vector<Scalar>> acts;
        for (const Sample& s : samples) {
            const std::vector<Scalar> out = forward_with_activations(
                std::span<const Scalar>(s.input.data(), s.input.size()), acts);
            acc += per_sample_loss<Scalar>(out, s.target);
        }
        return acc / static_cast<double>(samples.size());
    }

private:
    static Layer make_layer(int in, int out, std::mt19937_64& rng) {
        Layer l;
        l.in = in;
        l.out = out;
        l.w.resize(static_cast<std::size_t>(in) * out);
        l.b.assign(out, Scalar(0));
        l.m_w.assign(l.w.size(), Scalar(0));
        l.v_w.assign(l.w.size(), Scalar(0));
        l.m_b.assign(l.b.size(), Scalar(0));
        l.v_b.assign(l.b.size(), Scalar(0));
        // He-uniform fan-in scaling, the standard choice for ReLU stacks.
        const double limit = std::sqrt(6.0 / in);
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Scalar& w : l.w) w = static_cast<Scalar>(dist(rng));
        return l;
    }

    std::vector<Scalar> forward_with_activations(std::span<const Scalar> input,
                                                 std::vector<std::vector<Scalar>>& acts) const {
        if (static_cast<int>(input.size()) != cfg_.input_dim)
            throw ShapeMismatch("forward: input size mismatch");
        acts.resize(layers_.size() - 1);
        const Scalar* cur = input.data();
        int cur_dim = cfg_.input_dim;
        for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
            const Layer& layer = layers_[l];
            acts[l].resize(layer.out);
            for (int o = 0; o < layer.out; ++o) {
                const Scalar* w_row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
                Scalar acc = layer.b[o];
                for (int i = 0; i < cur_dim; ++i) acc += w_row[i] * cur[i];
                acts[l][o] = acc > Scalar(0) ? acc : Scalar(0);
            }
            cur = acts[l].data();
            cur_dim = layer.out;
        }
        const Layer& last = layers_.back();
        std::vector<Scalar> out(last.out);
        for (int o = 0; o < last.out; ++o) {
            const Scalar* w_row = last.w.data() + static_cast<std::size_t>(o) * last.in;
            Scalar acc = last.b[o];
            for (int i = 0; i < cur_dim; ++i) acc += w_row[i] * cur[i];
            out[o] = acc;
        }
        return out;
    }

    static void batch_stats(const std::vector<double>& losses, double& mu, double& sigma) {
        // Identical losses mean an exactly degenerate batch; short-circuit so
        // sigma is 0 by definition rather than rounding noise.
        bool all_equal = true;
        for (double l : losses)
            if (l != losses.front()) {
                all_equal = false;
                break;
            }
        if (all_equal) {
            mu = losses.front();
            sigma = 0.0;
            return;
        }
        double acc = 0.0;
        for (double l : losses) acc += l;
        mu = acc / static_cast<double>(losses.size());
        double var = 0.0;
        for (double l : losses) var += (l - mu) * (l - mu);
        sigma = std::sqrt(var / static_cast<double>(losses.size()));
    }

    void adam_update(const Gradients& g) {
        ++adam_steps_;
        constexpr double beta1 = 0.9;
        constexpr double beta2 = 0.999;
        constexpr double eps = 1e-8;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam_steps_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam_steps_));
        auto update = [&](std::vector<Scalar>& theta, std::vector<Scalar>& m,
                          std::vector<Scalar>& v, const std::vector<Scalar>& grad) {
            for (std::size_t i = 0; i < theta.size(); ++i) {
                const double gi = static_cast<double>(grad[i]);
                const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * gi;
                const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * gi * gi;
                m[i] = static_cast<Scalar>(mi);
                v[i] = static_cast<Scalar>(vi);
                theta[i] -= static_cast<Scalar>(cfg_.lr * (mi / bc1) /
                                                (std::sqrt(vi / bc2) + eps));
            }
        };
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            update(layers_[l].w, layers_[l].m_w, layers_[l].v_w, g.gw[l]);
            update(layers_[l].b, layers_[l].m_b, layers_[l].v_b, g.gb[l]);
        }
    }

    MlpConfig cfg_;
    std::vector<Layer> layers_;
    std::uint64_t adam_steps_ = 0;
};

}  // namespace breed
