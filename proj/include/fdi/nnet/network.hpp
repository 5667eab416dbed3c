#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdi/rng.hpp"
#include "fdi/types.hpp"

namespace fdi::nn {

enum class Activation { Tanh, Identity };

inline Matrix activate(const Matrix& z, Activation act) {
    return act == Activation::Tanh ? Matrix(z.array().tanh()) : z;
}

inline Matrix activate_grad_from_output(const Matrix& a, Activation act) {
    // tanh' expressed through the activation value
    return act == Activation::Tanh ? Matrix(1.0 - a.array().square()) : Matrix::Ones(a.rows(), a.cols());
}

struct Layer {
    Matrix weight; // out x in
    Vector bias;   // out
    Activation act = Activation::Tanh;
};

/// Zero-mean uniform init with variance 2 / (fan_in + fan_out).
inline Matrix xavier_init(int rows, int cols, std::uint64_t seed) {
    const double bound = std::sqrt(6.0 / (rows + cols));
    Rng rng(seed ^ 0xa0761d6478bd642fULL);
    Matrix w(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform(-bound, bound);
    return w;
}

struct DenseNetwork {
    std::vector<Layer> layers;

    int input_dim() const { return static_cast<int>(layers.front().weight.cols()); }
    int output_dim() const { return static_cast<int>(layers.back().weight.rows()); }

    std::vector<int> architecture() const {
        std::vector<int> dims = {input_dim()};
        for (const auto& l : layers) dims.push_back(static_cast<int>(l.weight.rows()));
        return dims;
    }
};

/// tanh hidden layers, identity output.
inline DenseNetwork make_dense(const std::vector<int>& dims, std::uint64_t seed) {
    if (dims.size() < 2) throw std::invalid_argument("make_dense: need at least two dims");
    DenseNetwork net;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        layer.weight = xavier_init(dims[l + 1], dims[l], seed + 1000 * l);
        layer.bias = Vector::Zero(dims[l + 1]);
        layer.act = (l + 2 == dims.size()) ? Activation::Identity : Activation::Tanh;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

struct ForwardCache {
    std::vector<Matrix> activations; // activations[0] = input, size L+1
};

namespace detail {

/// Forward pass into a reusable cache; repeated calls with the same batch
/// shape run allocation-free.
inline void forward_cached(const DenseNetwork& net, const Matrix& x, ForwardCache& cache) {
    auto& acts = cache.activations;
    acts.resize(net.layers.size() + 1);
    acts[0] = x;
    for (size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        if (acts[l].cols() != layer.weight.cols())
            throw std::invalid_argument("forward: dim mismatch at layer " + std::to_string(l));
        Matrix& out = acts[l + 1];
        out.noalias() = acts[l] * layer.weight.transpose();
        out.rowwise() += layer.bias.transpose();
        if (layer.act == Activation::Tanh) out = out.array().tanh();
    }
}

} // namespace detail

/// Rows are samples.
inline Matrix forward(const DenseNetwork& net, const Matrix& x, ForwardCache* cache = nullptr) {
    if (x.cols() != net.input_dim())
        throw std::invalid_argument("forward: input dim " + std::to_string(x.cols()) +
                                    " != layer 0 dim " + std::to_string(net.input_dim()));
    if (cache) {
        detail::forward_cached(net, x, *cache);
        return cache->activations.back();
    }
    Matrix a = x;
    for (size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        if (a.cols() != layer.weight.cols())
            throw std::invalid_argument("forward: dim mismatch at layer " + std::to_string(l));
        a = activate(((a * layer.weight.transpose()).rowwise() + layer.bias.transpose()).eval(),
                     layer.act);
    }
    return a;
}

inline Vector forward(const DenseNetwork& net, const Vector& x) {
    return forward(net, Matrix(x.transpose())).row(0);
}

struct Gradients {
    std::vector<Matrix> d_weight;
    std::vector<Vector> d_bias;

    Gradients() = default;
    explicit Gradients(const DenseNetwork& net) {
        for (const auto& l : net.layers) {
            d_weight.emplace_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
            d_bias.emplace_back(Vector::Zero(l.bias.size()));
        }
    }
};

namespace detail {

struct BackpropScratch {
    Matrix dz, d_prev;
};

/// In-place backprop core; d_out enters as dL/d(output) and leaves as
/// dL/d(input). Scratch and grads storage are reused across calls.
inline void backward_cached(const DenseNetwork& net, const ForwardCache& cache, Matrix& d_out,
                            Gradients& grads, BackpropScratch& s) {
    const int num_layers = static_cast<int>(net.layers.size());
    grads.d_weight.resize(num_layers);
    grads.d_bias.resize(num_layers);
    for (int l = num_layers - 1; l >= 0; --l) {
        const auto& layer = net.layers[l];
        if (layer.act == Activation::Tanh)
            s.dz = d_out.cwiseProduct(
                activate_grad_from_output(cache.activations[l + 1], layer.act));
        else
            s.dz = d_out;
        grads.d_weight[l].noalias() = s.dz.transpose() * cache.activations[l];
        grads.d_bias[l] = s.dz.colwise().sum();
        s.d_prev.noalias() = s.dz * layer.weight;
        d_out.swap(s.d_prev);
    }
}

} // namespace detail

/// Backpropagates dL/d(output) through the cached forward pass.
/// Returns dL/d(input); fills grads.
inline Matrix backward(const DenseNetwork& net, const ForwardCache& cache, Matrix d_out,
                       Gradients& grads) {
    detail::BackpropScratch scratch;
    detail::backward_cached(net, cache, d_out, grads, scratch);
    return d_out;
}

/// 0.5 x mean over rows of squared error.
inline double mse_loss(const Matrix& target, const Matrix& prediction) {
    if (target.rows() != prediction.rows() || target.cols() != prediction.cols())
        throw std::invalid_argument("mse_loss: shape mismatch");
    return 0.5 * (prediction - target).rowwise().squaredNorm().mean();
}

/// Gradient of mse_loss with respect to the prediction.
inline Matrix mse_grad(const Matrix& target, const Matrix& prediction) {
    return (prediction - target) / static_cast<double>(target.rows());
}

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second-moment state for one parameter set.
class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(DenseNetwork& net, const Gradients& grads) {
        std::vector<Matrix*> ws;
        std::vector<Vector*> bs;
        std::vector<const Matrix*> dws;
        std::vector<const Vector*> dbs;
        for (size_t l = 0; l < net.layers.size(); ++l) {
            ws.push_back(&net.layers[l].weight);
            bs.push_back(&net.layers[l].bias);
            dws.push_back(&grads.d_weight[l]);
            dbs.push_back(&grads.d_bias[l]);
        }
        step(ws, bs, dws, dbs);
    }

    void step(const std::vector<Matrix*>& ws, const std::vector<Vector*>& bs,
              const std::vector<const Matrix*>& dws, const std::vector<const Vector*>& dbs) {
        if (m_w_.empty()) {
            for (auto* w : ws) {
                m_w_.emplace_back(Matrix::Zero(w->rows(), w->cols()));
                v_w_.emplace_back(Matrix::Zero(w->rows(), w->cols()));
            }
            for (auto* b : bs) {
                m_b_.emplace_back(Vector::Zero(b->size()));
                v_b_.emplace_back(Vector::Zero(b->size()));
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
        for (size_t i = 0; i < ws.size(); ++i) {
            m_w_[i] = cfg_.beta1 * m_w_[i] + (1.0 - cfg_.beta1) * (*dws[i]);
            v_w_[i] = cfg_.beta2 * v_w_[i].array().matrix() +
                      (1.0 - cfg_.beta2) * dws[i]->array().square().matrix();
            ws[i]->array() -= cfg_.learning_rate * (m_w_[i].array() / bc1) /
                              ((v_w_[i].array() / bc2).sqrt() + cfg_.epsilon);
        }
        for (size_t i = 0; i < bs.size(); ++i) {
            m_b_[i] = cfg_.beta1 * m_b_[i] + (1.0 - cfg_.beta1) * (*dbs[i]);
            v_b_[i] = cfg_.beta2 * v_b_[i].array().matrix() +
                      (1.0 - cfg_.beta2) * dbs[i]->array().square().matrix();
            bs[i]->array() -= cfg_.learning_rate * (m_b_[i].array() / bc1) /
                              ((v_b_[i].array() / bc2).sqrt() + cfg_.epsilon);
        }
    }

    long steps() const { return t_; }

  private:
    AdamConfig cfg_;
    std::vector<Matrix> m_w_, v_w_;
    std::vector<Vector> m_b_, v_b_;
    long t_ = 0;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 16;
    int epochs = 500;
    std::uint64_t seed = 0;
    double input_noise = 0.0;   // stddev of Gaussian jitter on each batch
    double weight_decay = 0.0;  // decoupled per-step shrink factor lr x wd
    AdamConfig adam() const { return {learning_rate, 0.9, 0.999, 1e-8}; }

    /// One-class head settings per the study: LR 0.001, batch 16, 500 epochs.
    static TrainConfig one_class() { return {1e-3, 16, 500, 0}; }
    /// Autoencoder settings: LR 0.001, batch 512, 2000 epochs.
    static TrainConfig autoencoder() { return {1e-3, 512, 2000, 0}; }
};

class DivergenceError : public std::runtime_error {
  public:
    DivergenceError(int epoch)
        : std::runtime_error("training diverged (non-finite loss) at epoch " +
                             std::to_string(epoch)),
          epoch_(epoch) {}
    int epoch() const { return epoch_; }

  private:
    int epoch_;
};

namespace detail {

inline std::vector<int> shuffled_indices(int n, std::uint64_t seed) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.raw() % static_cast<std::uint64_t>(i + 1));
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

inline void take_rows_into(const Matrix& m, const std::vector<int>& idx, int begin, int end,
                           Matrix& out) {
    out.resize(end - begin, m.cols());
    for (int i = begin; i < end; ++i) out.row(i - begin) = m.row(idx[i]);
}

inline Matrix take_rows(const Matrix& m, const std::vector<int>& idx, int begin, int end) {
    Matrix out;
    take_rows_into(m, idx, begin, end, out);
    return out;
}

} // namespace detail

/// Mini-batch Adam on the mean squared-error risk. The last batch may be
/// short; the per-epoch shuffle is reseeded from seed + epoch.
inline void train_supervised(DenseNetwork& net, const Matrix& x, const Matrix& target,
                             const TrainConfig& cfg) {
    if (x.rows() != target.rows()) throw std::invalid_argument("train: row mismatch");
    const int n = static_cast<int>(x.rows());
    Adam opt(cfg.adam());
    ForwardCache cache;
    Gradients grads(net);
    detail::BackpropScratch scratch;
    Rng noise_rng(cfg.seed ^ 0x5deece66dULL);
    const double shrink = 1.0 - cfg.learning_rate * cfg.weight_decay;
    Matrix xb, tb, d_out;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto idx = detail::shuffled_indices(n, cfg.seed + 0x9e37 * (epoch + 1));
        for (int begin = 0; begin < n; begin += cfg.batch_size) {
            const int end = std::min(n, begin + cfg.batch_size);
            detail::take_rows_into(x, idx, begin, end, xb);
            detail::take_rows_into(target, idx, begin, end, tb);
            if (cfg.input_noise > 0.0)
                for (Eigen::Index i = 0; i < xb.size(); ++i)
                    xb.data()[i] += noise_rng.normal(cfg.input_noise);
            detail::forward_cached(net, xb, cache);
            const Matrix& yb = cache.activations.back();
            const double loss = mse_loss(tb, yb);
            if (!std::isfinite(loss)) throw DivergenceError(epoch);
            d_out = (yb - tb) / static_cast<double>(tb.rows());
            detail::backward_cached(net, cache, d_out, grads, scratch);
            opt.step(net, grads);
            if (cfg.weight_decay > 0.0)
                for (auto& l : net.layers) {
                    l.weight *= shrink;
                    l.bias *= shrink;
                }
        }
    }
}

/// Autoencoder training: reconstruct the input.
inline void train_ae(DenseNetwork& net, const Matrix& x, const TrainConfig& cfg) {
    train_supervised(net, x, x, cfg);
}

} // namespace fdi::nn
