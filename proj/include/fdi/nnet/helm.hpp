#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdi/nnet/autoencoder.hpp"
#include "fdi/nnet/network.hpp"

namespace fdi::nn {

/// ISTA for  min_B  lambda * ||B||_1 + 1/2 ||F B - S||_F^2.
/// Step 1/L with L from power iteration on F^T F; objective is
/// non-increasing by construction and iteration stops when its decrease
/// falls below tol.
struct IstaResult {
    Matrix solution;
    std::vector<double> objective_history;
};

class SolverError : public std::runtime_error {
  public:
    SolverError(const std::string& msg, double gap)
        : std::runtime_error(msg + " (objective gap " + std::to_string(gap) + ")"), gap_(gap) {}
    double gap() const { return gap_; }

  private:
    double gap_;
};

namespace detail {

inline double largest_eigenvalue(const Matrix& gram, int iters = 200) {
    Vector v = Vector::Ones(gram.cols());
    v.normalize();
    double lambda = 0.0;
    for (int i = 0; i < iters; ++i) {
        const Vector w = gram * v;
        lambda = w.norm();
        if (lambda == 0.0) return 0.0;
        v = w / lambda;
    }
    return lambda;
}

inline double l1_objective(const Matrix& f, const Matrix& s, const Matrix& beta, double lambda) {
    return lambda * beta.cwiseAbs().sum() + 0.5 * (f * beta - s).squaredNorm();
}

} // namespace detail

inline IstaResult ista_solve(const Matrix& f, const Matrix& s, double lambda,
                             int max_iters = 5000, double tol = 1e-10) {
    if (lambda < 0.0) throw std::invalid_argument("ista_solve: lambda must be >= 0");
    const Matrix gram = f.transpose() * f;
    const double lip = detail::largest_eigenvalue(gram);
    if (lip == 0.0) return {Matrix::Zero(f.cols(), s.cols()), {}};
    const double step = 1.0 / lip;
    const double thresh = lambda * step;
    const Matrix fts = f.transpose() * s;

    IstaResult res;
    Matrix beta = Matrix::Zero(f.cols(), s.cols());
    double obj = detail::l1_objective(f, s, beta, lambda);
    res.objective_history.push_back(obj);
    for (int it = 0; it < max_iters; ++it) {
        const Matrix grad = gram * beta - fts;
        const Matrix shifted = beta - step * grad;
        beta = shifted.array().sign() * (shifted.array().abs() - thresh).max(0.0);
        const double next = detail::l1_objective(f, s, beta, lambda);
        res.objective_history.push_back(next);
        if (obj - next < tol) {
            res.solution = std::move(beta);
            return res;
        }
        obj = next;
    }
    // did not reach the tolerance within the cap
    const double gap = res.objective_history[res.objective_history.size() - 2] - obj;
    throw SolverError("ista did not converge within " + std::to_string(max_iters) + " iterations",
                      gap);
}

struct HelmLayer {
    Matrix random_weight; // m_l x d_{l-1}
    Vector random_bias;   // m_l
    Matrix beta;          // m_l x d_{l-1}, learned
};

/// Hierarchical extreme learning machine [n, 20, 8, 20, 100, 1]:
/// three ELM-autoencoder hidden layers and a random final expansion with
/// an L1-regularized linear readout.
struct HelmModel {
    std::vector<HelmLayer> hidden;
    Matrix final_weight; // 100 x 20
    Vector final_bias;   // 100
    Matrix final_beta;   // 100 x targets

    std::vector<int> architecture(int input_dim) const {
        std::vector<int> dims = {input_dim};
        for (const auto& h : hidden) dims.push_back(static_cast<int>(h.random_weight.rows()));
        dims.push_back(static_cast<int>(final_weight.rows()));
        dims.push_back(static_cast<int>(final_beta.cols()));
        return dims;
    }
};

struct HelmConfig {
    std::vector<int> hidden_dims = {20, kLatentDim, 20};
    int expansion_dim = 100;
    double lambda = -1.0; // < 0: auto, 1e-3 x ||F^T S||_inf per layer
    int max_iters = 5000;
    double tol = 1e-10;
};

namespace detail {

inline void random_projection(Matrix& w, Vector& b, int rows, int cols, Rng& rng) {
    w.resize(rows, cols);
    b.resize(rows);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform(-1.0, 1.0);
        b[r] = rng.uniform(-1.0, 1.0);
    }
}

inline double auto_lambda(const Matrix& f, const Matrix& s, double requested) {
    if (requested >= 0.0) return requested;
    return 1e-3 * (f.transpose() * s).cwiseAbs().maxCoeff();
}

} // namespace detail

/// Layer-wise fit: each hidden beta reconstructs its input from a random
/// projection; the final beta regresses the target.
inline HelmModel helm_fit(const Matrix& x, const Matrix& target, std::uint64_t seed,
                          const HelmConfig& cfg = {}) {
    Rng rng(seed ^ 0x2545f4914f6cdd1dULL);
    HelmModel model;
    Matrix state = x;
    for (int m : cfg.hidden_dims) {
        HelmLayer layer;
        detail::random_projection(layer.random_weight, layer.random_bias, m,
                                  static_cast<int>(state.cols()), rng);
        const Matrix proj = (state * layer.random_weight.transpose()).rowwise() +
                            layer.random_bias.transpose();
        const Matrix f = proj.array().tanh();
        const double lambda = detail::auto_lambda(f, state, cfg.lambda);
        layer.beta = ista_solve(f, state, lambda, cfg.max_iters, cfg.tol).solution;
        state = state * layer.beta.transpose();
        model.hidden.push_back(std::move(layer));
    }
    detail::random_projection(model.final_weight, model.final_bias, cfg.expansion_dim,
                              static_cast<int>(state.cols()), rng);
    const Matrix proj =
        (state * model.final_weight.transpose()).rowwise() + model.final_bias.transpose();
    const Matrix f = proj.array().tanh();
    const double lambda = detail::auto_lambda(f, target, cfg.lambda);
    model.final_beta = ista_solve(f, target, lambda, cfg.max_iters, cfg.tol).solution;
    return model;
}

struct HelmForward {
    Matrix output;
    Matrix latent; // hidden state at the bottleneck layer
};

inline HelmForward helm_forward(const HelmModel& model, const Matrix& x) {
    HelmForward out;
    Matrix state = x;
    size_t bottleneck = model.hidden.size() >= 2 ? 1 : model.hidden.size() - 1;
    for (size_t l = 0; l < model.hidden.size(); ++l) {
        state = state * model.hidden[l].beta.transpose();
        if (l == bottleneck) out.latent = state;
    }
    const Matrix proj =
        (state * model.final_weight.transpose()).rowwise() + model.final_bias.transpose();
    out.output = Matrix(proj.array().tanh()) * model.final_beta;
    return out;
}

} // namespace fdi::nn
