#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdi/types.hpp"

namespace fdi {

class OptimizationError : public std::runtime_error {
  public:
    OptimizationError(const std::string& msg, double kkt_gap)
        : std::runtime_error(msg + " (KKT gap " + std::to_string(kkt_gap) + ")"),
          kkt_gap_(kkt_gap) {}
    double kkt_gap() const { return kkt_gap_; }

  private:
    double kkt_gap_;
};

struct OcsvmConfig {
    double nu = 0.001;
    double gamma_rbf = 0.1;
    double tol = 1e-4;
    long max_pair_updates = 1'000'000;
};

/// One-class SVM with an RBF kernel, trained on the standard dual
///   min 1/2 a' K a  s.t.  0 <= a_i <= 1/(nu n),  sum a_i = 1
/// by maximal-violating-pair coordinate updates.
struct OcsvmModel {
    Matrix support_vectors; // rows
    Vector alpha;           // same length, all > 0
    double rho = 0.0;
    double gamma_rbf = 0.1;
    double nu = 0.001;
};

namespace detail {

inline double rbf(const Vector& a, const Vector& b, double gamma) {
    return std::exp(-gamma * (a - b).squaredNorm());
}

} // namespace detail

inline OcsvmModel ocsvm_fit(const Matrix& x, const OcsvmConfig& cfg = {}) {
    const int n = static_cast<int>(x.rows());
    if (n < 2) throw std::invalid_argument("ocsvm_fit: need at least two points");
    if (cfg.nu <= 0.0 || cfg.nu > 1.0) throw std::invalid_argument("ocsvm_fit: nu out of (0,1]");
    const double c = 1.0 / (cfg.nu * n);

    // Full Gram matrix; training sets here stay small enough to hold it.
    Matrix k(n, n);
    for (int i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (int j = i + 1; j < n; ++j)
            k(i, j) = k(j, i) = detail::rbf(x.row(i), x.row(j), cfg.gamma_rbf);
    }

    // Feasible start: spread 1 over the first ceil(1/c) coefficients.
    Vector alpha = Vector::Zero(n);
    {
        double remaining = 1.0;
        for (int i = 0; i < n && remaining > 0.0; ++i) {
            alpha[i] = std::min(c, remaining);
            remaining -= alpha[i];
        }
    }
    Vector grad = k * alpha; // gradient of the objective

    double gap = std::numeric_limits<double>::infinity();
    for (long iter = 0; iter < cfg.max_pair_updates; ++iter) {
        // i: steepest-descent coordinate free to grow; j: free to shrink.
        int up = -1, down = -1;
        double g_up = std::numeric_limits<double>::infinity();
        double g_down = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            if (alpha[i] < c && grad[i] < g_up) { g_up = grad[i]; up = i; }
            if (alpha[i] > 0.0 && grad[i] > g_down) { g_down = grad[i]; down = i; }
        }
        gap = g_down - g_up;
        if (gap <= cfg.tol) break;

        const double curv = k(up, up) + k(down, down) - 2.0 * k(up, down);
        double delta = curv > 0.0 ? gap / curv : std::min(c - alpha[up], alpha[down]);
        delta = std::min(delta, std::min(c - alpha[up], alpha[down]));
        alpha[up] += delta;
        alpha[down] -= delta;
        grad += delta * (k.col(up) - k.col(down));
    }
    if (gap > cfg.tol)
        throw OptimizationError("ocsvm_fit: pair-update cap reached before KKT tolerance", gap);

    // rho from margin support vectors (0 < alpha < C), falling back to all
    // support vectors when none are strictly interior.
    double rho_sum = 0.0;
    int rho_count = 0;
    const double eps = 1e-10;
    for (int i = 0; i < n; ++i) {
        if (alpha[i] > eps && alpha[i] < c - eps) { rho_sum += grad[i]; ++rho_count; }
    }
    if (rho_count == 0) {
        for (int i = 0; i < n; ++i)
            if (alpha[i] > eps) { rho_sum += grad[i]; ++rho_count; }
    }

    OcsvmModel model;
    model.gamma_rbf = cfg.gamma_rbf;
    model.nu = cfg.nu;
    model.rho = rho_sum / rho_count;
    std::vector<int> sv;
    for (int i = 0; i < n; ++i)
        if (alpha[i] > eps) sv.push_back(i);
    model.support_vectors.resize(static_cast<int>(sv.size()), x.cols());
    model.alpha.resize(static_cast<int>(sv.size()));
    for (size_t s = 0; s < sv.size(); ++s) {
        model.support_vectors.row(static_cast<int>(s)) = x.row(sv[s]);
        model.alpha[static_cast<int>(s)] = alpha[sv[s]];
    }
    return model;
}

inline double ocsvm_decision(const OcsvmModel& model, const Vector& x) {
    double f = -model.rho;
    for (int i = 0; i < model.alpha.size(); ++i)
        f += model.alpha[i] * detail::rbf(model.support_vectors.row(i), x, model.gamma_rbf);
    return f;
}

/// 1 = inlier (healthy), 0 = outlier.
inline int ocsvm_predict(const OcsvmModel& model, const Vector& x) {
    return ocsvm_decision(model, x) >= 0.0 ? 1 : 0;
}

} // namespace fdi
