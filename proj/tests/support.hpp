#pragma once

// Shared oracles for the test suites: finite-difference gradient checking
// against the analytic backprop, and parameter collection over networks.

#include <functional>
#include <vector>

#include "fdi/nnet/network.hpp"
#include "fdi/rng.hpp"

namespace fdi::testing {

/// Central finite difference of `loss` with respect to every parameter,
/// compared against the analytic gradients; returns the worst normalized
/// error  max |g_fd - g_an| / max(1, max |g_fd|).
inline double max_gradient_error(const std::vector<Matrix*>& ws, const std::vector<Vector*>& bs,
                                 const std::vector<const Matrix*>& dws,
                                 const std::vector<const Vector*>& dbs,
                                 const std::function<double()>& loss, double h = 1e-6) {
    double worst_abs = 0.0, scale = 1.0;
    auto probe = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + h;
        const double up = loss();
        param = saved - h;
        const double down = loss();
        param = saved;
        const double fd = (up - down) / (2.0 * h);
        worst_abs = std::max(worst_abs, std::abs(fd - analytic));
        scale = std::max(scale, std::abs(fd));
    };
    for (size_t p = 0; p < ws.size(); ++p)
        for (Eigen::Index r = 0; r < ws[p]->rows(); ++r)
            for (Eigen::Index c = 0; c < ws[p]->cols(); ++c)
                probe((*ws[p])(r, c), (*dws[p])(r, c));
    for (size_t p = 0; p < bs.size(); ++p)
        for (Eigen::Index i = 0; i < bs[p]->size(); ++i)
            probe((*bs[p])[i], (*dbs[p])[i]);
    return worst_abs / scale;
}

inline void collect(nn::DenseNetwork& net, nn::Gradients& g, std::vector<Matrix*>& ws,
                    std::vector<Vector*>& bs, std::vector<const Matrix*>& dws,
                    std::vector<const Vector*>& dbs) {
    for (size_t l = 0; l < net.layers.size(); ++l) {
        ws.push_back(&net.layers[l].weight);
        bs.push_back(&net.layers[l].bias);
        dws.push_back(&g.d_weight[l]);
        dbs.push_back(&g.d_bias[l]);
    }
}

inline Matrix random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
    Matrix m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(-scale, scale);
    return m;
}

} // namespace fdi::testing
