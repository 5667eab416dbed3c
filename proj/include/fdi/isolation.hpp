#pragma once

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <vector>

#include "fdi/detection.hpp"
#include "fdi/stats.hpp"
#include "fdi/types.hpp"

namespace fdi {

using Reconstructor = std::function<Matrix(const Matrix&)>;

/// The same autoencoder family that provides the embedding also serves as
/// the isolation reconstructor; HELM and the direct pipeline have no
/// generative decoder and are excluded.
inline Reconstructor reconstructor_of(const OneClassPipeline& pipeline) {
    switch (pipeline.kind) {
        case Embedding::Ae:
            return [&pipeline](const Matrix& x) { return pipeline.ae.reconstruct(x); };
        case Embedding::Vae:
            return [&pipeline](const Matrix& x) { return pipeline.vae.reconstruct(x); };
        default:
            throw std::invalid_argument("isolation: reconstructor requires an AE or VAE pipeline");
    }
}

struct IsolationThresholds {
    Vector nu; // per-column, > 0
};

/// nu_k = gamma x nearest-rank 99.9th percentile of the column-k absolute
/// reconstruction error over the validation set, floored at 1e-9. gamma > 1
/// adds safety margin over the finite-sample percentile estimate.
inline IsolationThresholds fit_nu(const Reconstructor& reconstruct, const Matrix& x_validation,
                                  double percentile = 99.9, double gamma = 1.0) {
    if (x_validation.rows() == 0) throw std::invalid_argument("fit_nu: empty validation set");
    if (gamma <= 0.0) throw std::invalid_argument("fit_nu: gamma must be positive");
    const Matrix err = (x_validation - reconstruct(x_validation)).cwiseAbs();
    IsolationThresholds t;
    t.nu.resize(err.cols());
    std::vector<double> col(err.rows());
    for (Eigen::Index k = 0; k < err.cols(); ++k) {
        for (Eigen::Index i = 0; i < err.rows(); ++i) col[i] = err(i, k);
        t.nu[k] = std::max(gamma * percentile_nearest_rank(col, percentile), 1e-9);
    }
    return t;
}

/// d_I(x_k) = |x_k - F(x)_k| / nu_k, rows are snapshots.
inline Matrix isolation_scores(const Reconstructor& reconstruct, const Matrix& x,
                               const IsolationThresholds& t) {
    if (x.cols() != t.nu.size())
        throw std::invalid_argument("isolation_scores: feature/threshold dim mismatch");
    const Matrix err = (x - reconstruct(x)).cwiseAbs();
    return err.array().rowwise() / t.nu.transpose().array();
}

/// Column indices with d > 1, by descending score; equal scores break
/// toward the lower index.
inline std::vector<int> rank_affected(const Vector& d) {
    std::vector<int> ids;
    for (int k = 0; k < d.size(); ++k)
        if (d[k] > 1.0) ids.push_back(k);
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) { return d[a] > d[b]; });
    return ids;
}

} // namespace fdi
