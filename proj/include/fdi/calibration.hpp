#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdi/dataset.hpp"
#include "fdi/plant.hpp"
#include "fdi/trace.hpp"
#include "fdi/types.hpp"

namespace fdi {

struct UkfConfig {
    double alpha = 0.5;
    double kappa = 0.0;
    double beta_ut = 2.0;
    Matrix process_cov;     // Q, state dim
    Matrix measurement_cov; // R, measurement dim

    /// Q = (2e-4)^2 I, R = (4e-3 x nominal sensor magnitude)^2 at a
    /// reference cruise point. The R scale trades tracking bandwidth for
    /// estimate smoothness: it is large enough that the per-snapshot
    /// healthy scatter is averaged out of theta-hat, yet a -1% step is
    /// still recovered well within 50 updates.
    static UkfConfig defaults(const Plant& plant) {
        UkfConfig cfg;
        cfg.process_cov = Matrix::Identity(kNumHealthParams, kNumHealthParams) * (2e-4 * 2e-4);
        const auto nominal = plant.simulate({30000.0, 0.7, 75.0}, HealthParameters{});
        cfg.measurement_cov = Matrix::Zero(kNumSensors, kNumSensors);
        for (int i = 0; i < kNumSensors; ++i) {
            const double s = 4e-3 * nominal.x_s.values[i];
            cfg.measurement_cov(i, i) = s * s;
        }
        return cfg;
    }
};

struct UkfState {
    Vector mean;
    Matrix cov;

    static UkfState initial(int dim, double sigma = 5e-3) {
        return {Vector::Zero(dim), Matrix::Identity(dim, dim) * sigma * sigma};
    }
};

struct SigmaPoints {
    Matrix points; // dim x (2n+1), column 0 is the mean
    Vector w_mean;
    Vector w_cov;
};

namespace detail {

/// Cholesky factor with escalating jitter; throws on failure.
inline Matrix robust_cholesky(const Matrix& m) {
    for (double jitter : {0.0, 1e-12, 1e-9, 1e-6}) {
        Matrix a = m + jitter * Matrix::Identity(m.rows(), m.cols());
        Eigen::LLT<Matrix> llt(a);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    throw NumericError("ukf", "covariance square root failed after max jitter");
}

} // namespace detail

inline SigmaPoints sigma_points(const UkfState& state, const UkfConfig& cfg) {
    const int n = static_cast<int>(state.mean.size());
    const double lambda = cfg.alpha * cfg.alpha * (n + cfg.kappa) - n;
    const Matrix root = detail::robust_cholesky(state.cov);
    SigmaPoints sp;
    sp.points.resize(n, 2 * n + 1);
    sp.points.col(0) = state.mean;
    const double scale = std::sqrt(n + lambda);
    for (int i = 0; i < n; ++i) {
        sp.points.col(1 + i) = state.mean + scale * root.col(i);
        sp.points.col(1 + n + i) = state.mean - scale * root.col(i);
    }
    sp.w_mean = Vector::Constant(2 * n + 1, 1.0 / (2.0 * (n + lambda)));
    sp.w_cov = sp.w_mean;
    sp.w_mean[0] = lambda / (n + lambda);
    sp.w_cov[0] = sp.w_mean[0] + (1.0 - cfg.alpha * cfg.alpha + cfg.beta_ut);
    return sp;
}

/// Random-walk time update: mean unchanged, cov grows by Q.
inline UkfState predict(const UkfState& state, const UkfConfig& cfg) {
    return {state.mean, state.cov + cfg.process_cov};
}

struct UpdateInfo {
    Vector innovation;
    double innovation_cov_trace = 0.0;
};

/// Unscented measurement update with an arbitrary measurement function.
inline UkfState update(const UkfState& state, const std::function<Vector(const Vector&)>& measure,
                       const Vector& observed, const UkfConfig& cfg, UpdateInfo* info = nullptr) {
    const int n = static_cast<int>(state.mean.size());
    const SigmaPoints sp = sigma_points(state, cfg);
    const int m = static_cast<int>(observed.size());
    Matrix y(m, 2 * n + 1);
    for (int i = 0; i < 2 * n + 1; ++i) y.col(i) = measure(sp.points.col(i));
    const Vector y_mean = y * sp.w_mean;

    Matrix s = cfg.measurement_cov;
    Matrix cross = Matrix::Zero(n, m);
    for (int i = 0; i < 2 * n + 1; ++i) {
        const Vector dy = y.col(i) - y_mean;
        const Vector dx = sp.points.col(i) - state.mean;
        s += sp.w_cov[i] * dy * dy.transpose();
        cross += sp.w_cov[i] * dx * dy.transpose();
    }

    Eigen::FullPivLU<Matrix> lu(s);
    if (!lu.isInvertible()) {
        Eigen::JacobiSVD<Matrix> svd(s);
        const double cond = svd.singularValues()(0) /
                            std::max(svd.singularValues()(svd.singularValues().size() - 1), 1e-300);
        throw NumericError("ukf", "singular innovation covariance, cond=" + std::to_string(cond));
    }
    const Matrix gain = cross * lu.inverse();
    const Vector innovation = observed - y_mean;

    UkfState post;
    post.mean = state.mean + gain * innovation;
    post.cov = state.cov - gain * s * gain.transpose();
    post.cov = 0.5 * (post.cov + post.cov.transpose());
    if (info) {
        info->innovation = innovation;
        info->innovation_cov_trace = s.trace();
    }
    return post;
}

namespace detail {

/// Keeps sigma-point excursions inside the valid health-parameter box.
inline HealthParameters clamp_theta(const Vector& raw) {
    HealthParameters h;
    for (int i = 0; i < kNumHealthParams; ++i) h.theta[i] = std::clamp(raw[i], -0.10, 0.05);
    return h;
}

} // namespace detail

/// Runs the predict/update recursion over a time-ordered snapshot series
/// and emits per-snapshot posterior-mean model responses.
inline CalibrationTrace calibrate_series(const std::vector<const Snapshot*>& snapshots,
                                         const Plant& plant, UkfState state,
                                         const UkfConfig& cfg) {
    CalibrationTrace trace;
    trace.rows.reserve(snapshots.size());
    size_t idx = 0;
    for (const Snapshot* snap : snapshots) {
        try {
            state = predict(state, cfg);
            const OperatingPoint w = snap->w;
            UpdateInfo info;
            state = update(
                state,
                [&](const Vector& theta) {
                    return Vector(plant.simulate(w, detail::clamp_theta(theta)).x_s.values);
                },
                Vector(snap->x_s.values), cfg, &info);

            CalibrationRow row;
            row.theta_hat = detail::clamp_theta(state.mean).theta;
            const auto out = plant.simulate(w, detail::clamp_theta(state.mean));
            row.xs_hat = out.x_s.values;
            row.xv_hat = out.x_v.values;
            row.innovation_norm = info.innovation.norm();
            trace.rows.push_back(std::move(row));
        } catch (const NumericError& e) {
            throw NumericError("ukf", "snapshot " + std::to_string(idx) + ": " + e.what());
        }
        ++idx;
    }
    return trace;
}

inline CalibrationTrace calibrate_series(const DatasetBundle& bundle, const Plant& plant,
                                         const UkfState& init, const UkfConfig& cfg) {
    std::vector<const Snapshot*> ptrs;
    ptrs.reserve(bundle.snapshots.size());
    for (const auto& s : bundle.snapshots) ptrs.push_back(&s);
    return calibrate_series(ptrs, plant, init, cfg);
}

/// Additive Gaussian contamination of the health estimates at a target
/// SNR; model responses are recomputed from the noisy estimates.
/// Zero-power components pass through unchanged. snr_db = +inf is a no-op.
inline CalibrationTrace contaminate(const CalibrationTrace& trace,
                                    const std::vector<const Snapshot*>& snapshots,
                                    const Plant& plant, double snr_db, std::uint64_t seed) {
    if (trace.rows.size() != snapshots.size())
        throw std::invalid_argument("contaminate: trace/snapshot length mismatch");
    if (std::isinf(snr_db) && snr_db > 0) return trace;
    if (!std::isfinite(snr_db)) throw std::invalid_argument("contaminate: bad snr_db");

    const size_t n = trace.rows.size();
    Vector power = Vector::Zero(kNumHealthParams);
    for (const auto& row : trace.rows) power += row.theta_hat.array().square().matrix();
    power /= std::max<size_t>(n, 1);

    const double ratio = std::pow(10.0, snr_db / 10.0);
    Vector sigma(kNumHealthParams);
    for (int k = 0; k < kNumHealthParams; ++k)
        sigma[k] = power[k] > 0.0 ? std::sqrt(power[k] / ratio) : 0.0;

    Rng rng(seed ^ 0xc6a4a7935bd1e995ULL);
    CalibrationTrace out;
    out.rows.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        CalibrationRow row = trace.rows[i];
        for (int k = 0; k < kNumHealthParams; ++k) row.theta_hat[k] += rng.normal(sigma[k]);
        const auto sim = plant.simulate(snapshots[i]->w, detail::clamp_theta(row.theta_hat));
        row.xs_hat = sim.x_s.values;
        row.xv_hat = sim.x_v.values;
        out.rows.push_back(std::move(row));
    }
    return out;
}

} // namespace fdi
