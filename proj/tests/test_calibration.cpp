#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fdi/calibration.hpp"
#include "fdi/dataset.hpp"
#include "fdi/plant.hpp"

using namespace fdi;

namespace {

Matrix random_spd(int n, std::mt19937_64& gen, double base) {
    std::normal_distribution<double> nd;
    Matrix a(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) a(r, c) = nd(gen);
    return a * a.transpose() + base * Matrix::Identity(n, n);
}

} // namespace

TEST_CASE("sigma point weights and moment reconstruction") {
    UkfConfig cfg;
    cfg.process_cov = Matrix::Identity(3, 3);
    cfg.measurement_cov = Matrix::Identity(2, 2);
    UkfState state;
    state.mean = Vector::Zero(3);
    state.mean << 1.0, -2.0, 0.5;
    state.cov = Matrix::Identity(3, 3) * 0.25;
    state.cov(0, 1) = state.cov(1, 0) = 0.05;

    const auto sp = sigma_points(state, cfg);
    REQUIRE(sp.points.cols() == 7);
    CHECK(sp.w_mean.sum() == Catch::Approx(1.0).margin(1e-14));
    // cov weights add the (1 - alpha^2 + beta_ut) correction on the center
    CHECK(sp.w_cov.sum() ==
          Catch::Approx(1.0 + 1.0 - cfg.alpha * cfg.alpha + cfg.beta_ut).margin(1e-14));

    // weighted moments reproduce the input state exactly
    Vector mean = Vector::Zero(3);
    for (int i = 0; i < 7; ++i) mean += sp.w_mean[i] * sp.points.col(i);
    CHECK((mean - state.mean).cwiseAbs().maxCoeff() < 1e-12);

    Matrix cov = Matrix::Zero(3, 3);
    for (int i = 0; i < 7; ++i) {
        const Vector d = sp.points.col(i) - state.mean;
        cov += sp.w_cov[i] * d * d.transpose();
    }
    CHECK((cov - state.cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sigma points tolerate tiny covariance asymmetry via jitter") {
    UkfConfig cfg;
    UkfState state;
    state.mean = Vector::Zero(2);
    state.cov = Matrix::Identity(2, 2) * 1e-8;
    state.cov(0, 0) = -1e-14; // numerically indefinite, within jitter reach
    CHECK_NOTHROW(sigma_points(state, cfg));

    state.cov(0, 0) = -1.0; // beyond any jitter rung
    CHECK_THROWS_AS(sigma_points(state, cfg), NumericError);
}

TEST_CASE("ukf equals the closed-form kalman filter on random linear systems") {
    // The unscented transform is exact for linear measurement maps, so the
    // posterior must match the textbook Kalman update to numerical precision.
    std::mt19937_64 gen(20240817);
    std::uniform_int_distribution<int> dim(1, 4);
    std::normal_distribution<double> nd;

    double worst_mean = 0.0, worst_cov = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = dim(gen);
        const int m = dim(gen);
        Matrix h(m, n);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c) h(r, c) = nd(gen);

        UkfConfig cfg;
        cfg.process_cov = random_spd(n, gen, 0.01);
        cfg.measurement_cov = random_spd(m, gen, 0.1);

        UkfState ukf;
        ukf.mean = Vector::Zero(n);
        for (int i = 0; i < n; ++i) ukf.mean[i] = nd(gen);
        ukf.cov = random_spd(n, gen, 0.05);

        Vector kf_mean = ukf.mean;
        Matrix kf_cov = ukf.cov;

        for (int step = 0; step < 5; ++step) {
            Vector y(m);
            for (int i = 0; i < m; ++i) y[i] = nd(gen);

            ukf = predict(ukf, cfg);
            ukf = update(ukf, [&](const Vector& x) { return Vector(h * x); }, y, cfg);

            // closed-form oracle
            kf_cov += cfg.process_cov;
            const Matrix s = h * kf_cov * h.transpose() + cfg.measurement_cov;
            const Matrix k = kf_cov * h.transpose() * s.inverse();
            kf_mean += k * (y - h * kf_mean);
            kf_cov = kf_cov - k * s * k.transpose();

            worst_mean = std::max(worst_mean, (ukf.mean - kf_mean).cwiseAbs().maxCoeff());
            worst_cov = std::max(worst_cov, (ukf.cov - kf_cov).cwiseAbs().maxCoeff());
        }
    }
    CHECK(worst_mean < 1e-8);
    CHECK(worst_cov < 1e-8);
}

TEST_CASE("ukf recovers a held hpc efficiency step on the surrogate") {
    Plant plant{PlantConfig{}};
    HealthParameters truth;
    truth.theta[HealthParameters::HpcEff] = -0.01;

    std::vector<Snapshot> storage;
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        Snapshot s;
        s.w = {rng.uniform(20000.0, 36000.0), rng.uniform(0.55, 0.8), rng.uniform(55.0, 90.0)};
        s.true_theta = truth;
        s.x_s = plant.simulate(s.w, truth).x_s;
        storage.push_back(std::move(s));
    }
    std::vector<const Snapshot*> ptrs;
    for (const auto& s : storage) ptrs.push_back(&s);

    const auto cfg = UkfConfig::defaults(plant);
    const auto trace =
        calibrate_series(ptrs, plant, UkfState::initial(kNumHealthParams), cfg);
    REQUIRE(trace.rows.size() == 50);
    const double est = trace.rows.back().theta_hat[HealthParameters::HpcEff];
    CHECK(std::abs(est - (-0.01)) < 1e-3);
    // the calibrated model reproduces the observed sensors closely
    CHECK((trace.rows.back().xs_hat - storage.back().x_s.values).cwiseAbs().maxCoeff() <
          1e-2 * storage.back().x_s.values.cwiseAbs().maxCoeff());
}

TEST_CASE("calibrated estimates stay inside the health parameter box") {
    Plant plant{PlantConfig{}};
    std::vector<Snapshot> storage;
    Rng rng(9);
    HealthParameters truth;
    truth.theta[HealthParameters::HpcEff] = -0.02;
    for (int i = 0; i < 10; ++i) {
        Snapshot s;
        s.w = {rng.uniform(15000.0, 35000.0), rng.uniform(0.5, 0.8), rng.uniform(40.0, 95.0)};
        s.true_theta = truth;
        s.x_s = plant.simulate(s.w, truth).x_s;
        storage.push_back(std::move(s));
    }
    std::vector<const Snapshot*> ptrs;
    for (const auto& s : storage) ptrs.push_back(&s);
    const auto trace = calibrate_series(ptrs, plant, UkfState::initial(kNumHealthParams),
                                        UkfConfig::defaults(plant));
    for (const auto& row : trace.rows) {
        CHECK(row.theta_hat.minCoeff() >= -0.10);
        CHECK(row.theta_hat.maxCoeff() <= 0.05);
        CHECK(row.innovation_norm >= 0.0);
    }
}

TEST_CASE("contaminate at infinite snr is the identity") {
    Plant plant{PlantConfig{}};
    std::vector<Snapshot> storage(3);
    Rng rng(2);
    for (auto& s : storage) {
        s.w = {rng.uniform(15000.0, 35000.0), 0.7, 70.0};
        s.x_s = plant.simulate(s.w, HealthParameters{}).x_s;
    }
    std::vector<const Snapshot*> ptrs;
    for (const auto& s : storage) ptrs.push_back(&s);

    CalibrationTrace trace;
    for (int i = 0; i < 3; ++i) {
        CalibrationRow row;
        row.theta_hat.setConstant(0.003);
        const auto sim = plant.simulate(storage[i].w, detail::clamp_theta(row.theta_hat));
        row.xs_hat = sim.x_s.values;
        row.xv_hat = sim.x_v.values;
        row.innovation_norm = 0.0;
        trace.rows.push_back(row);
    }

    const auto clean =
        contaminate(trace, ptrs, plant, std::numeric_limits<double>::infinity(), 0);
    for (int i = 0; i < 3; ++i)
        CHECK(clean.rows[i].theta_hat == trace.rows[i].theta_hat);

    // finite SNR perturbs, deterministically under the seed
    const auto noisy1 = contaminate(trace, ptrs, plant, 20.0, 1);
    const auto noisy2 = contaminate(trace, ptrs, plant, 20.0, 1);
    CHECK(noisy1.rows[0].theta_hat != trace.rows[0].theta_hat);
    CHECK(noisy1.rows[0].theta_hat == noisy2.rows[0].theta_hat);
    // model responses re-simulated from the noisy estimate
    const auto resim =
        plant.simulate(storage[0].w, detail::clamp_theta(noisy1.rows[0].theta_hat));
    CHECK(noisy1.rows[0].xs_hat == resim.x_s.values);

    CHECK_THROWS_AS(contaminate(trace, ptrs, plant, -std::numeric_limits<double>::infinity(), 0),
                    std::invalid_argument);
}

TEST_CASE("contaminate realizes the requested signal-to-noise ratio") {
    Plant plant{PlantConfig{}};
    const int n = 4000;
    std::vector<Snapshot> storage(n);
    Rng rng(4);
    for (auto& s : storage) s.w = {30000.0, 0.7, 75.0};
    std::vector<const Snapshot*> ptrs;
    for (const auto& s : storage) ptrs.push_back(&s);

    CalibrationTrace trace;
    for (int i = 0; i < n; ++i) {
        CalibrationRow row;
        row.theta_hat.setZero();
        row.theta_hat[0] = 0.01; // only one component carries power
        row.xs_hat.setZero();
        row.xv_hat.setZero();
        trace.rows.push_back(row);
    }
    const double snr_db = 10.0;
    const auto noisy = contaminate(trace, ptrs, plant, snr_db, 3);

    double noise_power = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = noisy.rows[i].theta_hat[0] - 0.01;
        noise_power += d * d;
        // zero-power components stay exactly zero
        for (int k = 1; k < kNumHealthParams; ++k) CHECK(noisy.rows[i].theta_hat[k] == 0.0);
    }
    noise_power /= n;
    const double expected = 0.01 * 0.01 / std::pow(10.0, snr_db / 10.0);
    CHECK(noise_power == Catch::Approx(expected).epsilon(0.1));
}
