#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <random>

#include "fdi/nnet/autoencoder.hpp"
#include "fdi/nnet/helm.hpp"
#include "fdi/nnet/network.hpp"
#include "fdi/nnet/vae.hpp"
#include "fdi/rng.hpp"
#include "support.hpp"

using namespace fdi;
using namespace fdi::nn;
using fdi::testing::collect;
using fdi::testing::max_gradient_error;
using fdi::testing::random_matrix;

TEST_CASE("forward rejects mismatched input dimensions") {
    const auto net = make_dense({3, 4, 2}, 0);
    CHECK_THROWS_AS(forward(net, Matrix(Matrix::Zero(5, 4))), std::invalid_argument);
    CHECK(forward(net, Matrix(Matrix::Zero(5, 3))).cols() == 2);
    CHECK(net.architecture() == std::vector<int>{3, 4, 2});
}

TEST_CASE("mse loss matches a hand computation") {
    Matrix target(2, 2), pred(2, 2);
    target.setZero();
    pred << 1.0, 1.0, 3.0, 4.0;
    // 0.5 * mean(1+1, 9+16) = 0.5 * 13.5
    CHECK(mse_loss(target, pred) == Catch::Approx(6.75));
    CHECK_THROWS_AS(mse_loss(target, Matrix::Zero(3, 2)), std::invalid_argument);
}

TEST_CASE("xavier init respects its bound, variance, and seed") {
    const int rows = 60, cols = 50;
    const double bound = std::sqrt(6.0 / (rows + cols));
    const Matrix w = xavier_init(rows, cols, 3);
    CHECK(w.maxCoeff() <= bound);
    CHECK(w.minCoeff() >= -bound);
    const double var = w.array().square().mean();
    CHECK(var == Catch::Approx(bound * bound / 3.0).epsilon(0.1));
    CHECK(xavier_init(rows, cols, 3) == w);
    CHECK(xavier_init(rows, cols, 4) != w);
}

TEST_CASE("backprop matches central finite differences for the mse loss") {
    Rng rng(101);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int in = 2 + static_cast<int>(rng.raw() % 4);
        const int hid = 2 + static_cast<int>(rng.raw() % 4);
        const int out = 1 + static_cast<int>(rng.raw() % 3);
        const int n = 3 + static_cast<int>(rng.raw() % 5);
        auto net = make_dense({in, hid, out}, trial);
        const Matrix x = random_matrix(n, in, rng);
        const Matrix t = random_matrix(n, out, rng);

        ForwardCache cache;
        Gradients g;
        const Matrix y = forward(net, x, &cache);
        backward(net, cache, mse_grad(t, y), g);

        std::vector<Matrix*> ws;
        std::vector<Vector*> bs;
        std::vector<const Matrix*> dws;
        std::vector<const Vector*> dbs;
        collect(net, g, ws, bs, dws, dbs);
        worst = std::max(worst, max_gradient_error(ws, bs, dws, dbs, [&] {
                             return mse_loss(t, forward(net, x));
                         }));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("backprop matches central finite differences for the autoencoder loss") {
    Rng rng(202);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int in = 3 + static_cast<int>(rng.raw() % 4);
        const int n = 3 + static_cast<int>(rng.raw() % 5);
        auto net = make_dense({in, 4, 2, 4, in}, 100 + trial);
        const Matrix x = random_matrix(n, in, rng);

        ForwardCache cache;
        Gradients g;
        const Matrix y = forward(net, x, &cache);
        backward(net, cache, mse_grad(x, y), g);

        std::vector<Matrix*> ws;
        std::vector<Vector*> bs;
        std::vector<const Matrix*> dws;
        std::vector<const Vector*> dbs;
        collect(net, g, ws, bs, dws, dbs);
        worst = std::max(worst, max_gradient_error(ws, bs, dws, dbs, [&] {
                             return mse_loss(x, forward(net, x));
                         }));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("vae backprop matches finite differences for the fixed-noise elbo") {
    Rng rng(303);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int in = 3 + static_cast<int>(rng.raw() % 3);
        const int n = 2 + static_cast<int>(rng.raw() % 4);
        auto vae = VaeModel::make(in, 200 + trial);
        const Matrix x = random_matrix(n, in, rng);
        Matrix eps(n, kLatentDim);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < kLatentDim; ++c) eps(r, c) = rng.normal();

        VaeGradients g;
        vae_loss_and_gradients(vae, x, eps, g);

        std::vector<Matrix*> ws;
        std::vector<Vector*> bs;
        std::vector<const Matrix*> dws;
        std::vector<const Vector*> dbs;
        collect(vae.trunk, g.trunk, ws, bs, dws, dbs);
        collect(vae.mu_head, g.mu_head, ws, bs, dws, dbs);
        collect(vae.logvar_head, g.logvar_head, ws, bs, dws, dbs);
        collect(vae.decoder, g.decoder, ws, bs, dws, dbs);
        worst = std::max(worst, max_gradient_error(ws, bs, dws, dbs, [&] {
                             const auto f = vae.forward_with_noise(x, eps);
                             return elbo_loss(x, f.reconstruction, f.mu, f.logvar);
                         }));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("adam first steps match the hand recurrence") {
    // With bias correction, the first update is exactly lr * g / (|g| + eps).
    AdamConfig cfg;
    cfg.learning_rate = 0.01;
    Matrix w(1, 2);
    w << 1.0, -2.0;
    Vector b(1);
    b << 0.5;
    Matrix dw(1, 2);
    dw << 0.3, -0.7;
    Vector db(1);
    db << 0.2;

    Adam opt(cfg);
    opt.step({&w}, {&b}, {&dw}, {&db});
    CHECK(w(0, 0) == Catch::Approx(1.0 - 0.01 * 0.3 / (0.3 + 1e-8)).margin(1e-15));
    CHECK(w(0, 1) == Catch::Approx(-2.0 + 0.01 * 0.7 / (0.7 + 1e-8)).margin(1e-15));
    CHECK(b[0] == Catch::Approx(0.5 - 0.01 * 0.2 / (0.2 + 1e-8)).margin(1e-15));

    // second step against the explicit moment recurrence
    Matrix dw2(1, 2);
    dw2 << -0.1, 0.4;
    Vector db2(1);
    db2 << 0.0;
    const double w00 = w(0, 0);
    opt.step({&w}, {&b}, {&dw2}, {&db2});
    const double m = 0.9 * (0.1 * 0.3) + 0.1 * (-0.1);
    const double v = 0.999 * (0.001 * 0.3 * 0.3) + 0.001 * 0.01;
    const double mhat = m / (1.0 - 0.9 * 0.9);
    const double vhat = v / (1.0 - 0.999 * 0.999);
    CHECK(w(0, 0) == Catch::Approx(w00 - 0.01 * mhat / (std::sqrt(vhat) + 1e-8)).margin(1e-12));
    CHECK(opt.steps() == 2);
}

TEST_CASE("supervised training reduces the empirical risk deterministically") {
    Rng rng(7);
    const Matrix x = random_matrix(200, 2, rng);
    const Matrix t = 2.0 * x.col(0) - 0.5 * x.col(1);

    auto net = make_dense({2, 8, 1}, 1);
    const double before = mse_loss(t, forward(net, x));
    TrainConfig cfg{1e-2, 32, 100, 5};
    train_supervised(net, x, t, cfg);
    const double after = mse_loss(t, forward(net, x));
    CHECK(after < 0.1 * before);

    auto net2 = make_dense({2, 8, 1}, 1);
    train_supervised(net2, x, t, cfg);
    CHECK(net2.layers[0].weight == net.layers[0].weight);
}

TEST_CASE("training reports divergence on non-finite loss") {
    auto net = make_dense({1, 1}, 0);
    Matrix x(2, 1);
    x << 1.0, std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(train_supervised(net, x, x, TrainConfig{1e-3, 2, 1, 0}), DivergenceError);
}

TEST_CASE("autoencoder encode/reconstruct use the documented split") {
    auto ae = AutoencoderModel::make(6, 3);
    CHECK(ae.net.architecture() == std::vector<int>{6, 20, 8, 20, 6});
    Rng rng(1);
    const Matrix x = random_matrix(5, 6, rng);
    const Matrix z = ae.encode(x);
    CHECK(z.cols() == kLatentDim);
    CHECK(ae.reconstruct(x).cols() == 6);
}

TEST_CASE("vae kl matches a monte carlo oracle within one percent") {
    // KL(q||p) = E_q[log q(z) - log p(z)] estimated with 1e6 reparametrized
    // samples per case.
    Rng rng(404);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix mu(1, 8), logvar(1, 8);
        for (int i = 0; i < 8; ++i) {
            const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
            mu(0, i) = sign * rng.uniform(0.5, 1.5); // keep KL away from zero
            logvar(0, i) = rng.uniform(-1.0, 1.0);
        }
        const double analytic = vae_kl(mu, logvar);

        const int samples = 1'000'000;
        double acc = 0.0;
        for (int s = 0; s < samples; ++s) {
            double term = 0.0;
            for (int i = 0; i < 8; ++i) {
                const double eps = rng.normal();
                const double z = mu(0, i) + std::exp(0.5 * logvar(0, i)) * eps;
                const double log_q = -0.5 * (logvar(0, i) + eps * eps);
                const double log_p = -0.5 * (z * z);
                term += log_q - log_p; // the log(2 pi) halves cancel
            }
            acc += term;
        }
        const double mc = acc / samples;
        CHECK(analytic == Catch::Approx(mc).epsilon(0.01));
    }
    CHECK(vae_kl(Matrix::Zero(3, 8), Matrix::Zero(3, 8)) == 0.0);
}

TEST_CASE("vae uses the posterior mean as its deterministic feature") {
    auto vae = VaeModel::make(5, 9);
    Rng rng(2);
    const Matrix x = random_matrix(4, 5, rng);
    const Matrix z1 = vae.encode(x);
    const Matrix z2 = vae.encode(x);
    CHECK(z1 == z2);
    CHECK(z1.cols() == kLatentDim);
    // reparametrized z differs from mu whenever noise is nonzero
    Matrix eps = Matrix::Ones(4, kLatentDim);
    const auto f = vae.forward_with_noise(x, eps);
    CHECK(f.mu == z1);
    CHECK(f.z != f.mu);
    CHECK(f.reconstruction.cols() == 5);
}

TEST_CASE("ista objective is non-increasing and hits the orthonormal closed form") {
    Rng rng(17);
    const int n = 12;
    const Matrix raw = random_matrix(n, n, rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(raw).householderQ();
    const Matrix s = random_matrix(n, 3, rng);
    const double lambda = 0.15;

    const auto res = ista_solve(q, s, lambda);
    for (size_t i = 1; i < res.objective_history.size(); ++i)
        CHECK(res.objective_history[i] <= res.objective_history[i - 1] + 1e-14);

    // orthonormal design: per-element soft threshold of q' s at lambda
    const Matrix a = q.transpose() * s;
    const Matrix closed =
        a.array().sign() * (a.array().abs() - lambda).max(0.0);
    CHECK((res.solution - closed).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("ista with zero penalty solves least squares") {
    Rng rng(23);
    const int n = 6;
    const Matrix f = Matrix::Identity(n, n) + 0.05 * random_matrix(n, n, rng);
    const Matrix beta_true = random_matrix(n, 2, rng);
    const Matrix s = f * beta_true;
    const auto res = ista_solve(f, s, 0.0, 200000, 1e-22);
    CHECK((f * res.solution - s).norm() < 1e-8);
}

TEST_CASE("ista validates input and reports non-convergence with the gap") {
    CHECK_THROWS_AS(ista_solve(Matrix::Identity(2, 2), Matrix::Ones(2, 1), -1.0),
                    std::invalid_argument);
    // an ill-conditioned system cannot finish in two iterations
    Rng rng(5);
    Matrix f = random_matrix(20, 20, rng);
    f.col(0) = f.col(1) + 1e-6 * Vector::Ones(20);
    CHECK_THROWS_AS(ista_solve(f, random_matrix(20, 1, rng), 1e-6, 2, 0.0), SolverError);
    // zero design matrix short-circuits to the zero solution
    const auto zero = ista_solve(Matrix::Zero(3, 3), Matrix::Ones(3, 1), 0.1);
    CHECK(zero.solution == Matrix::Zero(3, 1));
}

TEST_CASE("helm fit is deterministic with the documented footprint") {
    Rng rng(31);
    const Matrix x = random_matrix(60, 5, rng);
    const Matrix target = Matrix::Ones(60, 1);
    HelmConfig cfg;
    cfg.max_iters = 500000; // the underdetermined final layer converges slowly
    const auto a = helm_fit(x, target, 12, cfg);
    const auto b = helm_fit(x, target, 12, cfg);
    const auto c = helm_fit(x, target, 13, cfg);

    CHECK(a.architecture(5) == std::vector<int>{5, 20, 8, 20, 100, 1});
    CHECK(a.final_beta == b.final_beta);
    CHECK(a.final_beta != c.final_beta);
    for (const auto& layer : a.hidden) {
        CHECK(layer.random_weight.maxCoeff() <= 1.0);
        CHECK(layer.random_weight.minCoeff() >= -1.0);
    }

    const auto fwd = helm_forward(a, x);
    CHECK(fwd.output.rows() == 60);
    CHECK(fwd.output.cols() == 1);
    CHECK(fwd.latent.cols() == kLatentDim);
    // layer-wise readout tracks the constant healthy target
    CHECK((fwd.output.array() - 1.0).abs().mean() < 0.5);
}
