#pragma once

#include "fdi/nnet/autoencoder.hpp"
#include "fdi/nnet/network.hpp"

namespace fdi::nn {

/// Variational autoencoder with diagonal-Gaussian posterior, standard
/// normal prior and unit-variance Gaussian decoder. Shares the [n,20,8,20,n]
/// footprint of the vanilla autoencoder; the mu head doubles as the
/// deterministic latent feature for downstream use.
struct VaeModel {
    DenseNetwork trunk;       // n -> 20, tanh
    DenseNetwork mu_head;     // 20 -> 8, linear
    DenseNetwork logvar_head; // 20 -> 8, linear
    DenseNetwork decoder;     // 8 -> 20 -> n

    static VaeModel make(int input_dim, std::uint64_t seed) {
        VaeModel m;
        m.trunk = make_dense({input_dim, 20}, seed);
        m.trunk.layers[0].act = Activation::Tanh;
        m.mu_head = make_dense({20, kLatentDim}, seed + 11);
        m.logvar_head = make_dense({20, kLatentDim}, seed + 23);
        m.decoder = make_dense({kLatentDim, 20, input_dim}, seed + 37);
        return m;
    }

    int input_dim() const { return trunk.input_dim(); }

    struct Forward {
        Matrix reconstruction;
        Matrix mu;
        Matrix logvar;
        Matrix z;
    };

    /// z = mu + sigma .* eps; eps is injectable for tests.
    Forward forward_with_noise(const Matrix& x, const Matrix& eps) const {
        Forward f;
        const Matrix hidden = forward(trunk, x);
        f.mu = forward(mu_head, hidden);
        f.logvar = forward(logvar_head, hidden);
        f.z = f.mu + ((0.5 * f.logvar.array()).exp() * eps.array()).matrix();
        f.reconstruction = forward(decoder, f.z);
        return f;
    }

    /// Deterministic features: the mean of the approximate posterior.
    Matrix encode(const Matrix& x) const { return forward(mu_head, forward(trunk, x)); }

    Matrix reconstruct(const Matrix& x) const { return forward(decoder, encode(x)); }
};

/// Analytic KL(q || N(0, I)) summed over latent dims, mean over rows.
inline double vae_kl(const Matrix& mu, const Matrix& logvar) {
    const auto per_sample =
        -0.5 * (1.0 + logvar.array() - mu.array().square() - logvar.array().exp());
    return per_sample.rowwise().sum().mean();
}

/// Negative ELBO (to be minimized): reconstruction term plus analytic KL.
inline double elbo_loss(const Matrix& x, const Matrix& reconstruction, const Matrix& mu,
                        const Matrix& logvar) {
    return mse_loss(x, reconstruction) + vae_kl(mu, logvar);
}

struct VaeGradients {
    Gradients trunk, mu_head, logvar_head, decoder;
};

/// Negative ELBO and its parameter gradients for one fixed noise draw.
inline double vae_loss_and_gradients(const VaeModel& vae, const Matrix& xb, const Matrix& eps,
                                     VaeGradients& g) {
    ForwardCache trunk_cache, mu_cache, logvar_cache, dec_cache;
    const int rows = static_cast<int>(xb.rows());

    const Matrix hidden = forward(vae.trunk, xb, &trunk_cache);
    const Matrix mu = forward(vae.mu_head, hidden, &mu_cache);
    const Matrix logvar = forward(vae.logvar_head, hidden, &logvar_cache);
    const Matrix sigma = (0.5 * logvar.array()).exp();
    const Matrix z = mu + sigma.cwiseProduct(eps);
    const Matrix xhat = forward(vae.decoder, z, &dec_cache);

    const double loss = elbo_loss(xb, xhat, mu, logvar);

    const double inv_n = 1.0 / rows;
    const Matrix d_xhat = (xhat - xb) * inv_n;
    const Matrix d_z = backward(vae.decoder, dec_cache, d_xhat, g.decoder);

    const Matrix d_mu = d_z + mu * inv_n;
    const Matrix d_logvar = d_z.cwiseProduct((0.5 * sigma.array() * eps.array()).matrix()) +
                            ((logvar.array().exp() - 1.0) * (0.5 * inv_n)).matrix();

    const Matrix d_hidden_mu = backward(vae.mu_head, mu_cache, d_mu, g.mu_head);
    const Matrix d_hidden_lv = backward(vae.logvar_head, logvar_cache, d_logvar, g.logvar_head);
    backward(vae.trunk, trunk_cache, d_hidden_mu + d_hidden_lv, g.trunk);
    return loss;
}

/// Mini-batch Adam on the negative ELBO with one Monte Carlo sample per
/// datum per step.
inline void train_vae(VaeModel& vae, const Matrix& x, const TrainConfig& cfg) {
    const int n = static_cast<int>(x.rows());
    Adam opt(cfg.adam());
    Rng noise(cfg.seed ^ 0x853c49e6748fea9bULL);
    VaeGradients g;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto idx = detail::shuffled_indices(n, cfg.seed + 0x9e37 * (epoch + 1));
        for (int begin = 0; begin < n; begin += cfg.batch_size) {
            const int end = std::min(n, begin + cfg.batch_size);
            const Matrix xb = detail::take_rows(x, idx, begin, end);
            const int rows = static_cast<int>(xb.rows());

            Matrix eps(rows, kLatentDim);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < kLatentDim; ++c) eps(r, c) = noise.normal();

            const double loss = vae_loss_and_gradients(vae, xb, eps, g);
            if (!std::isfinite(loss)) throw DivergenceError(epoch);

            std::vector<Matrix*> ws;
            std::vector<Vector*> bs;
            std::vector<const Matrix*> dws;
            std::vector<const Vector*> dbs;
            auto collect = [&](DenseNetwork& net, Gradients& grads) {
                for (size_t l = 0; l < net.layers.size(); ++l) {
                    ws.push_back(&net.layers[l].weight);
                    bs.push_back(&net.layers[l].bias);
                    dws.push_back(&grads.d_weight[l]);
                    dbs.push_back(&grads.d_bias[l]);
                }
            };
            collect(vae.trunk, g.trunk);
            collect(vae.mu_head, g.mu_head);
            collect(vae.logvar_head, g.logvar_head);
            collect(vae.decoder, g.decoder);
            opt.step(ws, bs, dws, dbs);
        }
    }
}

} // namespace fdi::nn
