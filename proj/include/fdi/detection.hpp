#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdi/nnet/autoencoder.hpp"
#include "fdi/nnet/helm.hpp"
#include "fdi/nnet/vae.hpp"
#include "fdi/stats.hpp"
#include "fdi/types.hpp"

namespace fdi {

enum class Embedding { None, Ae, Vae, Helm };

inline std::string to_string(Embedding e) {
    switch (e) {
        case Embedding::None: return "none";
        case Embedding::Ae: return "ae";
        case Embedding::Vae: return "vae";
        case Embedding::Helm: return "helm";
    }
    throw std::invalid_argument("unknown embedding");
}

inline Embedding embedding_from_string(const std::string& s) {
    if (s == "none") return Embedding::None;
    if (s == "ae") return Embedding::Ae;
    if (s == "vae") return Embedding::Vae;
    if (s == "helm") return Embedding::Helm;
    throw std::invalid_argument("unknown embedding \"" + s + "\"");
}

struct OneClassConfig {
    double gamma = 1.5;      // safety margin on the threshold
    double percentile = 99.9;
    nn::TrainConfig embed_train = nn::TrainConfig::autoencoder();
    nn::TrainConfig head_train = nn::TrainConfig::one_class();
    nn::HelmConfig helm = [] {
        // the solver's own cap (5000) is tuned for well-conditioned layer
        // fits; full pipelines need the looser budget
        nn::HelmConfig h;
        h.max_iters = 500000;
        return h;
    }();
};

/// Healthy-target regressor G with an optional unsupervised embedding E.
/// G(x) is trained to hit T=1 on healthy data; the fitted threshold beta
/// turns |T - G(x)| into the similarity score.
struct OneClassPipeline {
    Embedding kind = Embedding::None;
    nn::AutoencoderModel ae;
    nn::VaeModel vae;
    nn::HelmModel helm;
    nn::DenseNetwork head; // [z, 20, 100, 1]; unused for HELM
    Vector z_mean, z_scale; // per-dim head-input standardization; empty = identity
    double gamma = 1.5;
    double percentile = 99.9;
    double beta = -1.0; // invalid until fit_threshold

    bool thresholded() const { return beta > 0.0; }

    /// Centers and rescales latent features so every dimension reaches the
    /// head at unit scale; embeddings that compress the signal into a
    /// low-variance dimension would otherwise starve it.
    Matrix standardize(const Matrix& z) const {
        if (z_mean.size() == 0) return z;
        if (z.cols() != z_mean.size())
            throw std::invalid_argument("standardize: latent dim mismatch");
        return (z.rowwise() - z_mean.transpose()).array().rowwise() /
               z_scale.transpose().array();
    }

    /// Latent features: AE code, VAE posterior mean, HELM bottleneck state,
    /// or the raw input when no embedding is used.
    Matrix embed(const Matrix& x) const {
        switch (kind) {
            case Embedding::None: return x;
            case Embedding::Ae: return ae.encode(x);
            case Embedding::Vae: return vae.encode(x);
            case Embedding::Helm: return nn::helm_forward(helm, x).latent;
        }
        throw std::invalid_argument("unknown embedding");
    }

    /// G(x): one column per sample.
    Matrix predict(const Matrix& x) const {
        if (kind == Embedding::Helm) return nn::helm_forward(helm, x).output;
        return nn::forward(head, standardize(embed(x)));
    }
};

/// Two-step fit per the one-class scheme: the embedding is trained
/// unsupervised on healthy data and frozen, then the head regresses the
/// constant target T=1 on the embedded features. HELM is fit layer-wise
/// end to end against the same target.
inline OneClassPipeline fit_pipeline(const Matrix& x_train, Embedding kind,
                                     const OneClassConfig& cfg, std::uint64_t seed) {
    if (x_train.rows() == 0) throw std::invalid_argument("fit_pipeline: empty training set");
    OneClassPipeline p;
    p.kind = kind;
    p.gamma = cfg.gamma;
    p.percentile = cfg.percentile;
    const int n = static_cast<int>(x_train.cols());

    nn::TrainConfig embed_cfg = cfg.embed_train;
    embed_cfg.seed = seed;
    switch (kind) {
        case Embedding::None:
            break;
        case Embedding::Ae:
            p.ae = nn::AutoencoderModel::make(n, seed);
            p.ae.train(x_train, embed_cfg);
            break;
        case Embedding::Vae:
            p.vae = nn::VaeModel::make(n, seed);
            nn::train_vae(p.vae, x_train, embed_cfg);
            break;
        case Embedding::Helm: {
            p.helm = nn::helm_fit(x_train, Matrix::Ones(x_train.rows(), 1), seed, cfg.helm);
            return p;
        }
    }

    Matrix z = p.embed(x_train);
    if (kind == Embedding::Vae) {
        // the KL term shrinks informative posterior-mean dimensions unevenly;
        // bring them back to unit scale before the head. AE codes are already
        // comparably scaled, and standardizing them only amplifies noise dims.
        p.z_mean = z.colwise().mean();
        p.z_scale.resize(z.cols());
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
            const double var = (z.col(c).array() - p.z_mean[c]).square().mean();
            p.z_scale[c] = std::max(std::sqrt(var), 1e-9);
        }
    }
    p.head = nn::make_dense({static_cast<int>(z.cols()), 20, 100, 1}, seed + 7777);
    nn::TrainConfig head_cfg = cfg.head_train;
    head_cfg.seed = seed + 7777;
    nn::train_supervised(p.head, p.standardize(z), Matrix::Ones(z.rows(), 1), head_cfg);
    return p;
}

/// beta = gamma x nearest-rank percentile of |T - G(S_V)|, floored at 1e-9.
inline double fit_threshold(OneClassPipeline& pipeline, const Matrix& x_validation) {
    if (x_validation.rows() == 0) throw std::invalid_argument("fit_threshold: empty validation set");
    const Matrix g = pipeline.predict(x_validation);
    std::vector<double> errors(g.rows());
    for (Eigen::Index i = 0; i < g.rows(); ++i) errors[i] = std::abs(1.0 - g(i, 0));
    pipeline.beta =
        std::max(pipeline.gamma * percentile_nearest_rank(std::move(errors), pipeline.percentile),
                 1e-9);
    return pipeline.beta;
}

/// s_I = |T - G(x)| / beta, one entry per row of x.
inline Vector similarity(const OneClassPipeline& pipeline, const Matrix& x) {
    if (!pipeline.thresholded())
        throw std::logic_error("similarity: threshold not fitted");
    const Matrix g = pipeline.predict(x);
    return (1.0 - g.col(0).array()).abs() / pipeline.beta;
}

/// h_hat = 1 iff s_I < 1 (boundary counts as faulty).
inline int detect(double s) { return s < 1.0 ? 1 : 0; }

inline std::vector<int> detect(const Vector& s) {
    std::vector<int> h(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) h[i] = detect(s[i]);
    return h;
}

} // namespace fdi
