#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdi/dataset.hpp"
#include "fdi/detection.hpp"
#include "fdi/isolation.hpp"
#include "fdi/nnet/helm.hpp"
#include "fdi/ocsvm.hpp"

namespace fdi {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    j["data"] = std::move(data);
    return j;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw std::invalid_argument("matrix payload size mismatch");
    Matrix m(rows, cols);
    size_t i = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++];
    return m;
}

inline nlohmann::json vector_to_json(const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vector vector_from_json(const nlohmann::json& j) {
    const auto data = j.get<std::vector<double>>();
    Vector v(static_cast<Eigen::Index>(data.size()));
    for (size_t i = 0; i < data.size(); ++i) v[static_cast<Eigen::Index>(i)] = data[i];
    return v;
}

inline nlohmann::json network_to_json(const nn::DenseNetwork& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers) {
        nlohmann::json jl;
        jl["weight"] = matrix_to_json(l.weight);
        jl["bias"] = vector_to_json(l.bias);
        jl["act"] = l.act == nn::Activation::Tanh ? "tanh" : "identity";
        layers.push_back(std::move(jl));
    }
    return layers;
}

inline nn::DenseNetwork network_from_json(const nlohmann::json& j) {
    nn::DenseNetwork net;
    for (const auto& jl : j) {
        nn::Layer l;
        l.weight = matrix_from_json(jl.at("weight"));
        l.bias = vector_from_json(jl.at("bias"));
        const auto act = jl.at("act").get<std::string>();
        if (act == "tanh") l.act = nn::Activation::Tanh;
        else if (act == "identity") l.act = nn::Activation::Identity;
        else throw std::invalid_argument("unknown activation \"" + act + "\"");
        net.layers.push_back(std::move(l));
    }
    return net;
}

inline nlohmann::json helm_to_json(const nn::HelmModel& m) {
    nlohmann::json j;
    nlohmann::json hidden = nlohmann::json::array();
    for (const auto& h : m.hidden) {
        nlohmann::json jh;
        jh["random_weight"] = matrix_to_json(h.random_weight);
        jh["random_bias"] = vector_to_json(h.random_bias);
        jh["beta"] = matrix_to_json(h.beta);
        hidden.push_back(std::move(jh));
    }
    j["hidden"] = std::move(hidden);
    j["final_weight"] = matrix_to_json(m.final_weight);
    j["final_bias"] = vector_to_json(m.final_bias);
    j["final_beta"] = matrix_to_json(m.final_beta);
    return j;
}

inline nn::HelmModel helm_from_json(const nlohmann::json& j) {
    nn::HelmModel m;
    for (const auto& jh : j.at("hidden")) {
        nn::HelmLayer h;
        h.random_weight = matrix_from_json(jh.at("random_weight"));
        h.random_bias = vector_from_json(jh.at("random_bias"));
        h.beta = matrix_from_json(jh.at("beta"));
        m.hidden.push_back(std::move(h));
    }
    m.final_weight = matrix_from_json(j.at("final_weight"));
    m.final_bias = vector_from_json(j.at("final_bias"));
    m.final_beta = matrix_from_json(j.at("final_beta"));
    return m;
}

inline nlohmann::json normalizer_to_json(const Normalizer& n) {
    nlohmann::json j;
    j["min"] = std::vector<double>(n.col_min().data(), n.col_min().data() + n.col_min().size());
    j["max"] = std::vector<double>(n.col_max().data(), n.col_max().data() + n.col_max().size());
    return j;
}

inline Normalizer normalizer_from_json(const nlohmann::json& j) {
    const auto mins = j.at("min").get<std::vector<double>>();
    const auto maxs = j.at("max").get<std::vector<double>>();
    if (mins.size() != maxs.size()) throw std::invalid_argument("normalizer payload mismatch");
    Matrix bounds(2, static_cast<Eigen::Index>(mins.size()));
    for (size_t i = 0; i < mins.size(); ++i) {
        bounds(0, static_cast<Eigen::Index>(i)) = mins[i];
        bounds(1, static_cast<Eigen::Index>(i)) = maxs[i];
    }
    return Normalizer::fit(bounds);
}

} // namespace detail

/// Everything needed to score new snapshots: the variant, its scaler, the
/// one-class pipeline (or OC-SVM baseline), and, for AE/VAE, the isolation
/// thresholds.
struct ModelBundle {
    Variant variant = Variant::CMBD;
    Normalizer normalizer;
    bool is_ocsvm = false;
    OneClassPipeline pipeline;     // when !is_ocsvm
    OcsvmModel svm;                // when is_ocsvm
    IsolationThresholds isolation; // empty nu when not applicable
};

inline nlohmann::json to_json(const ModelBundle& b) {
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["variant"] = to_string(b.variant);
    j["normalizer"] = detail::normalizer_to_json(b.normalizer);
    if (b.is_ocsvm) {
        j["embedding"] = "ocsvm";
        j["ocsvm"]["support_vectors"] = detail::matrix_to_json(b.svm.support_vectors);
        j["ocsvm"]["alpha"] = detail::vector_to_json(b.svm.alpha);
        j["ocsvm"]["rho"] = b.svm.rho;
        j["ocsvm"]["gamma_rbf"] = b.svm.gamma_rbf;
        j["ocsvm"]["nu"] = b.svm.nu;
        return j;
    }
    j["embedding"] = to_string(b.pipeline.kind);
    j["gamma"] = b.pipeline.gamma;
    j["percentile"] = b.pipeline.percentile;
    j["beta"] = b.pipeline.beta;
    switch (b.pipeline.kind) {
        case Embedding::None: break;
        case Embedding::Ae: j["ae"] = detail::network_to_json(b.pipeline.ae.net); break;
        case Embedding::Vae:
            j["vae"]["trunk"] = detail::network_to_json(b.pipeline.vae.trunk);
            j["vae"]["mu_head"] = detail::network_to_json(b.pipeline.vae.mu_head);
            j["vae"]["logvar_head"] = detail::network_to_json(b.pipeline.vae.logvar_head);
            j["vae"]["decoder"] = detail::network_to_json(b.pipeline.vae.decoder);
            break;
        case Embedding::Helm: j["helm"] = detail::helm_to_json(b.pipeline.helm); break;
    }
    if (b.pipeline.kind != Embedding::Helm) {
        j["head"] = detail::network_to_json(b.pipeline.head);
        if (b.pipeline.z_mean.size() > 0) {
            j["z_mean"] = detail::vector_to_json(b.pipeline.z_mean);
            j["z_scale"] = detail::vector_to_json(b.pipeline.z_scale);
        }
    }
    if (b.isolation.nu.size() > 0) j["nu"] = detail::vector_to_json(b.isolation.nu);
    return j;
}

inline ModelBundle model_bundle_from_json(const nlohmann::json& j) {
    const auto version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion)
        throw std::invalid_argument("unsupported model format version " +
                                    std::to_string(version));
    ModelBundle b;
    b.variant = variant_from_string(j.at("variant").get<std::string>());
    b.normalizer = detail::normalizer_from_json(j.at("normalizer"));
    const auto embedding = j.at("embedding").get<std::string>();
    if (embedding == "ocsvm") {
        b.is_ocsvm = true;
        b.svm.support_vectors = detail::matrix_from_json(j.at("ocsvm").at("support_vectors"));
        b.svm.alpha = detail::vector_from_json(j.at("ocsvm").at("alpha"));
        b.svm.rho = j.at("ocsvm").at("rho").get<double>();
        b.svm.gamma_rbf = j.at("ocsvm").at("gamma_rbf").get<double>();
        b.svm.nu = j.at("ocsvm").at("nu").get<double>();
        return b;
    }
    b.pipeline.kind = embedding_from_string(embedding);
    b.pipeline.gamma = j.at("gamma").get<double>();
    b.pipeline.percentile = j.at("percentile").get<double>();
    b.pipeline.beta = j.at("beta").get<double>();
    switch (b.pipeline.kind) {
        case Embedding::None: break;
        case Embedding::Ae: b.pipeline.ae.net = detail::network_from_json(j.at("ae")); break;
        case Embedding::Vae:
            b.pipeline.vae.trunk = detail::network_from_json(j.at("vae").at("trunk"));
            b.pipeline.vae.mu_head = detail::network_from_json(j.at("vae").at("mu_head"));
            b.pipeline.vae.logvar_head = detail::network_from_json(j.at("vae").at("logvar_head"));
            b.pipeline.vae.decoder = detail::network_from_json(j.at("vae").at("decoder"));
            break;
        case Embedding::Helm: b.pipeline.helm = detail::helm_from_json(j.at("helm")); break;
    }
    if (b.pipeline.kind != Embedding::Helm) {
        b.pipeline.head = detail::network_from_json(j.at("head"));
        if (j.contains("z_mean")) {
            b.pipeline.z_mean = detail::vector_from_json(j.at("z_mean"));
            b.pipeline.z_scale = detail::vector_from_json(j.at("z_scale"));
            if (b.pipeline.z_mean.size() != b.pipeline.z_scale.size())
                throw std::invalid_argument("z_mean/z_scale size mismatch");
        }
    }
    if (j.contains("nu")) b.isolation.nu = detail::vector_from_json(j.at("nu"));
    return b;
}

inline void save_model(const ModelBundle& b, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open \"" + path + "\" for writing");
    out << to_json(b).dump(1) << '\n';
}

inline ModelBundle load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file \"" + path + "\"");
    nlohmann::json j;
    in >> j;
    return model_bundle_from_json(j);
}

} // namespace fdi
