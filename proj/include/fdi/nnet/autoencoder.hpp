#pragma once

#include "fdi/nnet/network.hpp"

namespace fdi::nn {

inline constexpr int kLatentDim = 8;

/// Vanilla autoencoder [n, 20, 8, 20, n]; the first two layers form the
/// encoder, the rest the decoder.
struct AutoencoderModel {
    DenseNetwork net;

    static AutoencoderModel make(int input_dim, std::uint64_t seed) {
        return {make_dense({input_dim, 20, kLatentDim, 20, input_dim}, seed)};
    }

    int input_dim() const { return net.input_dim(); }

    Matrix encode(const Matrix& x) const {
        DenseNetwork enc;
        enc.layers.assign(net.layers.begin(), net.layers.begin() + 2);
        return forward(enc, x);
    }

    Matrix reconstruct(const Matrix& x) const { return forward(net, x); }

    void train(const Matrix& x, const TrainConfig& cfg) { train_ae(net, x, cfg); }
};

} // namespace fdi::nn
