// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#include "tpunet/layers.hpp"

#include <cmath>
#include <string>

#include "tpunet/hash.hpp"

namespace tpunet {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    const std::uint64_t h = fnv1a64(tag);
    // splitmix64 finaliser over the combined value
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (h | 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Tensor normal_param(Shape shape, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = dist(rng);
    return Tensor::from_data(std::move(shape), std::move(data), true);
}

Tensor zero_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w.rank() != 2 || x.rank() < 1 || x.shape().back() != w.dim(0)) {
        throw ShapeError("linear: input " + shape_to_string(x.shape()) + " incompatible with weight " +
                         shape_to_string(w.shape()));
    }
    const std::size_t in = w.dim(0);
    const std::size_t rows = x.numel() / in;
    Tensor y = matmul(reshape(x, {rows, in}), w);
    if (b.defined()) y = add(y, b);
    Shape shape = x.shape();
    shape.back() = w.dim(1);
    return reshape(y, std::move(shape));
}

ConvLayer make_conv(std::size_t in, std::size_t out, std::size_t kernel, std::mt19937_64& rng) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(in * kernel * kernel));
    return {normal_param({out, in, kernel, kernel}, stddev, rng), zero_param({out})};
}

Tensor apply(const ConvLayer& layer, const Tensor& x) { return conv2d(x, layer.weight, layer.bias, Padding::same); }

void append_params(NamedTensors& out, std::string_view prefix, const ConvLayer& layer) {
    out.emplace_back(std::string(prefix) + ".weight", layer.weight);
    out.emplace_back(std::string(prefix) + ".bias", layer.bias);
}

}  // namespace tpunet
