// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "tpunet/tensor.hpp"

namespace tpunet {

/// Stable per-component seed: output depends only on (seed, tag).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

/// Trainable tensor with entries ~ Normal(0, stddev).
Tensor normal_param(Shape shape, double stddev, std::mt19937_64& rng);
Tensor zero_param(Shape shape);

/// x[..., in] * w[in, out] + b[out]; `b` may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

struct ConvLayer {
    Tensor weight;  // [out, in, k, k]
    Tensor bias;    // [out]
};

/// He-initialised convolution: weights ~ Normal(0, sqrt(2 / fan_in)), zero bias.
ConvLayer make_conv(std::size_t in, std::size_t out, std::size_t kernel, std::mt19937_64& rng);
Tensor apply(const ConvLayer& layer, const Tensor& x);

void append_params(NamedTensors& out, std::string_view prefix, const ConvLayer& layer);

}  // namespace tpunet
