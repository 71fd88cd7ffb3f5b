// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tpunet/tensor.hpp"

namespace tpunet {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Binary layout, little-endian throughout:
//   "TPUT" | u32 version | u32 count |
//   count x { u32 name_len | name bytes | u32 rank | rank x u64 dim | f64 payload }
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const NamedTensors& tensors);
NamedTensors decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

/// Returns the tensor called `name` or throws FormatError.
const Tensor& find_tensor(const NamedTensors& tensors, std::string_view name);

}  // namespace tpunet
