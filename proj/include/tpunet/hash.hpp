// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace tpunet {

/// 64-bit FNV-1a, chainable through `state`.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = 1469598103934665603ULL) {
    for (unsigned char c : bytes) {
        state ^= c;
        state *= 1099511628211ULL;
    }
    return state;
}

inline std::string to_hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace tpunet
