// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#include "tpunet/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace tpunet {

namespace {

constexpr char kMagic[4] = {'T', 'P', 'U', 'T'};

template <class T>
void put_le(std::string& out, T value) {
    using U = std::make_unsigned_t<T>;
    auto bits = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>(bits & 0xFF));
        bits = static_cast<U>(bits >> 8);
    }
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <class T>
    T get() {
        need(sizeof(T));
        std::make_unsigned_t<T> value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            value |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(T);
        return static_cast<T>(value);
    }

    std::string_view take(std::size_t n) {
        need(n);
        auto view = bytes_.substr(pos_, n);
        pos_ += n;
        return view;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw FormatError("checkpoint truncated");
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const NamedTensors& tensors) {
    std::string out(kMagic, 4);
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t d : tensor.shape()) put_le<std::uint64_t>(out, d);
        for (double v : tensor.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

NamedTensors decode_checkpoint(std::string_view bytes) {
    Reader in(bytes);
    if (in.take(4) != std::string_view(kMagic, 4)) throw FormatError("checkpoint: bad magic");
    const auto version = in.get<std::uint32_t>();
    if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    const auto count = in.get<std::uint32_t>();
    NamedTensors tensors;
    for (std::uint32_t t = 0; t < count; ++t) {
        const auto name_len = in.get<std::uint32_t>();
        std::string name(in.take(name_len));
        const auto rank = in.get<std::uint32_t>();
        Shape shape(rank);
        for (auto& d : shape) d = in.get<std::uint64_t>();
        std::vector<double> data(shape_numel(shape));
        for (auto& v : data) v = std::bit_cast<double>(in.get<std::uint64_t>());
        tensors.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
    }
    if (!in.done()) throw FormatError("checkpoint: trailing bytes");
    return tensors;
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
    const std::string bytes = encode_checkpoint(tensors);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for " + path.string());
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return decode_checkpoint(buffer.str());
}

const Tensor& find_tensor(const NamedTensors& tensors, std::string_view name) {
    for (const auto& [key, tensor] : tensors) {
        if (key == name) return tensor;
    }
    throw FormatError("checkpoint has no tensor named '" + std::string(name) + "'");
}

}  // namespace tpunet
