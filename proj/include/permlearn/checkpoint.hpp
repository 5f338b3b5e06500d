#pragma once

// Binary checkpoint format (all integers little-endian):
//
//   "DPNM"                      4 bytes magic
//   version                     u32 (currently 1)
//   d, h, h2, l                 u32 each
//   six tensors, in order encoder.weight, encoder.bias, head.weight,
//   head.bias, score.weight, score.bias; each tensor is
//     name length u16, name bytes, rank u8, rank x u32 dims,
//     prod(dims) x f64 row-major values

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "permlearn/error.hpp"
#include "permlearn/model.hpp"

namespace permlearn {

inline constexpr std::array<char, 4> kCheckpointMagic{'D', 'P', 'N', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

static_assert(sizeof(double) == 8);

class ByteWriter {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <typename T>
    void le(T v) {
        for (std::size_t k = 0; k < sizeof(T); ++k) out_.push_back(static_cast<unsigned char>((v >> (8 * k)) & 0xFF));
    }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
    const std::vector<unsigned char>& data() const { return out_; }

private:
    std::vector<unsigned char> out_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<unsigned char>& in) : in_(in) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return in_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) throw FormatError(std::string("truncated checkpoint while reading ") + what, pos_);
    }
    template <typename T>
    T le(const char* what) {
        need(sizeof(T), what);
        T v = 0;
        for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(in_[pos_ + k]) << (8 * k);
        pos_ += sizeof(T);
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(le<std::uint64_t>(what)); }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }

private:
    const std::vector<unsigned char>& in_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<unsigned char> serialize_checkpoint(const ModelParams& params) {
    detail::ByteWriter w;
    w.bytes(kCheckpointMagic.data(), kCheckpointMagic.size());
    w.le<std::uint32_t>(kCheckpointVersion);
    const auto& d = params.dims;
    for (std::size_t v : {d.d, d.h, d.h2, d.l}) w.le<std::uint32_t>(static_cast<std::uint32_t>(v));
    params.for_each_tensor([&w](std::string_view name, const std::vector<std::size_t>& shape,
                                const std::vector<double>& values) {
        w.le<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.le<std::uint8_t>(static_cast<std::uint8_t>(shape.size()));
        for (std::size_t s : shape) w.le<std::uint32_t>(static_cast<std::uint32_t>(s));
        for (double v : values) w.f64(v);
    });
    return w.data();
}

inline ModelParams deserialize_checkpoint(const std::vector<unsigned char>& bytes) {
    detail::ByteReader r(bytes);
    const std::string magic = r.str(4, "magic");
    if (std::memcmp(magic.data(), kCheckpointMagic.data(), 4) != 0) throw FormatError("bad checkpoint magic", 0);
    const std::size_t version_at = r.offset();
    const auto version = r.le<std::uint32_t>("version");
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
    const std::size_t dims_at = r.offset();
    ModelDims dims;
    dims.d = r.le<std::uint32_t>("dims");
    dims.h = r.le<std::uint32_t>("dims");
    dims.h2 = r.le<std::uint32_t>("dims");
    dims.l = r.le<std::uint32_t>("dims");
    if (dims.d == 0 || dims.h == 0 || dims.h2 == 0 || dims.l == 0)
        throw FormatError("checkpoint dimensions must be positive", dims_at);
    {
        using wide = unsigned __int128;
        const wide values = wide(dims.d) * dims.h + dims.h + wide(dims.l) * dims.h * dims.h2 + dims.h2 +
                            wide(dims.h2) * dims.l * dims.l + wide(dims.l) * dims.l;
        if (values * 8 > r.remaining())
            throw FormatError("header dims imply more payload than the file holds", dims_at);
    }

    ModelParams params = ModelParams::zeros(dims);
    params.for_each_tensor([&r](std::string_view name, const std::vector<std::size_t>& shape,
                                std::vector<double>& values) {
        const std::size_t tensor_at = r.offset();
        const auto name_len = r.le<std::uint16_t>("tensor name length");
        const std::string got = r.str(name_len, "tensor name");
        if (got != name)
            throw FormatError("expected tensor '" + std::string(name) + "', found '" + got + "'", tensor_at);
        const std::size_t rank_at = r.offset();
        const auto rank = r.le<std::uint8_t>("tensor rank");
        if (rank != shape.size())
            throw FormatError("tensor '" + got + "' has rank " + std::to_string(rank) + ", header implies " +
                                  std::to_string(shape.size()),
                              rank_at);
        for (std::size_t k = 0; k < rank; ++k) {
            const std::size_t dim_at = r.offset();
            const auto dim = r.le<std::uint32_t>("tensor dims");
            if (dim != shape[k])
                throw FormatError("tensor '" + got + "' dimension disagrees with header dims", dim_at);
        }
        if (r.remaining() < values.size() * 8)
            throw FormatError("truncated payload for tensor '" + got + "'", r.offset());
        for (double& v : values) v = r.f64("tensor values");
    });
    if (r.remaining() != 0) throw FormatError("trailing bytes after last tensor", r.offset());
    return params;
}

inline void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(params);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open checkpoint for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing checkpoint: " + path.string());
}

inline ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

}  // namespace permlearn
