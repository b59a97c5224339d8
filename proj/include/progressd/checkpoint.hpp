// Flat binary parameter checkpoints. Layout: 8-byte magic, 1 version byte,
// then one record per parameter (u32 name length, UTF-8 name, u32 rank,
// u32 dims, raw little-endian float64 data) until end of file.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "progressd/common.hpp"
#include "progressd/optim.hpp"
#include "progressd/tensor.hpp"

namespace progressd::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace detail {

constexpr char kCkptMagic[8] = {'P', 'G', 'R', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kCkptVersion = 1;

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_raw(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return in.gcount() == static_cast<std::streamsize>(sizeof(T));
}

} // namespace detail

inline void save_checkpoint(const std::filesystem::path& path,
                            const ParamList& params) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    check(out.good(), "checkpoint: cannot open '", path.string(), "' for writing");
    out.write(detail::kCkptMagic, sizeof(detail::kCkptMagic));
    detail::write_raw(out, detail::kCkptVersion);
    for (const auto& p : params) {
        detail::write_raw(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        detail::write_raw(out, static_cast<std::uint32_t>(p.tensor.shape().size()));
        for (int d : p.tensor.shape())
            detail::write_raw(out, static_cast<std::uint32_t>(d));
        out.write(reinterpret_cast<const char*>(p.tensor.value().data()),
                  static_cast<std::streamsize>(p.tensor.value().size() * sizeof(double)));
    }
    check(out.good(), "checkpoint: write to '", path.string(), "' failed");
}

struct CheckpointEntry {
    std::string name;
    Shape shape;
    std::vector<double> data;
};

inline std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "checkpoint: cannot open '", path.string(), "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    check(in.gcount() == 8 && std::memcmp(magic, detail::kCkptMagic, 8) == 0,
          "checkpoint: '", path.string(), "' has wrong magic bytes");
    std::uint8_t version = 0;
    check(detail::read_raw(in, version) && version == detail::kCkptVersion,
          "checkpoint: unsupported version in '", path.string(), "'");
    std::vector<CheckpointEntry> entries;
    for (;;) {
        std::uint32_t name_len = 0;
        in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
        if (in.gcount() == 0) break; // clean end of file
        check(in.gcount() == static_cast<std::streamsize>(sizeof(name_len)),
              "checkpoint: truncated record header in '", path.string(), "'");
        check(name_len > 0 && name_len < 4096,
              "checkpoint: implausible name length ", name_len);
        CheckpointEntry e;
        e.name.resize(name_len);
        in.read(e.name.data(), name_len);
        check(in.gcount() == static_cast<std::streamsize>(name_len),
              "checkpoint: truncated name in '", path.string(), "'");
        std::uint32_t rank = 0;
        check(detail::read_raw(in, rank) && rank >= 1 && rank <= 8,
              "checkpoint: bad rank for '", e.name, "'");
        std::int64_t total = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            std::uint32_t dim = 0;
            check(detail::read_raw(in, dim) && dim >= 1,
                  "checkpoint: bad dim for '", e.name, "'");
            e.shape.push_back(static_cast<int>(dim));
            total *= dim;
        }
        e.data.resize(static_cast<std::size_t>(total));
        in.read(reinterpret_cast<char*>(e.data.data()),
                static_cast<std::streamsize>(e.data.size() * sizeof(double)));
        check(in.gcount() ==
                  static_cast<std::streamsize>(e.data.size() * sizeof(double)),
              "checkpoint: truncated data for '", e.name, "'");
        entries.push_back(std::move(e));
    }
    return entries;
}

// Fills an existing parameter list in place. Names and shapes must match the
// file exactly (same set, any order); values are copied bit-for-bit.
inline void load_checkpoint(const std::filesystem::path& path, ParamList& params) {
    auto entries = read_checkpoint(path);
    check(entries.size() == params.size(), "checkpoint: '", path.string(),
          "' holds ", entries.size(), " parameters, model expects ", params.size());
    for (auto& p : params) {
        bool found = false;
        for (auto& e : entries) {
            if (e.name != p.name) continue;
            check(e.shape == p.tensor.shape(), "checkpoint: shape of '", p.name,
                  "' is ", shape_str(e.shape), ", model expects ",
                  shape_str(p.tensor.shape()));
            p.tensor.value_mut() = e.data;
            found = true;
            break;
        }
        check(found, "checkpoint: missing parameter '", p.name, "'");
    }
}

} // namespace progressd::nn
