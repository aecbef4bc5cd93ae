#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcreg/geometry.hpp"

namespace pcreg {

/// Malformed or unreadable file. The message names the offending path.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCloudFormatVersion = 1;
inline constexpr std::uint32_t kTensorFormatVersion = 1;

// Compact binary cloud: "FREG", u32 version, u64 count, then count records of
// four little-endian float32 (x, y, z, intensity). A cloud without intensity
// is written with zeros.
void write_freg(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_freg(const std::filesystem::path& path);

// ASCII PLY with float properties x, y, z and optional intensity.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_ply(const std::filesystem::path& path);

/// Dispatches on the leading magic bytes ("FREG" or "ply").
PointCloud read_cloud(const std::filesystem::path& path);

/// Dense row-major tensor of rank 0..N as stored in an "FRWT" file.
struct Tensor {
    std::vector<std::uint64_t> dims;
    std::vector<float> data;

    std::uint64_t element_count() const;
};

using TensorTable = std::map<std::string, Tensor>;

// "FRWT", u32 version, u64 tensor count, then per tensor: u32 name length,
// UTF-8 name, u32 rank, rank x u64 dims, row-major float32 data. All
// little-endian.
void write_tensors(const std::filesystem::path& path, const TensorTable& tensors);
TensorTable read_tensors(const std::filesystem::path& path);

namespace binary {

void put_u32(std::ostream& out, std::uint32_t v);
void put_u64(std::ostream& out, std::uint64_t v);
void put_f32(std::ostream& out, float v);
std::uint32_t get_u32(std::istream& in);
std::uint64_t get_u64(std::istream& in);
float get_f32(std::istream& in);

}  // namespace binary

}  // namespace pcreg
