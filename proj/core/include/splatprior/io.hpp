#pragma once

#include "splatprior/core.hpp"
#include "splatprior/tsdf.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>

namespace splatprior {

/// Little-endian "Pf" PFM, scale -1, rows stored bottom to top. Bit-exact for f32.
void write_pfm(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_pfm(const std::filesystem::path& path);

/// 8-bit RGB PNG; values are clamped to [0, 1] and rounded.
void write_png(const std::filesystem::path& path, const ImageRGB& image);
ImageRGB read_png(const std::filesystem::path& path);

/// Header "TSDF", 3 x u32 dims, 3 x f32 origin, f32 voxel size, f32 truncation,
/// then f32 values and f32 weights, x fastest.
void write_tsdf(const std::filesystem::path& path, const TsdfGrid& grid);
TsdfGrid read_tsdf(const std::filesystem::path& path);

namespace binio {

void put_u32(std::ostream& out, std::uint32_t v);
void put_u64(std::ostream& out, std::uint64_t v);
void put_f32(std::ostream& out, float v);
void put_f64(std::ostream& out, double v);
std::uint32_t get_u32(std::istream& in);
std::uint64_t get_u64(std::istream& in);
float get_f32(std::istream& in);
double get_f64(std::istream& in);

}  // namespace binio

}  // namespace splatprior
