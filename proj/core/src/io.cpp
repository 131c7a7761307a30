#include "splatprior/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace splatprior {

namespace binio {

namespace {

template <class U>
void put_le(std::ostream& out, U v) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, sizeof(U));
}

template <class U>
U get_le(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw IoError("unexpected end of file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void put_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
void put_u64(std::ostream& out, std::uint64_t v) { put_le(out, v); }
void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
std::uint32_t get_u32(std::istream& in) { return get_le<std::uint32_t>(in); }
std::uint64_t get_u64(std::istream& in) { return get_le<std::uint64_t>(in); }
float get_f32(std::istream& in) { return std::bit_cast<float>(get_le<std::uint32_t>(in)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

}  // namespace binio

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const DepthMap& depth) {
  if (depth.channels != 1) throw InvalidInput("write_pfm: expected a single-channel raster");
  std::ofstream out = open_out(path);
  out << "Pf\n" << depth.width << ' ' << depth.height << "\n-1\n";
  for (int y = depth.height - 1; y >= 0; --y)
    for (int x = 0; x < depth.width; ++x) binio::put_f32(out, depth(x, y));
  finish(out, path);
}

DepthMap read_pfm(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  if (!(in >> magic >> w >> h >> scale) || magic != "Pf" || w <= 0 || h <= 0) {
    throw IoError("not a single-channel PFM file: " + path.string());
  }
  if (scale >= 0.0) throw IoError("big-endian PFM is not supported: " + path.string());
  in.get();
  DepthMap d(w, h);
  try {
    for (int y = h - 1; y >= 0; --y)
      for (int x = 0; x < w; ++x) d(x, y) = binio::get_f32(in);
  } catch (const IoError&) {
    throw IoError("truncated PFM file: " + path.string());
  }
  return d;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::filesystem::path& path, const ImageRGB& image) {
  if (image.channels != 3) throw InvalidInput("write_png: expected 3 channels");
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialization failed");
  }
  std::vector<png_byte> row(static_cast<std::size_t>(image.width) * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image(x, y, c), 0.0, 1.0);
        row[static_cast<std::size_t>(x) * 3 + c] = static_cast<png_byte>(std::lround(v * 255.0));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageRGB read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  ImageRGB out(static_cast<int>(img.width), static_cast<int>(img.height), 3);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = buf[i] / 255.0;
  return out;
}

void write_tsdf(const std::filesystem::path& path, const TsdfGrid& grid) {
  grid.spec.validate();
  if (grid.values.size() != grid.spec.voxel_count() || grid.weights.size() != grid.values.size()) {
    throw InvalidInput("write_tsdf: array sizes do not match the grid dims");
  }
  std::ofstream out = open_out(path);
  out.write("TSDF", 4);
  for (int d : grid.spec.dims) binio::put_u32(out, static_cast<std::uint32_t>(d));
  for (int a = 0; a < 3; ++a) binio::put_f32(out, static_cast<float>(grid.spec.origin[a]));
  binio::put_f32(out, static_cast<float>(grid.spec.voxel_size));
  binio::put_f32(out, static_cast<float>(grid.truncation));
  for (float v : grid.values) binio::put_f32(out, v);
  for (float w : grid.weights) binio::put_f32(out, w);
  finish(out, path);
}

TsdfGrid read_tsdf(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "TSDF", 4) != 0) {
    throw IoError("not a TSDF file: " + path.string());
  }
  try {
    GridSpec spec;
    for (int& d : spec.dims) d = static_cast<int>(binio::get_u32(in));
    for (int a = 0; a < 3; ++a) spec.origin[a] = binio::get_f32(in);
    spec.voxel_size = binio::get_f32(in);
    const double trunc = binio::get_f32(in);
    spec.validate();
    TsdfGrid grid(spec, trunc);
    for (float& v : grid.values) v = binio::get_f32(in);
    for (float& w : grid.weights) w = binio::get_f32(in);
    return grid;
  } catch (const IoError&) {
    throw IoError("truncated TSDF file: " + path.string());
  } catch (const InvalidInput& e) {
    throw IoError("corrupt TSDF header in " + path.string() + ": " + e.what());
  }
}

}  // namespace splatprior
