#pragma once

#include "splatprior/core.hpp"
#include "splatprior/tsdf.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace splatprior {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  [[nodiscard]] bool empty() const { return faces.empty(); }
  [[nodiscard]] double area() const;
};

/// Marching cubes at iso-level 0. Cells touching a weight-0 voxel are skipped.
/// Faces are oriented with normals pointing toward positive values.
TriangleMesh extract_mesh(const TsdfGrid& grid);

/// Triangle list per cube case (bit c set when corner c is below the iso-level;
/// corner c sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1)). Entries are cube edge ids.
const std::vector<std::vector<std::array<int, 3>>>& marching_cubes_table();

/// Corner pair of each of the 12 cube edges.
const std::array<std::array<int, 2>, 12>& cube_edges();

/// Binary little-endian PLY with float positions and int face indices.
void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh);
TriangleMesh read_ply(const std::filesystem::path& path);

/// Area-uniform surface samples.
std::vector<Vec3> sample_mesh(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed);

/// Exact nearest-neighbor queries over a fixed point set using a uniform grid.
class NearestNeighborGrid {
 public:
  explicit NearestNeighborGrid(std::span<const Vec3> points);
  /// Distance to the closest stored point.
  [[nodiscard]] double distance(const Vec3& q) const;

 private:
  std::vector<Vec3> points_;
  std::vector<std::size_t> cell_start_;
  std::vector<std::size_t> order_;
  Vec3 lo_, hi_;
  double cell_ = 1.0;
  std::array<int, 3> dims_{1, 1, 1};

  [[nodiscard]] std::array<int, 3> cell_of(const Vec3& p) const;
  [[nodiscard]] std::size_t flat(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) * (static_cast<std::size_t>(j) +
                                                 static_cast<std::size_t>(dims_[1]) * k);
  }
};

/// Mean nearest-neighbor distance from each point of `from` to `to`.
double mean_nn_distance(std::span<const Vec3> from, std::span<const Vec3> to);

/// 0.5 * (mean NN distance a->b + mean NN distance b->a). Throws on empty input.
double chamfer_l1(std::span<const Vec3> a, std::span<const Vec3> b);

inline constexpr std::size_t kMeshChamferSamples = 100000;

/// Samples the mesh first. An empty mesh throws InvalidInput.
double chamfer_l1(const TriangleMesh& mesh, std::span<const Vec3> gt,
                  std::size_t samples = kMeshChamferSamples, std::uint64_t seed = 0);

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE), capped at 99 dB.
double psnr(const ImageRGB& pred, const ImageRGB& gt);

/// Flat JSON object of named numbers.
void write_metrics_json(const std::filesystem::path& path,
                        const std::map<std::string, double>& metrics);

}  // namespace splatprior
