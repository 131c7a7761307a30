#include "splatprior/eval.hpp"

#include "splatprior/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace splatprior {

double TriangleMesh::area() const {
  double a = 0.0;
  for (const auto& f : faces) {
    a += 0.5 * (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
  }
  return a;
}

void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (const Vec3& v : mesh.vertices)
    for (int a = 0; a < 3; ++a) binio::put_f32(out, static_cast<float>(v[a]));
  for (const auto& f : mesh.faces) {
    out.put(static_cast<char>(3));
    for (int idx : f) binio::put_u32(out, static_cast<std::uint32_t>(idx));
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

TriangleMesh read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::size_t nv = 0, nf = 0;
  bool binary_le = false;
  std::getline(in, line);
  if (line != "ply") throw IoError("not a PLY file: " + path.string());
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (word == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (name == "vertex") nv = count;
      if (name == "face") nf = count;
    } else if (word == "end_header") {
      break;
    }
  }
  if (!binary_le) throw IoError("only binary little-endian PLY is supported: " + path.string());
  TriangleMesh mesh;
  mesh.vertices.resize(nv);
  mesh.faces.resize(nf);
  try {
    for (Vec3& v : mesh.vertices)
      for (int a = 0; a < 3; ++a) v[a] = binio::get_f32(in);
    for (auto& f : mesh.faces) {
      const int n = in.get();
      if (n != 3) throw IoError("only triangle faces are supported");
      for (int& idx : f) {
        idx = static_cast<int>(binio::get_u32(in));
        if (idx < 0 || static_cast<std::size_t>(idx) >= nv) throw IoError("face index out of range");
      }
    }
  } catch (const IoError& e) {
    throw IoError("bad PLY body in " + path.string() + ": " + e.what());
  }
  return mesh;
}

std::vector<Vec3> sample_mesh(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
  if (mesh.faces.empty()) throw InvalidInput("sample_mesh: empty mesh");
  std::vector<double> cdf(mesh.faces.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    acc += (mesh.vertices[f[1]] - mesh.vertices[f[0]])
               .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]])
               .norm();
    cdf[i] = acc;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Vec3> pts(count);
  for (Vec3& p : pts) {
    std::size_t fi = 0;
    if (acc > 0.0) {
      fi = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u01(rng) * acc) -
                                    cdf.begin());
      fi = std::min(fi, cdf.size() - 1);
    }
    const auto& f = mesh.faces[fi];
    double a = u01(rng), b = u01(rng);
    if (a + b > 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    const Vec3& v0 = mesh.vertices[f[0]];
    p = v0 + a * (mesh.vertices[f[1]] - v0) + b * (mesh.vertices[f[2]] - v0);
  }
  return pts;
}

NearestNeighborGrid::NearestNeighborGrid(std::span<const Vec3> points)
    : points_(points.begin(), points.end()) {
  if (points_.empty()) throw InvalidInput("NearestNeighborGrid: empty point set");
  lo_ = hi_ = points_.front();
  for (const Vec3& p : points_) {
    lo_ = lo_.cwiseMin(p);
    hi_ = hi_.cwiseMax(p);
  }
  const Vec3 ext = (hi_ - lo_).cwiseMax(1e-12);
  const double target_cells = std::max(1.0, static_cast<double>(points_.size()) / 2.0);
  double volume = 1.0;
  int spread = 0;
  for (int a = 0; a < 3; ++a) {
    if (ext[a] > 1e-9 * ext.maxCoeff()) {
      volume *= ext[a];
      ++spread;
    }
  }
  cell_ = std::pow(volume / target_cells, 1.0 / std::max(spread, 1));
  if (!(cell_ > 0.0)) cell_ = ext.maxCoeff();
  for (int a = 0; a < 3; ++a) dims_[a] = std::clamp(static_cast<int>(ext[a] / cell_) + 1, 1, 256);
  cell_ = std::max({ext[0] / dims_[0], ext[1] / dims_[1], ext[2] / dims_[2]});

  const std::size_t ncell = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  std::vector<std::size_t> counts(ncell + 1, 0);
  std::vector<std::size_t> cell_id(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto c = cell_of(points_[i]);
    cell_id[i] = flat(c[0], c[1], c[2]);
    ++counts[cell_id[i] + 1];
  }
  std::partial_sum(counts.begin(), counts.end(), counts.begin());
  cell_start_ = counts;
  order_.resize(points_.size());
  std::vector<std::size_t> fill(counts.begin(), counts.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i) order_[fill[cell_id[i]]++] = i;
}

std::array<int, 3> NearestNeighborGrid::cell_of(const Vec3& p) const {
  std::array<int, 3> c{};
  for (int a = 0; a < 3; ++a) {
    const double g = std::floor((p[a] - lo_[a]) / cell_);
    c[a] = static_cast<int>(std::clamp(g, 0.0, static_cast<double>(dims_[a] - 1)));
  }
  return c;
}

double NearestNeighborGrid::distance(const Vec3& q) const {
  // Searching the box projection of q is sound: for points in the box,
  // |p - q| >= |p - q'| where q' is the projection.
  const Vec3 qp = q.cwiseMax(lo_).cwiseMin(hi_);
  const auto c = cell_of(qp);
  const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});
  double best2 = std::numeric_limits<double>::infinity();
  for (int r = 0; r <= max_ring; ++r) {
    for (int k = c[2] - r; k <= c[2] + r; ++k) {
      if (k < 0 || k >= dims_[2]) continue;
      for (int j = c[1] - r; j <= c[1] + r; ++j) {
        if (j < 0 || j >= dims_[1]) continue;
        for (int i = c[0] - r; i <= c[0] + r; ++i) {
          if (i < 0 || i >= dims_[0]) continue;
          if (std::max({std::abs(i - c[0]), std::abs(j - c[1]), std::abs(k - c[2])}) != r) {
            continue;
          }
          const std::size_t f = flat(i, j, k);
          for (std::size_t s = cell_start_[f]; s < cell_start_[f + 1]; ++s) {
            best2 = std::min(best2, (points_[order_[s]] - q).squaredNorm());
          }
        }
      }
    }
    const double reach = r * cell_;
    if (best2 <= reach * reach) break;
  }
  return std::sqrt(best2);
}

double mean_nn_distance(std::span<const Vec3> from, std::span<const Vec3> to) {
  if (from.empty() || to.empty()) throw InvalidInput("chamfer: empty point set");
  const NearestNeighborGrid grid(to);
  const auto n = static_cast<std::ptrdiff_t>(from.size());
  std::vector<double> d(from.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) d[i] = grid.distance(from[i]);
  double sum = 0.0;
  for (double v : d) sum += v;
  return sum / static_cast<double>(from.size());
}

double chamfer_l1(std::span<const Vec3> a, std::span<const Vec3> b) {
  const double ab = mean_nn_distance(a, b);
  const double ba = mean_nn_distance(b, a);
  return 0.5 * (ab + ba);
}

double chamfer_l1(const TriangleMesh& mesh, std::span<const Vec3> gt, std::size_t samples,
                  std::uint64_t seed) {
  if (mesh.empty()) throw InvalidInput("chamfer: empty mesh");
  const std::vector<Vec3> pts = sample_mesh(mesh, samples, seed);
  return chamfer_l1(pts, gt);
}

double psnr(const ImageRGB& pred, const ImageRGB& gt) {
  if (!pred.same_shape(gt) || pred.data.empty()) throw InvalidInput("psnr: image shape mismatch");
  double se = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - gt.data[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(pred.data.size());
  if (!(mse > 0.0)) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

void write_metrics_json(const std::filesystem::path& path,
                        const std::map<std::string, double>& metrics) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : metrics) j[k] = v;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace splatprior
