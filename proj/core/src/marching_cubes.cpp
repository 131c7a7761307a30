#include "splatprior/eval.hpp"

#include <stdexcept>
#include <unordered_map>

namespace splatprior {

namespace {

Vec3 corner_offset(int c) { return Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1); }

std::array<std::array<int, 2>, 12> make_edges() {
  std::array<std::array<int, 2>, 12> edges{};
  int n = 0;
  for (int c = 0; c < 8; ++c)
    for (int b = 0; b < 3; ++b)
      if (!(c & (1 << b))) edges[n++] = {c, c | (1 << b)};
  return edges;
}

int edge_between(int a, int b) {
  const auto& edges = cube_edges();
  for (int e = 0; e < 12; ++e) {
    if ((edges[e][0] == a && edges[e][1] == b) || (edges[e][0] == b && edges[e][1] == a)) return e;
  }
  throw std::logic_error("marching cubes: corners are not adjacent");
}

struct Face {
  std::array<int, 4> corners;  // cyclic
  Vec3 normal;                 // outward
};

const std::array<Face, 6> kFaces{{
    {{0, 2, 6, 4}, Vec3(-1, 0, 0)},
    {{1, 3, 7, 5}, Vec3(1, 0, 0)},
    {{0, 1, 5, 4}, Vec3(0, -1, 0)},
    {{2, 3, 7, 6}, Vec3(0, 1, 0)},
    {{0, 1, 3, 2}, Vec3(0, 0, -1)},
    {{4, 5, 7, 6}, Vec3(0, 0, 1)},
}};

Vec3 edge_mid(int e) {
  const auto& ed = cube_edges()[e];
  return 0.5 * (corner_offset(ed[0]) + corner_offset(ed[1]));
}

// Contour segments on every face, oriented so that the inside region is on the
// left when viewed from outside the cube; diagonal (ambiguous) faces separate
// the inside corners. The segments then chain into closed loops.
std::vector<std::array<int, 3>> triangulate_case(int mask) {
  std::array<int, 12> next;
  next.fill(-1);
  const auto inside = [&](int c) { return (mask >> c) & 1; };
  const auto add_segment = [&](int ea, int eb, const Vec3& inside_pt, const Vec3& normal) {
    const Vec3 pa = edge_mid(ea), pb = edge_mid(eb);
    if ((pb - pa).cross(inside_pt - pa).dot(normal) < 0.0) std::swap(ea, eb);
    if (next[ea] != -1) throw std::logic_error("marching cubes: inconsistent face contour");
    next[ea] = eb;
  };
  for (const Face& f : kFaces) {
    std::vector<int> crossing;
    Vec3 centroid = Vec3::Zero();
    int n_in = 0;
    for (int i = 0; i < 4; ++i) {
      const int a = f.corners[i], b = f.corners[(i + 1) % 4];
      if (inside(a) != inside(b)) crossing.push_back(edge_between(a, b));
      if (inside(a)) {
        centroid += corner_offset(a);
        ++n_in;
      }
    }
    if (crossing.size() == 2) {
      add_segment(crossing[0], crossing[1], centroid / n_in, f.normal);
    } else if (crossing.size() == 4) {
      for (int i = 0; i < 4; ++i) {
        const int c = f.corners[i];
        if (!inside(c)) continue;
        const int prev = f.corners[(i + 3) % 4], nxt = f.corners[(i + 1) % 4];
        add_segment(edge_between(prev, c), edge_between(c, nxt), corner_offset(c), f.normal);
      }
    }
  }
  std::vector<std::array<int, 3>> tris;
  std::array<bool, 12> used{};
  for (int start = 0; start < 12; ++start) {
    if (next[start] == -1 || used[start]) continue;
    std::vector<int> loop;
    for (int e = start; !used[e]; e = next[e]) {
      if (next[e] == -1) throw std::logic_error("marching cubes: open contour");
      used[e] = true;
      loop.push_back(e);
    }
    for (std::size_t i = 1; i + 1 < loop.size(); ++i) tris.push_back({loop[0], loop[i + 1], loop[i]});
  }
  return tris;
}

}  // namespace

const std::array<std::array<int, 2>, 12>& cube_edges() {
  static const auto edges = make_edges();
  return edges;
}

const std::vector<std::vector<std::array<int, 3>>>& marching_cubes_table() {
  static const auto table = [] {
    std::vector<std::vector<std::array<int, 3>>> t(256);
    for (int m = 0; m < 256; ++m) t[m] = triangulate_case(m);
    return t;
  }();
  return table;
}

TriangleMesh extract_mesh(const TsdfGrid& grid) {
  const GridSpec& spec = grid.spec;
  spec.validate();
  const auto& table = marching_cubes_table();
  const auto& edges = cube_edges();
  const int nx = spec.dims[0], ny = spec.dims[1], nz = spec.dims[2];
  using Tri = std::array<std::uint64_t, 3>;
  std::vector<std::vector<Tri>> slabs(static_cast<std::size_t>(nz - 1));

#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < nz - 1; ++k) {
    auto& out = slabs[k];
    for (int j = 0; j < ny - 1; ++j) {
      for (int i = 0; i < nx - 1; ++i) {
        int mask = 0;
        bool observed = true;
        for (int c = 0; c < 8 && observed; ++c) {
          const std::size_t idx = spec.index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
          if (!(grid.weights[idx] > 0.0f)) observed = false;
          if (grid.values[idx] < 0.0f) mask |= 1 << c;
        }
        if (!observed || mask == 0 || mask == 255) continue;
        for (const auto& tri : table[mask]) {
          Tri keys;
          for (int v = 0; v < 3; ++v) {
            const int c0 = edges[tri[v]][0], c1 = edges[tri[v]][1];
            const int axis = (c0 ^ c1) == 1 ? 0 : ((c0 ^ c1) == 2 ? 1 : 2);
            const std::size_t base =
                spec.index(i + (c0 & 1), j + ((c0 >> 1) & 1), k + ((c0 >> 2) & 1));
            keys[v] = static_cast<std::uint64_t>(base) * 3 + axis;
          }
          out.push_back(keys);
        }
      }
    }
  }

  TriangleMesh mesh;
  std::unordered_map<std::uint64_t, int> vertex_of;
  const auto vertex = [&](std::uint64_t key) {
    const auto it = vertex_of.find(key);
    if (it != vertex_of.end()) return it->second;
    const int axis = static_cast<int>(key % 3);
    const std::size_t base = key / 3;
    const int i = static_cast<int>(base % nx);
    const int j = static_cast<int>((base / nx) % ny);
    const int k = static_cast<int>(base / (static_cast<std::size_t>(nx) * ny));
    std::array<int, 3> b{i, j, k};
    b[axis] += 1;
    const double va = grid.values[base];
    const double vb = grid.value(b[0], b[1], b[2]);
    const double t = va / (va - vb);
    const Vec3 pa = spec.voxel_center(i, j, k);
    const Vec3 pb = spec.voxel_center(b[0], b[1], b[2]);
    const int id = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(pa + t * (pb - pa));
    vertex_of.emplace(key, id);
    return id;
  };
  for (const auto& slab : slabs) {
    for (const Tri& t : slab) mesh.faces.push_back({vertex(t[0]), vertex(t[1]), vertex(t[2])});
  }
  return mesh;
}

}  // namespace splatprior
