#include "splatprior/renderer.hpp"

#include "splatprior/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace splatprior {

namespace {

constexpr double kParallelEps = 1e-8;
constexpr double kAlphaFloor = 1e-8;

struct Prepared {
  Vec3 center;
  Vec3 normal;  // rotation column of the min-scale axis
  Vec3 axis_a;  // in-plane axes
  Vec3 axis_b;
  double scale_a = 1.0;
  double scale_b = 1.0;
  int k = 2, a = 0, b = 1;
  double opacity = 0.0;
  Vec3 color;
  Mat3 rotation;
};

Prepared prepare(const Gaussian& g) {
  Prepared p;
  p.rotation = g.rotation_matrix();
  p.k = g.normal_axis();
  p.a = p.k == 0 ? 1 : 0;
  p.b = p.k == 2 ? 1 : 2;
  const Vec3 s = g.scale();
  p.center = g.center;
  p.normal = p.rotation.col(p.k);
  p.axis_a = p.rotation.col(p.a);
  p.axis_b = p.rotation.col(p.b);
  p.scale_a = s[p.a];
  p.scale_b = s[p.b];
  p.opacity = g.opacity();
  p.color = g.color;
  return p;
}

// Ray-plane hit of one Gaussian; see forward/backward for how each field is used.
struct Hit {
  double denom;
  double depth;
  Vec3 offset;  // intersection minus center
  double la, lb;
  double mahal2;
};

inline bool intersect(const Prepared& p, const Vec3& origin, const Vec3& dir, double dir_norm,
                      const RenderOptions& opt, Hit& h) {
  h.denom = p.normal.dot(dir);
  if (std::abs(h.denom) < kParallelEps * dir_norm) return false;
  h.depth = p.normal.dot(p.center - origin) / h.denom;
  if (!(h.depth > opt.near && h.depth < opt.far)) return false;
  h.offset = origin + h.depth * dir - p.center;
  h.la = p.axis_a.dot(h.offset) / p.scale_a;
  h.lb = p.axis_b.dot(h.offset) / p.scale_b;
  h.mahal2 = h.la * h.la + h.lb * h.lb;
  return h.mahal2 <= opt.cutoff_sigma * opt.cutoff_sigma;
}

struct PixelBox {
  int x0, x1, y0, y1;  // inclusive; empty when x0 > x1
  double zmin;         // lower bound on the depth of any hit inside the cutoff
};

PixelBox footprint(const Prepared& p, const Camera& cam, const RenderOptions& opt) {
  const PixelBox full{0, cam.width - 1, 0, cam.height - 1, opt.near};
  const Vec3 ea = opt.cutoff_sigma * p.scale_a * p.axis_a;
  const Vec3 eb = opt.cutoff_sigma * p.scale_b * p.axis_b;
  double umin = std::numeric_limits<double>::infinity(), umax = -umin;
  double vmin = umin, vmax = -umin;
  double zmin = umin;
  int behind = 0;
  for (int sa = -1; sa <= 1; sa += 2) {
    for (int sb = -1; sb <= 1; sb += 2) {
      const Projection pr = project_point(cam, p.center + sa * ea + sb * eb);
      if (!(pr.depth > opt.near)) {
        ++behind;
        continue;
      }
      zmin = std::min(zmin, pr.depth);
      umin = std::min(umin, pr.pixel.x());
      umax = std::max(umax, pr.pixel.x());
      vmin = std::min(vmin, pr.pixel.y());
      vmax = std::max(vmax, pr.pixel.y());
    }
  }
  if (behind == 4) return {1, 0, 1, 0, 0.0};
  if (behind > 0) return full;
  // The ellipse lies in the convex hull of the corners, which projects convexly
  // and whose camera depth is bounded below by the nearest corner.
  PixelBox box{static_cast<int>(std::ceil(umin)), static_cast<int>(std::floor(umax)),
               static_cast<int>(std::ceil(vmin)), static_cast<int>(std::floor(vmax)),
               zmin - 1e-9 * (1.0 + std::abs(zmin))};
  box.x0 = std::max(box.x0, 0);
  box.y0 = std::max(box.y0, 0);
  box.x1 = std::min(box.x1, cam.width - 1);
  box.y1 = std::min(box.y1, cam.height - 1);
  return box;
}

struct TileBins {
  int tile = 16;
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::vector<int>> lists;
  std::vector<PixelBox> boxes;

  [[nodiscard]] const std::vector<int>& at(int x, int y) const {
    return lists[static_cast<std::size_t>(y / tile) * tiles_x + x / tile];
  }
};

TileBins bin_gaussians(const std::vector<Prepared>& prepared, const Camera& cam,
                       const RenderOptions& opt) {
  TileBins bins;
  bins.tile = std::max(1, opt.tile_size);
  bins.tiles_x = (cam.width + bins.tile - 1) / bins.tile;
  bins.tiles_y = (cam.height + bins.tile - 1) / bins.tile;
  bins.lists.resize(static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y);
  bins.boxes.assign(prepared.size(), PixelBox{1, 0, 1, 0, 0.0});
  std::vector<int> order;
  order.reserve(prepared.size());
  for (std::size_t j = 0; j < prepared.size(); ++j) {
    if (!(prepared[j].opacity > 0.0)) continue;
    const PixelBox box = footprint(prepared[j], cam, opt);
    if (box.x0 > box.x1 || box.y0 > box.y1) continue;
    bins.boxes[j] = box;
    order.push_back(static_cast<int>(j));
  }
  // Tile lists inherit this order: nearest possible hit first.
  std::sort(order.begin(), order.end(), [&](int l, int r) {
    const double zl = bins.boxes[l].zmin, zr = bins.boxes[r].zmin;
    return zl < zr || (zl == zr && l < r);
  });
  for (int j : order) {
    const PixelBox& box = bins.boxes[j];
    for (int ty = box.y0 / bins.tile; ty <= box.y1 / bins.tile; ++ty) {
      for (int tx = box.x0 / bins.tile; tx <= box.x1 / bins.tile; ++tx) {
        bins.lists[static_cast<std::size_t>(ty) * bins.tiles_x + tx].push_back(j);
      }
    }
  }
  return bins;
}

inline double face_sign(double denom) { return denom > 0.0 ? -1.0 : 1.0; }

}  // namespace

RenderOutput render_view(std::span<const Gaussian> gaussians, const Camera& camera,
                         const RenderOptions& opt) {
  if (gaussians.empty()) throw InvalidInput("render_view: no Gaussians");
  if (!(opt.near < opt.far)) throw InvalidInput("render_view: near must be < far");
  camera.validate();

  std::vector<Prepared> prepared(gaussians.size());
  for (std::size_t j = 0; j < gaussians.size(); ++j) prepared[j] = prepare(gaussians[j]);
  const TileBins bins = bin_gaussians(prepared, camera, opt);
  std::vector<Vec3> normal_cam(prepared.size());
  for (std::size_t j = 0; j < prepared.size(); ++j) normal_cam[j] = camera.rotation * prepared[j].normal;

  const int w = camera.width, h = camera.height;
  RenderOutput out;
  out.width = w;
  out.height = h;
  out.rgb = Raster<double>(w, h, 3);
  out.depth = Raster<double>(w, h);
  out.normal = Raster<double>(w, h, 3);
  out.alpha = Raster<double>(w, h);
  out.normal_norm = Raster<double>(w, h);

  const Vec3 origin = camera.center();
  std::vector<std::vector<BlendRecord>> row_records(h);
  std::vector<std::vector<std::size_t>> row_counts(h, std::vector<std::size_t>(w, 0));

#pragma omp parallel for schedule(dynamic, 1)
  for (int y = 0; y < h; ++y) {
    struct Candidate {
      double depth;
      int index;
      double mahal2;
      double sign;
    };
    // min-heap on (depth, index)
    const auto later = [](const Candidate& l, const Candidate& r) {
      return l.depth > r.depth || (l.depth == r.depth && l.index > r.index);
    };
    std::vector<Candidate> cands;
    auto& recs = row_records[y];
    recs.reserve(static_cast<std::size_t>(w) * 32);
    for (int x = 0; x < w; ++x) {
      const Vec3 dir = camera.pixel_direction(x, y);
      const double dir_norm = dir.norm();
      cands.clear();
      double trans = 1.0, alpha_sum = 0.0, depth_sum = 0.0;
      Vec3 rgb = Vec3::Zero(), nsum = Vec3::Zero();
      std::size_t count = 0;
      bool done = false;
      // Blends heap entries nearer than `bound`; every unvisited Gaussian lies at or beyond it.
      const auto blend_until = [&](double bound) {
        while (!done && !cands.empty() && cands.front().depth < bound) {
          std::pop_heap(cands.begin(), cands.end(), later);
          const Candidate c = cands.back();
          cands.pop_back();
          const Prepared& p = prepared[c.index];
          const double response = std::exp(-0.5 * c.mahal2);
          double a = p.opacity * response;
          const bool clamped = a > opt.alpha_max;
          if (clamped) a = opt.alpha_max;
          const double wgt = a * trans;
          recs.push_back({c.index, wgt, c.depth, response, a, clamped});
          ++count;
          alpha_sum += wgt;
          depth_sum += wgt * c.depth;
          rgb += wgt * p.color;
          nsum += wgt * c.sign * normal_cam[c.index];
          trans *= 1.0 - a;
          if (trans < opt.min_transmittance) done = true;
        }
      };
      for (int j : bins.at(x, y)) {
        const PixelBox& b = bins.boxes[j];
        if (x < b.x0 || x > b.x1 || y < b.y0 || y > b.y1) continue;
        if (!cands.empty() && cands.front().depth < b.zmin) {
          blend_until(b.zmin);
          if (done) break;
        }
        Hit hit;
        if (!intersect(prepared[j], origin, dir, dir_norm, opt, hit)) continue;
        cands.push_back({hit.depth, j, hit.mahal2, face_sign(hit.denom)});
        std::push_heap(cands.begin(), cands.end(), later);
      }
      blend_until(std::numeric_limits<double>::infinity());
      row_counts[y][x] = count;
      for (int c = 0; c < 3; ++c) out.rgb(x, y, c) = rgb[c];
      out.alpha(x, y) = alpha_sum;
      out.depth(x, y) = depth_sum / std::max(alpha_sum, kAlphaFloor);
      const double nn = nsum.norm();
      out.normal_norm(x, y) = nn;
      if (nn > 1e-12) {
        for (int c = 0; c < 3; ++c) out.normal(x, y, c) = nsum[c] / nn;
      }
    }
  }

  out.offsets.assign(static_cast<std::size_t>(w) * h + 1, 0);
  std::size_t total = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out.offsets[static_cast<std::size_t>(y) * w + x] = total;
      total += row_counts[y][x];
    }
  }
  out.offsets.back() = total;
  out.records.reserve(total);
  for (auto& r : row_records) out.records.insert(out.records.end(), r.begin(), r.end());
  return out;
}

RenderGrad::RenderGrad(const RenderOutput& r)
    : rgb(r.width, r.height, 3),
      depth(r.width, r.height),
      normal(r.width, r.height, 3),
      alpha(r.width, r.height),
      record_weight(r.records.size(), 0.0),
      record_depth(r.records.size(), 0.0) {}

std::vector<ParamVector> render_backward(std::span<const Gaussian> gaussians,
                                         const Camera& camera, const RenderOutput& render,
                                         const RenderGrad& grad, const RenderOptions& /*options*/) {
  const std::size_t n = gaussians.size();
  std::vector<Prepared> prepared(n);
  for (std::size_t j = 0; j < n; ++j) prepared[j] = prepare(gaussians[j]);

  const int threads = max_threads();
  std::vector<std::vector<ParamVector>> partial(threads,
                                                std::vector<ParamVector>(n, ParamVector::Zero()));
  std::vector<std::vector<Mat3>> partial_rot(threads, std::vector<Mat3>(n, Mat3::Zero()));

  const Vec3 origin = camera.center();
  const Mat3& cam_r = camera.rotation;
  const int w = render.width, h = render.height;
  const bool has_extra = grad.record_weight.size() == render.records.size();

#pragma omp parallel for schedule(dynamic, 1)
  for (int y = 0; y < h; ++y) {
    auto& acc = partial[thread_index()];
    auto& acc_rot = partial_rot[thread_index()];
    std::vector<double> g_weight, trans, g_depth_rec;
    std::vector<Hit> hits;
    for (int x = 0; x < w; ++x) {
      const auto recs = render.records_at(x, y);
      if (recs.empty()) continue;
      const std::size_t base = render.record_offset(x, y);
      const Vec3 dir = camera.pixel_direction(x, y);
      const double alpha = render.alpha(x, y);
      const double alpha_safe = std::max(alpha, kAlphaFloor);
      const double depth = render.depth(x, y);
      const Vec3 g_rgb(grad.rgb(x, y, 0), grad.rgb(x, y, 1), grad.rgb(x, y, 2));
      const double g_depth = grad.depth(x, y);
      const double g_alpha = grad.alpha(x, y);
      Vec3 g_nsum = Vec3::Zero();
      const double nn = render.normal_norm(x, y);
      if (nn > 1e-12) {
        const Vec3 nrm(render.normal(x, y, 0), render.normal(x, y, 1), render.normal(x, y, 2));
        const Vec3 g_nrm(grad.normal(x, y, 0), grad.normal(x, y, 1), grad.normal(x, y, 2));
        g_nsum = (g_nrm - nrm * nrm.dot(g_nrm)) / nn;
      }

      const std::size_t cnt = recs.size();
      g_weight.assign(cnt, 0.0);
      trans.assign(cnt, 1.0);
      for (std::size_t u = 1; u < cnt; ++u) trans[u] = trans[u - 1] * (1.0 - recs[u - 1].alpha);

      // Per-record gradients of weight; depth and attribute gradients applied directly.
      g_depth_rec.assign(cnt, 0.0);
      hits.resize(cnt);
      for (std::size_t u = 0; u < cnt; ++u) {
        const BlendRecord& r = recs[u];
        const Prepared& p = prepared[r.gaussian];
        Hit& hit = hits[u];
        hit.denom = p.normal.dot(dir);
        hit.depth = r.depth;
        hit.offset = origin + r.depth * dir - p.center;
        hit.la = p.axis_a.dot(hit.offset) / p.scale_a;
        hit.lb = p.axis_b.dot(hit.offset) / p.scale_b;
        const double sign = face_sign(hit.denom);
        const Vec3 n_cam = sign * (cam_r * p.normal);
        const double d_depth_d_weight =
            alpha > kAlphaFloor ? (r.depth - depth) / alpha_safe : r.depth / alpha_safe;
        double gw = g_rgb.dot(p.color) + g_depth * d_depth_d_weight + g_alpha + g_nsum.dot(n_cam);
        double gd = g_depth * r.weight / alpha_safe;
        if (has_extra) {
          gw += grad.record_weight[base + u];
          gd += grad.record_depth[base + u];
        }
        g_weight[u] = gw;
        g_depth_rec[u] = gd;
        acc[r.gaussian].segment<3>(kColorOffset) += g_rgb * r.weight;
        // normal map path: d n_cam / d normal = sign * R_cam
        acc_rot[r.gaussian].col(p.k) += sign * r.weight * (cam_r.transpose() * g_nsum);
      }

      double suffix = 0.0;
      for (std::size_t ui = cnt; ui-- > 0;) {
        const BlendRecord& r = recs[ui];
        const Prepared& p = prepared[r.gaussian];
        const double g_alpha_u = trans[ui] * g_weight[ui] - suffix / (1.0 - r.alpha);
        suffix += g_weight[ui] * r.weight;

        double g_resp = 0.0;
        if (!r.clamped) {
          const double o = p.opacity;
          acc[r.gaussian][kOpacityOffset] += g_alpha_u * r.response * o * (1.0 - o);
          g_resp = g_alpha_u * o;
        }

        const Hit& hit = hits[ui];
        const double g_m = -0.5 * r.response * g_resp;
        const double g_la = g_m * 2.0 * hit.la;
        const double g_lb = g_m * 2.0 * hit.lb;
        acc[r.gaussian][kLogScaleOffset + p.a] += -g_la * hit.la;
        acc[r.gaussian][kLogScaleOffset + p.b] += -g_lb * hit.lb;
        const double g_raw_a = g_la / p.scale_a;
        const double g_raw_b = g_lb / p.scale_b;
        const Vec3 g_offset = g_raw_a * p.axis_a + g_raw_b * p.axis_b;
        acc_rot[r.gaussian].col(p.a) += g_raw_a * hit.offset;
        acc_rot[r.gaussian].col(p.b) += g_raw_b * hit.offset;
        // offset = origin + depth * dir - center; depth = n.(center - origin) / (n.dir)
        const double g_depth_total = g_depth_rec[ui] + g_offset.dot(dir);
        Vec3 g_center = -g_offset + g_depth_total * p.normal / hit.denom;
        acc[r.gaussian].segment<3>(kCenterOffset) += g_center;
        acc_rot[r.gaussian].col(p.k) += -g_depth_total / hit.denom * hit.offset;
      }
    }
  }

  std::vector<ParamVector> out(n, ParamVector::Zero());
  for (int t = 0; t < threads; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      out[j] += partial[t][j];
      if (t > 0) partial_rot[0][j] += partial_rot[t][j];
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!partial_rot[0][j].isZero(0.0)) {
      out[j].segment<4>(kRotationOffset) += rotation_vjp(gaussians[j].rotation, partial_rot[0][j]);
    }
  }
  return out;
}

double screen_space_gradient(const Camera& camera, const Gaussian& g, const ParamVector& grad) {
  const Vec3 g_cam = camera.rotation * grad.segment<3>(kCenterOffset);
  const double z = (camera.rotation * g.center + camera.translation).z();
  if (!(z > 0.0)) return 0.0;
  const double gx = g_cam.x() * z / camera.intrinsics.fx * 0.5 * camera.width;
  const double gy = g_cam.y() * z / camera.intrinsics.fy * 0.5 * camera.height;
  return std::sqrt(gx * gx + gy * gy);
}

DepthMap to_depth_map(const RenderOutput& render, double valid_alpha) {
  DepthMap d(render.width, render.height);
  for (int y = 0; y < render.height; ++y) {
    for (int x = 0; x < render.width; ++x) {
      if (render.alpha(x, y) > valid_alpha) d(x, y) = static_cast<float>(render.depth(x, y));
    }
  }
  return d;
}

std::vector<DepthMap> render_depth_maps(std::span<const Gaussian> gaussians,
                                        std::span<const Camera> cameras,
                                        const RenderOptions& options, double valid_alpha) {
  std::vector<DepthMap> maps;
  maps.reserve(cameras.size());
  for (const Camera& cam : cameras) {
    maps.push_back(to_depth_map(render_view(gaussians, cam, options), valid_alpha));
  }
  return maps;
}

}  // namespace splatprior
