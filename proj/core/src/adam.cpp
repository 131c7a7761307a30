#include "splatprior/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splatprior {

double LearningRates::center_at(int iter, int total, double extent) const {
  const double t = total > 0 ? std::clamp(static_cast<double>(iter) / total, 0.0, 1.0) : 1.0;
  return extent * std::exp((1.0 - t) * std::log(center_init) + t * std::log(center_final));
}

ParamVector LearningRates::vector_at(int iter, int total, double extent) const {
  ParamVector lr;
  lr.segment<3>(kCenterOffset).setConstant(center_at(iter, total, extent));
  lr.segment<3>(kLogScaleOffset).setConstant(scale);
  lr.segment<4>(kRotationOffset).setConstant(rotation);
  lr[kOpacityOffset] = opacity;
  lr.segment<3>(kColorOffset).setConstant(color);
  return lr;
}

double total_loss(const LossTerms& t, const LossWeights& w, bool scp_active) {
  const std::pair<const char*, double> parts[] = {{"L_RGB", t.rgb},
                                                  {"L_Depth", t.depth},
                                                  {"L_NS", t.normal_smooth},
                                                  {"L_NM", t.multiview},
                                                  {"L_SCP", scp_active ? t.scp : 0.0}};
  for (const auto& [name, value] : parts) {
    if (!std::isfinite(value)) {
      throw TrainingError(std::string("non-finite loss component ") + name + " = " +
                          std::to_string(value));
    }
  }
  double total = t.rgb + w.depth * t.depth + w.normal_smooth * t.normal_smooth +
                 w.multiview * t.multiview;
  if (scp_active) total += w.scp * t.scp;
  return total;
}

double planarity_penalty(std::span<const Gaussian> gaussians, double ratio, double weight,
                         std::vector<ParamVector>* grads) {
  if (gaussians.empty()) return 0.0;
  const double target = std::log(ratio);
  const double inv = 1.0 / static_cast<double>(gaussians.size());
  double total = 0.0;
  for (std::size_t j = 0; j < gaussians.size(); ++j) {
    const Vec3& ls = gaussians[j].log_scale;
    std::array<int, 3> idx{0, 1, 2};
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return ls[a] < ls[b]; });
    const double d = ls[idx[0]] - ls[idx[1]] - target;
    total += d * d * inv;
    if (grads) {
      (*grads)[j][kLogScaleOffset + idx[0]] += weight * 2.0 * d * inv;
      (*grads)[j][kLogScaleOffset + idx[1]] -= weight * 2.0 * d * inv;
    }
  }
  return total;
}

void AdamState::resize(std::size_t n) {
  m.assign(n, ParamVector::Zero());
  v.assign(n, ParamVector::Zero());
}

void AdamState::remap(std::span<const std::int64_t> source) {
  std::vector<ParamVector> nm(source.size(), ParamVector::Zero());
  std::vector<ParamVector> nv(source.size(), ParamVector::Zero());
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (source[i] >= 0) {
      nm[i] = m[static_cast<std::size_t>(source[i])];
      nv[i] = v[static_cast<std::size_t>(source[i])];
    }
  }
  m = std::move(nm);
  v = std::move(nv);
}

void adam_step(std::vector<Gaussian>& gaussians, std::span<const ParamVector> grads,
               AdamState& state, const ParamVector& lr, double beta1, double beta2, double eps) {
  if (grads.size() != gaussians.size() || state.m.size() != gaussians.size() ||
      state.v.size() != gaussians.size()) {
    throw InvalidInput("adam_step: parameter, gradient and state sizes differ");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  std::size_t skipped = 0;
  for (std::size_t j = 0; j < gaussians.size(); ++j) {
    ParamVector p = gaussians[j].pack();
    ParamVector& m = state.m[j];
    ParamVector& v = state.v[j];
    for (int i = 0; i < kParamCount; ++i) {
      const double g = grads[j][i];
      if (!std::isfinite(g)) {
        ++skipped;
        continue;
      }
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr[i] * mhat / (std::sqrt(vhat) + eps);
    }
    Gaussian g = Gaussian::unpack(p);
    const double qn = g.rotation.norm();
    g.rotation = qn > 1e-12 ? Quat(g.rotation / qn) : Quat(1.0, 0.0, 0.0, 0.0);
    g.color = g.color.cwiseMax(0.0).cwiseMin(1.0);
    gaussians[j] = g;
  }
  state.skipped += skipped;
}

DensifyResult densify(std::vector<Gaussian>& gaussians, std::span<const double> grad_sum,
                      std::span<const int> grad_count, const DensifySettings& s, double extent,
                      std::mt19937_64& rng) {
  const std::size_t n = gaussians.size();
  if (grad_sum.size() != n || grad_count.size() != n) {
    throw InvalidInput("densify: gradient statistics do not match the Gaussian count");
  }
  std::vector<std::size_t> candidates;
  std::vector<double> mean(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (grad_count[j] > 0) mean[j] = grad_sum[j] / grad_count[j];
    if (mean[j] >= s.grad_threshold) candidates.push_back(j);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });
  const std::size_t room = s.max_gaussians > n ? s.max_gaussians - n : 0;
  if (candidates.size() > room) candidates.resize(room);

  const double dense_limit = s.percent_dense * extent;
  std::vector<char> is_split(n, 0), is_clone(n, 0);
  for (std::size_t j : candidates) {
    if (gaussians[j].scale().maxCoeff() <= dense_limit) {
      is_clone[j] = 1;
    } else {
      is_split[j] = 1;
    }
  }

  std::vector<Gaussian> next;
  std::vector<std::int64_t> source;
  next.reserve(n + candidates.size());
  DensifyResult out;
  for (std::size_t j = 0; j < n; ++j) {
    if (is_split[j]) continue;
    next.push_back(gaussians[j]);
    source.push_back(static_cast<std::int64_t>(j));
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!is_clone[j]) continue;
    next.push_back(gaussians[j]);
    source.push_back(-1);
    ++out.stats.cloned;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (!is_split[j]) continue;
    const Gaussian& parent = gaussians[j];
    const Mat3 r = parent.rotation_matrix();
    const Vec3 sc = parent.scale();
    for (int c = 0; c < 2; ++c) {
      Gaussian child = parent;
      const Vec3 z(normal(rng), normal(rng), normal(rng));
      child.center = parent.center + r * sc.cwiseProduct(z);
      child.log_scale = parent.log_scale.array() - std::log(s.split_factor);
      next.push_back(child);
      source.push_back(-1);
    }
    ++out.stats.split;
  }

  // prune, never below the floor; the floor keeps the most opaque Gaussians
  std::vector<std::size_t> keep_idx;
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (!(next[i].opacity() < s.prune_opacity)) keep_idx.push_back(i);
  }
  if (keep_idx.size() < s.min_gaussians && keep_idx.size() < next.size()) {
    std::vector<std::size_t> order(next.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return next[a].opacity_logit > next[b].opacity_logit;
    });
    order.resize(std::min(s.min_gaussians, next.size()));
    std::sort(order.begin(), order.end());
    keep_idx = std::move(order);
  }
  out.stats.pruned = next.size() - keep_idx.size();
  gaussians.clear();
  out.source.clear();
  for (std::size_t i : keep_idx) {
    gaussians.push_back(next[i]);
    out.source.push_back(source[i]);
  }
  return out;
}

}  // namespace splatprior
