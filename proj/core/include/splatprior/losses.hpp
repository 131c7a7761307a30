#pragma once

#include "splatprior/core.hpp"
#include "splatprior/renderer.hpp"

#include <cstddef>
#include <optional>
#include <span>

namespace splatprior {

// All render-level losses return the loss value and, when `grad` is non-null,
// add `scale` times the loss gradient into it.

using Mask = Raster<unsigned char>;

/// Pixels with accumulated alpha above `valid_alpha` and a defined normal.
Mask valid_mask(const RenderOutput& render, double valid_alpha);

// ---------------------------------------------------------------------------
// Depth distortion
// ---------------------------------------------------------------------------

/// Pairwise spread of one ray's depth distribution: sum over u' < u of
/// w_u w_u' (d_u - d_u')^2.
double depth_distortion(std::span<const double> weights, std::span<const double> depths);

/// Mean per-pixel depth distortion over the whole image.
double depth_distortion_loss(const RenderOutput& render, RenderGrad* grad = nullptr,
                             double scale = 1.0);

// ---------------------------------------------------------------------------
// Normals from depth
// ---------------------------------------------------------------------------

struct DerivedNormals {
  Raster<double> normal;  ///< 3 channels, camera frame, facing the camera
  Mask valid;
  // neighbors used for the horizontal and vertical differences (backward pass)
  Raster<int> x_lo, x_hi, y_lo, y_hi;
  Raster<double> cross_norm;
};

/// Back-projects each valid pixel and takes the normalized cross product of
/// vertical and horizontal point differences. Central differences where both
/// neighbors are valid, one-sided otherwise.
DerivedNormals depth_to_normal(const Raster<double>& depth, const Mask& valid, const Intrinsics& k);

/// Adds dL/d(depth) given dL/d(derived normal).
void depth_to_normal_backward(const Raster<double>& depth, const DerivedNormals& derived,
                              const Intrinsics& k, const Raster<double>& grad_normal,
                              Raster<double>& grad_depth);

/// Per-pixel weight (1 - |grad I|)^2 of the grayscale image, gradient magnitude
/// from central differences clamped to [0, 1].
Raster<double> edge_aware_weights(const ImageRGB& image);

/// (1/|I|) sum over masked pixels of eta * |n - n'|_1. Gradients are optional.
double normal_consistency(const Raster<double>& rendered, const Raster<double>& derived,
                          const Mask& mask, const Raster<double>& eta,
                          Raster<double>* grad_rendered, Raster<double>* grad_derived,
                          double scale = 1.0);

/// Normal smoothness between rendered normals and normals derived from rendered depth.
double normal_smooth_loss(const RenderOutput& render, const ImageRGB& gt_rgb, const Intrinsics& k,
                          double valid_alpha, RenderGrad* grad = nullptr, double scale = 1.0);

// ---------------------------------------------------------------------------
// Plane-induced homographies
// ---------------------------------------------------------------------------

struct RelativePose {
  Mat3 rotation;     ///< ref camera frame -> neighbor camera frame
  Vec3 translation;
};

RelativePose relative_pose(const Camera& ref, const Camera& nbr);

struct Homography {
  Mat3 matrix;

  [[nodiscard]] Vec2 apply(const Vec2& pixel) const;
  [[nodiscard]] Homography inverse() const { return {matrix.inverse()}; }
};

/// Homography from ref pixels to neighbor pixels induced by the plane
/// normal . X = distance (X in ref camera coordinates, normal pointing away
/// from the camera). Returns nullopt for distance <= 1e-6.
std::optional<Homography> compute_homography(const Camera& ref, const Camera& nbr,
                                             const Vec3& normal, double distance);

/// Per-pixel planes of a render in its own camera frame.
struct PlaneMaps {
  Raster<double> normal;    ///< 3 channels, pointing away from the camera
  Raster<double> distance;  ///< normal . X
  Mask valid;
};

PlaneMaps plane_maps(const RenderOutput& render, const Camera& camera, double valid_alpha);

struct GeomLoss {
  double value = 0.0;
  std::size_t valid_pixels = 0;
  bool empty = true;  ///< no pixel survived; value is 0
};

/// Forward-backward reprojection error through per-pixel plane homographies.
GeomLoss multiview_geom_loss(const RenderOutput& ref, const Camera& ref_cam,
                             const RenderOutput& nbr, const Camera& nbr_cam, double valid_alpha,
                             RenderGrad* ref_grad = nullptr, RenderGrad* nbr_grad = nullptr,
                             double scale = 1.0);

// ---------------------------------------------------------------------------
// Photometric
// ---------------------------------------------------------------------------

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr int kNccPatchRadius = 3;

/// Mean absolute difference over pixels and channels.
double mae(const ImageRGB& pred, const ImageRGB& gt, ImageRGB* grad_pred = nullptr,
           double scale = 1.0);

/// Mean SSIM over pixels and channels with an 11x11 Gaussian window
/// (sigma 1.5) renormalized where it overlaps the border.
double ssim(const ImageRGB& pred, const ImageRGB& gt, ImageRGB* grad_pred = nullptr,
            double scale = 1.0);

/// Normalized cross-correlation of two equally sized samples; nullopt when
/// either has (near) zero variance.
std::optional<double> ncc(std::span<const double> a, std::span<const double> b);

Raster<double> grayscale(const ImageRGB& image);

struct NccTerm {
  double mean_ncc = 1.0;
  std::size_t valid_pixels = 0;
};

/// Mean NCC between 7x7 ref patches and their plane-homography warps into the
/// neighbor's ground truth. Gradients flow into the ref render's depth and normal.
NccTerm multiview_ncc(const RenderOutput& ref, const Camera& ref_cam, const ImageRGB& ref_gt,
                      const Camera& nbr_cam, const ImageRGB& nbr_gt, double valid_alpha,
                      RenderGrad* grad = nullptr, double scale = 1.0);

struct RgbLoss {
  double mae = 0.0;
  double ssim = 1.0;
  double ncc = 1.0;
  std::size_t ncc_pixels = 0;
  double total = 0.0;
};

struct Neighbor {
  const Camera* camera = nullptr;
  const ImageRGB* gt_rgb = nullptr;
};

/// (1 - beta) MAE + beta (1 - SSIM) + (1 - NCC). The NCC term is 0 without a
/// neighbor or when no pixel yields a valid patch.
RgbLoss rgb_loss(const RenderOutput& render, const Camera& camera, const ImageRGB& gt_rgb,
                 std::optional<Neighbor> neighbor, double beta, double valid_alpha,
                 RenderGrad* grad = nullptr, double scale = 1.0);

}  // namespace splatprior
