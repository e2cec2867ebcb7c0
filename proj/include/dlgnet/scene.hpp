#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dlgnet/rng.hpp"
#include "dlgnet/tensor.hpp"

DLGNET_NAMESPACE_BEGIN

/// One synthetic scene: a textured foreground blob at fg_depth over a
/// textured background at bg_depth, photographed at N focus depths.
struct SceneSpec {
  std::size_t height = 32;
  std::size_t width = 32;
  std::vector<double> depth_planes{0.125, 0.375, 0.625, 0.875};
  double center_y = 16, center_x = 16;
  double radius = 8;
  std::uint64_t texture_seed = 0;
  double fg_depth = 0.2;
  double bg_depth = 0.8;
  /// Gaussian sigma (pixels) per unit of depth mismatch.
  double blur_gain = 4.0;

  std::size_t num_slices() const { return depth_planes.size(); }
  /// Throws std::invalid_argument when the spec breaks an invariant.
  void validate() const;
};

/// allfocus [3,H,W], slices [N,3,H,W], gt [1,H,W] with values in {0,1}.
struct LightFieldSample {
  std::string id;
  Tensor allfocus;
  Tensor slices;
  Tensor gt;

  std::size_t num_slices() const { return slices.dim(0); }
  std::size_t height() const { return gt.dim(1); }
  std::size_t width() const { return gt.dim(2); }
};

/// Deterministic in (spec, rng state).
LightFieldSample gen_synthetic_sample(const SceneSpec& spec, SeededRng& rng);

struct SceneRanges {
  std::size_t height = 32, width = 32;
  std::size_t min_slices = 4, max_slices = 4;
  double blur_gain = 4.0;
  double min_radius_frac = 0.18, max_radius_frac = 0.3;
  double min_depth_gap = 0.4;
};

SceneSpec random_scene_spec(const SceneRanges& ranges, SeededRng& rng);

/// Separable Gaussian blur of a [C,H,W] image. Radius ceil(3 sigma), reflect
/// padding; sigma == 0 returns an exact copy.
Tensor gaussian_blur(const Tensor& chw, double sigma);

/// Mean squared 4-neighbour Laplacian over mask pixels whose neighbours are
/// all inside the mask; averaged over channels.
double laplacian_energy(const Tensor& chw, const Tensor& mask);

DLGNET_NAMESPACE_END
