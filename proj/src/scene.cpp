#include "dlgnet/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

DLGNET_NAMESPACE_BEGIN

void SceneSpec::validate() const {
  if (height == 0 || width == 0) throw std::invalid_argument("scene extent must be positive");
  if (depth_planes.empty()) throw std::invalid_argument("scene needs at least one focal slice");
  for (double d : depth_planes)
    if (d < 0 || d > 1) throw std::invalid_argument("depth planes must lie in [0,1]");
  if (fg_depth < 0 || fg_depth > 1 || bg_depth < 0 || bg_depth > 1)
    throw std::invalid_argument("fg/bg depth must lie in [0,1]");
  if (!(radius > 0)) throw std::invalid_argument("degenerate foreground blob (radius <= 0)");
  if (radius >= double(std::min(height, width)) / 2)
    throw std::invalid_argument("blob radius must be < min(H,W)/2");
  if (blur_gain < 0) throw std::invalid_argument("blur_gain must be non-negative");
}

namespace {

std::size_t reflect(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (long(n) - 1);
  i %= period;
  if (i < 0) i += period;
  return std::size_t(i < long(n) ? i : period - i);
}

// Coarse value noise plus per-pixel grain around a random base colour.
Tensor random_texture(std::size_t h, std::size_t w, SeededRng& rng) {
  constexpr std::size_t cell = 4;
  const std::size_t gh = h / cell + 2, gw = w / cell + 2;
  std::vector<Real> data(3 * h * w);
  for (std::size_t c = 0; c < 3; ++c) {
    const double base = rng.uniform(0.25, 0.75);
    std::vector<double> grid(gh * gw);
    for (auto& g : grid) g = rng.uniform(-0.2, 0.2);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double fy = double(y) / cell, fx = double(x) / cell;
        const auto y0 = std::size_t(fy), x0 = std::size_t(fx);
        const double ty = fy - double(y0), tx = fx - double(x0);
        const double top = grid[y0 * gw + x0] * (1 - tx) + grid[y0 * gw + x0 + 1] * tx;
        const double bot = grid[(y0 + 1) * gw + x0] * (1 - tx) + grid[(y0 + 1) * gw + x0 + 1] * tx;
        const double grain = rng.uniform(-0.2, 0.2);
        data[(c * h + y) * w + x] =
            static_cast<Real>(std::clamp(base + top * (1 - ty) + bot * ty + grain, 0.0, 1.0));
      }
  }
  return Tensor({3, h, w}, std::move(data));
}

Tensor compose(const Tensor& fg, const Tensor& bg, const Tensor& mask) {
  const std::size_t c = fg.dim(0), plane = fg.dim(1) * fg.dim(2);
  std::vector<Real> out(fg.size());
  auto f = fg.data(), b = bg.data(), m = mask.data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < plane; ++p)
      out[ch * plane + p] = m[p] > Real(0.5) ? f[ch * plane + p] : b[ch * plane + p];
  return Tensor(fg.shape(), std::move(out));
}

}  // namespace

Tensor gaussian_blur(const Tensor& chw, double sigma) {
  if (chw.rank() != 3) throw ShapeError("gaussian_blur expects [C,H,W]");
  if (sigma < 0) throw std::invalid_argument("negative blur sigma");
  if (sigma == 0) return chw.detach();
  const long radius = long(std::ceil(3 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0;
  for (long i = -radius; i <= radius; ++i)
    total += kernel[i + radius] = std::exp(-double(i * i) / (2 * sigma * sigma));
  for (auto& k : kernel) k /= total;

  const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  auto src = chw.data();
  std::vector<double> tmp(chw.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double acc = 0;
        for (long i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * src[(ch * h + y) * w + reflect(long(x) + i, w)];
        tmp[(ch * h + y) * w + x] = acc;
      }
  std::vector<Real> out(chw.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double acc = 0;
        for (long i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * tmp[(ch * h + reflect(long(y) + i, h)) * w + x];
        out[(ch * h + y) * w + x] = static_cast<Real>(acc);
      }
  return Tensor(chw.shape(), std::move(out));
}

double laplacian_energy(const Tensor& chw, const Tensor& mask) {
  const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  auto v = chw.data();
  auto m = mask.data();
  auto in = [&](std::size_t y, std::size_t x) { return m[y * w + x] > Real(0.5); };
  double energy = 0;
  std::size_t count = 0;
  for (std::size_t y = 1; y + 1 < h; ++y)
    for (std::size_t x = 1; x + 1 < w; ++x) {
      if (!(in(y, x) && in(y - 1, x) && in(y + 1, x) && in(y, x - 1) && in(y, x + 1))) continue;
      for (std::size_t ch = 0; ch < c; ++ch) {
        auto at = [&](std::size_t yy, std::size_t xx) { return double(v[(ch * h + yy) * w + xx]); };
        const double lap = 4 * at(y, x) - at(y - 1, x) - at(y + 1, x) - at(y, x - 1) - at(y, x + 1);
        energy += lap * lap;
      }
      ++count;
    }
  return count ? energy / double(count * c) : 0.0;
}

LightFieldSample gen_synthetic_sample(const SceneSpec& spec, SeededRng& rng) {
  spec.validate();
  const std::size_t h = spec.height, w = spec.width;

  SeededRng tex_rng(spec.texture_seed);
  const Tensor fg = random_texture(h, w, tex_rng);
  const double lobes = double(2 + tex_rng.below(3));
  const double wobble = tex_rng.uniform(0.0, 0.2);
  const double phase = tex_rng.uniform(0.0, 2 * std::numbers::pi);
  const Tensor bg = random_texture(h, w, rng);

  std::vector<Real> mask(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double dy = double(y) + 0.5 - spec.center_y, dx = double(x) + 0.5 - spec.center_x;
      const double r = spec.radius * (1 + wobble * std::sin(lobes * std::atan2(dy, dx) + phase));
      mask[y * w + x] = std::hypot(dy, dx) < r ? Real(1) : Real(0);
    }
  LightFieldSample s;
  s.gt = Tensor({1, h, w}, std::move(mask));
  s.allfocus = compose(fg, bg, s.gt);

  const std::size_t n = spec.num_slices();
  std::vector<Real> slices;
  slices.reserve(n * 3 * h * w);
  for (double plane : spec.depth_planes) {
    const Tensor f = gaussian_blur(fg, spec.blur_gain * std::abs(spec.fg_depth - plane));
    const Tensor b = gaussian_blur(bg, spec.blur_gain * std::abs(spec.bg_depth - plane));
    const Tensor slice = compose(f, b, s.gt);
    slices.insert(slices.end(), slice.data().begin(), slice.data().end());
  }
  s.slices = Tensor({n, 3, h, w}, std::move(slices));
  return s;
}

SceneSpec random_scene_spec(const SceneRanges& ranges, SeededRng& rng) {
  SceneSpec spec;
  spec.height = ranges.height;
  spec.width = ranges.width;
  const std::size_t n =
      ranges.min_slices + rng.below(ranges.max_slices - ranges.min_slices + 1);
  spec.depth_planes.clear();
  for (std::size_t i = 0; i < n; ++i) spec.depth_planes.push_back((double(i) + 0.5) / double(n));
  const double side = double(std::min(ranges.height, ranges.width));
  spec.radius = side * rng.uniform(ranges.min_radius_frac, ranges.max_radius_frac);
  const double margin = spec.radius * 1.2;
  spec.center_y = rng.uniform(std::min(margin, ranges.height / 2.0),
                              std::max(double(ranges.height) - margin, ranges.height / 2.0));
  spec.center_x = rng.uniform(std::min(margin, ranges.width / 2.0),
                              std::max(double(ranges.width) - margin, ranges.width / 2.0));
  spec.texture_seed = rng.next_u64();
  do {
    spec.fg_depth = rng.uniform();
    spec.bg_depth = rng.uniform();
  } while (std::abs(spec.fg_depth - spec.bg_depth) < ranges.min_depth_gap);
  spec.blur_gain = ranges.blur_gain;
  return spec;
}

DLGNET_NAMESPACE_END
