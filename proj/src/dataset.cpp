#include "dlgnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dlgnet/image_io.hpp"
#include "dlgnet/ops.hpp"

DLGNET_NAMESPACE_BEGIN

namespace fs = std::filesystem;

namespace {

std::string slice_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "slice_%02zu.ppm", i);
  return buf;
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

Tensor slice_of(const Tensor& stack, std::size_t i) {
  const std::size_t c = stack.dim(1), h = stack.dim(2), w = stack.dim(3);
  auto v = stack.data();
  return Tensor({c, h, w}, std::vector<Real>(v.begin() + std::ptrdiff_t(i * c * h * w),
                                             v.begin() + std::ptrdiff_t((i + 1) * c * h * w)));
}

// Per-image [C,H,W] -> transformed [C,H',W'].
Tensor transform_image(const Tensor& chw, const Geometry& g, bool nearest) {
  const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  NoGradGuard guard;
  Tensor img = reshape(chw, {1, c, h, w});
  if (g.crop_h) {
    img = narrow(narrow(img, 2, g.crop_y, g.crop_h), 3, g.crop_x, g.crop_w);
    img = nearest ? nearest_resize(img, h, w) : bilinear_resize(img, h, w);
  }
  std::size_t ch = h, cw = w;
  std::vector<Real> cur = img.to_vector();
  if (g.hflip) {
    std::vector<Real> out(cur.size());
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t y = 0; y < ch; ++y)
        for (std::size_t x = 0; x < cw; ++x) out[(k * ch + y) * cw + x] = cur[(k * ch + y) * cw + cw - 1 - x];
    cur.swap(out);
  }
  for (int r = 0; r < ((g.rot90 % 4) + 4) % 4; ++r) {
    // out[y'][x'] = in[x'][cw-1-y'], out extent (cw, ch)
    std::vector<Real> out(cur.size());
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t y = 0; y < cw; ++y)
        for (std::size_t x = 0; x < ch; ++x) out[(k * cw + y) * ch + x] = cur[(k * ch + x) * cw + cw - 1 - y];
    cur.swap(out);
    std::swap(ch, cw);
  }
  return Tensor({c, ch, cw}, std::move(cur));
}

}  // namespace

std::string sample_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%04zu", index);
  return buf;
}

void write_sample(const LightFieldSample& sample, const fs::path& dir, const SampleMeta& meta) {
  fs::create_directories(dir);
  write_ppm(dir / "allfocus.ppm", sample.allfocus);
  for (std::size_t i = 0; i < sample.num_slices(); ++i)
    write_ppm(dir / slice_name(i), slice_of(sample.slices, i));
  write_pgm(dir / "gt.pgm", sample.gt);
  std::ofstream os(dir / "meta.txt");
  os << "n_slices=" << sample.num_slices() << "\n";
  os << "depths=";
  for (std::size_t i = 0; i < meta.depths.size(); ++i) os << (i ? "," : "") << meta.depths[i];
  os << "\nseed=" << meta.seed << "\n";
  if (!os) throw std::runtime_error("failed to write " + (dir / "meta.txt").string());
}

LightFieldSample read_sample(const fs::path& dir) {
  const auto kv = read_key_values(dir / "meta.txt");
  const auto it = kv.find("n_slices");
  if (it == kv.end()) throw std::runtime_error("meta.txt lacks n_slices in " + dir.string());
  const std::size_t n = std::stoul(it->second);
  if (n == 0) throw std::runtime_error("n_slices must be >= 1 in " + dir.string());
  LightFieldSample s;
  s.id = dir.filename().string();
  s.allfocus = read_pnm(dir / "allfocus.ppm");
  s.gt = read_pnm(dir / "gt.pgm");
  if (s.allfocus.dim(0) != 3 || s.gt.dim(0) != 1)
    throw std::runtime_error("unexpected channel count in " + dir.string());
  const std::size_t h = s.gt.dim(1), w = s.gt.dim(2);
  std::vector<Real> stack;
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor slice = read_pnm(dir / slice_name(i));
    if (slice.shape() != Shape{3, h, w} || s.allfocus.shape() != Shape{3, h, w})
      throw std::runtime_error("image extents differ within " + dir.string());
    stack.insert(stack.end(), slice.data().begin(), slice.data().end());
  }
  s.slices = Tensor({n, 3, h, w}, std::move(stack));
  return s;
}

bool Geometry::is_identity(std::size_t h, std::size_t w) const {
  const bool full_crop = crop_h == 0 || (crop_y == 0 && crop_x == 0 && crop_h == h && crop_w == w);
  return full_crop && !hflip && rot90 % 4 == 0;
}

Geometry draw_geometry(std::size_t h, std::size_t w, const AugmentOptions& options, SeededRng& rng) {
  Geometry g;
  if (options.crop) {
    const double frac = rng.uniform(options.min_crop, 1.0);
    g.crop_h = std::max<std::size_t>(1, std::size_t(std::lround(frac * double(h))));
    g.crop_w = std::max<std::size_t>(1, std::size_t(std::lround(frac * double(w))));
    g.crop_y = rng.below(h - g.crop_h + 1);
    g.crop_x = rng.below(w - g.crop_w + 1);
  }
  if (options.flip) g.hflip = rng.coin();
  if (options.rotate && h == w) g.rot90 = int(rng.below(4));
  return g;
}

LightFieldSample apply_geometry(const LightFieldSample& sample, const Geometry& g) {
  const std::size_t h = sample.height(), w = sample.width();
  if (g.crop_h && (g.crop_y + g.crop_h > h || g.crop_x + g.crop_w > w))
    throw std::invalid_argument("crop window exceeds image");
  LightFieldSample out;
  out.id = sample.id;
  out.allfocus = transform_image(sample.allfocus, g, false);
  out.gt = transform_image(sample.gt, g, true);
  std::vector<Real> stack;
  for (std::size_t i = 0; i < sample.num_slices(); ++i) {
    const Tensor t = transform_image(slice_of(sample.slices, i), g, false);
    stack.insert(stack.end(), t.data().begin(), t.data().end());
  }
  const Shape& s = out.allfocus.shape();
  out.slices = Tensor({sample.num_slices(), s[0], s[1], s[2]}, std::move(stack));
  return out;
}

LightFieldSample augment(const LightFieldSample& sample, SeededRng& rng,
                         const AugmentOptions& options) {
  return apply_geometry(sample, draw_geometry(sample.height(), sample.width(), options, rng));
}

std::pair<double, double> map_point(const Geometry& g, std::size_t h, std::size_t w, double y,
                                    double x) {
  if (g.crop_h) {
    y = (y - double(g.crop_y) + 0.5) * double(h) / double(g.crop_h) - 0.5;
    x = (x - double(g.crop_x) + 0.5) * double(w) / double(g.crop_w) - 0.5;
  }
  double ch = double(h), cw = double(w);
  if (g.hflip) x = cw - 1 - x;
  for (int r = 0; r < ((g.rot90 % 4) + 4) % 4; ++r) {
    const double ny = cw - 1 - x, nx = y;
    y = ny;
    x = nx;
    std::swap(ch, cw);
  }
  return {y, x};
}

DatasetManifest make_splits(const std::vector<std::string>& ids, std::size_t n_train,
                            std::size_t n_test, std::uint64_t seed) {
  if (ids.size() < n_train + n_test)
    throw std::invalid_argument("only " + std::to_string(ids.size()) + " samples for a " +
                                std::to_string(n_train) + "/" + std::to_string(n_test) + " split");
  SeededRng rng(seed);
  const auto order = rng.permutation(ids.size());
  DatasetManifest m;
  for (std::size_t k = 0; k < n_train; ++k) m.train.push_back(ids[order[k]]);
  for (std::size_t k = n_train; k < n_train + n_test; ++k) m.test.push_back(ids[order[k]]);
  return m;
}

void write_manifest(const DatasetManifest& manifest) {
  std::ofstream os(manifest.root / "manifest.txt");
  if (!os) throw std::runtime_error("cannot write manifest in " + manifest.root.string());
  for (const auto& id : manifest.train) os << id << " train\n";
  for (const auto& id : manifest.test) os << id << " test\n";
}

DatasetManifest read_manifest(const fs::path& root) {
  std::ifstream is(root / "manifest.txt");
  if (!is) throw std::runtime_error("missing manifest: " + (root / "manifest.txt").string());
  DatasetManifest m;
  m.root = root;
  std::string id, split;
  std::vector<std::string> seen;
  while (is >> id >> split) {
    if (std::find(seen.begin(), seen.end(), id) != seen.end())
      throw std::runtime_error("duplicate sample id in manifest: " + id);
    seen.push_back(id);
    if (!fs::exists(root / id)) throw std::runtime_error("manifest lists missing sample: " + id);
    if (split == "train")
      m.train.push_back(id);
    else if (split == "test")
      m.test.push_back(id);
    else
      throw std::runtime_error("unknown split tag '" + split + "' for " + id);
  }
  return m;
}

std::vector<LightFieldSample> load_split(const DatasetManifest& manifest, bool train) {
  std::vector<LightFieldSample> out;
  for (const auto& id : train ? manifest.train : manifest.test)
    out.push_back(read_sample(manifest.root / id));
  return out;
}

namespace {

std::pair<LightFieldSample, SceneSpec> generate_one(const SceneRanges& ranges, std::uint64_t seed,
                                                    std::size_t i) {
  SeededRng rng = SeededRng(seed).fork(i);
  SceneSpec spec = random_scene_spec(ranges, rng);
  LightFieldSample s = gen_synthetic_sample(spec, rng);
  s.id = sample_id(i);
  return {std::move(s), std::move(spec)};
}

}  // namespace

std::vector<LightFieldSample> generate_samples(const SceneRanges& ranges, std::size_t count,
                                               std::uint64_t seed) {
  std::vector<LightFieldSample> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_one(ranges, seed, i).first);
  return out;
}

DatasetManifest generate_dataset(const fs::path& root, const GenerateOptions& options) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < options.count; ++i) {
    auto [sample, spec] = generate_one(options.ranges, options.seed, i);
    write_sample(sample, root / sample.id, {spec.depth_planes, spec.texture_seed});
    ids.push_back(sample.id);
  }
  DatasetManifest m = make_splits(ids, options.n_train, options.n_test, options.seed);
  m.root = root;
  write_manifest(m);
  return m;
}

DLGNET_NAMESPACE_END
