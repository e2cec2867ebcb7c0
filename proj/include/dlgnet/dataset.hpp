#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dlgnet/rng.hpp"
#include "dlgnet/scene.hpp"

DLGNET_NAMESPACE_BEGIN

struct SampleMeta {
  std::vector<double> depths;
  std::uint64_t seed = 0;
};

/// Writes allfocus.ppm, slice_%02d.ppm, gt.pgm and meta.txt into dir.
void write_sample(const LightFieldSample& sample, const std::filesystem::path& dir,
                  const SampleMeta& meta);
/// Reads a sample directory; the slice count comes from meta.txt.
LightFieldSample read_sample(const std::filesystem::path& dir);

/// A geometric transform shared by every image of a sample: crop (then
/// resize back), horizontal flip, then rot90 counter-clockwise `rot90` times.
struct Geometry {
  std::size_t crop_y = 0, crop_x = 0, crop_h = 0, crop_w = 0;  // crop_h == 0: no crop
  bool hflip = false;
  int rot90 = 0;

  bool is_identity(std::size_t h, std::size_t w) const;
};

struct AugmentOptions {
  bool flip = true;
  bool rotate = true;  // only for square images
  bool crop = true;
  double min_crop = 0.8;
};

Geometry draw_geometry(std::size_t h, std::size_t w, const AugmentOptions& options, SeededRng& rng);
/// Images are resampled bilinearly, gt nearest-neighbour so it stays binary.
LightFieldSample apply_geometry(const LightFieldSample& sample, const Geometry& g);
LightFieldSample augment(const LightFieldSample& sample, SeededRng& rng,
                         const AugmentOptions& options = {});
/// Maps a continuous pixel-centre coordinate through the transform.
std::pair<double, double> map_point(const Geometry& g, std::size_t h, std::size_t w, double y,
                                    double x);

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Deterministic shuffle-split. Throws std::invalid_argument when there are
/// fewer ids than n_train + n_test.
DatasetManifest make_splits(const std::vector<std::string>& ids, std::size_t n_train,
                            std::size_t n_test, std::uint64_t seed);

/// manifest.txt: one "<sample dir> <train|test>" line per sample.
void write_manifest(const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& root);
std::vector<LightFieldSample> load_split(const DatasetManifest& manifest, bool train);

std::string sample_id(std::size_t index);

struct GenerateOptions {
  SceneRanges ranges;
  std::size_t count = 10;
  std::size_t n_train = 8;
  std::size_t n_test = 2;
  std::uint64_t seed = 0;
};

/// In-memory generation; sample i uses a stream forked from (seed, i).
std::vector<LightFieldSample> generate_samples(const SceneRanges& ranges, std::size_t count,
                                               std::uint64_t seed);
/// Generates, writes every sample directory and the manifest.
DatasetManifest generate_dataset(const std::filesystem::path& root, const GenerateOptions& options);

DLGNET_NAMESPACE_END
