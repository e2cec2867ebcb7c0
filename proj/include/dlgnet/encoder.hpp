#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <string>
#include <vector>

#include "dlgnet/params.hpp"

DLGNET_NAMESPACE_BEGIN

struct EncoderConfig {
  std::vector<std::size_t> stage_channels{16, 32, 32, 32};
  std::size_t out_channels = 16;
  std::size_t in_channels = 3;

  /// Throws std::invalid_argument with fewer than four stages or zero widths.
  void validate() const;
};

struct FeaturePyramid {
  std::vector<Tensor> stages;  // post-pool, scales 1/2, 1/4, 1/8, 1/16
  Tensor fused;                // [B, C, H/4, W/4]
  Tensor lowlevel;             // stage 1, [B, c1, H/2, W/2]
};

/// 1x1 laterals for the last three stages plus the 3x3 smoothing conv.
struct TopDownParams {
  std::vector<Conv> lateral;  // finest first
  Conv smooth;
};

/// FPN-style fusion of stage features ordered finest first (1/4, 1/8, 1/16).
/// Each coarser level is upsampled x2 and added to the next projected level.
Tensor topdown_fuse(const std::vector<Tensor>& stage_feats, const TopDownParams& params);

/// Tiny VGG-style CNN: per stage two 3x3 conv + ReLU, then 2x2 max-pool.
class Encoder {
 public:
  Encoder(ParameterStore& store, const std::string& prefix, const EncoderConfig& config,
          SeededRng rng);

  /// x is [B,3,H,W] with H and W divisible by 16. Batch entries never mix.
  FeaturePyramid operator()(const Tensor& x) const;

  const EncoderConfig& config() const { return config_; }
  const TopDownParams& topdown() const { return topdown_; }

 private:
  EncoderConfig config_;
  std::vector<Conv> convs_;  // two per stage
  TopDownParams topdown_;
};

/// Multiple of 16 required by the four pooling stages.
inline constexpr std::size_t kEncoderStride = 16;

DLGNET_NAMESPACE_END
