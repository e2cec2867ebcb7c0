#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dlgnet/encoder.hpp"
#include "dlgnet/recip.hpp"
#include "dlgnet/window.hpp"

DLGNET_NAMESPACE_BEGIN

/// dlg: reciprocative DLG loop. concat: slices replicated to a fixed count and
/// concatenated with F_a. gru: GRU run over the slices in order.
enum class Fusion { dlg, concat, gru };

Fusion parse_fusion(const std::string& name);
std::string fusion_name(Fusion f);

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t channels = 16;       // C
  std::size_t edge_channels = 16;  // C'
  WindowSpec window;
  std::size_t steps = 5;  // T
  std::size_t gru_kernel = 3;
  Fusion fusion = Fusion::dlg;
  bool skip = true;
  DlgOptions dlg;
  bool init_phi_zero = true;
  WeightInit init = WeightInit::he;
  std::size_t concat_slices = 12;

  void validate() const;
};

struct ModelOutput {
  Tensor final_map;          // [1,1,H,W]
  std::vector<Tensor> side;  // supervised side maps at 1/4 scale
  StepTrace trace;           // populated for Fusion::dlg
};

class SaliencyModel {
 public:
  SaliencyModel(const ModelConfig& config, std::uint64_t seed);

  /// allfocus [1,3,H,W], slices [N,3,H,W].
  ModelOutput forward(const Tensor& allfocus, const Tensor& slices) const;
  LossBreakdown loss(const ModelOutput& out, const Tensor& gt) const;

  const ModelConfig& config() const { return config_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  const RecipParams& recip() const { return recip_; }
  const Encoder& allfocus_encoder() const { return enc_a_; }
  const Encoder& focal_encoder() const { return enc_f_; }

 private:
  const NeighborIndex& index_for(std::size_t h, std::size_t w) const;

  ModelConfig config_;
  ParameterStore store_;
  Encoder enc_a_;
  Encoder enc_f_;
  RecipParams recip_;
  DecoderParams decoder_;
  Conv concat_fuse_;
  mutable std::vector<NeighborIndex> index_cache_;
};

DLGNET_NAMESPACE_END
