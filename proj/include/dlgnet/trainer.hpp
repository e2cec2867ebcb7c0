#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "dlgnet/config.hpp"
#include "dlgnet/container.hpp"
#include "dlgnet/metrics.hpp"
#include "dlgnet/model.hpp"
#include "dlgnet/optim.hpp"

DLGNET_NAMESPACE_BEGIN

struct TrainConfig {
  std::size_t steps = 2000;
  double lr = 1e-4;
  std::vector<double> milestones{0.75, 0.9};  // fractions of steps
  double decay = 0.1;
  std::uint64_t seed = 0;
  std::size_t log_interval = 50;
  std::size_t ckpt_interval = 0;  // 0: final checkpoint only
  bool augment = true;
  AugmentOptions augment_options;
  std::size_t resize = 0;  // square side for inputs; 0 keeps the stored size

  void validate() const;
};

TrainConfig train_config(const RunConfig& cfg);

/// Learning rate for a 0-based step.
double learning_rate(const TrainConfig& config, std::size_t step);

struct LossRecord {
  std::size_t step = 0;  // 1-based count of applied updates
  double lr = 0;
  double total = 0;
  double final_bce = 0;
  std::vector<double> side_bce;
};

/// Model-ready tensors of one sample.
struct Batch {
  Tensor allfocus;  // [1,3,H,W]
  Tensor slices;    // [N,3,H,W]
  Tensor gt;        // [1,1,H,W]
};

/// Square resize (bilinear images, nearest gt); identity when side is 0 or already matches.
LightFieldSample resize_sample(const LightFieldSample& s, std::size_t side);
Batch make_batch(const LightFieldSample& s);

class Trainer {
 public:
  Trainer(SaliencyModel& model, TrainConfig config);

  /// Applies update number steps_done()+1 on a sample drawn from (seed, step).
  /// Throws NumericError naming the step when the loss is not finite.
  LossRecord step(const std::vector<LightFieldSample>& train);
  /// Runs until `until` updates have been applied; `on_record` sees every step.
  std::vector<LossRecord> run(const std::vector<LightFieldSample>& train, std::size_t until,
                              const std::function<void(const LossRecord&)>& on_record = {});

  std::size_t steps_done() const { return std::size_t(adam_.steps()); }
  const TrainConfig& config() const { return config_; }

  /// Parameters, Adam moments ("adam.m.<name>", "adam.v.<name>") and "trainer.step".
  std::vector<NamedTensor> checkpoint() const;
  void restore(const std::vector<NamedTensor>& entries);
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  SaliencyModel& model_;
  TrainConfig config_;
  Adam adam_;
};

/// Loads parameter values (ignores optimizer entries). Throws on missing names or shape mismatch.
void load_parameters(SaliencyModel& model, const std::vector<NamedTensor>& entries);

/// Inference without graph recording.
ModelOutput predict(const SaliencyModel& model, const LightFieldSample& sample);

std::vector<SampleScores> score_samples(const SaliencyModel& model,
                                        const std::vector<LightFieldSample>& samples);
EvalResult evaluate(const SaliencyModel& model, const std::vector<LightFieldSample>& samples);
/// Mean final-map BCE over the samples.
double mean_final_bce(const SaliencyModel& model, const std::vector<LightFieldSample>& samples);

/// step,lr,total,final,side_1..side_T
void write_loss_curve(const std::filesystem::path& path, const std::vector<LossRecord>& records);

DLGNET_NAMESPACE_END
