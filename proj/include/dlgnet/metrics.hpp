#pragma once

#include "dlgnet/namespace.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dlgnet/tensor.hpp"

DLGNET_NAMESPACE_BEGIN

/// Binarization thresholds i/255, i = 0..255; a pixel is foreground when pred >= t.
inline constexpr std::size_t kThresholds = 256;
inline constexpr double kBetaSquared = 0.3;
inline constexpr double kStructureAlpha = 0.5;

// Single-map measures. pred and gt hold one H x W map (shape [H,W], [1,H,W]
// or [1,1,H,W]); pred in [0,1], gt in {0,1}. Throws ShapeError / invalid_argument.

double mae(const Tensor& pred, const Tensor& gt);
/// Returns 0 for an all-background gt.
double max_f_measure(const Tensor& pred, const Tensor& gt);
double s_measure(const Tensor& pred, const Tensor& gt);
double max_e_measure(const Tensor& pred, const Tensor& gt);

/// Per-threshold curves plus the threshold-free scores of one sample.
struct SampleScores {
  std::array<double, kThresholds> precision{};
  std::array<double, kThresholds> recall{};
  std::array<double, kThresholds> enhanced{};
  double mae = 0;
  double s = 0;
  bool empty_gt = false;
};

SampleScores score_sample(const Tensor& pred, const Tensor& gt);

struct EvalResult {
  double mae = 0;
  double max_f = 0;
  double s_measure = 0;
  double max_e = 0;
  std::size_t samples = 0;
};

/// Means of MAE and S; max-F and max-E are taken after averaging the
/// per-threshold precision/recall (resp. enhanced alignment) over samples.
EvalResult aggregate(const std::vector<SampleScores>& scores);

/// Writes a header plus one "dataset,mae,max_f,s,max_e" row per entry.
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, EvalResult>>& rows);
/// Fixed-width table with columns S, maxF, maxE, MAE.
std::string format_table(const std::vector<std::pair<std::string, EvalResult>>& rows);

DLGNET_NAMESPACE_END
