#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dlgnet/gradcheck.hpp"
#include "dlgnet/model.hpp"

DLGNET_NAMESPACE_BEGIN

// Defaults of the model gradient suite. In single precision a group whose
// gradient is exactly zero still shows finite-difference noise near 1e-5.
#ifdef DLGNET_DOUBLE
inline constexpr double kGradcheckEps = 1e-5;
inline constexpr double kGradcheckZeroFloor = 1e-9;
inline constexpr double kGradcheckTolerance = 1e-6;
#else
inline constexpr double kGradcheckEps = 1e-3;
inline constexpr double kGradcheckZeroFloor = 1e-4;
inline constexpr double kGradcheckTolerance = 1e-3;
#endif

struct OracleSuiteOptions {
  std::size_t instances = 50;
  std::uint64_t seed = 0;
  std::size_t max_slices = 4;
  std::size_t min_extent = 3, max_extent = 8;
  std::size_t min_channels = 2, max_channels = 8;
};

struct OracleSuiteResult {
  std::size_t instances = 0;
  double max_abs_diff = 0;       // dlg_forward vs dense_oracle
  double max_loop_diff = 0;      // dlg_forward vs the per-node scalar loop
  std::size_t boundary_targets = 0;  // target nodes with at least one masked slot
  double seconds = 0;
};

/// Random tiny instances with k = 3 and dilations {1} or {1,3}.
OracleSuiteResult run_oracle_suite(const OracleSuiteOptions& options = {});

struct GradSuiteOptions {
  std::size_t slices = 2;
  std::size_t size = 16;
  std::size_t steps = 2;
  std::size_t channels = 4;
  std::uint64_t seed = 0;
  /// Redraws weights as normal(0, 2/fan_in) and biases as normal(0, bias_scale^2)
  /// so that no parameter group has a vanishing gradient.
  bool well_conditioned = true;
  double bias_scale = 0.1;
  GradcheckOptions gradcheck{.eps = kGradcheckEps, .zero_floor = kGradcheckZeroFloor};
};

struct GradSuiteResult {
  std::vector<GradcheckEntry> entries;
  double max_rel_error = 0;
  std::string worst;          // group with the largest relative error
  std::size_t kinked = 0;     // coordinates skipped at kinks
  std::size_t parameters = 0;
  double seconds = 0;
};

/// Finite differences through encoder, DLG, FSFA, GRU, decoder and loss.
GradSuiteResult run_model_gradcheck(const GradSuiteOptions& options = {});

/// The small model used by the gradient suite.
ModelConfig gradcheck_model_config(const GradSuiteOptions& options);

DLGNET_NAMESPACE_END
