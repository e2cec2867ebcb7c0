#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlgnet/ops.hpp"
#include "dlgnet/params.hpp"

DLGNET_NAMESPACE_BEGIN

/// The forward function returned different values for identical parameters.
class NondeterministicForward : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradcheckOptions {
  double eps = 1e-3;
  /// Coordinates checked per parameter; 0 checks all of them.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
  /// Gradient norms at or below this are treated as zero.
  double zero_floor = 0.0;
  /// Skip coordinates whose perturbation crosses a kink (see BranchTrace).
  bool skip_kinks = true;
};

struct GradcheckEntry {
  std::string name;
  std::size_t checked = 0;
  /// Coordinates dropped because a perturbation crossed a kink.
  std::size_t kinked = 0;
  double analytic_norm = 0;
  double numeric_norm = 0;
  /// ||analytic - numeric|| / ||numeric|| over the checked coordinates.
  double rel_error = 0;
};

/// Compares reverse-mode gradients against central differences
/// (f(p+eps) - f(p-eps)) / 2eps. `forward` must build a scalar loss from the
/// current parameter values.
std::vector<GradcheckEntry> finite_difference_gradcheck(const std::function<Tensor()>& forward,
                                                        std::vector<Parameter>& params,
                                                        const GradcheckOptions& options = {});

/// As above, but the central differences evaluate `objective`, which must
/// compute the same loss as `forward` and may reduce it in double precision.
std::vector<GradcheckEntry> finite_difference_gradcheck(const std::function<Tensor()>& forward,
                                                        const std::function<double()>& objective,
                                                        std::vector<Parameter>& params,
                                                        const GradcheckOptions& options = {});

double max_rel_error(const std::vector<GradcheckEntry>& entries);

DLGNET_NAMESPACE_END
