#pragma once

#include "dlgnet/namespace.hpp"

#include <cstdint>
#include <span>
#include <vector>

#include "dlgnet/params.hpp"

DLGNET_NAMESPACE_BEGIN

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of a single buffer; step is 1-based.
void adam_update(std::span<Real> param, std::span<const Real> grad, std::span<Real> first_moment,
                 std::span<Real> second_moment, double lr, const AdamHyper& hyper,
                 std::uint64_t step);

class Adam {
 public:
  explicit Adam(AdamHyper hyper = {}) : hyper_(hyper) {}

  /// Applies one update to every parameter using its accumulated grad.
  void step(ParameterStore& params, double lr);

  std::uint64_t steps() const { return steps_; }
  const AdamHyper& hyper() const { return hyper_; }

  /// Moment buffers, one per parameter in store order (empty before the first step).
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void restore(std::uint64_t steps, std::vector<Tensor> first, std::vector<Tensor> second);

 private:
  void ensure_state(const ParameterStore& params);

  AdamHyper hyper_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor> m_, v_;
};

DLGNET_NAMESPACE_END
