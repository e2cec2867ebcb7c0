#include "dlgnet/optim.hpp"

#include <cmath>
#include <stdexcept>

DLGNET_NAMESPACE_BEGIN

void adam_update(std::span<Real> param, std::span<const Real> grad, std::span<Real> first_moment,
                 std::span<Real> second_moment, double lr, const AdamHyper& hyper,
                 std::uint64_t step) {
  if (grad.size() != param.size() || first_moment.size() != param.size() ||
      second_moment.size() != param.size())
    throw ShapeError("adam_update: buffer sizes differ");
  if (step == 0) throw std::invalid_argument("adam_update: step is 1-based");
  const double c1 = 1.0 - std::pow(hyper.beta1, double(step));
  const double c2 = 1.0 - std::pow(hyper.beta2, double(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double m = hyper.beta1 * first_moment[i] + (1.0 - hyper.beta1) * g;
    const double v = hyper.beta2 * second_moment[i] + (1.0 - hyper.beta2) * g * g;
    first_moment[i] = static_cast<Real>(m);
    second_moment[i] = static_cast<Real>(v);
    param[i] = static_cast<Real>(param[i] - lr * (m / c1) / (std::sqrt(v / c2) + hyper.eps));
  }
}

void Adam::ensure_state(const ParameterStore& params) {
  if (m_.size() == params.items().size()) return;
  if (!m_.empty()) throw std::logic_error("Adam state does not match parameter store");
  for (const auto& p : params.items()) {
    m_.emplace_back(p.value.shape());
    v_.emplace_back(p.value.shape());
  }
}

void Adam::step(ParameterStore& params, double lr) {
  ensure_state(params);
  ++steps_;
  auto& items = params.items();
  for (std::size_t k = 0; k < items.size(); ++k) {
    Tensor& value = items[k].value;
    if (!value.has_grad()) value.grad();
    adam_update(value.data(), value.grad(), m_[k].data(), v_[k].data(), lr, hyper_, steps_);
  }
}

void Adam::restore(std::uint64_t steps, std::vector<Tensor> first, std::vector<Tensor> second) {
  if (first.size() != second.size()) throw std::invalid_argument("Adam::restore: size mismatch");
  steps_ = steps;
  m_ = std::move(first);
  v_ = std::move(second);
}

DLGNET_NAMESPACE_END
