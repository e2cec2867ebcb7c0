#include "dlgnet/params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dlgnet/ops.hpp"

DLGNET_NAMESPACE_BEGIN

WeightInit parse_weight_init(const std::string& name) {
  if (name == "uniform") return WeightInit::uniform;
  if (name == "he") return WeightInit::he;
  throw std::invalid_argument("unknown init '" + name + "' (expected uniform or he)");
}

std::string weight_init_name(WeightInit init) { return init == WeightInit::he ? "he" : "uniform"; }

double ParameterStore::weight_bound(std::size_t fan_in) const {
  const double gain = init_ == WeightInit::he ? std::sqrt(6.0) : 1.0;
  return gain / std::sqrt(double(fan_in));
}

Tensor ParameterStore::add(const std::string& name, Shape shape) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  Tensor t(std::move(shape), Real(0), true);
  items_.push_back({name, t});
  return t;
}

Tensor ParameterStore::add_uniform(const std::string& name, Shape shape, double bound,
                                   SeededRng& rng) {
  Tensor t = add(name, std::move(shape));
  for (Real& v : t.data()) v = static_cast<Real>(rng.uniform(-bound, bound));
  return t;
}

bool ParameterStore::contains(const std::string& name) const {
  return std::any_of(items_.begin(), items_.end(), [&](const Parameter& p) { return p.name == name; });
}

const Tensor& ParameterStore::get(const std::string& name) const {
  for (const auto& p : items_)
    if (p.name == name) return p.value;
  throw std::out_of_range("unknown parameter: " + name);
}

Tensor& ParameterStore::get(const std::string& name) {
  for (auto& p : items_)
    if (p.name == name) return p.value;
  throw std::out_of_range("unknown parameter: " + name);
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : items_) p.value.zero_grad();
}

Tensor Conv::operator()(const Tensor& x) const { return conv2d(x, weight, bias, 1, pad); }

Conv make_conv(ParameterStore& store, const std::string& prefix, std::size_t out_channels,
               std::size_t in_channels, std::size_t kernel, SeededRng& rng, bool with_bias) {
  const double bound = store.weight_bound(in_channels * kernel * kernel);
  Conv c;
  c.weight = store.add_uniform(prefix + ".weight", {out_channels, in_channels, kernel, kernel},
                               bound, rng);
  if (with_bias) c.bias = store.add(prefix + ".bias", {out_channels});
  c.pad = kernel / 2;
  return c;
}

DLGNET_NAMESPACE_END
