#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <string>
#include <vector>

#include "dlgnet/rng.hpp"
#include "dlgnet/tensor.hpp"

DLGNET_NAMESPACE_BEGIN

/// A learnable tensor and its unique dotted name, e.g. "dlg.query_f.weight".
struct Parameter {
  std::string name;
  Tensor value;
};

/// Weight draws for make_conv: uniform(+-g/sqrt(fan_in)) with g = 1 for
/// `uniform` and g = sqrt(6) for `he` (variance 2/fan_in).
enum class WeightInit { uniform, he };

WeightInit parse_weight_init(const std::string& name);
std::string weight_init_name(WeightInit init);

/// Insertion-ordered registry of a model's parameters.
class ParameterStore {
 public:
  explicit ParameterStore(WeightInit init = WeightInit::uniform) : init_(init) {}

  WeightInit weight_init() const { return init_; }
  /// Uniform bound for a weight with the given fan-in under weight_init().
  double weight_bound(std::size_t fan_in) const;

  /// Registers a zero-filled parameter. Throws std::invalid_argument on a duplicate name.
  Tensor add(const std::string& name, Shape shape);
  /// Registers a parameter filled with uniform(-bound, bound) draws.
  Tensor add_uniform(const std::string& name, Shape shape, double bound, SeededRng& rng);

  bool contains(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  const std::vector<Parameter>& items() const { return items_; }
  std::vector<Parameter>& items() { return items_; }
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  WeightInit init_;
  std::vector<Parameter> items_;
};

/// Convolution layer view over two registered parameters. "Same" padding.
struct Conv {
  Tensor weight;  // [Cout, Cin, k, k]
  Tensor bias;    // [Cout] or undefined
  std::size_t pad = 0;

  Tensor operator()(const Tensor& x) const;
};

/// Registers prefix.weight ~ uniform(+-store.weight_bound(fan_in)) and a zero prefix.bias.
Conv make_conv(ParameterStore& store, const std::string& prefix, std::size_t out_channels,
               std::size_t in_channels, std::size_t kernel, SeededRng& rng, bool with_bias = true);

DLGNET_NAMESPACE_END
