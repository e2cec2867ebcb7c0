#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

DLGNET_NAMESPACE_BEGIN

#ifdef DLGNET_DOUBLE
using Real = double;
#else
using Real = float;
#endif

/// Thrown when operand shapes are incompatible with an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a forward pass produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Extents of a rank 1..4 row-major array.
using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;

  std::vector<Real>& ensure_grad();
};

}  // namespace detail

/// Dense tensor with reverse-mode autodiff. Copies share storage; use clone()
/// for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real(0), bool requires_grad = false);
  Tensor(Shape shape, std::vector<Real> data, bool requires_grad = false);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, Real value) { return Tensor(std::move(shape), value); }
  static Tensor of(Shape shape, std::initializer_list<Real> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<Real> data();
  std::span<const Real> data() const;
  std::vector<Real> to_vector() const;
  Real item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  /// Gradient buffer, allocated (zero-filled) on first access.
  std::span<Real> grad();
  std::span<const Real> grad() const;
  void zero_grad();

  /// Deep copy of data without graph history.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  /// Back-propagates from this scalar tensor through the recorded graph.
  void backward() const;

  /// True if any element is NaN or Inf.
  bool has_nonfinite() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

  /// Builds an op result. Records history only when grad mode is on and
  /// some input requires grad.
  static Tensor make_result(Shape shape, std::vector<Real> data,
                            std::initializer_list<Tensor> inputs,
                            std::function<void(detail::Node&)> backward_fn);
  static Tensor make_result(Shape shape, std::vector<Real> data,
                            const std::vector<Tensor>& inputs,
                            std::function<void(detail::Node&)> backward_fn);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  void require_defined() const;

  std::shared_ptr<detail::Node> node_;
};

/// Global autograd switch (per thread).
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool on);
};

class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

DLGNET_NAMESPACE_END
