#include "dlgnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

DLGNET_NAMESPACE_BEGIN

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

thread_local bool grad_enabled = true;

void check_rank(const Shape& shape) {
  if (shape.empty() || shape.size() > 4)
    throw ShapeError("tensor rank must be 1..4, got shape " + to_string(shape));
}

}  // namespace

bool GradMode::enabled() { return grad_enabled; }
void GradMode::set_enabled(bool on) { grad_enabled = on; }

std::vector<Real>& detail::Node::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), Real(0));
  return grad;
}

Tensor::Tensor(Shape shape, Real fill, bool requires_grad) {
  check_rank(shape);
  node_ = std::make_shared<detail::Node>();
  node_->data.assign(numel(shape), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<Real> data, bool requires_grad) {
  check_rank(shape);
  if (numel(shape) != data.size())
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     to_string(shape));
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::of(Shape shape, std::initializer_list<Real> values) {
  return Tensor(std::move(shape), std::vector<Real>(values));
}

void Tensor::require_defined() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
}

const Shape& Tensor::shape() const {
  require_defined();
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(s));
  return s[axis];
}

std::size_t Tensor::size() const {
  require_defined();
  return node_->data.size();
}

std::span<Real> Tensor::data() {
  require_defined();
  return node_->data;
}

std::span<const Real> Tensor::data() const {
  require_defined();
  return node_->data;
}

std::vector<Real> Tensor::to_vector() const {
  auto d = data();
  return {d.begin(), d.end()};
}

Real Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return node_->data[0];
}

bool Tensor::requires_grad() const {
  require_defined();
  return node_->requires_grad;
}

void Tensor::set_requires_grad(bool on) {
  require_defined();
  node_->requires_grad = on;
}

bool Tensor::has_grad() const {
  require_defined();
  return !node_->grad.empty();
}

std::span<Real> Tensor::grad() {
  require_defined();
  return node_->ensure_grad();
}

std::span<const Real> Tensor::grad() const {
  require_defined();
  return node_->ensure_grad();
}

void Tensor::zero_grad() {
  require_defined();
  std::fill(node_->grad.begin(), node_->grad.end(), Real(0));
}

Tensor Tensor::detach() const {
  require_defined();
  return Tensor(node_->shape, node_->data);
}

bool Tensor::has_nonfinite() const {
  for (Real v : data())
    if (!std::isfinite(v)) return true;
  return false;
}

Tensor Tensor::make_result(Shape shape, std::vector<Real> data,
                           std::initializer_list<Tensor> inputs,
                           std::function<void(detail::Node&)> backward_fn) {
  return make_result(std::move(shape), std::move(data), std::vector<Tensor>(inputs),
                     std::move(backward_fn));
}

Tensor Tensor::make_result(Shape shape, std::vector<Real> data, const std::vector<Tensor>& inputs,
                           std::function<void(detail::Node&)> backward_fn) {
  Tensor out(std::move(shape), std::move(data));
  if (!GradMode::enabled()) return out;
  bool any = false;
  for (const auto& t : inputs) any = any || (t.defined() && t.requires_grad());
  if (!any) return out;
  auto& n = *out.node_;
  n.requires_grad = true;
  n.parents.reserve(inputs.size());
  for (const auto& t : inputs) n.parents.push_back(t.node_);
  n.backward_fn = std::move(backward_fn);
  return out;
}

void Tensor::backward() const {
  require_defined();
  if (size() != 1)
    throw ShapeError("backward() requires a scalar loss, got shape " + to_string(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p && p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->backward_fn) continue;
    n->ensure_grad();
    for (auto& p : n->parents)
      if (p && p->requires_grad) p->ensure_grad();
    n->backward_fn(*n);
  }
}

DLGNET_NAMESPACE_END
