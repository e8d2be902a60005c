#include "spikegen/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace spikegen {

namespace {
std::atomic<uint64_t> g_seq{1};
}

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << ")";
  return os.str();
}

void TensorImpl::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0f);
}

Tensor make_tensor(Shape shape, std::vector<float> data, bool requires_grad) {
  if (numel(shape) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("tensor data size " +
                                std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  impl->seq = g_seq.fetch_add(1);
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

Tensor make_op_result(Shape shape, std::vector<float> data,
                      std::vector<Tensor> parents,
                      std::function<void(TensorImpl&)> backward_fn) {
  bool needs = false;
  for (const auto& p : parents)
    if (p.defined() && p.requires_grad()) needs = true;
  Tensor t = make_tensor(std::move(shape), std::move(data), needs);
  if (needs) {
    for (const auto& p : parents)
      if (p.defined()) t.impl_->parents.push_back(p.impl_ptr());
    t.impl_->backward_fn = std::move(backward_fn);
  }
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<float> d(static_cast<size_t>(spikegen::numel(shape)), 0.0f);
  return make_tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  std::vector<float> d(static_cast<size_t>(spikegen::numel(shape)), value);
  return make_tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<float> data, bool requires_grad) {
  return make_tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return make_tensor({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
int64_t Tensor::numel() const { return static_cast<int64_t>(impl_->data.size()); }
int Tensor::dim(int i) const { return impl_->shape.at(static_cast<size_t>(i)); }

std::vector<float>& Tensor::data() { return impl_->data; }
const std::vector<float>& Tensor::data() const { return impl_->data; }

std::vector<float>& Tensor::grad() {
  impl_->ensure_grad();
  return impl_->grad;
}

bool Tensor::has_grad() const { return !impl_->grad.empty(); }

void Tensor::zero_grad() {
  if (!impl_->grad.empty())
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

float Tensor::item() const {
  if (impl_->data.size() != 1)
    throw std::logic_error("item() on tensor with " +
                           std::to_string(impl_->data.size()) + " elements");
  return impl_->data[0];
}

void Tensor::backward() {
  if (numel() != 1)
    throw std::logic_error("backward() requires a scalar, got shape " +
                           shape_str(shape()));
  // Collect the reachable subgraph, then run backward functions in
  // descending creation order. Creation order is a valid topological
  // order (an op's parents always predate it), so this is deterministic.
  std::vector<TensorImpl*> nodes;
  std::unordered_set<TensorImpl*> seen;
  std::vector<TensorImpl*> stack{impl_.get()};
  seen.insert(impl_.get());
  while (!stack.empty()) {
    TensorImpl* n = stack.back();
    stack.pop_back();
    nodes.push_back(n);
    for (auto& p : n->parents)
      if (p->requires_grad && seen.insert(p.get()).second)
        stack.push_back(p.get());
  }
  std::sort(nodes.begin(), nodes.end(),
            [](TensorImpl* a, TensorImpl* b) { return a->seq > b->seq; });
  impl_->ensure_grad();
  impl_->grad[0] += 1.0f;
  for (TensorImpl* n : nodes)
    if (n->backward_fn) n->backward_fn(*n);
}

Tensor Tensor::detach() const {
  return make_tensor(impl_->shape, impl_->data, false);
}

Tensor Tensor::reshape(Shape new_shape) const {
  if (spikegen::numel(new_shape) != numel())
    throw std::invalid_argument("reshape " + shape_str(shape()) + " -> " +
                                shape_str(new_shape) + ": element count differs");
  Tensor self = *this;
  return make_op_result(std::move(new_shape), impl_->data, {self},
                        [self](TensorImpl& out) mutable {
                          auto& pg = self.grad();
                          for (size_t i = 0; i < pg.size(); ++i)
                            pg[i] += out.grad[i];
                        });
}

}  // namespace spikegen
