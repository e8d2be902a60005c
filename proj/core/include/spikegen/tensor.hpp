#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace spikegen {

using Shape = std::vector<int>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorImpl;

/// Dense f32 tensor with reverse-mode autodiff.
///
/// Copying a Tensor copies a handle to shared storage. Ops on tensors with
/// requires_grad build a backward graph; call backward() on a scalar result
/// to accumulate gradients into every reachable leaf.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> data,
                     bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int64_t numel() const;
  int dim(int i) const;

  std::vector<float>& data();
  const std::vector<float>& data() const;

  /// Gradient buffer; allocated zero-filled on first access.
  std::vector<float>& grad();
  bool has_grad() const;
  void zero_grad();

  bool requires_grad() const;

  float item() const;  // single-element tensors only

  /// Runs reverse-mode accumulation from this scalar (seed gradient 1).
  void backward();

  /// Leaf tensor sharing this tensor's values, cut off from the graph.
  Tensor detach() const;

  /// Same data viewed under a new shape (element count must match).
  Tensor reshape(Shape new_shape) const;

  TensorImpl* impl() const { return impl_.get(); }
  std::shared_ptr<TensorImpl> impl_ptr() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;

  friend Tensor make_tensor(Shape, std::vector<float>, bool);
  friend Tensor make_op_result(Shape, std::vector<float>,
                               std::vector<Tensor> parents,
                               std::function<void(TensorImpl&)> backward_fn);
};

struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until touched
  bool requires_grad = false;
  uint64_t seq = 0;  // creation order; fixes backward traversal order
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;

  void ensure_grad();
};

Tensor make_tensor(Shape shape, std::vector<float> data, bool requires_grad);

/// Internal: builds an op output node. `backward_fn` reads the node's grad
/// and accumulates into its parents' grads. The node only tracks parents
/// that require grad themselves.
Tensor make_op_result(Shape shape, std::vector<float> data,
                      std::vector<Tensor> parents,
                      std::function<void(TensorImpl&)> backward_fn);

}  // namespace spikegen
