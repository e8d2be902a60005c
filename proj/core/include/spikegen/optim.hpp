#pragma once

#include <string>
#include <utility>
#include <vector>

#include "spikegen/tensor.hpp"

namespace spikegen {

/// Named parameter registry shared by models, optimizers and checkpoints.
struct ParamStore {
  std::vector<std::pair<std::string, Tensor>> items;

  Tensor add(std::string name, Tensor t) {
    items.emplace_back(std::move(name), t);
    return t;
  }
  Tensor find(const std::string& name) const;
  void zero_grad();
};

struct SgdOptions {
  float lr = 1e-2f;
};

void sgd_step(ParamStore& params, const SgdOptions& opt);

struct AdamWOptions {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 1e-3f;
};

/// AdamW with decoupled weight decay. Throws on non-finite gradients so a
/// diverging run aborts instead of silently corrupting parameters.
class AdamW {
 public:
  explicit AdamW(AdamWOptions opt) : opt_(opt) {}

  void step(ParamStore& params);
  int64_t step_count() const { return t_; }

 private:
  AdamWOptions opt_;
  int64_t t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

}  // namespace spikegen
