#include "spikegen/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace spikegen {

Tensor ParamStore::find(const std::string& name) const {
  for (const auto& [n, t] : items)
    if (n == name) return t;
  throw std::out_of_range("parameter not found: " + name);
}

void ParamStore::zero_grad() {
  for (auto& [n, t] : items) t.zero_grad();
}

void sgd_step(ParamStore& params, const SgdOptions& opt) {
  for (auto& [name, p] : params.items) {
    if (!p.has_grad()) continue;
    auto& d = p.data();
    const auto& g = p.grad();
    for (size_t i = 0; i < d.size(); ++i) d[i] -= opt.lr * g[i];
  }
}

void AdamW::step(ParamStore& params) {
  if (m_.empty()) {
    m_.resize(params.items.size());
    v_.resize(params.items.size());
    for (size_t i = 0; i < params.items.size(); ++i) {
      size_t n = params.items[i].second.data().size();
      m_[i].assign(n, 0.0f);
      v_[i].assign(n, 0.0f);
    }
  }
  if (m_.size() != params.items.size())
    throw std::logic_error("AdamW: parameter count changed between steps");
  ++t_;
  const float bc1 = 1.0f - std::pow(opt_.beta1, static_cast<float>(t_));
  const float bc2 = 1.0f - std::pow(opt_.beta2, static_cast<float>(t_));
  for (size_t i = 0; i < params.items.size(); ++i) {
    auto& [name, p] = params.items[i];
    auto& d = p.data();
    const bool has_grad = p.has_grad();
    const auto* g = has_grad ? p.grad().data() : nullptr;
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < d.size(); ++j) {
      const float gj = has_grad ? g[j] : 0.0f;
      if (!std::isfinite(gj))
        throw std::runtime_error("AdamW: non-finite gradient in parameter '" +
                                 name + "' at index " + std::to_string(j));
      m[j] = opt_.beta1 * m[j] + (1.0f - opt_.beta1) * gj;
      v[j] = opt_.beta2 * v[j] + (1.0f - opt_.beta2) * gj * gj;
      const float mhat = m[j] / bc1;
      const float vhat = v[j] / bc2;
      // decoupled decay, applied to the raw weight
      d[j] -= opt_.lr * (mhat / (std::sqrt(vhat) + opt_.eps) +
                         opt_.weight_decay * d[j]);
    }
  }
}

}  // namespace spikegen
