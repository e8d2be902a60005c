#include "spikegen/lif.hpp"

#include <cmath>
#include <stdexcept>

namespace spikegen {

namespace {

void check_finite(const Tensor& h, const std::string& layer_name) {
  for (float v : h.data())
    if (!std::isfinite(v))
      throw std::runtime_error("non-finite membrane potential in layer '" +
                               layer_name + "'");
}

Tensor init_weight(Shape shape, int fan_in, Rng& rng, float gain) {
  const float limit = gain / std::sqrt(static_cast<float>(fan_in));
  std::vector<float> d(static_cast<size_t>(numel(shape)));
  for (auto& v : d) v = rng.uniform(-limit, limit);
  return Tensor::from(std::move(shape), std::move(d), true);
}

}  // namespace

LifStepResult lif_step(const Tensor& x_t, const Tensor& v, const LifParams& p,
                       const std::string& layer_name) {
  if (x_t.shape() != v.shape())
    throw std::invalid_argument("lif_step (" + layer_name +
                                "): input shape " + shape_str(x_t.shape()) +
                                " != state shape " + shape_str(v.shape()));
  Tensor h = lif_charge(x_t, v, p.tau, p.v_reset);
  check_finite(h, layer_name);
  Tensor s = lif_fire(h, p.v_th, p.alpha);
  Tensor v_new = lif_reset(h, s, p.v_reset, p.detach_reset);
  return {s, v_new};
}

SpikeTrain direct_input_encode(const Tensor& x, int t_steps) {
  if (t_steps < 1)
    throw std::invalid_argument("direct_input_encode: t_steps must be >= 1");
  return SpikeTrain(static_cast<size_t>(t_steps), x);
}

SpikeTrain run_lif_over_currents(const std::vector<Tensor>& currents,
                                 const LifParams& p,
                                 const std::string& layer_name) {
  if (currents.empty())
    throw std::invalid_argument("run_lif_over_currents (" + layer_name +
                                "): empty input train");
  Tensor v = Tensor::full(currents[0].shape(), p.v_reset);
  SpikeTrain out;
  out.reserve(currents.size());
  for (const auto& c : currents) {
    auto r = lif_step(c, v, p, layer_name);
    out.push_back(r.spike);
    v = r.v;
  }
  return out;
}

SpikingConv::SpikingConv(std::string name, int in_ch, int out_ch, int kernel,
                         int stride, int pad, const LifParams& lif, Rng& rng,
                         bool transpose, float w_gain)
    : name_(std::move(name)), stride_(stride), pad_(pad),
      transpose_(transpose), lif_(lif) {
  Shape ws = transpose ? Shape{in_ch, out_ch, kernel, kernel}
                       : Shape{out_ch, in_ch, kernel, kernel};
  w_ = init_weight(std::move(ws), in_ch * kernel * kernel, rng, w_gain);
  b_ = Tensor::zeros({out_ch}, true);
}

void SpikingConv::register_params(ParamStore& store) const {
  store.add(name_ + ".w", w_);
  store.add(name_ + ".b", b_);
}

Tensor SpikingConv::current(const Tensor& x_t) const {
  return transpose_ ? conv_transpose2d(x_t, w_, b_, stride_, pad_)
                    : conv2d(x_t, w_, b_, stride_, pad_);
}

SpikeTrain SpikingConv::run(const SpikeTrain& input) const {
  std::vector<Tensor> currents;
  currents.reserve(input.size());
  for (const auto& x_t : input) currents.push_back(current(x_t));
  return run_lif_over_currents(currents, lif_, name_);
}

SpikingLinear::SpikingLinear(std::string name, int in_dim, int out_dim,
                             const LifParams& lif, Rng& rng)
    : name_(std::move(name)), lif_(lif) {
  w_ = init_weight({in_dim, out_dim}, in_dim, rng, 1.0f);
  b_ = Tensor::zeros({out_dim}, true);
}

void SpikingLinear::register_params(ParamStore& store) const {
  store.add(name_ + ".w", w_);
  store.add(name_ + ".b", b_);
}

SpikeTrain SpikingLinear::run(const SpikeTrain& input) const {
  std::vector<Tensor> currents;
  currents.reserve(input.size());
  for (const auto& x_t : input) {
    Tensor y = matmul(x_t, w_);
    // broadcast bias over the batch rows
    const int n = y.dim(0), m = y.dim(1);
    Tensor yb = add_channel_bias(y.reshape({n, m, 1, 1}), b_).reshape({n, m});
    currents.push_back(yb);
  }
  return run_lif_over_currents(currents, lif_, name_);
}

}  // namespace spikegen
