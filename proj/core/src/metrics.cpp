#include "spikegen/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace spikegen {

double metric_mse(const Tensor& x, const Tensor& y) {
  if (x.shape() != y.shape())
    throw std::invalid_argument("mse: shape mismatch " + shape_str(x.shape()) +
                                " vs " + shape_str(y.shape()));
  const auto& xd = x.data();
  const auto& yd = y.data();
  double acc = 0.0;
  for (size_t i = 0; i < xd.size(); ++i) {
    double d = double(xd[i]) - double(yd[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(xd.size());
}

namespace {

constexpr int kWin = 11;

std::vector<double> gaussian_window() {
  const double sigma = 1.5;
  std::vector<double> w(kWin * kWin);
  double sum = 0.0;
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) {
      double di = i - kWin / 2, dj = j - kWin / 2;
      w[i * kWin + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      sum += w[i * kWin + j];
    }
  for (auto& v : w) v /= sum;
  return w;
}

double ssim_single(const float* x, const float* y, int h, int w,
                   const std::vector<double>& win) {
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double acc = 0.0;
  int count = 0;
  for (int i = 0; i + kWin <= h; ++i)
    for (int j = 0; j + kWin <= w; ++j) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int a = 0; a < kWin; ++a)
        for (int b = 0; b < kWin; ++b) {
          const double wv = win[a * kWin + b];
          const double xv = x[(i + a) * w + j + b];
          const double yv = y[(i + a) * w + j + b];
          mx += wv * xv;
          my += wv * yv;
          sxx += wv * xv * xv;
          syy += wv * yv * yv;
          sxy += wv * xv * yv;
        }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cxy = sxy - mx * my;
      acc += ((2 * mx * my + c1) * (2 * cxy + c2)) /
             ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  if (count == 0)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  return acc / count;
}

}  // namespace

double metric_ssim(const Tensor& x, const Tensor& y) {
  if (x.shape() != y.shape())
    throw std::invalid_argument("ssim: shape mismatch " + shape_str(x.shape()) +
                                " vs " + shape_str(y.shape()));
  if (x.shape().size() != 4 || x.dim(1) != 1)
    throw std::invalid_argument("ssim: expects (N,1,H,W), got " +
                                shape_str(x.shape()));
  static const std::vector<double> win = gaussian_window();
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int sz = h * w;
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    acc += ssim_single(x.data().data() + static_cast<size_t>(i) * sz,
                       y.data().data() + static_cast<size_t>(i) * sz, h, w,
                       win);
  return acc / n;
}

}  // namespace spikegen
