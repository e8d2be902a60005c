#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "spikegen/idx.hpp"
#include "spikegen/image_io.hpp"
#include "spikegen/metrics.hpp"
#include "test_util.hpp"

using namespace spikegen;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("spikegen-test-" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

}  // namespace

TEST_CASE("idx image round trip is byte exact") {
  TempDir tmp;
  const int n = 3, h = 4, w = 5;
  std::vector<uint8_t> px(static_cast<size_t>(n) * h * w);
  for (size_t i = 0; i < px.size(); ++i) px[i] = static_cast<uint8_t>(i * 7);
  std::vector<uint8_t> labels = {2, 9, 0};
  write_idx_images(tmp.file("img.idx"), px, n, h, w);
  write_idx_labels(tmp.file("lab.idx"), labels);

  IdxDataset ds = load_idx(tmp.file("img.idx"), tmp.file("lab.idx"));
  CHECK(ds.count() == n);
  CHECK(ds.height() == h);
  CHECK(ds.width() == w);
  CHECK(ds.labels == std::vector<int>{2, 9, 0});
  for (size_t i = 0; i < px.size(); ++i)
    CHECK(ds.images.data()[i] == doctest::Approx(px[i] / 255.0).epsilon(1e-6));
  CHECK(quantize_u8(ds.images) == px);

  // write what we loaded; files must be identical
  write_idx_images(tmp.file("img2.idx"), quantize_u8(ds.images), n, h, w);
  std::ifstream a(tmp.file("img.idx"), std::ios::binary);
  std::ifstream b(tmp.file("img2.idx"), std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), {});
  std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
}

TEST_CASE("idx loader diagnostics") {
  TempDir tmp;
  SUBCASE("truncated payload") {
    std::vector<uint8_t> px(2 * 2 * 2, 100);
    write_idx_images(tmp.file("t.idx"), px, 2, 2, 2);
    // chop off the last two bytes
    fs::resize_file(tmp.file("t.idx"), fs::file_size(tmp.file("t.idx")) - 2);
    CHECK_THROWS_WITH_AS(load_idx(tmp.file("t.idx")),
                         doctest::Contains("truncated payload"),
                         std::runtime_error);
  }
  SUBCASE("bad magic") {
    std::ofstream out(tmp.file("bad.idx"), std::ios::binary);
    const char junk[16] = {0};
    out.write(junk, sizeof junk);
    out.close();
    CHECK_THROWS_WITH_AS(load_idx(tmp.file("bad.idx")),
                         doctest::Contains("magic"), std::runtime_error);
  }
  SUBCASE("label count mismatch") {
    std::vector<uint8_t> px(2 * 2 * 2, 50);
    write_idx_images(tmp.file("i.idx"), px, 2, 2, 2);
    write_idx_labels(tmp.file("l.idx"), {1, 2, 3});
    CHECK_THROWS_WITH_AS(load_idx(tmp.file("i.idx"), tmp.file("l.idx")),
                         doctest::Contains("label count"), std::runtime_error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_idx(tmp.file("nope.idx")), std::runtime_error);
  }
}

TEST_CASE("transpose flag reorders column-major pixel storage") {
  TempDir tmp;
  std::vector<uint8_t> px = {10, 20, 30, 40, 50, 60};
  write_idx_images(tmp.file("t.idx"), px, 1, 3, 2);
  IdxDataset plain = load_idx(tmp.file("t.idx"));
  IdxDataset swapped = load_idx(tmp.file("t.idx"), {}, true);
  // dimensions stay as declared; the payload is read column-major instead
  CHECK(plain.height() == 3);
  CHECK(plain.width() == 2);
  CHECK(swapped.height() == 3);
  CHECK(swapped.width() == 2);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 2; ++c)
      CHECK(swapped.images.data()[static_cast<size_t>(r) * 2 + c] ==
            doctest::Approx(px[static_cast<size_t>(c) * 3 + r] / 255.0)
                .epsilon(1e-6));
}

TEST_CASE("batch and image slicing") {
  TempDir tmp;
  std::vector<uint8_t> px(4 * 2 * 2);
  for (size_t i = 0; i < px.size(); ++i) px[i] = static_cast<uint8_t>(i);
  write_idx_images(tmp.file("b.idx"), px, 4, 2, 2);
  IdxDataset ds = load_idx(tmp.file("b.idx"));
  Tensor b = ds.batch(1, 2);
  CHECK(b.shape() == Shape{2, 1, 2, 2});
  CHECK(b.data()[0] == doctest::Approx(4 / 255.0));
  Tensor one = ds.image(3);
  CHECK(one.shape() == Shape{1, 1, 2, 2});
  CHECK(one.data()[3] == doctest::Approx(15 / 255.0));
  CHECK_THROWS_AS(ds.batch(3, 2), std::out_of_range);
}

TEST_CASE("mse metric on hand values") {
  Tensor a = Tensor::from({1, 1, 1, 4}, {0, 0.5f, 1, 0.25f});
  Tensor b = Tensor::from({1, 1, 1, 4}, {0.5f, 0.5f, 0, 0.25f});
  CHECK(metric_mse(a, b) == doctest::Approx((0.25 + 0 + 1 + 0) / 4.0));
  CHECK(metric_mse(a, a) == doctest::Approx(0.0));
}

TEST_CASE("ssim extremes") {
  Rng rng(173);
  Tensor x = testutil::random_tensor({2, 1, 16, 16}, rng, 0.0f, 1.0f, false);
  CHECK(metric_ssim(x, x) == doctest::Approx(1.0));
  CHECK(metric_ssim_loss(x, x) == doctest::Approx(0.0));
  // inverted image is structurally anti-correlated
  std::vector<float> inv(x.data().size());
  for (size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0f - x.data()[i];
  Tensor y = Tensor::from(x.shape(), std::move(inv));
  CHECK(metric_ssim(x, y) < 0.2);
}

namespace {

// Separable-window SSIM oracle, written independently of metric_ssim: the
// Gaussian window is built from the 1-D kernel and applied as an outer
// product, and the statistics use the E[xy] - mu_x mu_y form.
double ssim_oracle(const Tensor& x, const Tensor& y) {
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int win = 11, half = 5;
  const double sigma = 1.5;
  std::vector<double> k1(win);
  double ksum = 0.0;
  for (int i = 0; i < win; ++i) {
    const double d = i - half;
    k1[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    ksum += k1[static_cast<size_t>(i)];
  }
  for (auto& v : k1) v /= ksum;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (int img = 0; img < n; ++img) {
    const float* xd = x.data().data() + static_cast<size_t>(img) * h * w;
    const float* yd = y.data().data() + static_cast<size_t>(img) * h * w;
    double acc = 0.0;
    int cells = 0;
    for (int r = half; r < h - half; ++r)
      for (int c = half; c < w - half; ++c) {
        double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
        for (int i = 0; i < win; ++i)
          for (int j = 0; j < win; ++j) {
            const double wt = k1[static_cast<size_t>(i)] *
                              k1[static_cast<size_t>(j)];
            const double xv = xd[(r - half + i) * w + (c - half + j)];
            const double yv = yd[(r - half + i) * w + (c - half + j)];
            mx += wt * xv;
            my += wt * yv;
            mxx += wt * xv * xv;
            myy += wt * yv * yv;
            mxy += wt * xv * yv;
          }
        const double vx = mxx - mx * mx;
        const double vy = myy - my * my;
        const double cov = mxy - mx * my;
        acc += ((2 * mx * my + c1) * (2 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++cells;
      }
    total += acc / cells;
  }
  return total / n;
}

}  // namespace

TEST_CASE("ssim matches an independent separable-window oracle") {
  Rng rng(179);
  Tensor x = testutil::random_tensor({2, 1, 14, 14}, rng, 0.0f, 1.0f, false);
  // correlated but noisy counterpart
  std::vector<float> yd(x.data().size());
  for (size_t i = 0; i < yd.size(); ++i) {
    float v = x.data()[i] + rng.uniform(-0.2f, 0.2f);
    yd[i] = std::min(1.0f, std::max(0.0f, v));
  }
  Tensor y = Tensor::from(x.shape(), std::move(yd));
  CHECK(metric_ssim(x, y) == doctest::Approx(ssim_oracle(x, y)).epsilon(1e-4));
}

TEST_CASE("pgm image grid round trip") {
  TempDir tmp;
  SUBCASE("single image survives save and reload") {
    Rng rng(181);
    Tensor x = testutil::random_tensor({1, 1, 6, 6}, rng, 0.0f, 1.0f, false);
    save_image_grid(x, tmp.file("one.pgm"));
    Tensor back = load_pgm(tmp.file("one.pgm"));
    CHECK(back.shape() == Shape{1, 1, 6, 6});
    for (size_t i = 0; i < x.data().size(); ++i) {
      const double q = std::round(x.data()[i] * 255.0) / 255.0;
      CHECK(back.data()[i] == doctest::Approx(q).epsilon(1e-6));
    }
  }
  SUBCASE("five images tile into a 3x2 grid") {
    Tensor x = Tensor::full({5, 1, 4, 4}, 0.5f);
    save_image_grid(x, tmp.file("grid.pgm"));
    Tensor back = load_pgm(tmp.file("grid.pgm"));
    CHECK(back.dim(3) == 12);  // 3 columns of width 4
    CHECK(back.dim(2) == 8);   // 2 rows of height 4
    // mid-gray quantizes to round(0.5*255) = 128
    CHECK(back.data()[0] == doctest::Approx(128.0 / 255.0).epsilon(1e-6));
  }
}
