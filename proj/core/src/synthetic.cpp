#include "spikegen/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "spikegen/idx.hpp"

namespace spikegen {

namespace {

struct Pt {
  float x, y;
};
using Stroke = std::vector<Pt>;

Stroke arc(float cx, float cy, float rx, float ry, float a0, float a1,
           int segs = 16) {
  Stroke s;
  for (int i = 0; i <= segs; ++i) {
    const float a = a0 + (a1 - a0) * static_cast<float>(i) / segs;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return s;
}

// Stroke skeletons per digit on the unit square (x right, y down).
std::vector<Stroke> digit_strokes(int d) {
  constexpr float kPi = 3.14159265f;
  switch (d) {
    case 0:
      return {arc(0.5f, 0.5f, 0.22f, 0.33f, 0.0f, 2.0f * kPi, 24)};
    case 1:
      return {{{0.36f, 0.30f}, {0.52f, 0.16f}, {0.52f, 0.84f}}};
    case 2:
      return {{{0.28f, 0.32f}, {0.33f, 0.20f}, {0.50f, 0.15f}, {0.68f, 0.21f},
               {0.72f, 0.33f}, {0.66f, 0.47f}, {0.40f, 0.66f}, {0.27f, 0.84f},
               {0.74f, 0.84f}}};
    case 3:
      return {{{0.28f, 0.22f}, {0.48f, 0.15f}, {0.68f, 0.24f}, {0.58f, 0.42f},
               {0.45f, 0.48f}, {0.60f, 0.53f}, {0.70f, 0.68f}, {0.52f, 0.84f},
               {0.28f, 0.78f}}};
    case 4:
      return {{{0.62f, 0.16f}, {0.26f, 0.62f}, {0.78f, 0.62f}},
              {{0.62f, 0.34f}, {0.62f, 0.85f}}};
    case 5:
      return {{{0.70f, 0.16f}, {0.32f, 0.16f}, {0.29f, 0.45f}, {0.52f, 0.41f},
               {0.70f, 0.52f}, {0.70f, 0.70f}, {0.52f, 0.84f}, {0.29f, 0.79f}}};
    case 6:
      return {{{0.64f, 0.16f}, {0.42f, 0.32f}, {0.32f, 0.55f}, {0.34f, 0.74f},
               {0.52f, 0.85f}, {0.68f, 0.73f}, {0.66f, 0.56f}, {0.48f, 0.50f},
               {0.34f, 0.60f}}};
    case 7:
      return {{{0.26f, 0.16f}, {0.74f, 0.16f}, {0.46f, 0.85f}}};
    case 8:
      return {arc(0.5f, 0.32f, 0.17f, 0.16f, 0.0f, 2.0f * kPi, 20),
              arc(0.5f, 0.67f, 0.21f, 0.18f, 0.0f, 2.0f * kPi, 20)};
    case 9:
      return {arc(0.52f, 0.34f, 0.18f, 0.17f, 0.0f, 2.0f * kPi, 20),
              {{0.70f, 0.34f}, {0.66f, 0.64f}, {0.55f, 0.85f}}};
    default:
      return {};
  }
}

float seg_dist(float px, float py, Pt a, Pt b) {
  const float vx = b.x - a.x, vy = b.y - a.y;
  const float wx = px - a.x, wy = py - a.y;
  const float vv = vx * vx + vy * vy;
  float t = vv > 0.0f ? (wx * vx + wy * vy) / vv : 0.0f;
  t = std::clamp(t, 0.0f, 1.0f);
  const float dx = px - (a.x + t * vx), dy = py - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

Tensor synthetic_digits(int count, int size, uint64_t seed,
                        std::vector<int>* labels) {
  Rng rng(seed, 31);
  const int sz = size * size;
  std::vector<float> data(static_cast<size_t>(count) * sz, 0.0f);
  if (labels) labels->resize(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int digit = i % 10;  // balanced classes
    if (labels) (*labels)[static_cast<size_t>(i)] = digit;
    auto strokes = digit_strokes(digit);
    // random affine jitter around the glyph center
    const float rot = rng.uniform(-0.18f, 0.18f);
    const float scale = rng.uniform(0.85f, 1.12f);
    const float dx = rng.uniform(-0.07f, 0.07f);
    const float dy = rng.uniform(-0.07f, 0.07f);
    const float shear = rng.uniform(-0.12f, 0.12f);
    const float ca = std::cos(rot) * scale, sa = std::sin(rot) * scale;
    for (auto& s : strokes)
      for (auto& p : s) {
        const float x0 = p.x - 0.5f, y0 = p.y - 0.5f;
        const float xs = x0 + shear * y0;
        p.x = 0.5f + ca * xs - sa * y0 + dx;
        p.y = 0.5f + sa * xs + ca * y0 + dy;
      }
    const float thick = rng.uniform(0.065f, 0.095f);
    // Stroke cores saturate like handwritten-digit scans; edges stay soft.
    const float peak = 1.0f;
    float* img = data.data() + static_cast<size_t>(i) * sz;
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) {
        const float px = (static_cast<float>(c) + 0.5f) / size;
        const float py = (static_cast<float>(r) + 0.5f) / size;
        float dmin = 1e9f;
        for (const auto& s : strokes)
          for (size_t j = 0; j + 1 < s.size(); ++j)
            dmin = std::min(dmin, seg_dist(px, py, s[j], s[j + 1]));
        // soft-edged stroke profile
        const float v = (thick * 1.6f - dmin) / (thick * 0.9f);
        img[r * size + c] = peak * std::clamp(v, 0.0f, 1.0f);
      }
  }
  return Tensor::from({count, 1, size, size}, std::move(data));
}

void write_synthetic_digit_dataset(const std::string& images_path,
                                   const std::string& labels_path, int count,
                                   int size, uint64_t seed) {
  std::vector<int> labels;
  Tensor images = synthetic_digits(count, size, seed, &labels);
  write_idx_images(images_path, quantize_u8(images), count, size, size);
  std::vector<uint8_t> lab(labels.begin(), labels.end());
  write_idx_labels(labels_path, lab);
}

}  // namespace spikegen
