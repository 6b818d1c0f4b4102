#pragma once

// Seeded generators for property tests.

#include <cstdint>
#include <random>
#include <vector>

#include "motionstack/det_metrics.hpp"
#include "motionstack/random.hpp"
#include "motionstack/tensor_io.hpp"

namespace gen {

using motionstack::Rng;

inline std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) {  // inclusive
  return lo + static_cast<std::size_t>(motionstack::uniform_index(rng, hi - lo + 1));
}

inline float real(Rng& rng, double lo, double hi) { return static_cast<float>(motionstack::uniform(rng, lo, hi)); }

inline std::vector<float> reals(Rng& rng, std::size_t n, double lo = -1, double hi = 1) {
  std::vector<float> v(n);
  for (auto& x : v) x = real(rng, lo, hi);
  return v;
}

inline motionstack::Shape shape(Rng& rng, std::size_t max_dim = 6) {
  motionstack::Shape s(between(rng, 1, 4));
  for (auto& d : s) d = between(rng, 1, max_dim);
  return s;
}

inline motionstack::Tensor f32_tensor(Rng& rng, motionstack::Shape s, double lo = -1, double hi = 1) {
  const auto n = motionstack::element_count(s);
  return motionstack::Tensor::f32(std::move(s), reals(rng, n, lo, hi));
}

inline motionstack::Tensor u8_tensor(Rng& rng, motionstack::Shape s) {
  std::vector<std::uint8_t> v(motionstack::element_count(s));
  for (auto& x : v) x = static_cast<std::uint8_t>(motionstack::uniform_index(rng, 256));
  return motionstack::Tensor::u8(std::move(s), std::move(v));
}

inline motionstack::ImageFrame frame(Rng& rng, std::size_t w, std::size_t h, std::int64_t index = 0) {
  motionstack::ImageFrame f{w, h, std::vector<std::uint8_t>(3 * w * h), index};
  for (auto& p : f.pixels) p = static_cast<std::uint8_t>(motionstack::uniform_index(rng, 256));
  return f;
}

// Box inside [0, extent) with sides >= min_side.
inline motionstack::Box box(Rng& rng, double extent, double min_side = 1) {
  const double w = motionstack::uniform(rng, min_side, extent / 2);
  const double h = motionstack::uniform(rng, min_side, extent / 2);
  const double x = motionstack::uniform(rng, 0, extent - w);
  const double y = motionstack::uniform(rng, 0, extent - h);
  return {x, y, x + w, y + h};
}

// Integer-grid box, so IoUs land exactly on thresholds now and then.
inline motionstack::Box grid_box(Rng& rng, int extent) {
  const auto x1 = static_cast<double>(motionstack::uniform_index(rng, static_cast<std::uint64_t>(extent - 1)));
  const auto y1 = static_cast<double>(motionstack::uniform_index(rng, static_cast<std::uint64_t>(extent - 1)));
  const auto x2 = x1 + 1 + static_cast<double>(motionstack::uniform_index(rng, static_cast<std::uint64_t>(extent - x1)));
  const auto y2 = y1 + 1 + static_cast<double>(motionstack::uniform_index(rng, static_cast<std::uint64_t>(extent - y1)));
  return {x1, y1, x2, y2};
}

struct MicroInstance {
  std::vector<motionstack::Detection> dets;
  std::vector<motionstack::GroundTruth> gts;
};

// <= 5 GT and <= 7 detections over up to 2 frames and 2 classes. Detections
// are GT perturbations or free boxes; scores come from a coarse grid so ties occur.
inline MicroInstance micro_instance(Rng& rng) {
  MicroInstance m;
  const auto num_gt = between(rng, 0, 5);
  const auto num_det = between(rng, 0, 7);
  const auto frames = between(rng, 1, 2);
  const auto classes = between(rng, 1, 2);
  for (std::size_t i = 0; i < num_gt; ++i)
    m.gts.push_back({static_cast<std::int64_t>(between(rng, 0, frames - 1)), grid_box(rng, 12),
                     static_cast<int>(between(rng, 0, classes - 1))});
  for (std::size_t i = 0; i < num_det; ++i) {
    motionstack::Detection d;
    const double score = static_cast<double>(between(rng, 1, 10)) / 10.0;
    if (!m.gts.empty() && motionstack::uniform01(rng) < 0.7) {
      const auto& g = m.gts[between(rng, 0, m.gts.size() - 1)];
      auto b = g.box;
      b.x1 += static_cast<double>(between(rng, 0, 2)) - 1;
      b.y1 += static_cast<double>(between(rng, 0, 2)) - 1;
      b.x2 += static_cast<double>(between(rng, 0, 2)) - 1;
      b.y2 += static_cast<double>(between(rng, 0, 2)) - 1;
      if (!b.valid()) b = g.box;
      d = {g.frame, b, score, motionstack::uniform01(rng) < 0.9 ? g.class_id : static_cast<int>(between(rng, 0, classes - 1))};
    } else {
      d = {static_cast<std::int64_t>(between(rng, 0, frames - 1)), grid_box(rng, 12), score,
           static_cast<int>(between(rng, 0, classes - 1))};
    }
    m.dets.push_back(d);
  }
  return m;
}

}  // namespace gen
