#pragma once

// RoIAlign over externally produced feature maps.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "motionstack/det_metrics.hpp"
#include "motionstack/error.hpp"
#include "motionstack/tensor_io.hpp"

namespace motionstack {

struct FeatureMap {
  Tensor tensor;               // F32 [C, Hf, Wf]
  double spatial_scale = 1.0;  // feature pixels per image pixel

  FeatureMap(Tensor t, double scale) : tensor(std::move(t)), spatial_scale(scale) {
    require(tensor.dtype() == DType::F32 && tensor.rank() == 3, ErrorCode::DimensionMismatch,
            "feature map must be F32 [C,H,W]");
    require(spatial_scale > 0, ErrorCode::InvalidArgument, "spatial_scale must be positive");
  }

  std::size_t channels() const { return tensor.dim(0); }
  std::size_t height() const { return tensor.dim(1); }
  std::size_t width() const { return tensor.dim(2); }
};

struct RoiAlignParams {
  std::size_t out_h = 7;
  std::size_t out_w = 7;
  std::size_t sampling_ratio = 2;
};

namespace detail {

// Bilinear weights for one axis after clamping the coordinate into [0, n-1].
struct AxisTap {
  std::size_t lo, hi;
  double w_lo, w_hi;
};

inline AxisTap axis_tap(double v, std::size_t n) {
  const double clamped = std::clamp(v, 0.0, static_cast<double>(n - 1));
  auto lo = static_cast<std::size_t>(std::floor(clamped));
  if (lo >= n - 1) return {n - 1, n - 1, 1.0, 0.0};
  const double frac = clamped - static_cast<double>(lo);
  return {lo, lo + 1, 1.0 - frac, frac};
}

inline void accumulate_sample(const FeatureMap& map, double x, double y, double weight, std::span<double> acc) {
  const auto tx = axis_tap(x, map.width());
  const auto ty = axis_tap(y, map.height());
  const auto data = map.tensor.f32();
  const std::size_t plane = map.width() * map.height();
  const std::size_t i00 = ty.lo * map.width() + tx.lo, i01 = ty.lo * map.width() + tx.hi;
  const std::size_t i10 = ty.hi * map.width() + tx.lo, i11 = ty.hi * map.width() + tx.hi;
  const double w00 = ty.w_lo * tx.w_lo, w01 = ty.w_lo * tx.w_hi, w10 = ty.w_hi * tx.w_lo, w11 = ty.w_hi * tx.w_hi;
  for (std::size_t c = 0; c < map.channels(); ++c) {
    const float* p = data.data() + c * plane;
    acc[c] += weight * (w00 * p[i00] + w01 * p[i01] + w10 * p[i10] + w11 * p[i11]);
  }
}

}  // namespace detail

// Pixel centers sit at integer coordinates; (x, y) is clamped to the map.
inline std::vector<float> bilinear_sample(const FeatureMap& map, double x, double y) {
  std::vector<double> acc(map.channels(), 0.0);
  detail::accumulate_sample(map, x, y, 1.0, acc);
  return {acc.begin(), acc.end()};
}

// Aligned RoIAlign: box corners are scaled to feature coordinates and shifted
// by -0.5; each of the out_h x out_w bins averages a sampling_ratio^2 grid of
// bilinear samples placed at sub-bin centers.
inline Tensor roi_align(const FeatureMap& map, const Box& box, const RoiAlignParams& params = {}) {
  require(params.out_h >= 1 && params.out_w >= 1, ErrorCode::InvalidArgument, "RoIAlign output size must be >= 1");
  require(params.sampling_ratio >= 1, ErrorCode::InvalidArgument, "sampling_ratio must be >= 1");
  require(box.valid(), ErrorCode::DegenerateBox, "box requires x2 > x1 and y2 > y1");

  const double x0 = box.x1 * map.spatial_scale - 0.5;
  const double y0 = box.y1 * map.spatial_scale - 0.5;
  const double roi_w = box.x2 * map.spatial_scale - 0.5 - x0;
  const double roi_h = box.y2 * map.spatial_scale - 0.5 - y0;
  if (!(roi_w > 0) || !(roi_h > 0)) fail(ErrorCode::DegenerateBox, "box has zero area after scaling");

  const double bin_w = roi_w / static_cast<double>(params.out_w);
  const double bin_h = roi_h / static_cast<double>(params.out_h);
  const auto sr = params.sampling_ratio;
  const double weight = 1.0 / static_cast<double>(sr * sr);
  const std::size_t channels = map.channels();
  const std::size_t bins = params.out_h * params.out_w;

  std::vector<float> out(channels * bins);
  std::vector<double> acc(channels);
  for (std::size_t ph = 0; ph < params.out_h; ++ph) {
    for (std::size_t pw = 0; pw < params.out_w; ++pw) {
      std::ranges::fill(acc, 0.0);
      for (std::size_t iy = 0; iy < sr; ++iy) {
        const double y = y0 + static_cast<double>(ph) * bin_h + (static_cast<double>(iy) + 0.5) * bin_h / static_cast<double>(sr);
        for (std::size_t ix = 0; ix < sr; ++ix) {
          const double x = x0 + static_cast<double>(pw) * bin_w + (static_cast<double>(ix) + 0.5) * bin_w / static_cast<double>(sr);
          detail::accumulate_sample(map, x, y, weight, acc);
        }
      }
      for (std::size_t c = 0; c < channels; ++c) out[c * bins + ph * params.out_w + pw] = static_cast<float>(acc[c]);
    }
  }
  return Tensor::f32({channels, params.out_h, params.out_w}, std::move(out));
}

// Global spatial average per channel.
inline std::vector<float> pool_to_vector(const Tensor& aligned) {
  require(aligned.dtype() == DType::F32 && aligned.rank() == 3, ErrorCode::DimensionMismatch,
          "pool_to_vector expects F32 [C,h,w]");
  const std::size_t plane = aligned.dim(1) * aligned.dim(2);
  const auto data = aligned.f32();
  std::vector<float> out(aligned.dim(0));
  for (std::size_t c = 0; c < out.size(); ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sum += data[c * plane + i];
    out[c] = static_cast<float>(sum / static_cast<double>(plane));
  }
  return out;
}

// One pooled feature row per box: F32 [num_boxes, C].
inline Tensor extract_features(const FeatureMap& map, const std::vector<Box>& boxes, const RoiAlignParams& params = {}) {
  require(!boxes.empty(), ErrorCode::InvalidArgument, "no boxes to extract features for");
  std::vector<float> rows;
  rows.reserve(boxes.size() * map.channels());
  for (const auto& b : boxes) {
    const auto v = pool_to_vector(roi_align(map, b, params));
    rows.insert(rows.end(), v.begin(), v.end());
  }
  return Tensor::f32({boxes.size(), map.channels()}, std::move(rows));
}

// Boxes from JSON-lines records carrying "bbox" (other fields ignored).
inline std::vector<Box> read_boxes(const fs::path& path) {
  std::vector<Box> out;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, const std::string& where) {
    if (!j.contains("bbox")) fail(ErrorCode::BadRecord, where + ": missing bbox");
    out.push_back(detail::parse_bbox(j["bbox"], where));
  });
  return out;
}

}  // namespace motionstack
