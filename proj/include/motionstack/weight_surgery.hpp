#pragma once

// First-layer weight transforms for channel-stacked inputs, plus a direct
// cross-correlation used to check them.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "motionstack/error.hpp"
#include "motionstack/random.hpp"
#include "motionstack/tensor_io.hpp"

namespace motionstack {

struct ConvLayerWeights {
  Tensor weight;               // F32 [c_out, c_in, kh, kw]
  std::optional<Tensor> bias;  // F32 [c_out]

  std::size_t c_out() const { return weight.dim(0); }
  std::size_t c_in() const { return weight.dim(1); }
  std::size_t kh() const { return weight.dim(2); }
  std::size_t kw() const { return weight.dim(3); }

  void validate() const {
    require(weight.dtype() == DType::F32 && weight.rank() == 4, ErrorCode::DimensionMismatch,
            "conv weights must be F32 [c_out, c_in, kh, kw]");
    if (bias)
      require(bias->dtype() == DType::F32 && bias->rank() == 1 && bias->dim(0) == c_out(),
              ErrorCode::DimensionMismatch, "conv bias must be F32 [c_out]");
  }

  friend bool operator==(const ConvLayerWeights&, const ConvLayerWeights&) = default;
};

// Tiles the input-channel axis n times and scales every copy by 1/n, so a
// stack of n identical frames yields the original response.
inline ConvLayerWeights replicate_init(const ConvLayerWeights& w, int n) {
  w.validate();
  require(n >= 1, ErrorCode::InvalidArgument, "replication count must be >= 1");
  const auto copies = static_cast<std::size_t>(n);
  const std::size_t c_in = w.c_in();
  const std::size_t k = w.kh() * w.kw();
  const double divisor = static_cast<double>(n);

  const auto src = w.weight.f32();
  std::vector<float> out(w.c_out() * copies * c_in * k);
  for (std::size_t o = 0; o < w.c_out(); ++o)
    for (std::size_t r = 0; r < copies; ++r)
      for (std::size_t c = 0; c < c_in; ++c)
        for (std::size_t i = 0; i < k; ++i)
          out[((o * copies + r) * c_in + c) * k + i] = static_cast<float>(src[(o * c_in + c) * k + i] / divisor);
  return {Tensor::f32({w.c_out(), copies * c_in, w.kh(), w.kw()}, std::move(out)), w.bias};
}

// Uniform(-b, b), b = 1/sqrt(c_in*kh*kw); zero bias.
inline ConvLayerWeights random_init_first_layer(std::size_t c_out, std::size_t c_in, std::size_t kh, std::size_t kw,
                                                std::uint64_t seed) {
  require(c_out > 0 && c_in > 0 && kh > 0 && kw > 0, ErrorCode::InvalidArgument, "conv dims must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(c_in * kh * kw));
  Rng rng(seed);
  std::vector<float> values(c_out * c_in * kh * kw);
  for (auto& v : values) v = static_cast<float>(uniform(rng, -bound, bound));
  return {Tensor::f32({c_out, c_in, kh, kw}, std::move(values)), Tensor::zeros(DType::F32, {c_out})};
}

// Direct cross-correlation with zero padding. Accumulation order per output
// pixel is fixed (channel, row, column) so results never depend on scheduling.
inline Tensor conv2d_reference(const Tensor& input, const ConvLayerWeights& w, std::size_t stride = 1,
                               std::size_t pad = 0) {
  w.validate();
  require(input.dtype() == DType::F32 && input.rank() == 3, ErrorCode::DimensionMismatch, "conv input must be F32 [C,H,W]");
  require(stride >= 1, ErrorCode::InvalidArgument, "stride must be >= 1");
  const std::size_t channels = input.dim(0);
  const std::size_t height = input.dim(1);
  const std::size_t width = input.dim(2);
  require(channels == w.c_in(), ErrorCode::DimensionMismatch,
          "input has " + std::to_string(channels) + " channels, weights expect " + std::to_string(w.c_in()));
  require(height + 2 * pad >= w.kh() && width + 2 * pad >= w.kw(), ErrorCode::DimensionMismatch,
          "kernel larger than padded input");

  const std::size_t out_h = (height + 2 * pad - w.kh()) / stride + 1;
  const std::size_t out_w = (width + 2 * pad - w.kw()) / stride + 1;
  const auto in = input.f32();
  const auto wt = w.weight.f32();
  std::vector<float> out(w.c_out() * out_h * out_w);

  for (std::size_t o = 0; o < w.c_out(); ++o) {
    const float b = w.bias ? w.bias->f32()[o] : 0.0f;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        double acc = 0.0;  // accumulate wide, round once
        for (std::size_t c = 0; c < channels; ++c) {
          for (std::size_t ky = 0; ky < w.kh(); ++ky) {
            const auto y = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(height)) continue;
            for (std::size_t kx = 0; kx < w.kw(); ++kx) {
              const auto x = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
              if (x < 0 || x >= static_cast<std::ptrdiff_t>(width)) continue;
              acc += static_cast<double>(in[(c * height + static_cast<std::size_t>(y)) * width + static_cast<std::size_t>(x)]) *
                     wt[((o * channels + c) * w.kh() + ky) * w.kw() + kx];
            }
          }
        }
        out[(o * out_h + oy) * out_w + ox] = static_cast<float>(acc + b);
      }
    }
  }
  return Tensor::f32({w.c_out(), out_h, out_w}, std::move(out));
}

// Concatenates n copies of a [C,H,W] tensor along the channel axis.
inline Tensor repeat_channels(const Tensor& input, int n) {
  require(n >= 1, ErrorCode::InvalidArgument, "repeat count must be >= 1");
  require(input.rank() == 3, ErrorCode::DimensionMismatch, "expected a [C,H,W] tensor");
  const auto copies = static_cast<std::size_t>(n);
  Shape shape{input.dim(0) * copies, input.dim(1), input.dim(2)};
  if (input.dtype() == DType::F32) {
    std::vector<float> out;
    for (std::size_t r = 0; r < copies; ++r) out.insert(out.end(), input.f32().begin(), input.f32().end());
    return Tensor::f32(std::move(shape), std::move(out));
  }
  std::vector<std::uint8_t> out;
  for (std::size_t r = 0; r < copies; ++r) out.insert(out.end(), input.u8().begin(), input.u8().end());
  return Tensor::u8(std::move(shape), std::move(out));
}

// ---------------------------------------------------------------------------
// File interchange: weights in <stem>.mten, sidecar <stem>.json with
// {"c_out","c_in","kh","kw","bias":bool}, bias (when present) in <stem>.bias.mten.

inline fs::path sidecar_path(const fs::path& weights) {
  auto p = weights;
  return p.replace_extension(".json");
}

inline fs::path bias_path(const fs::path& weights) {
  auto p = weights;
  return p.replace_extension(".bias.mten");
}

inline void write_conv_weights(const ConvLayerWeights& w, const fs::path& path) {
  w.validate();
  write_tensor(w.weight, path);
  const nlohmann::json meta{{"c_out", w.c_out()}, {"c_in", w.c_in()}, {"kh", w.kh()}, {"kw", w.kw()},
                            {"bias", w.bias.has_value()}};
  detail::write_text(sidecar_path(path), meta.dump(2) + "\n");
  if (w.bias) write_tensor(*w.bias, bias_path(path));
}

// The sidecar is optional on input; without it the layer has no bias.
inline ConvLayerWeights read_conv_weights(const fs::path& path) {
  ConvLayerWeights w{read_tensor(path), std::nullopt};
  require(w.weight.dtype() == DType::F32 && w.weight.rank() == 4, ErrorCode::DimensionMismatch,
          path.string() + ": conv weights must be F32 [c_out, c_in, kh, kw]");
  const auto meta_path = sidecar_path(path);
  if (fs::exists(meta_path)) {
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(detail::read_text(meta_path));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::BadRecord, meta_path.string() + ": " + e.what());
    }
    const Shape declared{meta.value("c_out", std::size_t{0}), meta.value("c_in", std::size_t{0}),
                         meta.value("kh", std::size_t{0}), meta.value("kw", std::size_t{0})};
    require(declared == w.weight.shape(), ErrorCode::DimensionMismatch,
            meta_path.string() + ": sidecar dims disagree with the weight tensor");
    if (meta.value("bias", false)) w.bias = read_tensor(bias_path(path));
  }
  w.validate();
  return w;
}

}  // namespace motionstack
