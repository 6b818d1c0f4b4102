#pragma once

// Temporal input configurations for a channel-stacked detector:
//
//   RgbSeq  n   { I_t, I_(t-1), ..., I_(t-n+1) }           C = 3n
//   RgbInt  d   { I_t, I_(t-d) }                           C = 6
//   DiffSeq n   { I_t, d_(t-1,1), ..., d_(t-n+1,1) }       C = 3n
//   DiffInt d   { I_t, d_(t-d,d) }                         C = 6
//
// where d_(s,k) = floor((I_(s+k) - I_s + 255) / 2) per channel. Blocks are
// stacked newest first. Past frames before the start of the source clamp to
// the earliest frame.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "motionstack/error.hpp"
#include "motionstack/parallel.hpp"
#include "motionstack/tensor_io.hpp"

namespace motionstack {

enum class InputVariant { RgbSeq, RgbInt, DiffSeq, DiffInt };

inline const char* variant_name(InputVariant v) {
  switch (v) {
    case InputVariant::RgbSeq: return "rgb-seq";
    case InputVariant::RgbInt: return "rgb-int";
    case InputVariant::DiffSeq: return "diff-seq";
    case InputVariant::DiffInt: return "diff-int";
  }
  return "?";
}

inline InputVariant parse_variant(const std::string& name) {
  for (auto v : {InputVariant::RgbSeq, InputVariant::RgbInt, InputVariant::DiffSeq, InputVariant::DiffInt})
    if (name == variant_name(v)) return v;
  fail(ErrorCode::InvalidArgument, "unknown input variant '" + name + "'");
}

class InputConfig {
 public:
  static InputConfig rgb_seq(int n) { return InputConfig(InputVariant::RgbSeq, n, 1); }
  static InputConfig diff_seq(int n) { return InputConfig(InputVariant::DiffSeq, n, 1); }
  static InputConfig rgb_int(int delta) { return InputConfig(InputVariant::RgbInt, 2, delta); }
  static InputConfig diff_int(int delta) { return InputConfig(InputVariant::DiffInt, 2, delta); }

  // `value` is n for the sequential variants and delta for the interval ones.
  static InputConfig make(InputVariant v, int value) {
    switch (v) {
      case InputVariant::RgbSeq: return rgb_seq(value);
      case InputVariant::DiffSeq: return diff_seq(value);
      case InputVariant::RgbInt: return rgb_int(value);
      case InputVariant::DiffInt: return diff_int(value);
    }
    fail(ErrorCode::InvalidArgument, "bad variant");
  }

  InputVariant variant() const noexcept { return variant_; }
  int n() const noexcept { return n_; }
  int delta() const noexcept { return delta_; }
  bool sequential() const noexcept { return variant_ == InputVariant::RgbSeq || variant_ == InputVariant::DiffSeq; }
  bool uses_diff() const noexcept { return variant_ == InputVariant::DiffSeq || variant_ == InputVariant::DiffInt; }
  std::size_t channels() const noexcept { return sequential() ? 3 * static_cast<std::size_t>(n_) : 6; }

  // Outside N in 1..10 / delta in 1..5, the ranges that were actually evaluated.
  bool outside_evaluated_range() const noexcept { return sequential() ? n_ > 10 : delta_ > 5; }

  nlohmann::json to_json() const {
    return {{"variant", variant_name(variant_)}, {"n", n_}, {"delta", delta_}};
  }

  friend bool operator==(const InputConfig&, const InputConfig&) = default;

 private:
  InputConfig(InputVariant v, int n, int delta) : variant_(v), n_(n), delta_(delta) {
    require(n >= 1, ErrorCode::InvalidArgument, "frame count n must be >= 1");
    require(delta >= 1, ErrorCode::InvalidArgument, "interval delta must be >= 1");
  }

  InputVariant variant_;
  int n_;
  int delta_;
};

// Ordered frames with strictly increasing indices and uniform dimensions.
class FrameSource {
 public:
  FrameSource() = default;

  explicit FrameSource(std::vector<ImageFrame> frames, std::vector<fs::path> paths = {})
      : frames_(std::move(frames)), paths_(std::move(paths)) {
    require(paths_.empty() || paths_.size() == frames_.size(), ErrorCode::InvalidArgument,
            "frame path list length mismatch");
    for (std::size_t i = 0; i < frames_.size(); ++i) {
      frames_[i].validate();
      if (i == 0) continue;
      require(frames_[i].frame_index > frames_[i - 1].frame_index, ErrorCode::OutOfOrder,
              "frame indices must be strictly increasing (" + std::to_string(frames_[i - 1].frame_index) + " then " +
                  std::to_string(frames_[i].frame_index) + ")");
      require(frames_[i].width == frames_[0].width && frames_[i].height == frames_[0].height,
              ErrorCode::DimensionMismatch, "frame " + std::to_string(frames_[i].frame_index) + " has different size");
    }
  }

  // Loads every *.ppm in `dir`, ordered by frame index.
  static FrameSource load_directory(const fs::path& dir) {
    if (!fs::is_directory(dir)) fail(ErrorCode::IoFailure, dir.string() + " is not a directory");
    std::vector<std::pair<std::int64_t, fs::path>> entries;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file() || e.path().extension() != ".ppm") continue;
      entries.emplace_back(frame_index_from_path(e.path()), e.path());
    }
    std::ranges::sort(entries);
    std::vector<ImageFrame> frames;
    std::vector<fs::path> paths;
    for (const auto& [index, path] : entries) {
      frames.push_back(read_ppm(path));
      paths.push_back(path);
    }
    return FrameSource(std::move(frames), std::move(paths));
  }

  std::size_t size() const noexcept { return frames_.size(); }
  bool empty() const noexcept { return frames_.empty(); }
  const ImageFrame& at(std::size_t pos) const { return frames_.at(pos); }
  const std::vector<ImageFrame>& frames() const noexcept { return frames_; }
  std::optional<fs::path> path(std::size_t pos) const {
    if (paths_.empty()) return std::nullopt;
    return paths_.at(pos);
  }

  std::optional<std::size_t> position_of(std::int64_t frame_index) const {
    auto it = std::ranges::lower_bound(frames_, frame_index, {}, &ImageFrame::frame_index);
    if (it == frames_.end() || it->frame_index != frame_index) return std::nullopt;
    return static_cast<std::size_t>(it - frames_.begin());
  }

 private:
  std::vector<ImageFrame> frames_;
  std::vector<fs::path> paths_;
};

struct StackedInput {
  Tensor tensor;  // U8 [C,H,W]
  std::int64_t target_frame_index = 0;
  InputConfig config = InputConfig::rgb_seq(1);
};

// floor((later - earlier + 255) / 2) per channel sample, as a [3,H,W] tensor.
inline Tensor diff_image(const ImageFrame& later, const ImageFrame& earlier) {
  later.validate();
  earlier.validate();
  require(later.width == earlier.width && later.height == earlier.height, ErrorCode::DimensionMismatch,
          "diff_image: frames differ in size");
  const std::size_t plane = later.width * later.height;
  std::vector<std::uint8_t> out(3 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      // Numerator is in [0, 510], so integer division is the floor.
      const int num = int{later.pixels[3 * i + c]} - int{earlier.pixels[3 * i + c]} + 255;
      out[c * plane + i] = static_cast<std::uint8_t>(num / 2);
    }
  }
  return Tensor::u8({3, later.height, later.width}, std::move(out));
}

inline StackedInput build_input(const FrameSource& source, std::int64_t t, const InputConfig& config) {
  const auto target = source.position_of(t);
  if (!target) fail(ErrorCode::MissingFrame, "frame " + std::to_string(t) + " is not in the source");

  const auto& first = source.at(0);
  const std::size_t plane = first.width * first.height;
  std::vector<std::uint8_t> data;
  data.reserve(config.channels() * plane);

  // Frame `back` positions before the target, clamped at the start of the source.
  const auto frame_back = [&](std::size_t back) -> const ImageFrame& {
    return source.at(back > *target ? 0 : *target - back);
  };
  const auto append = [&](const Tensor& block) { data.insert(data.end(), block.u8().begin(), block.u8().end()); };

  append(to_planar(frame_back(0)));
  switch (config.variant()) {
    case InputVariant::RgbSeq:
      for (int k = 1; k < config.n(); ++k) append(to_planar(frame_back(static_cast<std::size_t>(k))));
      break;
    case InputVariant::RgbInt:
      append(to_planar(frame_back(static_cast<std::size_t>(config.delta()))));
      break;
    case InputVariant::DiffSeq:
      // d_(t-k,1): later I_(t-k+1), earlier I_(t-k)
      for (int k = 1; k < config.n(); ++k) {
        const auto kk = static_cast<std::size_t>(k);
        append(diff_image(frame_back(kk - 1), frame_back(kk)));
      }
      break;
    case InputVariant::DiffInt:
      // d_(t-delta,delta): later I_t, earlier I_(t-delta)
      append(diff_image(frame_back(0), frame_back(static_cast<std::size_t>(config.delta()))));
      break;
  }
  return StackedInput{Tensor::u8({config.channels(), first.height, first.width}, std::move(data)), t, config};
}

struct ManifestItem {
  std::int64_t index = 0;
  std::string tensor;
  std::optional<std::string> label;
};

struct Manifest {
  InputConfig config = InputConfig::rgb_seq(1);
  std::vector<ManifestItem> items;

  nlohmann::json to_json() const {
    nlohmann::json cfg = config.to_json();
    cfg["sequence_start"] = "clamp-to-earliest";
    nlohmann::json out{{"config", cfg}, {"items", nlohmann::json::array()}};
    for (const auto& item : items) {
      out["items"].push_back({{"index", item.index},
                              {"tensor", item.tensor},
                              {"label", item.label ? nlohmann::json(*item.label) : nlohmann::json(nullptr)}});
    }
    return out;
  }
};

// Writes stack_<index>.mten for every frame plus manifest.json into out_dir.
// With labels_dir, the label file sharing the frame's stem (<stem>.txt) is
// copied verbatim next to the stack; paths in the manifest are relative to out_dir.
inline Manifest build_dataset(const FrameSource& source, const InputConfig& config, const fs::path& out_dir,
                              const std::optional<fs::path>& labels_dir = std::nullopt) {
  std::vector<std::optional<fs::path>> label_sources(source.size());
  if (labels_dir) {
    for (std::size_t i = 0; i < source.size(); ++i) {
      const auto frame_path = source.path(i);
      const std::string stem =
          frame_path ? frame_path->stem().string() : "frame_" + std::to_string(source.at(i).frame_index);
      const fs::path label = *labels_dir / (stem + ".txt");
      if (!fs::is_regular_file(label))
        fail(ErrorCode::MissingLabel, "no label file " + label.string() + " for frame " +
                                          std::to_string(source.at(i).frame_index));
      label_sources[i] = label;
    }
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());

  Manifest manifest{config, std::vector<ManifestItem>(source.size())};
  parallel_for(source.size(), [&](std::size_t i) {
    const auto index = source.at(i).frame_index;
    auto& item = manifest.items[i];
    item.index = index;
    item.tensor = "stack_" + std::to_string(index) + ".mten";
    write_tensor(build_input(source, index, config).tensor, out_dir / item.tensor);
    if (label_sources[i]) {
      item.label = "label_" + std::to_string(index) + ".txt";
      detail::write_text(out_dir / *item.label, detail::read_text(*label_sources[i]));
    }
  });
  detail::write_text(out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
  return manifest;
}

}  // namespace motionstack
