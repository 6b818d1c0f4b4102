#pragma once

// On-disk tensor container (MTENSOR) and binary PPM frame I/O.
//
// MTENSOR layout:
//   bytes 0..7   "MTENSOR\0"
//   bytes 8..11  header length L, little-endian uint32
//   bytes 12..   JSON header {"dtype":"u8"|"f32","shape":[...]}, space-padded
//                so that the payload starts on a 64-byte boundary
//   payload      row-major little-endian scalars, exactly product(shape) of them

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "motionstack/error.hpp"

namespace motionstack {

namespace fs = std::filesystem;

enum class DType { U8, F32 };

inline const char* dtype_name(DType d) { return d == DType::U8 ? "u8" : "f32"; }

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

class Tensor {
 public:
  Tensor() : shape_{0}, data_(std::vector<std::uint8_t>{}) {}

  static Tensor u8(Shape shape, std::vector<std::uint8_t> data) {
    return Tensor(std::move(shape), std::move(data));
  }
  static Tensor f32(Shape shape, std::vector<float> data) {
    return Tensor(std::move(shape), std::move(data));
  }
  static Tensor zeros(DType dtype, Shape shape) {
    const auto n = checked_count(shape);
    if (dtype == DType::U8) return u8(std::move(shape), std::vector<std::uint8_t>(n, 0));
    return f32(std::move(shape), std::vector<float>(n, 0.0f));
  }

  DType dtype() const noexcept {
    return std::holds_alternative<std::vector<std::uint8_t>>(data_) ? DType::U8 : DType::F32;
  }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return element_count(shape_); }

  std::span<const std::uint8_t> u8() const { return std::get<std::vector<std::uint8_t>>(data_); }
  std::span<std::uint8_t> u8() { return std::get<std::vector<std::uint8_t>>(data_); }
  std::span<const float> f32() const { return std::get<std::vector<float>>(data_); }
  std::span<float> f32() { return std::get<std::vector<float>>(data_); }

  // Bit-exact comparison (NaN payloads included).
  friend bool operator==(const Tensor& a, const Tensor& b) {
    if (a.dtype() != b.dtype() || a.shape_ != b.shape_) return false;
    if (a.dtype() == DType::U8) return std::ranges::equal(a.u8(), b.u8());
    const auto x = a.f32();
    const auto y = b.f32();
    return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size_bytes()) == 0;
  }

 private:
  template <typename T>
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    const auto n = checked_count(shape_);
    require(std::get<std::vector<T>>(data_).size() == n, ErrorCode::DimensionMismatch,
            "tensor data length " + std::to_string(std::get<std::vector<T>>(data_).size()) +
                " does not match shape product " + std::to_string(n));
  }

  static std::size_t checked_count(const Shape& shape) {
    require(!shape.empty() && shape.size() <= 4, ErrorCode::InvalidArgument,
            "tensor rank must be 1..4, got " + std::to_string(shape.size()));
    for (auto d : shape) require(d > 0, ErrorCode::InvalidArgument, "tensor dims must be positive");
    return element_count(shape);
  }

  Shape shape_;
  std::variant<std::vector<std::uint8_t>, std::vector<float>> data_;
};

// ---------------------------------------------------------------------------
// MTENSOR container

inline constexpr std::array<char, 8> kTensorMagic{'M', 'T', 'E', 'N', 'S', 'O', 'R', '\0'};
inline constexpr std::size_t kTensorAlign = 64;

namespace detail {

inline std::uint32_t load_le32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

inline void store_le32(unsigned char* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

inline std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::IoFailure, "read error on " + path.string());
  return bytes;
}

inline void write_file(const fs::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoFailure, "write error on " + path.string());
}

inline void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

inline std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace detail

inline std::vector<unsigned char> encode_tensor(const Tensor& t) {
  nlohmann::json header;
  header["dtype"] = dtype_name(t.dtype());
  header["shape"] = t.shape();
  std::string text = header.dump();
  const std::size_t prefix = kTensorMagic.size() + 4;
  const std::size_t padded = (prefix + text.size() + kTensorAlign - 1) / kTensorAlign * kTensorAlign;
  text.resize(padded - prefix, ' ');

  const std::size_t elem = t.dtype() == DType::U8 ? 1 : 4;
  std::vector<unsigned char> out(padded + t.size() * elem);
  std::memcpy(out.data(), kTensorMagic.data(), kTensorMagic.size());
  detail::store_le32(out.data() + kTensorMagic.size(), static_cast<std::uint32_t>(text.size()));
  std::memcpy(out.data() + prefix, text.data(), text.size());
  unsigned char* payload = out.data() + padded;
  if (t.dtype() == DType::U8) {
    std::ranges::copy(t.u8(), payload);
  } else {
    for (float v : t.f32()) {
      detail::store_le32(payload, std::bit_cast<std::uint32_t>(v));
      payload += 4;
    }
  }
  return out;
}

inline Tensor decode_tensor(std::span<const unsigned char> bytes, const std::string& origin = "<memory>") {
  const std::size_t prefix = kTensorMagic.size() + 4;
  if (bytes.size() < prefix || std::memcmp(bytes.data(), kTensorMagic.data(), kTensorMagic.size()) != 0)
    fail(ErrorCode::BadMagic, origin + ": not an MTENSOR file");
  const std::size_t header_len = detail::load_le32(bytes.data() + kTensorMagic.size());
  if (bytes.size() < prefix + header_len)
    fail(ErrorCode::CorruptContainer, origin + ": header extends past end of file");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + prefix, bytes.begin() + prefix + header_len);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptContainer, origin + ": unparseable header (" + e.what() + ")");
  }
  if (!header.is_object() || !header.contains("dtype") || !header.contains("shape") ||
      !header["dtype"].is_string() || !header["shape"].is_array())
    fail(ErrorCode::CorruptContainer, origin + ": header lacks dtype/shape");

  const auto dtype_text = header["dtype"].get<std::string>();
  DType dtype;
  if (dtype_text == "u8") {
    dtype = DType::U8;
  } else if (dtype_text == "f32") {
    dtype = DType::F32;
  } else {
    fail(ErrorCode::UnknownDType, origin + ": unknown dtype '" + dtype_text + "'");
  }

  Shape shape;
  for (const auto& d : header["shape"]) {
    if (!d.is_number_unsigned() || d.get<std::size_t>() == 0)
      fail(ErrorCode::CorruptContainer, origin + ": shape dims must be positive integers");
    shape.push_back(d.get<std::size_t>());
  }
  if (shape.empty() || shape.size() > 4) fail(ErrorCode::CorruptContainer, origin + ": rank must be 1..4");

  const std::size_t elem = dtype == DType::U8 ? 1 : 4;
  const std::size_t count = element_count(shape);
  const std::size_t payload_len = bytes.size() - prefix - header_len;
  if (payload_len != count * elem)
    fail(ErrorCode::CorruptContainer, origin + ": payload holds " + std::to_string(payload_len) +
                                          " bytes, shape requires " + std::to_string(count * elem));

  const unsigned char* payload = bytes.data() + prefix + header_len;
  if (dtype == DType::U8) return Tensor::u8(std::move(shape), std::vector<std::uint8_t>(payload, payload + count));
  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<float>(detail::load_le32(payload + 4 * i));
  return Tensor::f32(std::move(shape), std::move(values));
}

inline void write_tensor(const Tensor& t, const fs::path& path) { detail::write_file(path, encode_tensor(t)); }

inline Tensor read_tensor(const fs::path& path) { return decode_tensor(detail::read_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Frames

struct ImageFrame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB, row-major
  std::int64_t frame_index = 0;

  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[3 * (y * width + x) + c]; }

  void validate() const {
    require(width > 0 && height > 0, ErrorCode::InvalidArgument, "frame dimensions must be positive");
    require(pixels.size() == 3 * width * height, ErrorCode::DimensionMismatch,
            "frame pixel buffer length does not equal 3*width*height");
  }
};

// Last run of decimal digits in the file stem, e.g. "frame_0007.ppm" -> 7.
inline std::int64_t frame_index_from_path(const fs::path& path) {
  const std::string stem = path.stem().string();
  auto end = stem.size();
  while (end > 0 && !std::isdigit(static_cast<unsigned char>(stem[end - 1]))) --end;
  auto begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
  if (begin == end) fail(ErrorCode::BadFrameName, path.string() + ": file stem has no frame number");
  try {
    return std::stoll(stem.substr(begin, end - begin));
  } catch (const std::out_of_range&) {
    fail(ErrorCode::BadFrameName, path.string() + ": frame number out of range");
  }
}

namespace detail {

// Reads one whitespace-delimited PPM header token, skipping '#' comments.
inline std::string ppm_token(std::span<const unsigned char> bytes, std::size_t& pos, const std::string& origin) {
  for (;;) {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') token.push_back(static_cast<char>(bytes[pos++]));
  if (token.empty()) fail(ErrorCode::MalformedHeader, origin + ": truncated PPM header");
  return token;
}

inline std::size_t ppm_number(const std::string& token, const std::string& origin) {
  if (token.empty() || !std::ranges::all_of(token, [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    fail(ErrorCode::MalformedHeader, origin + ": expected a number in PPM header, got '" + token + "'");
  try {
    return std::stoull(token);
  } catch (const std::out_of_range&) {
    fail(ErrorCode::MalformedHeader, origin + ": PPM header value out of range");
  }
}

}  // namespace detail

inline ImageFrame decode_ppm(std::span<const unsigned char> bytes, const std::string& origin = "<memory>") {
  std::size_t pos = 0;
  const auto magic = detail::ppm_token(bytes, pos, origin);
  if (magic.size() == 2 && magic[0] == 'P' && magic[1] != '6')
    fail(ErrorCode::UnsupportedFormat, origin + ": only binary RGB PPM (P6) is supported, got " + magic);
  if (magic != "P6") fail(ErrorCode::MalformedHeader, origin + ": missing PPM magic");

  ImageFrame frame;
  frame.width = detail::ppm_number(detail::ppm_token(bytes, pos, origin), origin);
  frame.height = detail::ppm_number(detail::ppm_token(bytes, pos, origin), origin);
  const auto maxval = detail::ppm_number(detail::ppm_token(bytes, pos, origin), origin);
  if (frame.width == 0 || frame.height == 0) fail(ErrorCode::MalformedHeader, origin + ": zero image dimension");
  if (maxval != 255) fail(ErrorCode::BadMaxval, origin + ": maxval must be 255, got " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail(ErrorCode::MalformedHeader, origin + ": no separator before raster");
  ++pos;

  const std::size_t need = 3 * frame.width * frame.height;
  if (bytes.size() - pos < need)
    fail(ErrorCode::TruncatedPayload, origin + ": raster has " + std::to_string(bytes.size() - pos) + " bytes, needs " +
                                          std::to_string(need));
  frame.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return frame;
}

inline ImageFrame read_ppm(const fs::path& path) {
  const auto index = frame_index_from_path(path);
  auto frame = decode_ppm(detail::read_file(path), path.string());
  frame.frame_index = index;
  return frame;
}

inline std::vector<unsigned char> encode_ppm(const ImageFrame& frame) {
  frame.validate();
  const std::string header = "P6\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.insert(out.end(), frame.pixels.begin(), frame.pixels.end());
  return out;
}

inline void write_ppm(const ImageFrame& frame, const fs::path& path) { detail::write_file(path, encode_ppm(frame)); }

// [3,H,W] planes: R at plane 0, G at 1, B at 2.
inline Tensor to_planar(const ImageFrame& frame) {
  frame.validate();
  const std::size_t plane = frame.width * frame.height;
  std::vector<std::uint8_t> out(3 * plane);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c) out[c * plane + i] = frame.pixels[3 * i + c];
  return Tensor::u8({3, frame.height, frame.width}, std::move(out));
}

}  // namespace motionstack
