#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

#include "kakamatch/error.hpp"
#include "kakamatch/image.hpp"

namespace kakamatch {

using PnmImage = std::variant<GrayImage, RgbImage>;

namespace detail {

inline bool pnm_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
}

// Reads one decimal header token, skipping whitespace and '#' comment lines.
inline long pnm_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos, const char* what) {
  for (;;) {
    while (pos < bytes.size() && pnm_space(bytes[pos])) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= bytes.size()) {
    throw DecodeError(std::string("pnm: missing ") + what + " at offset " + std::to_string(pos));
  }
  if (bytes[pos] < '0' || bytes[pos] > '9') {
    throw DecodeError(std::string("pnm: expected digit for ") + what + " at offset " +
                      std::to_string(pos));
  }
  long value = 0;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
    value = value * 10 + (bytes[pos] - '0');
    if (value > 1000000000L) {
      throw DecodeError(std::string("pnm: ") + what + " overflows at offset " + std::to_string(pos));
    }
    ++pos;
  }
  return value;
}

}  // namespace detail

// Binary PGM (P5) -> GrayImage with value = sample / 255; binary PPM (P6) -> RgbImage.
// Only maxval 255 is accepted. Comment lines starting '#' may appear before maxval.
inline PnmImage decode_pnm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw DecodeError("pnm: bad magic at offset 0 (want P5 or P6)");
  }
  const bool rgb = bytes[1] == '6';
  std::size_t pos = 2;
  const long w = detail::pnm_token(bytes, pos, "width");
  const long h = detail::pnm_token(bytes, pos, "height");
  const long maxval = detail::pnm_token(bytes, pos, "maxval");
  if (w < 1 || h < 1) {
    throw DecodeError("pnm: non-positive dimensions at offset " + std::to_string(pos));
  }
  if (maxval != 255) {
    throw DecodeError("pnm: unsupported maxval " + std::to_string(maxval) + " at offset " +
                      std::to_string(pos) + " (want 255)");
  }
  // Exactly one whitespace byte separates the header from the raster.
  if (pos >= bytes.size() || !detail::pnm_space(bytes[pos])) {
    throw DecodeError("pnm: missing raster separator at offset " + std::to_string(pos));
  }
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * (rgb ? 3 : 1);
  if (bytes.size() - pos < need) {
    throw DecodeError("pnm: truncated body at offset " + std::to_string(bytes.size()) + " (need " +
                      std::to_string(pos + need) + " bytes)");
  }
  if (rgb) {
    RgbImage img(static_cast<int>(w), static_cast<int>(h));
    std::copy(bytes.begin() + pos, bytes.begin() + pos + need, img.data.begin());
    return img;
  }
  GrayImage img(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < need; ++i) img.data[i] = bytes[pos + i] / 255.f;
  return img;
}

inline std::vector<std::uint8_t> encode_pnm(const RgbImage& image) {
  std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                       "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.data.begin(), image.data.end());
  return out;
}

inline std::vector<std::uint8_t> encode_pnm(const GrayImage& image) {
  std::string header = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                       "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.data.size());
  for (float v : image.data) out.push_back(quantize8(v));
  return out;
}

inline std::vector<std::uint8_t> encode_pnm(const SoftMask& mask) {
  GrayImage g(mask.width, mask.height);
  g.data = mask.data;
  return encode_pnm(g);
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

inline PnmImage load_pnm(const std::filesystem::path& path) { return decode_pnm(read_bytes(path)); }

// Loads any PNM and collapses it to intensity.
inline GrayImage load_gray(const std::filesystem::path& path) {
  PnmImage img = load_pnm(path);
  if (std::holds_alternative<GrayImage>(img)) return std::get<GrayImage>(std::move(img));
  return to_gray(std::get<RgbImage>(img));
}

}  // namespace kakamatch
