#include "flowpatch/core/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "flowpatch/core/error.hpp"

namespace flowpatch {
namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

template <typename T>
T load_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<T>(bits);
}

template <typename T>
void store_le(std::vector<unsigned char>& out, T value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xFFu));
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(const std::vector<unsigned char>& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    token.push_back(static_cast<char>(bytes[pos++]));
  }
  return token;
}

int header_int(const std::vector<unsigned char>& bytes, std::size_t& pos, const std::filesystem::path& path) {
  const std::string token = header_token(bytes, pos);
  if (token.empty() || !std::all_of(token.begin(), token.end(), [](char c) { return std::isdigit(c); }) ||
      token.size() > 9) {
    throw FormatError("bad PPM header field '" + token + "' in " + path.string());
  }
  return std::stoi(token);
}

unsigned char to_byte(double v) {
  const double scaled = std::round(v * 255.0);
  return static_cast<unsigned char>(std::clamp(scaled, 0.0, 255.0));
}

}  // namespace

FlowField read_flo(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (bytes.size() < 12) throw IoError("truncated .flo header in " + path.string());
  if (load_le<float>(bytes.data()) != kFloMagic) {
    throw FormatError("bad .flo magic in " + path.string());
  }
  const auto width = load_le<std::int32_t>(bytes.data() + 4);
  const auto height = load_le<std::int32_t>(bytes.data() + 8);
  if (width <= 0 || height <= 0 || static_cast<std::int64_t>(width) * height > (std::int64_t{1} << 28)) {
    throw FormatError("implausible .flo dimensions " + std::to_string(width) + "x" + std::to_string(height) +
                      " in " + path.string());
  }
  const std::size_t count = static_cast<std::size_t>(width) * height * 2;
  if (bytes.size() < 12 + 4 * count) throw IoError("truncated .flo payload in " + path.string());

  FlowField flow(height, width);
  for (std::size_t i = 0; i < count; ++i) {
    flow[i] = load_le<float>(bytes.data() + 12 + 4 * i);
  }
  if (!flow.all_finite()) throw FormatError("non-finite flow value in " + path.string());
  return flow;
}

void write_flo(const FlowField& flow, const std::filesystem::path& path) {
  std::vector<unsigned char> bytes;
  bytes.reserve(12 + 4 * flow.size());
  store_le(bytes, kFloMagic);
  store_le(bytes, static_cast<std::int32_t>(flow.width()));
  store_le(bytes, static_cast<std::int32_t>(flow.height()));
  for (double v : flow.values()) store_le(bytes, static_cast<float>(v));
  dump(path, bytes);
}

Image read_ppm(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  std::size_t pos = 0;
  if (header_token(bytes, pos) != "P6") throw FormatError("not a binary P6 PPM: " + path.string());
  const int width = header_int(bytes, pos, path);
  const int height = header_int(bytes, pos, path);
  const int maxval = header_int(bytes, pos, path);
  if (width <= 0 || height <= 0) throw FormatError("empty PPM in " + path.string());
  if (maxval != 255) throw FormatError("unsupported PPM maxval " + std::to_string(maxval) + " in " + path.string());
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("malformed PPM header in " + path.string());
  ++pos;  // exactly one whitespace byte separates header and raster

  const std::size_t count = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() - pos < count) throw IoError("truncated PPM raster in " + path.string());
  Image image(height, width, 3);
  for (std::size_t i = 0; i < count; ++i) image[i] = bytes[pos + i] / 255.0;
  return image;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  if (image.channels() != 3) throw ShapeError("write_ppm needs a 3-channel image");
  const std::string header =
      "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  std::vector<unsigned char> bytes(header.begin(), header.end());
  bytes.reserve(header.size() + image.size());
  for (double v : image.values()) bytes.push_back(to_byte(v));
  dump(path, bytes);
}

void write_mask_ppm(const PixelMask& mask, const std::filesystem::path& path) {
  Image image(mask.height(), mask.width(), 3);
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    const double v = mask.test(i) ? 1.0 : 0.0;
    image[3 * i] = image[3 * i + 1] = image[3 * i + 2] = v;
  }
  write_ppm(image, path);
}

PixelMask read_mask_ppm(const std::filesystem::path& path) {
  const Image image = read_ppm(path);
  PixelMask mask(image.height(), image.width());
  for (std::size_t i = 0; i < mask.pixels(); ++i) mask.set(i, image[3 * i] > 0.0);
  return mask;
}

Image to_rgb(const Image& image) {
  if (image.channels() == 3) return image;
  Image out(image.height(), image.width(), 3);
  for (std::size_t i = 0; i < image.shape().pixels(); ++i) {
    out[3 * i] = out[3 * i + 1] = out[3 * i + 2] = image[i];
  }
  return out;
}

Image quantize_8bit(const Image& image) {
  Image out = image;
  for (double& v : out.values()) v = to_byte(v) / 255.0;
  return out;
}

}  // namespace flowpatch
