#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace flowpatch {

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return pixels() * channels; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

/// Dense row-major, channel-interleaved raster of doubles. The common currency
/// of the stage tape; the typed rasters below derive from it.
class Raster {
 public:
  Raster() = default;
  Raster(int height, int width, int channels, double fill = 0.0);
  Raster(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int channels() const { return shape_.channels; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t index(int row, int col, int ch = 0) const {
    return (static_cast<std::size_t>(row) * shape_.width + col) * shape_.channels + ch;
  }
  double& at(int row, int col, int ch = 0) { return values_[index(row, col, ch)]; }
  double at(int row, int col, int ch = 0) const { return values_[index(row, col, ch)]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& storage() { return values_; }

  bool all_finite() const;

  /// Single channel copied into a contiguous plane.
  std::vector<double> plane(int ch) const;
  void set_plane(int ch, std::span<const double> plane);

  bool operator==(const Raster&) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

void require_same_shape(const Shape& a, const Shape& b, const char* what);

/// H×W image with 1 or 3 channels; semantic range [0,1].
class Image : public Raster {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);
  explicit Image(Raster raster);
};

/// H×W×2 motion field, (u, v) in pixels per frame. u is horizontal.
class FlowField : public Raster {
 public:
  FlowField() = default;
  FlowField(int height, int width, double u = 0.0, double v = 0.0);
  explicit FlowField(Raster raster);

  double u(int row, int col) const { return at(row, col, 0); }
  double v(int row, int col) const { return at(row, col, 1); }
};

/// Single-channel nonnegative map of derivative magnitudes.
class GradientMap : public Raster {
 public:
  GradientMap() = default;
  GradientMap(int height, int width, double fill = 0.0);
  explicit GradientMap(Raster raster);
};

/// Strictly binary H×W map.
class PixelMask {
 public:
  PixelMask() = default;
  PixelMask(int height, int width, bool fill = false);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixels() const { return bits_.size(); }

  bool operator()(int row, int col) const { return bits_[static_cast<std::size_t>(row) * width_ + col] != 0; }
  bool test(std::size_t i) const { return bits_[i] != 0; }
  void set(int row, int col, bool on = true) { bits_[static_cast<std::size_t>(row) * width_ + col] = on ? 1 : 0; }
  void set(std::size_t i, bool on = true) { bits_[i] = on ? 1 : 0; }

  std::size_t count() const;
  bool none() const { return count() == 0; }
  bool all() const { return count() == bits_.size(); }

  /// 0/1 values as a single-channel raster.
  Raster to_raster() const;
  /// Pixels with value > 0.5 are set.
  static PixelMask from_raster(const Raster& raster);

  bool operator==(const PixelMask&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Rec.601 luma of a 3-channel image; 1-channel images are copied.
std::vector<double> to_grayscale(const Raster& image);

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// Both frames stacked channel-wise: [frame1 channels..., frame2 channels...].
Raster stack_pair(const Raster& first, const Raster& second);
std::pair<Raster, Raster> unstack_pair(const Raster& pair);

}  // namespace flowpatch
