#include "flowpatch/core/raster.hpp"

#include <algorithm>
#include <cmath>

#include "flowpatch/core/error.hpp"

namespace flowpatch {

std::string to_string(const Shape& shape) {
  return std::to_string(shape.height) + "x" + std::to_string(shape.width) + "x" +
         std::to_string(shape.channels);
}

Raster::Raster(int height, int width, int channels, double fill)
    : shape_{height, width, channels} {
  if (height < 0 || width < 0 || channels < 0) {
    throw ShapeError("negative raster dimension " + to_string(shape_));
  }
  values_.assign(shape_.size(), fill);
}

Raster::Raster(Shape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
  if (shape.height < 0 || shape.width < 0 || shape.channels < 0 || values_.size() != shape.size()) {
    throw ShapeError("raster payload of " + std::to_string(values_.size()) +
                     " values does not match shape " + to_string(shape));
  }
}

bool Raster::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::vector<double> Raster::plane(int ch) const {
  std::vector<double> out(shape_.pixels());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = values_[i * shape_.channels + ch];
  }
  return out;
}

void Raster::set_plane(int ch, std::span<const double> plane) {
  if (plane.size() != shape_.pixels()) {
    throw ShapeError("plane size mismatch for raster " + to_string(shape_));
  }
  for (std::size_t i = 0; i < plane.size(); ++i) {
    values_[i * shape_.channels + ch] = plane[i];
  }
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw ShapeError(std::string(what) + ": shape " + to_string(a) + " vs " + to_string(b));
  }
}

namespace {

void check_image_channels(const Shape& s) {
  if (s.channels != 1 && s.channels != 3) {
    throw ShapeError("image must have 1 or 3 channels, got " + to_string(s));
  }
}

}  // namespace

Image::Image(int height, int width, int channels, double fill) : Raster(height, width, channels, fill) {
  check_image_channels(shape());
}

Image::Image(Raster raster) : Raster(std::move(raster)) { check_image_channels(shape()); }

FlowField::FlowField(int height, int width, double u, double v) : Raster(height, width, 2) {
  for (std::size_t i = 0; i < shape().pixels(); ++i) {
    (*this)[2 * i] = u;
    (*this)[2 * i + 1] = v;
  }
}

FlowField::FlowField(Raster raster) : Raster(std::move(raster)) {
  if (channels() != 2) {
    throw ShapeError("flow field must have 2 channels, got " + to_string(shape()));
  }
}

GradientMap::GradientMap(int height, int width, double fill) : Raster(height, width, 1, fill) {}

GradientMap::GradientMap(Raster raster) : Raster(std::move(raster)) {
  if (channels() != 1) {
    throw ShapeError("gradient map must have 1 channel, got " + to_string(shape()));
  }
}

PixelMask::PixelMask(int height, int width, bool fill)
    : height_(height), width_(width), bits_(static_cast<std::size_t>(height) * width, fill ? 1 : 0) {}

std::size_t PixelMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Raster PixelMask::to_raster() const {
  Raster out(height_, width_, 1);
  for (std::size_t i = 0; i < bits_.size(); ++i) out[i] = bits_[i];
  return out;
}

PixelMask PixelMask::from_raster(const Raster& raster) {
  if (raster.channels() != 1) {
    throw ShapeError("mask raster must have 1 channel, got " + to_string(raster.shape()));
  }
  PixelMask out(raster.height(), raster.width());
  for (std::size_t i = 0; i < out.pixels(); ++i) out.set(i, raster[i] > 0.5);
  return out;
}

std::vector<double> to_grayscale(const Raster& image) {
  const std::size_t n = image.shape().pixels();
  std::vector<double> gray(n);
  if (image.channels() == 1) {
    std::copy(image.values().begin(), image.values().end(), gray.begin());
    return gray;
  }
  if (image.channels() != 3) {
    throw ShapeError("grayscale conversion needs 1 or 3 channels, got " + to_string(image.shape()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    gray[i] = kLumaR * image[3 * i] + kLumaG * image[3 * i + 1] + kLumaB * image[3 * i + 2];
  }
  return gray;
}

Raster stack_pair(const Raster& first, const Raster& second) {
  require_same_shape(first.shape(), second.shape(), "stack_pair");
  const int c = first.channels();
  Raster out(first.height(), first.width(), 2 * c);
  for (std::size_t p = 0; p < first.shape().pixels(); ++p) {
    for (int k = 0; k < c; ++k) {
      out[p * 2 * c + k] = first[p * c + k];
      out[p * 2 * c + c + k] = second[p * c + k];
    }
  }
  return out;
}

std::pair<Raster, Raster> unstack_pair(const Raster& pair) {
  if (pair.channels() % 2 != 0) {
    throw ShapeError("frame pair must have an even channel count, got " + to_string(pair.shape()));
  }
  const int c = pair.channels() / 2;
  Raster first(pair.height(), pair.width(), c);
  Raster second(pair.height(), pair.width(), c);
  for (std::size_t p = 0; p < pair.shape().pixels(); ++p) {
    for (int k = 0; k < c; ++k) {
      first[p * c + k] = pair[p * 2 * c + k];
      second[p * c + k] = pair[p * 2 * c + c + k];
    }
  }
  return {std::move(first), std::move(second)};
}

}  // namespace flowpatch
