#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <vector>

#include "flowpatch/core/color.hpp"
#include "flowpatch/core/error.hpp"
#include "flowpatch/core/io.hpp"
#include "flowpatch/core/raster.hpp"
#include "test_util.hpp"

using namespace flowpatch;
using flowpatch::testing::TempDir;

namespace {

std::vector<unsigned char> bytes_of(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void put_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

void put_f32(std::vector<unsigned char>& b, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

void put_i32(std::vector<unsigned char>& b, std::int32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(static_cast<std::uint32_t>(v) >> (8 * i)));
}

}  // namespace

TEST(Raster, ShapeAndIndexing) {
  Raster r(2, 3, 3);
  EXPECT_EQ(r.size(), 18u);
  r.at(1, 2, 1) = 7.0;
  EXPECT_EQ(r[(1 * 3 + 2) * 3 + 1], 7.0);
  EXPECT_THROW(Image(2, 2, 2), ShapeError);
}

TEST(Raster, StackPairRoundTrip) {
  const Raster a = flowpatch::testing::random_raster(3, 4, 3, 1);
  const Raster b = flowpatch::testing::random_raster(3, 4, 3, 2);
  const auto [x, y] = unstack_pair(stack_pair(a, b));
  EXPECT_EQ(x, a);
  EXPECT_EQ(y, b);
}

TEST(Raster, GrayscaleUsesRec601) {
  Image img(1, 1, 3);
  img[0] = 1.0;
  img[1] = 0.5;
  img[2] = 0.25;
  EXPECT_DOUBLE_EQ(to_grayscale(img)[0], 0.299 + 0.587 * 0.5 + 0.114 * 0.25);
}

TEST(PixelMask, RasterRoundTrip) {
  PixelMask m(3, 3);
  m.set(1, 2);
  m.set(0, 0);
  EXPECT_EQ(m.count(), 2u);
  EXPECT_EQ(PixelMask::from_raster(m.to_raster()), m);
}

TEST(Flo, ReadsMinimalFile) {
  TempDir dir("flo_min");
  std::vector<unsigned char> b;
  put_f32(b, 202021.25f);
  put_i32(b, 1);
  put_i32(b, 1);
  put_f32(b, 3.0f);
  put_f32(b, 4.0f);
  put_bytes(dir / "a.flo", b);
  const FlowField f = read_flo(dir / "a.flo");
  ASSERT_EQ(f.height(), 1);
  ASSERT_EQ(f.width(), 1);
  EXPECT_EQ(f.u(0, 0), 3.0);
  EXPECT_EQ(f.v(0, 0), 4.0);
}

TEST(Flo, FileSizes) {
  TempDir dir("flo_size");
  write_flo(FlowField(1, 1), dir / "a.flo");
  EXPECT_EQ(std::filesystem::file_size(dir / "a.flo"), 20u);
  write_flo(FlowField(2, 2), dir / "b.flo");
  EXPECT_EQ(std::filesystem::file_size(dir / "b.flo"), 44u);
}

TEST(Flo, ByteExactRoundTrip) {
  TempDir dir("flo_rt");
  FlowField f(5, 7);
  const Raster noise = flowpatch::testing::random_raster(5, 7, 2, 3, -40.0, 40.0);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(noise[i]);
  write_flo(f, dir / "a.flo");
  const FlowField back = read_flo(dir / "a.flo");
  EXPECT_EQ(back, f);
  write_flo(back, dir / "b.flo");
  EXPECT_EQ(bytes_of(dir / "a.flo"), bytes_of(dir / "b.flo"));
}

TEST(Flo, Errors) {
  TempDir dir("flo_err");
  std::vector<unsigned char> b;
  put_f32(b, 0.0f);
  put_i32(b, 1);
  put_i32(b, 1);
  put_f32(b, 0.0f);
  put_f32(b, 0.0f);
  put_bytes(dir / "magic.flo", b);
  EXPECT_THROW(read_flo(dir / "magic.flo"), FormatError);

  b.clear();
  put_f32(b, 202021.25f);
  put_i32(b, 2);
  put_i32(b, 2);
  put_f32(b, 1.0f);
  put_bytes(dir / "short.flo", b);
  EXPECT_THROW(read_flo(dir / "short.flo"), IoError);
  EXPECT_THROW(read_flo(dir / "missing.flo"), IoError);
  EXPECT_THROW(write_flo(FlowField(1, 1), dir / "no" / "such" / "dir.flo"), IoError);
}

TEST(Ppm, ZeroImageAndFullByte) {
  TempDir dir("ppm_min");
  std::vector<unsigned char> b{'P', '6', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n'};
  b.resize(b.size() + 12, 0);
  put_bytes(dir / "z.ppm", b);
  const Image z = read_ppm(dir / "z.ppm");
  ASSERT_EQ(z.shape(), (Shape{2, 2, 3}));
  for (double v : z.values()) EXPECT_EQ(v, 0.0);

  b.back() = 255;
  put_bytes(dir / "o.ppm", b);
  EXPECT_EQ(read_ppm(dir / "o.ppm")[11], 1.0);
}

TEST(Ppm, ByteExactRoundTrip) {
  TempDir dir("ppm_rt");
  std::vector<unsigned char> b{'P', '6', '\n', '3', ' ', '2', '\n', '2', '5', '5', '\n'};
  for (int i = 0; i < 18; ++i) b.push_back(static_cast<unsigned char>(i * 14 + 3));
  put_bytes(dir / "a.ppm", b);
  write_ppm(read_ppm(dir / "a.ppm"), dir / "b.ppm");
  EXPECT_EQ(bytes_of(dir / "a.ppm"), bytes_of(dir / "b.ppm"));

  const Image q = quantize_8bit(flowpatch::testing::random_image(4, 5, 3, 9));
  write_ppm(q, dir / "q.ppm");
  EXPECT_EQ(read_ppm(dir / "q.ppm"), q);
}

TEST(Ppm, RejectsOtherFormats) {
  TempDir dir("ppm_err");
  put_bytes(dir / "p3.ppm", {'P', '3', '\n', '1', ' ', '1', '\n', '2', '5', '5', '\n', '0', ' ', '0', ' ', '0'});
  EXPECT_THROW(read_ppm(dir / "p3.ppm"), FormatError);
  EXPECT_THROW(write_ppm(Image(2, 2, 1), dir / "gray.ppm"), ShapeError);
}

TEST(Ppm, MaskRoundTrip) {
  TempDir dir("mask_rt");
  PixelMask m(4, 6);
  m.set(0, 5);
  m.set(3, 1);
  write_mask_ppm(m, dir / "m.ppm");
  EXPECT_EQ(read_mask_ppm(dir / "m.ppm"), m);
}

TEST(FlowColor, ZeroFlowIsWhite) {
  const Image img = flow_to_color(FlowField(3, 4));
  for (double v : img.values()) EXPECT_EQ(v, 1.0);
}

TEST(FlowColor, OppositeDirectionsDiffer) {
  FlowField f(1, 2);
  f.at(0, 0, 0) = 2.0;
  f.at(0, 1, 0) = -2.0;
  const Image img = flow_to_color(f);
  bool differs = false;
  for (int c = 0; c < 3; ++c) differs |= img.at(0, 0, c) != img.at(0, 1, c);
  EXPECT_TRUE(differs);
}

TEST(FlowColor, StaysInUnitRange) {
  FlowField f(8, 8);
  const Raster noise = flowpatch::testing::random_raster(8, 8, 2, 5, -30.0, 30.0);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = noise[i];
  for (auto max : {std::optional<double>{}, std::optional<double>{1.0}, std::optional<double>{500.0}}) {
    for (const auto r = flow_to_color(f, max); double v : r.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}
