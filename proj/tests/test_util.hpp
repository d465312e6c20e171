#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "flowpatch/core/raster.hpp"
#include "flowpatch/core/rng.hpp"

namespace flowpatch::testing {

inline Raster random_raster(int h, int w, int c, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Raster r(h, w, c);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = rng.uniform(lo, hi);
  return r;
}

inline Image random_image(int h, int w, int c, std::uint64_t seed) { return Image(random_raster(h, w, c, seed)); }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(std::hash<std::string>{}(tag) ^ reinterpret_cast<std::uintptr_t>(this));
    path_ = std::filesystem::temp_directory_path() / ("flowpatch_" + tag + "_" + std::to_string(rng.next() % 1000000007));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace flowpatch::testing
