#include <string>

#include "flowpatch/core/error.hpp"
#include "flowpatch/kernels/stencil.hpp"

namespace flowpatch::kernels {

std::vector<int> block_origins(int extent, int block, int overlap) {
  if (block <= 0 || overlap < 0 || overlap >= block) {
    throw ConfigError("block grid needs 0 <= overlap < block, got block=" + std::to_string(block) +
                      " overlap=" + std::to_string(overlap));
  }
  if (block > extent) {
    throw ConfigError("block size " + std::to_string(block) + " exceeds image side " + std::to_string(extent));
  }
  const int stride = block - overlap;
  std::vector<int> origins;
  for (int o = 0; o + block <= extent; o += stride) origins.push_back(o);
  if (origins.back() + block < extent) origins.push_back(extent - block);
  return origins;
}

}  // namespace flowpatch::kernels
