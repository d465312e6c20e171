#pragma once

#include <cstdint>
#include <filesystem>

#include "flowpatch/core/frame_pair.hpp"

namespace flowpatch::harness {

struct SynthSpec {
  int count = 8;
  int height = 64;
  int width = 128;
  std::uint64_t seed = 0;
};

/// Smooth random scenes: a background of broad Gaussian blobs and a linear
/// ramp with a few small sharp blobs, plus one soft-edged textured object.
/// Background and object translate rigidly by different sub-pixel amounts;
/// frame 2 is the analytic re-rendering, so ground truth is exact. Frames
/// are 8-bit quantized and flow float32-rounded, exactly what a disk round
/// trip keeps. Pair ids are 0000, 0001, ...
Dataset synth_pairs(const SynthSpec& spec);

/// Writes NNNN_1.ppm, NNNN_2.ppm, NNNN.flo (and NNNN_valid.ppm when a pair
/// carries a validity mask) into `dir`, creating it if needed.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// synth_pairs followed by write_dataset.
Dataset synth_dataset(const SynthSpec& spec, const std::filesystem::path& dir);

}  // namespace flowpatch::harness
