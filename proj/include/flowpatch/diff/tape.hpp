#pragma once

#include <vector>

#include "flowpatch/diff/stage.hpp"

namespace flowpatch::diff {

/// Ordered chain of stages with the contexts of its last forward evaluation.
/// Single owner during forward/backward; distinct tapes are independent.
class StageTape {
 public:
  StageTape() = default;
  explicit StageTape(std::vector<StagePtr> stages) : stages_(std::move(stages)) {}

  void push(StagePtr stage);
  void append(const StageTape& other);

  std::size_t size() const { return stages_.size(); }
  bool empty() const { return stages_.empty(); }
  const std::vector<StagePtr>& stages() const { return stages_; }

  /// Runs every stage in order and records contexts for run_backward.
  Raster run_forward(const Raster& input);
  /// Same computation without keeping contexts (bit-identical output).
  Raster run_inference(const Raster& input) const;
  /// Reverse pass from the output cotangent to the tape input. Throws
  /// StateError if no forward pass has been recorded.
  Raster run_backward(const Raster& cotangent) const;

  bool recorded() const { return recorded_; }
  void clear_contexts();

 private:
  std::vector<StagePtr> stages_;
  std::vector<StageContext> contexts_;
  Shape output_shape_;
  bool recorded_ = false;
};

}  // namespace flowpatch::diff
