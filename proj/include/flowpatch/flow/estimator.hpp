#pragma once

#include <memory>
#include <string>
#include <utility>

#include "flowpatch/core/raster.hpp"
#include "flowpatch/diff/tape.hpp"

namespace flowpatch::flow {

/// A differentiable optical-flow method. `append_stages` adds exact-gradient
/// stages that map a stacked frame pair (H×W×2C, see stack_pair) to an H×W×2
/// flow raster, so an estimator can sit behind any other pipeline stages.
class FlowEstimator {
 public:
  virtual ~FlowEstimator() = default;

  virtual std::string name() const = 0;
  /// Deterministic: the same frames always give a bit-identical field.
  virtual FlowField estimate(const Image& first, const Image& second) const = 0;
  virtual void append_stages(diff::StageTape& tape) const = 0;
};

using EstimatorPtr = std::shared_ptr<const FlowEstimator>;

/// Tape holding only the estimator's stages.
diff::StageTape estimator_tape(const FlowEstimator& estimator);

/// Reverse pass of a recorded estimator tape: cotangents of both frames for a
/// flow cotangent. Throws StateError if the tape has not run forward.
std::pair<Image, Image> estimator_backward(const diff::StageTape& tape, const FlowField& cotangent);

}  // namespace flowpatch::flow
