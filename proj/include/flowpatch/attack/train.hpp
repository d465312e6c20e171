#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowpatch/attack/loss.hpp"
#include "flowpatch/attack/patch.hpp"
#include "flowpatch/attack/placement.hpp"
#include "flowpatch/core/frame_pair.hpp"
#include "flowpatch/core/rng.hpp"
#include "flowpatch/defense/config.hpp"
#include "flowpatch/flow/estimator.hpp"

namespace flowpatch::attack {

enum class OptimizerKind { ifgsm, sgd };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view text);

struct AttackConfig {
  Awareness awareness = Awareness::vanilla;
  OptimizerKind optimizer = OptimizerKind::ifgsm;
  double learning_rate = 0.01;
  BoxMode box = BoxMode::clip;
  int steps = 2500;
  double alpha_penalty = 1e-8;
  std::uint64_t seed = 0;
  int patch_side = 100;

  /// Throws ConfigError for a negative or non-finite learning rate, steps < 1,
  /// a negative alpha or a patch side below 2.
  void validate() const;
};

/// cov parameters are kept within this bound so the materialized patch never
/// rounds to exactly 0 or 1.
inline constexpr double kCovParameterLimit = 9.0;

/// ifgsm: p - lr·sign(g); sgd: p - lr·g. clip then clamps to [0,1]; cov
/// steps the unconstrained parameter.
Patch optimizer_step(const Patch& patch, const Raster& gradient, const AttackConfig& cfg);

/// Rotation U[-10,10] degrees, scale U[0.95,1.05], integer center uniform
/// over the positions where the largest scaled footprint fits.
/// Throws PlacementError if the frame is too small for the patch.
PatchPose sample_pose(Rng& rng, int height, int width, int side);

struct StepRecord {
  int step = 0;
  int frame = 0;
  double loss = 0.0;
  double acs = 0.0;
  double penalty = 0.0;
};

struct TrainResult {
  Patch patch;
  std::vector<StepRecord> log;
};

/// Called after every step with the record of that step.
using StepCallback = std::function<void(const StepRecord&)>;

/// Optimizes a patch against `estimator`, optionally behind `defense`
/// (forward exact, backward by the BPDA rules). The reference flow of each
/// pair is computed once on the (defended) clean frames. Frames are promoted
/// to RGB. Throws DivergenceError on a non-finite loss or gradient.
TrainResult train_patch(const flow::FlowEstimator& estimator, const std::optional<defense::DefenseConfig>& defense,
                        const Dataset& dataset, const AttackConfig& cfg, const StepCallback& on_step = {});

/// Full differentiable attack pipeline for one pair and pose, from the patch
/// parameter to the ACS scalar. Exposed for gradient checks.
diff::StageTape attack_tape(const flow::FlowEstimator& estimator, const std::optional<defense::DefenseConfig>& defense,
                            const Image& first, const Image& second, const FlowField& reference, BoxMode box,
                            int side, const PatchPose& pose);

/// Flow of a clean pair, behind the defense when one is given.
FlowField reference_flow(const flow::FlowEstimator& estimator, const std::optional<defense::DefenseConfig>& defense,
                         const Image& first, const Image& second);

}  // namespace flowpatch::attack
