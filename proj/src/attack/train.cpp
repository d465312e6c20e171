#include "flowpatch/attack/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include "flowpatch/core/error.hpp"
#include "flowpatch/core/io.hpp"
#include "flowpatch/defense/defense.hpp"
#include "flowpatch/defense/stages.hpp"

namespace flowpatch::attack {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::ifgsm ? "ifgsm" : "sgd"; }

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "ifgsm") return OptimizerKind::ifgsm;
  if (text == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + std::string(text) + "' (expected ifgsm or sgd)");
}

void AttackConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be finite and non-negative");
  }
  if (steps < 1) throw ConfigError("attack needs at least one step");
  if (!(alpha_penalty >= 0.0)) throw ConfigError("penalty weight alpha must be non-negative");
  if (patch_side < 2) throw ConfigError("patch side must be at least 2");
}

Patch optimizer_step(const Patch& patch, const Raster& gradient, const AttackConfig& cfg) {
  require_same_shape(gradient.shape(), patch.parameter().shape(), "optimizer gradient");
  Raster param = patch.parameter();
  const double lr = cfg.learning_rate;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = gradient[i];
    if (cfg.optimizer == OptimizerKind::ifgsm) {
      param[i] -= lr * static_cast<double>((g > 0.0) - (g < 0.0));
    } else {
      param[i] -= lr * g;
    }
  }
  const double lo = patch.box() == BoxMode::clip ? 0.0 : -kCovParameterLimit;
  const double hi = patch.box() == BoxMode::clip ? 1.0 : kCovParameterLimit;
  for (double& v : param.values()) v = std::clamp(v, lo, hi);
  return Patch(std::move(param), patch.box());
}

PatchPose sample_pose(Rng& rng, int height, int width, int side) {
  const int margin = static_cast<int>(std::ceil(side / 2.0 * 1.05)) + 1;
  if (height - 1 - margin < margin || width - 1 - margin < margin) {
    throw PlacementError("frame " + std::to_string(height) + "x" + std::to_string(width) +
                         " is too small for a patch of side " + std::to_string(side));
  }
  PatchPose pose;
  pose.row = rng.uniform_int(margin, height - 1 - margin);
  pose.col = rng.uniform_int(margin, width - 1 - margin);
  pose.rotation = rng.uniform(-10.0, 10.0);
  pose.scale = rng.uniform(0.95, 1.05);
  return pose;
}

FlowField reference_flow(const flow::FlowEstimator& estimator, const std::optional<defense::DefenseConfig>& defense,
                         const Image& first, const Image& second) {
  if (!defense) return estimator.estimate(first, second);
  return estimator.estimate(defense::defend(first, *defense).image, defense::defend(second, *defense).image);
}

diff::StageTape attack_tape(const flow::FlowEstimator& estimator, const std::optional<defense::DefenseConfig>& defense,
                            const Image& first, const Image& second, const FlowField& reference, BoxMode box,
                            int side, const PatchPose& pose) {
  PlacementPlan plan = plan_placement(first.height(), first.width(), side, pose);
  PixelMask footprint = plan.footprint;
  diff::StageTape tape;
  if (box == BoxMode::cov) tape.push(std::make_shared<CovStage>());
  tape.push(std::make_shared<PlacementStage>(to_rgb(first), to_rgb(second), std::move(plan)));
  if (defense) tape.push(std::make_shared<defense::PairDefenseStage>(*defense));
  estimator.append_stages(tape);
  tape.push(std::make_shared<AcsLossStage>(reference, std::move(footprint)));
  return tape;
}

TrainResult train_patch(const flow::FlowEstimator& estimator, const std::optional<defense::DefenseConfig>& defense,
                        const Dataset& dataset, const AttackConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  if (defense) defense->validate();
  if (dataset.empty()) throw ConfigError("attack training needs at least one frame pair");

  Rng rng(cfg.seed);
  Patch patch = Patch::random(cfg.patch_side, cfg.box, rng);
  std::map<int, FlowField> references;

  diff::StageTape penalty_tape;
  if (cfg.awareness != Awareness::vanilla) {
    if (cfg.box == BoxMode::cov) penalty_tape.push(std::make_shared<CovStage>());
    penalty_tape.push(std::make_shared<PenaltyStage>(patch.validity(), penalty_order(cfg.awareness)));
  }

  TrainResult result{patch, {}};
  result.log.reserve(static_cast<std::size_t>(cfg.steps));
  for (int step = 0; step < cfg.steps; ++step) {
    const int index = rng.uniform_int(0, static_cast<int>(dataset.size()) - 1);
    const FramePair& pair = dataset[static_cast<std::size_t>(index)];
    const PatchPose pose = sample_pose(rng, pair.first.height(), pair.first.width(), cfg.patch_side);

    auto cached = references.find(index);
    if (cached == references.end()) {
      cached = references.emplace(index, reference_flow(estimator, defense, pair.first, pair.second)).first;
    }

    diff::StageTape tape =
        attack_tape(estimator, defense, pair.first, pair.second, cached->second, cfg.box, cfg.patch_side, pose);
    StepRecord record{step, index, 0.0, 0.0, 0.0};
    record.acs = tape.run_forward(patch.parameter())[0];
    Raster gradient = tape.run_backward(Raster(1, 1, 1, 1.0));

    if (!penalty_tape.empty()) {
      record.penalty = penalty_tape.run_forward(patch.parameter())[0];
      const Raster penalty_grad = penalty_tape.run_backward(Raster(1, 1, 1, 1.0));
      for (std::size_t i = 0; i < gradient.size(); ++i) gradient[i] += cfg.alpha_penalty * penalty_grad[i];
    }
    record.loss = record.acs + cfg.alpha_penalty * record.penalty;

    if (!std::isfinite(record.loss) || !gradient.all_finite()) {
      throw DivergenceError("attack diverged at step " + std::to_string(step) + " (loss " +
                                std::to_string(record.loss) + ")",
                            step);
    }
    patch = optimizer_step(patch, gradient, cfg);
    result.log.push_back(record);
    if (on_step) on_step(record);
  }
  result.patch = std::move(patch);
  return result;
}

}  // namespace flowpatch::attack
