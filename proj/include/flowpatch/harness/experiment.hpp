#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowpatch/attack/train.hpp"
#include "flowpatch/defense/config.hpp"
#include "flowpatch/flow/horn_schunck.hpp"
#include "flowpatch/harness/synth.hpp"

#include <json.hpp>

namespace flowpatch::harness {

/// Where frames come from: a directory in the NNNN_1.ppm layout, or a
/// synthetic spec generated in memory.
struct DatasetSource {
  std::optional<std::filesystem::path> path;
  SynthSpec synthetic;
};

/// One attack grid cell: everything but the seed.
struct AttackCell {
  attack::Awareness awareness = attack::Awareness::vanilla;
  attack::OptimizerKind optimizer = attack::OptimizerKind::ifgsm;
  double learning_rate = 0.01;
  attack::BoxMode box = attack::BoxMode::clip;

  std::string label() const;
};

struct ExperimentConfig {
  DatasetSource train_data;
  /// Defaults to the training data when absent.
  std::optional<DatasetSource> eval_data;
  flow::HornSchunckConfig estimator;
  /// Evaluated defenses, any of "none", "lgs", "ilp".
  std::vector<std::string> defenses{"none", "lgs", "ilp"};
  /// Parameters for each defense kind, also used by defense-aware training.
  defense::DefenseConfig lgs = defense::DefenseConfig::lgs();
  defense::DefenseConfig ilp = defense::DefenseConfig::ilp();
  std::vector<AttackCell> cells;
  std::vector<std::uint64_t> seeds{0, 1};
  int steps = 300;
  double alpha_penalty = 1e-8;
  int patch_side = 24;
  std::uint64_t pose_seed = 1;
  /// 0 means: FLOWPATCH_WORKERS if set, else the hardware concurrency.
  int workers = 0;
  std::filesystem::path output_dir = "experiment_out";

  /// Throws ConfigError if a cell, defense or the estimator is invalid.
  void validate() const;
  std::optional<defense::DefenseConfig> defense_for(const std::string& name) const;
  std::optional<defense::DefenseConfig> training_defense(attack::Awareness awareness) const;
};

/// The default grid: every awareness with I-FGSM at 0.01 and clip.
std::vector<AttackCell> default_cells();

/// Field names mirror the struct. Unknown keys raise ConfigError; absent
/// keys keep their defaults. An "attack_grid" object expands the cross
/// product awareness × optimizer × learning rate (per optimizer) × box.
ExperimentConfig experiment_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// 16 hex digits of FNV-1a over the canonical JSON of the config.
std::string config_hash(const ExperimentConfig& cfg);

/// Writes the materialized patch as PPM, a JSON sidecar with the same stem
/// (side, parameterization, attack settings) and, when `log_path` is not
/// empty, the per-step loss log as CSV.
void save_trained_patch(const attack::TrainResult& trained, const attack::AttackConfig& acfg,
                        const std::filesystem::path& patch_path, const std::filesystem::path& log_path,
                        const std::string& config_hash = {});

/// Worker count after the FLOWPATCH_WORKERS cap; at least 1.
int resolve_workers(int requested);

struct CellOutcome {
  AttackCell cell;
  std::uint64_t seed = 0;
  /// "ok", "div" (non-finite loss, recorded and skipped) or "fail".
  std::string status;
  std::string message;
  /// Mean robustness per evaluated defense; empty unless status is ok.
  std::map<std::string, double> robustness;
};

struct ExperimentResult {
  std::vector<CellOutcome> outcomes;
  /// Mean quality per defense on unattacked frames.
  std::map<std::string, double> quality;
  bool hard_failure = false;
};

/// Trains every cell for every seed (in parallel), evaluates each patch
/// against every defense and writes:
///   quality.csv        defense,quality_epe
///   records.csv        per-frame records of every patch and defense
///   per_seed.csv       one row per cell, seed and defense
///   seed_averaged.csv  one row per cell and defense
///   headline.csv       per defense and awareness, the cell with the largest
///                      seed-averaged robustness
///   scatter.csv        quality,robustness,label of the headline rows
///   cells/<label>/seed<S>/{patch.ppm,patch.json,loss.csv}
/// Every CSV row ends with the config hash. Output is identical for
/// identical configs regardless of the worker count.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace flowpatch::harness
