#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowpatch/core/frame_pair.hpp"
#include "flowpatch/core/raster.hpp"
#include "flowpatch/defense/config.hpp"
#include "flowpatch/flow/estimator.hpp"

namespace flowpatch::metrics {

/// Mean endpoint error over all pixels, or over the pixels set in `valid`.
/// Throws ShapeError on mismatched fields and DomainError if `valid` is empty.
double epe(const FlowField& reference, const FlowField& flow);
double epe(const FlowField& reference, const FlowField& flow, const PixelMask& valid);

/// Mean endpoint error over the pixels outside `patch_mask`.
/// Throws DomainError if the mask covers every pixel.
double epe_excl(const FlowField& a, const FlowField& b, const PixelMask& patch_mask);

struct EvalRecord {
  std::string frame;
  std::string defense;
  std::string attack;
  std::optional<double> quality;     // EPE(f*, f_D)
  std::optional<double> robustness;  // EPE outside the patch between f_D and f_D^A
};

/// A patch to evaluate: materialized RGB values of a square raster.
struct PatchInput {
  Image values;
  std::string label;
};

struct EvalOptions {
  /// Quality needs ground truth on every frame (ConfigError otherwise).
  bool quality = true;
  /// Seeds the per-frame placement poses.
  std::uint64_t pose_seed = 0;
  std::string defense_label;
};

struct EvalSummary {
  std::vector<EvalRecord> records;
  std::optional<double> mean_quality;
  std::optional<double> mean_robustness;
};

/// Per frame: f_D from the defended clean pair and, with a patch, f_D^A from
/// the defended attacked pair at one seeded random pose. Frame i uses the
/// pose stream seeded by (pose_seed, i), so results do not depend on which
/// other frames are evaluated alongside.
EvalSummary evaluate_pipeline(const flow::FlowEstimator& estimator,
                              const std::optional<defense::DefenseConfig>& defense,
                              const std::optional<PatchInput>& patch, const Dataset& dataset,
                              const EvalOptions& options = {});

/// Seed of the pose stream of frame `index`.
std::uint64_t frame_pose_seed(std::uint64_t pose_seed, std::size_t index);

struct TableRow {
  std::string defense;
  std::string attack;
  std::optional<double> mean_quality;
  std::optional<double> mean_robustness;
  std::size_t count = 0;
};

/// One row per (defense, attack) pair in order of first appearance; means
/// skip absent values.
std::vector<TableRow> quality_robustness_table(const std::vector<EvalRecord>& records);

/// CSV writers. Absent values are written as empty fields; a non-empty
/// `config_hash` adds a trailing config_hash column.
void write_records_csv(const std::vector<EvalRecord>& records, const std::filesystem::path& path,
                       const std::string& config_hash = {});
void write_table_csv(const std::vector<TableRow>& rows, const std::filesystem::path& path,
                     const std::string& config_hash = {});
/// quality,robustness,label rows for a quality-vs-robustness scatter plot.
void write_scatter_csv(const std::vector<TableRow>& rows, const std::filesystem::path& path,
                       const std::string& config_hash = {});

/// Shortest decimal form that reads back to the same double.
std::string format_number(double value);

}  // namespace flowpatch::metrics
