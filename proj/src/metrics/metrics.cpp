#include "flowpatch/metrics/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "flowpatch/attack/placement.hpp"
#include "flowpatch/attack/train.hpp"
#include "flowpatch/core/error.hpp"
#include "flowpatch/core/io.hpp"
#include "flowpatch/defense/defense.hpp"

namespace flowpatch::metrics {
namespace {

void check_flows(const FlowField& a, const FlowField& b) { require_same_shape(a.shape(), b.shape(), "epe"); }

double endpoint(const FlowField& a, const FlowField& b, std::size_t p) {
  return std::hypot(a[2 * p] - b[2 * p], a[2 * p + 1] - b[2 * p + 1]);
}

// Mean endpoint error over pixels where `keep(p)` holds.
template <typename Keep>
double masked_mean(const FlowField& a, const FlowField& b, Keep keep, const char* what) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < a.shape().pixels(); ++p) {
    if (!keep(p)) continue;
    sum += endpoint(a, b, p);
    ++count;
  }
  if (count == 0) throw DomainError(std::string(what) + " has no pixels to average");
  return sum / static_cast<double>(count);
}

Image defended(const Image& image, const std::optional<defense::DefenseConfig>& defense) {
  return defense ? defense::defend(image, *defense).image : image;
}

std::string optional_field(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

template <typename T>
std::optional<double> mean_of(const std::vector<T>& items, std::optional<double> T::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& item : items) {
    if (!(item.*field)) continue;
    sum += *(item.*field);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

double epe(const FlowField& reference, const FlowField& flow) {
  check_flows(reference, flow);
  return masked_mean(reference, flow, [](std::size_t) { return true; }, "epe");
}

double epe(const FlowField& reference, const FlowField& flow, const PixelMask& valid) {
  check_flows(reference, flow);
  require_same_shape({valid.height(), valid.width(), 2}, reference.shape(), "epe validity mask");
  return masked_mean(reference, flow, [&](std::size_t p) { return valid.test(p); }, "epe validity mask");
}

double epe_excl(const FlowField& a, const FlowField& b, const PixelMask& patch_mask) {
  check_flows(a, b);
  require_same_shape({patch_mask.height(), patch_mask.width(), 2}, a.shape(), "epe_excl mask");
  return masked_mean(a, b, [&](std::size_t p) { return !patch_mask.test(p); }, "epe_excl with an all-ones mask");
}

std::uint64_t frame_pose_seed(std::uint64_t pose_seed, std::size_t index) {
  // splitmix64 of the pair, so neighbouring seeds give unrelated streams.
  std::uint64_t z = pose_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

EvalSummary evaluate_pipeline(const flow::FlowEstimator& estimator,
                              const std::optional<defense::DefenseConfig>& defense,
                              const std::optional<PatchInput>& patch, const Dataset& dataset,
                              const EvalOptions& options) {
  if (defense) defense->validate();
  const std::string defense_label =
      !options.defense_label.empty() ? options.defense_label : (defense ? defense::to_string(defense->kind) : "none");

  EvalSummary summary;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const FramePair& pair = dataset[i];
    EvalRecord record{pair.id, defense_label, patch ? patch->label : "none", std::nullopt, std::nullopt};

    const FlowField clean = estimator.estimate(defended(pair.first, defense), defended(pair.second, defense));
    if (options.quality) {
      if (!pair.ground_truth) throw ConfigError("frame '" + pair.id + "' has no ground truth for quality");
      record.quality = pair.valid ? epe(*pair.ground_truth, clean, *pair.valid) : epe(*pair.ground_truth, clean);
    }
    if (patch) {
      Rng rng(frame_pose_seed(options.pose_seed, i));
      const attack::PatchPose pose =
          attack::sample_pose(rng, pair.first.height(), pair.first.width(), patch->values.height());
      const attack::Placement placed =
          attack::place_patch(to_rgb(pair.first), to_rgb(pair.second), patch->values, pose);
      const FlowField attacked =
          estimator.estimate(defended(placed.first, defense), defended(placed.second, defense));
      record.robustness = epe_excl(clean, attacked, placed.footprint);
    }
    summary.records.push_back(std::move(record));
  }
  summary.mean_quality = mean_of(summary.records, &EvalRecord::quality);
  summary.mean_robustness = mean_of(summary.records, &EvalRecord::robustness);
  return summary;
}

std::vector<TableRow> quality_robustness_table(const std::vector<EvalRecord>& records) {
  std::vector<TableRow> rows;
  std::map<std::pair<std::string, std::string>, std::vector<EvalRecord>> groups;
  for (const auto& r : records) {
    auto key = std::make_pair(r.defense, r.attack);
    if (!groups.contains(key)) rows.push_back({r.defense, r.attack, std::nullopt, std::nullopt, 0});
    groups[key].push_back(r);
  }
  for (auto& row : rows) {
    const auto& group = groups.at({row.defense, row.attack});
    row.count = group.size();
    row.mean_quality = mean_of(group, &EvalRecord::quality);
    row.mean_robustness = mean_of(group, &EvalRecord::robustness);
  }
  return rows;
}

void write_records_csv(const std::vector<EvalRecord>& records, const std::filesystem::path& path,
                       const std::string& config_hash) {
  std::ofstream out = open_csv(path);
  const std::string tail = config_hash.empty() ? "" : "," + config_hash;
  out << "frame,defense,attack,quality_epe,robustness_epe" << (config_hash.empty() ? "" : ",config_hash") << '\n';
  for (const auto& r : records) {
    out << r.frame << ',' << r.defense << ',' << r.attack << ',' << optional_field(r.quality) << ','
        << optional_field(r.robustness) << tail << '\n';
  }
}

void write_table_csv(const std::vector<TableRow>& rows, const std::filesystem::path& path,
                     const std::string& config_hash) {
  std::ofstream out = open_csv(path);
  const std::string tail = config_hash.empty() ? "" : "," + config_hash;
  out << "defense,attack,mean_quality_epe,mean_robustness_epe,count" << (config_hash.empty() ? "" : ",config_hash")
      << '\n';
  for (const auto& r : rows) {
    out << r.defense << ',' << r.attack << ',' << optional_field(r.mean_quality) << ','
        << optional_field(r.mean_robustness) << ',' << r.count << tail << '\n';
  }
}

void write_scatter_csv(const std::vector<TableRow>& rows, const std::filesystem::path& path,
                       const std::string& config_hash) {
  std::ofstream out = open_csv(path);
  const std::string tail = config_hash.empty() ? "" : "," + config_hash;
  out << "quality,robustness,label" << (config_hash.empty() ? "" : ",config_hash") << '\n';
  for (const auto& r : rows) {
    if (!r.mean_quality || !r.mean_robustness) continue;
    out << format_number(*r.mean_quality) << ',' << format_number(*r.mean_robustness) << ',' << r.defense << '/'
        << r.attack << tail << '\n';
  }
}

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

}  // namespace flowpatch::metrics
