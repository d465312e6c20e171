// flowpatch command-line front end. Every subcommand takes --config file.json
// holding the same settings (flag names with '-' replaced by '_'); flags given
// on the command line override the file.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "flowpatch/attack/train.hpp"
#include "flowpatch/core/color.hpp"
#include "flowpatch/core/error.hpp"
#include "flowpatch/core/io.hpp"
#include "flowpatch/defense/defense.hpp"
#include "flowpatch/flow/horn_schunck.hpp"
#include "flowpatch/harness/dataset.hpp"
#include "flowpatch/harness/experiment.hpp"
#include "flowpatch/harness/synth.hpp"
#include "flowpatch/metrics/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace flowpatch;

namespace {

// Settings of one subcommand: the --config object overlaid with flags.
class Settings {
 public:
  std::string config_path;

  void load() {
    if (config_path.empty()) return;
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open config " + config_path);
    try {
      doc_ = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config " + config_path + ": " + e.what());
    }
    if (!doc_.is_object()) throw ConfigError("config " + config_path + " must hold a JSON object");
  }

  template <typename T>
  T get(const std::string& key, const std::optional<T>& flag, T fallback) const {
    if (flag) return *flag;
    if (!doc_.contains(key)) return fallback;
    try {
      return doc_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }

  template <typename T>
  T require(const std::string& key, const std::optional<T>& flag) const {
    if (!flag && !doc_.contains(key)) throw ConfigError("missing required setting '" + key + "'");
    return get<T>(key, flag, T{});
  }

 private:
  json doc_ = json::object();
};

struct EstimatorFlags {
  std::optional<double> alpha;
  std::optional<int> iters;
  std::optional<double> intensity_scale;

  void add(CLI::App* app) {
    app->add_option("--alpha", alpha, "Horn-Schunck smoothness weight");
    app->add_option("--iters", iters, "Horn-Schunck iterations");
    app->add_option("--intensity-scale", intensity_scale, "grayscale multiplier before differentiation");
  }
  flow::HornSchunckConfig resolve(const Settings& s) const {
    flow::HornSchunckConfig cfg;
    cfg.alpha = s.get("alpha", alpha, cfg.alpha);
    cfg.iterations = s.get("iters", iters, cfg.iterations);
    cfg.intensity_scale = s.get("intensity_scale", intensity_scale, cfg.intensity_scale);
    cfg.validate();
    return cfg;
  }
};

struct DefenseFlags {
  std::optional<std::string> defense;
  std::optional<int> k, o, r_telea;
  std::optional<double> t, b_lgs, s_ilp, t_ilp;

  void add(CLI::App* app, const std::string& help) {
    app->add_option("--defense", defense, help);
    app->add_option("--k", k, "block size K");
    app->add_option("--o", o, "block overlap O");
    app->add_option("--t", t, "block-mean threshold t");
    app->add_option("--b-lgs", b_lgs, "LGS smoothing factor");
    app->add_option("--s-ilp", s_ilp, "ILP re-evaluation scale");
    app->add_option("--t-ilp", t_ilp, "ILP re-evaluation threshold");
    app->add_option("--r-telea", r_telea, "Telea inpainting radius");
  }
  // Empty for "none".
  std::optional<defense::DefenseConfig> resolve(const Settings& s, const std::string& fallback) const {
    const std::string name = s.get("defense", defense, fallback);
    if (name == "none") return std::nullopt;
    defense::DefenseConfig cfg = defense::parse_defense_kind(name) == defense::DefenseKind::lgs
                                     ? defense::DefenseConfig::lgs()
                                     : defense::DefenseConfig::ilp();
    cfg.block_size = s.get("k", k, cfg.block_size);
    cfg.overlap = s.get("o", o, cfg.overlap);
    cfg.threshold = s.get("t", t, cfg.threshold);
    cfg.b_lgs = s.get("b_lgs", b_lgs, cfg.b_lgs);
    cfg.s_ilp = s.get("s_ilp", s_ilp, cfg.s_ilp);
    cfg.t_ilp = s.get("t_ilp", t_ilp, cfg.t_ilp);
    cfg.r_telea = s.get("r_telea", r_telea, cfg.r_telea);
    cfg.validate();
    return cfg;
  }
};

Dataset load_dir(const fs::path& dir) {
  harness::DatasetIndex index = harness::ingest_dataset(dir);
  if (index.report.empty_directory) std::cerr << "warning: " << dir << " is empty\n";
  for (const auto& issue : index.report.issues) std::cerr << "warning: " << issue << '\n';
  return harness::load_dataset(index);
}

int run_synth(const Settings& s, const std::optional<std::string>& out, const std::optional<int>& count,
              const std::optional<int>& height, const std::optional<int>& width,
              const std::optional<std::uint64_t>& seed) {
  harness::SynthSpec spec;
  spec.count = s.get("count", count, spec.count);
  spec.height = s.get("height", height, spec.height);
  spec.width = s.get("width", width, spec.width);
  spec.seed = s.get("seed", seed, spec.seed);
  const fs::path dir = s.require("out", out);
  harness::synth_dataset(spec, dir);
  std::cout << "wrote " << spec.count << " pairs to " << dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial patch attacks and detect-and-remove defenses for optical flow"};
  app.require_subcommand(1);

  Settings settings;
  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", settings.config_path, "JSON file with default settings");
  };

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic frame-pair dataset");
  add_config(synth);
  std::optional<std::string> synth_out;
  std::optional<int> synth_count, synth_height, synth_width;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--count", synth_count, "number of pairs");
  synth->add_option("--height", synth_height, "frame height");
  synth->add_option("--width", synth_width, "frame width");
  synth->add_option("--seed", synth_seed, "generator seed");

  // flow
  auto* flow_cmd = app.add_subcommand("flow", "estimate Horn-Schunck flow for one pair");
  add_config(flow_cmd);
  std::optional<std::string> flow_in, flow_id, flow_out, flow_viz;
  EstimatorFlags flow_est;
  flow_cmd->add_option("--in", flow_in, "directory holding NNNN_1.ppm and NNNN_2.ppm");
  flow_cmd->add_option("--id", flow_id, "pair id (default: the first pair)");
  flow_cmd->add_option("--out", flow_out, "output .flo file");
  flow_cmd->add_option("--viz", flow_viz, "optional color-coded PPM of the flow");
  flow_est.add(flow_cmd);

  // defend
  auto* defend_cmd = app.add_subcommand("defend", "apply LGS or ILP to every frame of a dataset");
  add_config(defend_cmd);
  std::optional<std::string> defend_in, defend_out;
  DefenseFlags defend_flags;
  defend_cmd->add_option("--in", defend_in, "dataset directory");
  defend_cmd->add_option("--out", defend_out, "output directory");
  defend_flags.add(defend_cmd, "lgs or ilp");

  // attack-train
  auto* train_cmd = app.add_subcommand("attack-train", "train an adversarial patch");
  add_config(train_cmd);
  std::optional<std::string> tr_data, tr_awareness, tr_optimizer, tr_box, tr_out, tr_log;
  std::optional<double> tr_lr, tr_alpha_penalty;
  std::optional<int> tr_steps, tr_side;
  std::optional<std::uint64_t> tr_seed;
  EstimatorFlags tr_est;
  DefenseFlags tr_def;
  train_cmd->add_option("--data", tr_data, "dataset directory");
  train_cmd->add_option("--awareness", tr_awareness, "vanilla, lgs or ilp");
  train_cmd->add_option("--optimizer", tr_optimizer, "ifgsm or sgd");
  train_cmd->add_option("--lr", tr_lr, "learning rate");
  train_cmd->add_option("--box", tr_box, "clip or cov");
  train_cmd->add_option("--steps", tr_steps, "optimization steps (default 300)");
  train_cmd->add_option("--seed", tr_seed, "seed");
  train_cmd->add_option("--side", tr_side, "patch side in pixels (default 24)");
  train_cmd->add_option("--alpha-penalty", tr_alpha_penalty, "weight of the smoothness penalty");
  train_cmd->add_option("--out", tr_out, "patch PPM (a .json sidecar is written next to it)");
  train_cmd->add_option("--log", tr_log, "per-step loss CSV");
  tr_est.add(train_cmd);
  tr_def.add(train_cmd, "defense parameters for aware training (kind follows --awareness)");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "quality and robustness of a (defended) pipeline");
  add_config(eval_cmd);
  std::optional<std::string> ev_data, ev_patch, ev_out;
  std::optional<std::uint64_t> ev_pose_seed;
  std::optional<bool> ev_quality;
  EstimatorFlags ev_est;
  DefenseFlags ev_def;
  eval_cmd->add_option("--data", ev_data, "dataset directory");
  eval_cmd->add_option("--patch", ev_patch, "patch PPM; omit for a clean evaluation");
  eval_cmd->add_option("--pose-seed", ev_pose_seed, "seed of the per-frame patch poses");
  eval_cmd->add_option("--quality", ev_quality, "compute quality against ground truth (true/false)");
  eval_cmd->add_option("--out", ev_out, "per-frame records CSV");
  ev_est.add(eval_cmd);
  ev_def.add(eval_cmd, "none, lgs or ilp");

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "train and evaluate a grid of attacks and defenses");
  add_config(exp_cmd);
  std::optional<std::string> exp_out;
  std::optional<int> exp_workers;
  exp_cmd->add_option("--out", exp_out, "output directory");
  exp_cmd->add_option("--workers", exp_workers, "parallel cells (FLOWPATCH_WORKERS caps this)");

  CLI11_PARSE(app, argc, argv);

  try {
    settings.load();
    if (synth->parsed()) return run_synth(settings, synth_out, synth_count, synth_height, synth_width, synth_seed);

    if (flow_cmd->parsed()) {
      const Dataset data = load_dir(settings.require("in", flow_in));
      const std::string id = settings.get("id", flow_id, std::string());
      const FramePair* pair = nullptr;
      for (const auto& p : data) {
        if (id.empty() || p.id == id) {
          pair = &p;
          break;
        }
      }
      if (!pair) throw ConfigError(id.empty() ? "no frame pair found" : "no pair with id " + id);
      const FlowField f = flow::horn_schunck(pair->first, pair->second, flow_est.resolve(settings));
      write_flo(f, settings.require("out", flow_out));
      const std::string viz = settings.get("viz", flow_viz, std::string());
      if (!viz.empty()) write_ppm(flow_to_color(f), viz);
      if (pair->ground_truth) std::cout << "epe " << metrics::epe(*pair->ground_truth, f) << '\n';
      return 0;
    }

    if (defend_cmd->parsed()) {
      const auto cfg = defend_flags.resolve(settings, "lgs");
      if (!cfg) throw ConfigError("defend needs --defense lgs or ilp");
      const Dataset data = load_dir(settings.require("in", defend_in));
      const fs::path out = settings.require("out", defend_out);
      fs::create_directories(out);
      for (const auto& p : data) {
        int index = 1;
        for (const Image* frame : {&p.first, &p.second}) {
          const auto result = defense::defend(*frame, *cfg);
          const std::string stem = p.id + "_" + std::to_string(index++);
          write_ppm(to_rgb(result.image), out / (stem + ".ppm"));
          write_mask_ppm(result.mask, out / (stem + "_mask.ppm"));
          std::cout << stem << " masked " << result.mask.count() << " of " << result.mask.pixels() << '\n';
        }
      }
      return 0;
    }

    if (train_cmd->parsed()) {
      // Desk-scale defaults, same as an experiment.
      const harness::ExperimentConfig desk;
      attack::AttackConfig acfg;
      acfg.steps = desk.steps;
      acfg.patch_side = desk.patch_side;
      acfg.awareness = attack::parse_awareness(settings.get("awareness", tr_awareness, std::string("vanilla")));
      acfg.optimizer = attack::parse_optimizer(settings.get("optimizer", tr_optimizer, std::string("ifgsm")));
      acfg.learning_rate = settings.get("lr", tr_lr, acfg.learning_rate);
      acfg.box = attack::parse_box_mode(settings.get("box", tr_box, std::string("clip")));
      acfg.steps = settings.get("steps", tr_steps, acfg.steps);
      acfg.seed = settings.get("seed", tr_seed, acfg.seed);
      acfg.patch_side = settings.get("side", tr_side, acfg.patch_side);
      acfg.alpha_penalty = settings.get("alpha_penalty", tr_alpha_penalty, acfg.alpha_penalty);
      std::optional<defense::DefenseConfig> def;
      if (acfg.awareness != attack::Awareness::vanilla) {
        def = tr_def.resolve(settings, attack::to_string(acfg.awareness));
        if (!def || def->kind != (acfg.awareness == attack::Awareness::lgs ? defense::DefenseKind::lgs
                                                                            : defense::DefenseKind::ilp)) {
          throw ConfigError("--defense must match --awareness for aware training");
        }
      }
      const Dataset data = load_dir(settings.require("data", tr_data));
      const flow::HornSchunck estimator(tr_est.resolve(settings));
      const auto result = attack::train_patch(estimator, def, data, acfg);
      harness::save_trained_patch(result, acfg, settings.require("out", tr_out), settings.get("log", tr_log, std::string()));
      std::cout << "final loss " << result.log.back().loss << '\n';
      return 0;
    }

    if (eval_cmd->parsed()) {
      const auto def = ev_def.resolve(settings, "none");
      const Dataset data = load_dir(settings.require("data", ev_data));
      const flow::HornSchunck estimator(ev_est.resolve(settings));
      std::optional<metrics::PatchInput> patch;
      const std::string patch_path = settings.get("patch", ev_patch, std::string());
      if (!patch_path.empty()) patch = metrics::PatchInput{read_ppm(patch_path), fs::path(patch_path).stem().string()};
      metrics::EvalOptions opts;
      opts.quality = settings.get("quality", ev_quality, true);
      opts.pose_seed = settings.get("pose_seed", ev_pose_seed, std::uint64_t{1});
      const auto summary = metrics::evaluate_pipeline(estimator, def, patch, data, opts);
      const std::string out = settings.get("out", ev_out, std::string());
      if (!out.empty()) metrics::write_records_csv(summary.records, out);
      if (summary.mean_quality) std::cout << "quality_epe " << metrics::format_number(*summary.mean_quality) << '\n';
      if (summary.mean_robustness) {
        std::cout << "robustness_epe " << metrics::format_number(*summary.mean_robustness) << '\n';
      }
      return 0;
    }

    if (exp_cmd->parsed()) {
      harness::ExperimentConfig cfg =
          settings.config_path.empty() ? harness::ExperimentConfig{} : harness::load_experiment(settings.config_path);
      if (cfg.cells.empty()) cfg.cells = harness::default_cells();
      if (exp_out) cfg.output_dir = *exp_out;
      if (exp_workers) cfg.workers = *exp_workers;
      const auto result = harness::run_experiment(cfg);
      int ok = 0, div = 0, failed = 0;
      for (const auto& o : result.outcomes) {
        if (o.status == "ok") ++ok;
        else if (o.status == "div") ++div;
        else {
          ++failed;
          std::cerr << "cell " << o.cell.label() << " seed " << o.seed << " failed: " << o.message << '\n';
        }
      }
      std::cout << "cells ok " << ok << ", diverged " << div << ", failed " << failed << "; results in "
                << cfg.output_dir.string() << '\n';
      return result.hard_failure ? 1 : 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
