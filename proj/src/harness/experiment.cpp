#include "flowpatch/harness/experiment.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "flowpatch/core/error.hpp"
#include "flowpatch/core/io.hpp"
#include "flowpatch/harness/dataset.hpp"
#include "flowpatch/metrics/metrics.hpp"

namespace flowpatch::harness {

using nlohmann::json;
using metrics::format_number;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_into(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

DatasetSource source_from_json(const json& doc, const std::string& where) {
  check_keys(doc, {"path", "synthetic"}, where);
  DatasetSource src;
  if (doc.contains("path")) src.path = doc.at("path").get<std::string>();
  if (doc.contains("synthetic")) {
    const json& s = doc.at("synthetic");
    check_keys(s, {"count", "height", "width", "seed"}, where + ".synthetic");
    read_into(s, "count", src.synthetic.count, where);
    read_into(s, "height", src.synthetic.height, where);
    read_into(s, "width", src.synthetic.width, where);
    read_into(s, "seed", src.synthetic.seed, where);
  }
  if (src.path && doc.contains("synthetic")) throw ConfigError(where + " sets both path and synthetic");
  return src;
}

json source_to_json(const DatasetSource& src) {
  if (src.path) return {{"path", src.path->string()}};
  const SynthSpec& s = src.synthetic;
  return {{"synthetic", {{"count", s.count}, {"height", s.height}, {"width", s.width}, {"seed", s.seed}}}};
}

defense::DefenseConfig defense_from_json(const json& doc, defense::DefenseConfig cfg, const std::string& where) {
  check_keys(doc, {"block_size", "overlap", "threshold", "b_lgs", "s_ilp", "t_ilp", "r_telea"}, where);
  read_into(doc, "block_size", cfg.block_size, where);
  read_into(doc, "overlap", cfg.overlap, where);
  read_into(doc, "threshold", cfg.threshold, where);
  read_into(doc, "b_lgs", cfg.b_lgs, where);
  read_into(doc, "s_ilp", cfg.s_ilp, where);
  read_into(doc, "t_ilp", cfg.t_ilp, where);
  read_into(doc, "r_telea", cfg.r_telea, where);
  return cfg;
}

json defense_to_json(const defense::DefenseConfig& c) {
  return {{"block_size", c.block_size}, {"overlap", c.overlap}, {"threshold", c.threshold}, {"b_lgs", c.b_lgs},
          {"s_ilp", c.s_ilp},           {"t_ilp", c.t_ilp},     {"r_telea", c.r_telea}};
}

AttackCell cell_from_json(const json& doc, const std::string& where) {
  check_keys(doc, {"awareness", "optimizer", "learning_rate", "box"}, where);
  AttackCell cell;
  if (doc.contains("awareness")) cell.awareness = attack::parse_awareness(doc.at("awareness").get<std::string>());
  if (doc.contains("optimizer")) cell.optimizer = attack::parse_optimizer(doc.at("optimizer").get<std::string>());
  read_into(doc, "learning_rate", cell.learning_rate, where);
  if (doc.contains("box")) cell.box = attack::parse_box_mode(doc.at("box").get<std::string>());
  return cell;
}

std::vector<AttackCell> expand_grid(const json& grid) {
  check_keys(grid, {"awareness", "optimizer", "learning_rates", "box"}, "attack_grid");
  const auto strings = [&](const char* key, std::vector<std::string> fallback) {
    return grid.contains(key) ? grid.at(key).get<std::vector<std::string>>() : fallback;
  };
  const auto awareness = strings("awareness", {"vanilla", "lgs", "ilp"});
  const auto optimizers = strings("optimizer", {"ifgsm"});
  const auto boxes = strings("box", {"clip"});
  // Default rates: I-FGSM 1, 0.1, 0.01; SGD 10, 100.
  std::map<std::string, std::vector<double>> rates{{"ifgsm", {1.0, 0.1, 0.01}}, {"sgd", {10.0, 100.0}}};
  if (grid.contains("learning_rates")) {
    for (const auto& [opt, list] : grid.at("learning_rates").items()) {
      (void)attack::parse_optimizer(opt);
      rates[opt] = list.get<std::vector<double>>();
    }
  }
  std::vector<AttackCell> cells;
  for (const auto& a : awareness) {
    for (const auto& o : optimizers) {
      for (double lr : rates.at(o)) {
        for (const auto& b : boxes) {
          cells.push_back({attack::parse_awareness(a), attack::parse_optimizer(o), lr, attack::parse_box_mode(b)});
        }
      }
    }
  }
  return cells;
}

Dataset load_source(const DatasetSource& src, const char* what) {
  if (!src.path) return synth_pairs(src.synthetic);
  DatasetIndex index = ingest_dataset(*src.path);
  for (const auto& issue : index.report.issues) std::cerr << what << " data: " << issue << '\n';
  if (index.report.empty_directory) std::cerr << what << " data: directory " << *src.path << " is empty\n";
  return load_dataset(index);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

struct TaskResult {
  CellOutcome outcome;
  std::vector<metrics::EvalRecord> records;
};

std::string cell_columns(const AttackCell& c) {
  return c.label() + ',' + attack::to_string(c.awareness) + ',' + attack::to_string(c.optimizer) + ',' +
         format_number(c.learning_rate) + ',' + attack::to_string(c.box);
}

}  // namespace

void save_trained_patch(const attack::TrainResult& trained, const attack::AttackConfig& acfg,
                        const std::filesystem::path& patch_path, const std::filesystem::path& log_path,
                        const std::string& config_hash) {
  write_ppm(trained.patch.values(), patch_path);
  json sidecar = {{"side", trained.patch.side()},
                  {"box", attack::to_string(acfg.box)},
                  {"awareness", attack::to_string(acfg.awareness)},
                  {"optimizer", attack::to_string(acfg.optimizer)},
                  {"learning_rate", acfg.learning_rate},
                  {"steps", acfg.steps},
                  {"alpha_penalty", acfg.alpha_penalty},
                  {"seed", acfg.seed}};
  if (!config_hash.empty()) sidecar["config_hash"] = config_hash;
  open_out(std::filesystem::path(patch_path).replace_extension(".json")) << sidecar.dump(2) << '\n';
  if (log_path.empty()) return;
  std::ofstream log = open_out(log_path);
  log << "step,frame,loss,acs,penalty\n";
  for (const auto& r : trained.log) {
    log << r.step << ',' << r.frame << ',' << format_number(r.loss) << ',' << format_number(r.acs) << ','
        << format_number(r.penalty) << '\n';
  }
}

std::string AttackCell::label() const {
  return attack::to_string(awareness) + "-" + attack::to_string(optimizer) + "-" + format_number(learning_rate) + "-" +
         attack::to_string(box);
}

std::vector<AttackCell> default_cells() {
  return {{attack::Awareness::vanilla, attack::OptimizerKind::ifgsm, 0.01, attack::BoxMode::clip},
          {attack::Awareness::lgs, attack::OptimizerKind::ifgsm, 0.01, attack::BoxMode::clip},
          {attack::Awareness::ilp, attack::OptimizerKind::ifgsm, 0.01, attack::BoxMode::clip}};
}

void ExperimentConfig::validate() const {
  estimator.validate();
  lgs.validate();
  ilp.validate();
  if (lgs.kind != defense::DefenseKind::lgs || ilp.kind != defense::DefenseKind::ilp) {
    throw ConfigError("defense parameter blocks have the wrong kind");
  }
  if (defenses.empty()) throw ConfigError("experiment needs at least one defense (\"none\" counts)");
  for (const auto& d : defenses) {
    if (d != "none" && d != "lgs" && d != "ilp") throw ConfigError("unknown defense '" + d + "'");
  }
  if (seeds.empty()) throw ConfigError("experiment needs at least one seed");
  for (const auto& cell : cells) {
    attack::AttackConfig acfg{cell.awareness, cell.optimizer, cell.learning_rate, cell.box,
                              steps,          alpha_penalty,  0,                  patch_side};
    acfg.validate();
  }
}

std::optional<defense::DefenseConfig> ExperimentConfig::defense_for(const std::string& name) const {
  if (name == "lgs") return lgs;
  if (name == "ilp") return ilp;
  return std::nullopt;
}

std::optional<defense::DefenseConfig> ExperimentConfig::training_defense(attack::Awareness awareness) const {
  if (awareness == attack::Awareness::lgs) return lgs;
  if (awareness == attack::Awareness::ilp) return ilp;
  return std::nullopt;
}

ExperimentConfig experiment_from_json(const json& doc) {
  check_keys(doc,
             {"train_data", "eval_data", "estimator", "defenses", "lgs", "ilp", "cells", "attack_grid", "seeds",
              "steps", "alpha_penalty", "patch_side", "pose_seed", "workers", "output_dir"},
             "experiment config");
  ExperimentConfig cfg;
  try {
    if (doc.contains("train_data")) cfg.train_data = source_from_json(doc.at("train_data"), "train_data");
    if (doc.contains("eval_data")) cfg.eval_data = source_from_json(doc.at("eval_data"), "eval_data");
    if (doc.contains("estimator")) {
      const json& e = doc.at("estimator");
      check_keys(e, {"alpha", "iterations", "intensity_scale"}, "estimator");
      read_into(e, "alpha", cfg.estimator.alpha, "estimator");
      read_into(e, "iterations", cfg.estimator.iterations, "estimator");
      read_into(e, "intensity_scale", cfg.estimator.intensity_scale, "estimator");
    }
    read_into(doc, "defenses", cfg.defenses, "experiment");
    if (doc.contains("lgs")) cfg.lgs = defense_from_json(doc.at("lgs"), cfg.lgs, "lgs");
    if (doc.contains("ilp")) cfg.ilp = defense_from_json(doc.at("ilp"), cfg.ilp, "ilp");
    if (doc.contains("cells") && doc.contains("attack_grid")) {
      throw ConfigError("give either cells or attack_grid, not both");
    }
    if (doc.contains("cells")) {
      for (const auto& c : doc.at("cells")) cfg.cells.push_back(cell_from_json(c, "cells[]"));
    } else if (doc.contains("attack_grid")) {
      cfg.cells = expand_grid(doc.at("attack_grid"));
    } else {
      cfg.cells = default_cells();
    }
    read_into(doc, "seeds", cfg.seeds, "experiment");
    read_into(doc, "steps", cfg.steps, "experiment");
    read_into(doc, "alpha_penalty", cfg.alpha_penalty, "experiment");
    read_into(doc, "patch_side", cfg.patch_side, "experiment");
    read_into(doc, "pose_seed", cfg.pose_seed, "experiment");
    read_into(doc, "workers", cfg.workers, "experiment");
    if (doc.contains("output_dir")) cfg.output_dir = doc.at("output_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json cells = json::array();
  for (const auto& c : cfg.cells) {
    cells.push_back({{"awareness", attack::to_string(c.awareness)},
                     {"optimizer", attack::to_string(c.optimizer)},
                     {"learning_rate", c.learning_rate},
                     {"box", attack::to_string(c.box)}});
  }
  json doc = {{"train_data", source_to_json(cfg.train_data)},
              {"estimator",
               {{"alpha", cfg.estimator.alpha},
                {"iterations", cfg.estimator.iterations},
                {"intensity_scale", cfg.estimator.intensity_scale}}},
              {"defenses", cfg.defenses},
              {"lgs", defense_to_json(cfg.lgs)},
              {"ilp", defense_to_json(cfg.ilp)},
              {"cells", cells},
              {"seeds", cfg.seeds},
              {"steps", cfg.steps},
              {"alpha_penalty", cfg.alpha_penalty},
              {"patch_side", cfg.patch_side},
              {"pose_seed", cfg.pose_seed},
              {"workers", cfg.workers},
              {"output_dir", cfg.output_dir.string()}};
  if (cfg.eval_data) doc["eval_data"] = source_to_json(*cfg.eval_data);
  return doc;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return experiment_from_json(doc);
}

std::string config_hash(const ExperimentConfig& cfg) {
  json doc = to_json(cfg);
  // Where and how fast a run happens does not change its results.
  doc.erase("output_dir");
  doc.erase("workers");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : doc.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int resolve_workers(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("FLOWPATCH_WORKERS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::max(1, n);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::string hash = config_hash(cfg);
  const Dataset train = load_source(cfg.train_data, "train");
  const Dataset eval = cfg.eval_data ? load_source(*cfg.eval_data, "eval") : train;
  if (train.empty()) throw ConfigError("training dataset is empty");
  if (eval.empty()) throw ConfigError("evaluation dataset is empty");
  const flow::HornSchunck estimator(cfg.estimator);
  const bool has_gt = std::all_of(eval.begin(), eval.end(), [](const FramePair& p) { return p.ground_truth; });

  std::filesystem::create_directories(cfg.output_dir);
  ExperimentResult result;
  std::vector<metrics::EvalRecord> clean_records;
  if (has_gt) {
    for (const auto& d : cfg.defenses) {
      metrics::EvalOptions opts;
      opts.defense_label = d;
      auto summary = metrics::evaluate_pipeline(estimator, cfg.defense_for(d), std::nullopt, eval, opts);
      result.quality[d] = *summary.mean_quality;
      clean_records.insert(clean_records.end(), summary.records.begin(), summary.records.end());
    }
  } else {
    std::cerr << "evaluation data lacks ground truth on some frames; quality is not reported\n";
  }

  struct Task {
    AttackCell cell;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const auto& cell : cfg.cells) {
    for (auto seed : cfg.seeds) tasks.push_back({cell, seed});
  }
  std::vector<TaskResult> results(tasks.size());

  const auto run_task = [&](std::size_t i) {
    const Task& task = tasks[i];
    TaskResult& out = results[i];
    out.outcome.cell = task.cell;
    out.outcome.seed = task.seed;
    const attack::AttackConfig acfg{task.cell.awareness, task.cell.optimizer, task.cell.learning_rate, task.cell.box,
                                    cfg.steps,           cfg.alpha_penalty,   task.seed,               cfg.patch_side};
    const std::string label = task.cell.label() + "-s" + std::to_string(task.seed);
    try {
      const attack::TrainResult trained =
          attack::train_patch(estimator, cfg.training_defense(task.cell.awareness), train, acfg);
      const auto dir = cfg.output_dir / "cells" / task.cell.label() / ("seed" + std::to_string(task.seed));
      std::filesystem::create_directories(dir);
      save_trained_patch(trained, acfg, dir / "patch.ppm", dir / "loss.csv", hash);
      const metrics::PatchInput patch{trained.patch.values(), label};
      for (const auto& d : cfg.defenses) {
        metrics::EvalOptions opts;
        opts.quality = false;
        opts.pose_seed = cfg.pose_seed;
        opts.defense_label = d;
        auto summary = metrics::evaluate_pipeline(estimator, cfg.defense_for(d), patch, eval, opts);
        out.outcome.robustness[d] = *summary.mean_robustness;
        out.records.insert(out.records.end(), summary.records.begin(), summary.records.end());
      }
      out.outcome.status = "ok";
    } catch (const DivergenceError& e) {
      out.outcome.status = "div";
      out.outcome.message = e.what();
      out.outcome.robustness.clear();
      out.records.clear();
    } catch (const std::exception& e) {
      out.outcome.status = "fail";
      out.outcome.message = e.what();
      out.outcome.robustness.clear();
      out.records.clear();
    }
  };

  const int workers = std::min<int>(resolve_workers(cfg.workers), static_cast<int>(tasks.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        // Cells already run in parallel; keep the kernels single-threaded.
        omp_set_num_threads(1);
        for (std::size_t i = next++; i < tasks.size(); i = next++) run_task(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  // Aggregation after the join, in task order.
  const auto tail = "," + hash + "\n";
  {
    std::ofstream q = open_out(cfg.output_dir / "quality.csv");
    q << "defense,quality_epe,config_hash\n";
    for (const auto& d : cfg.defenses) {
      if (result.quality.contains(d)) q << d << ',' << format_number(result.quality.at(d)) << tail;
    }
  }
  std::vector<metrics::EvalRecord> all_records = clean_records;
  for (const auto& r : results) all_records.insert(all_records.end(), r.records.begin(), r.records.end());
  metrics::write_records_csv(all_records, cfg.output_dir / "records.csv", hash);

  {
    std::ofstream ps = open_out(cfg.output_dir / "per_seed.csv");
    ps << "cell,awareness,optimizer,learning_rate,box,seed,defense,status,robustness_epe,config_hash\n";
    for (const auto& r : results) {
      const auto& o = r.outcome;
      for (const auto& d : cfg.defenses) {
        ps << cell_columns(o.cell) << ',' << o.seed << ',' << d << ',' << o.status << ','
           << (o.robustness.contains(d) ? format_number(o.robustness.at(d)) : "") << tail;
      }
      if (o.status == "fail") result.hard_failure = true;
      result.outcomes.push_back(o);
    }
  }

  struct Averaged {
    AttackCell cell;
    std::string defense;
    int ok = 0, div = 0, fail = 0;
    double sum = 0.0;
  };
  std::vector<Averaged> averaged;
  for (const auto& cell : cfg.cells) {
    for (const auto& d : cfg.defenses) {
      Averaged a{cell, d};
      for (const auto& r : results) {
        const auto& o = r.outcome;
        if (o.cell.label() != cell.label()) continue;
        if (o.status == "ok") {
          ++a.ok;
          a.sum += o.robustness.at(d);
        } else if (o.status == "div") {
          ++a.div;
        } else {
          ++a.fail;
        }
      }
      averaged.push_back(a);
    }
  }
  {
    std::ofstream sa = open_out(cfg.output_dir / "seed_averaged.csv");
    sa << "cell,awareness,optimizer,learning_rate,box,defense,seeds_ok,seeds_div,seeds_failed,mean_robustness_epe,"
          "config_hash\n";
    for (const auto& a : averaged) {
      sa << cell_columns(a.cell) << ',' << a.defense << ',' << a.ok << ',' << a.div << ',' << a.fail << ','
         << (a.ok > 0 ? format_number(a.sum / a.ok) : (a.div > 0 ? "div" : "")) << tail;
    }
  }

  std::vector<metrics::TableRow> headline_rows;
  {
    std::ofstream hl = open_out(cfg.output_dir / "headline.csv");
    hl << "defense,attack,cell,mean_robustness_epe,quality_epe,config_hash\n";
    for (const auto& d : cfg.defenses) {
      for (auto aw : {attack::Awareness::vanilla, attack::Awareness::lgs, attack::Awareness::ilp}) {
        const Averaged* best = nullptr;
        for (const auto& a : averaged) {
          if (a.defense != d || a.cell.awareness != aw || a.ok == 0) continue;
          if (!best || a.sum / a.ok > best->sum / best->ok) best = &a;
        }
        if (!best) continue;
        const double rob = best->sum / best->ok;
        const std::optional<double> q =
            result.quality.contains(d) ? std::optional<double>(result.quality.at(d)) : std::nullopt;
        hl << d << ',' << attack::to_string(aw) << ',' << best->cell.label() << ',' << format_number(rob) << ','
           << (q ? format_number(*q) : "") << tail;
        headline_rows.push_back({d, attack::to_string(aw), q, rob, static_cast<std::size_t>(best->ok)});
      }
    }
  }
  metrics::write_scatter_csv(headline_rows, cfg.output_dir / "scatter.csv", hash);
  return result;
}

}  // namespace flowpatch::harness
