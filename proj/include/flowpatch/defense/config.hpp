#pragma once

#include <string>
#include <string_view>

namespace flowpatch::defense {

enum class DefenseKind { lgs, ilp };

std::string to_string(DefenseKind kind);
/// Accepts "lgs" / "ilp"; throws ConfigError otherwise.
DefenseKind parse_defense_kind(std::string_view text);

/// Detection and removal parameters. Defaults are the tuned values for both
/// defenses: K=16, O=8, t=0.15, t_ilp=0.5, s_ilp=15, b_lgs=15, r_telea=5.
struct DefenseConfig {
  DefenseKind kind = DefenseKind::lgs;
  int block_size = 16;     // K
  int overlap = 8;         // O
  double threshold = 0.15; // t, compared to the block mean of the normalized map
  double b_lgs = 15.0;
  double s_ilp = 15.0;
  double t_ilp = 0.5;
  int r_telea = 5;

  /// Throws ConfigError unless 0 < O < K, t and t_ilp in [0,1], b_lgs and
  /// s_ilp > 0, and r_telea >= 1.
  void validate() const;

  static DefenseConfig lgs() { return {}; }
  static DefenseConfig ilp() {
    DefenseConfig cfg;
    cfg.kind = DefenseKind::ilp;
    return cfg;
  }
};

}  // namespace flowpatch::defense
