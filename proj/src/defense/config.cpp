#include "flowpatch/defense/config.hpp"

#include "flowpatch/core/error.hpp"

namespace flowpatch::defense {

std::string to_string(DefenseKind kind) { return kind == DefenseKind::lgs ? "lgs" : "ilp"; }

DefenseKind parse_defense_kind(std::string_view text) {
  if (text == "lgs") return DefenseKind::lgs;
  if (text == "ilp") return DefenseKind::ilp;
  throw ConfigError("unknown defense '" + std::string(text) + "' (expected lgs or ilp)");
}

void DefenseConfig::validate() const {
  if (!(overlap > 0 && overlap < block_size)) {
    throw ConfigError("defense needs 0 < O < K, got K=" + std::to_string(block_size) +
                      " O=" + std::to_string(overlap));
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("defense threshold t must lie in [0,1]");
  if (!(t_ilp >= 0.0 && t_ilp <= 1.0)) throw ConfigError("t_ilp must lie in [0,1]");
  if (!(b_lgs > 0.0)) throw ConfigError("b_lgs must be positive");
  if (!(s_ilp > 0.0)) throw ConfigError("s_ilp must be positive");
  if (r_telea < 1) throw ConfigError("r_telea must be at least 1");
}

}  // namespace flowpatch::defense
