#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "tbnorm/data.hpp"
#include "tbnorm/train.hpp"

namespace tbnorm {

struct RunConfig {
  std::string experiment = "cil-run";
  TrainConfig train{};
  SyntheticConfig data{};
  /// Directory holding train/t10k IDX files; empty selects the synthetic stream.
  std::string idx_dir;
  std::string out = "runs/out";
  std::vector<std::uint64_t> seeds{1, 2, 3};
  /// Batches accumulated by the Gaussian toy.
  std::size_t toy_batches = 2000;
  /// Monte Carlo batches per grid point of the bias check.
  std::size_t bias_batches = 100000;
  /// Worker threads for seed-level parallelism; 0 picks the hardware count.
  std::size_t threads = 0;

  bool operator==(const RunConfig&) const = default;
};

/// Text form: one `key = value` per line, `#` starts a comment. Keys mirror
/// the command-line flags (norm, groups, bc, bp, tasks, bessel, seeds, out,
/// ...). Unknown keys and malformed values throw ConfigError.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
std::string emit_config(const RunConfig& cfg);

/// Applies one key/value pair.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Checks cross-field constraints, e.g. that TBBN's split factor is integral
/// for every task. Throws ConfigError.
void validate(const RunConfig& cfg);

nlohmann::json to_json(const RunConfig& cfg);

}  // namespace tbnorm
