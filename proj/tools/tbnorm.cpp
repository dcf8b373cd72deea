#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tbnorm/config.hpp"
#include "tbnorm/errors.hpp"
#include "tbnorm/experiments.hpp"
#include "tbnorm/gradcheck.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> norm;
  std::optional<std::size_t> groups, bc, bp, tasks;
  std::optional<std::string> out, bessel;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "Key-value config file; flags override it");
  sub->add_option("--seed", f.seed, "Single seed (replaces the seed list)");
  sub->add_option("--norm", f.norm, "Normalization: bn|gn|cn|tbbn");
  sub->add_option("--groups", f.groups, "Group count for GN/CN");
  sub->add_option("--bc", f.bc, "Current-task rows per batch");
  sub->add_option("--bp", f.bp, "Memory rows per batch");
  sub->add_option("--tasks", f.tasks, "Number of tasks");
  sub->add_option("--out", f.out, "Output directory");
  sub->add_option("--bessel", f.bessel, "Bessel factor on the running variance: on|off");
}

tbnorm::RunConfig resolve(const std::string& experiment, const CommonFlags& f) {
  tbnorm::RunConfig cfg;
  cfg.out = "runs/" + experiment;
  if (!f.config.empty()) cfg = tbnorm::load_config(f.config, cfg);
  cfg.experiment = experiment;
  auto set = [&](const char* key, const auto& v) {
    if (!v) return;
    std::ostringstream s;
    s << *v;
    tbnorm::apply_setting(cfg, key, s.str());
  };
  set("seed", f.seed);
  set("norm", f.norm);
  set("groups", f.groups);
  set("bc", f.bc);
  set("bp", f.bp);
  set("tasks", f.tasks);
  set("out", f.out);
  set("bessel", f.bessel);
  tbnorm::validate(cfg);
  return cfg;
}

std::vector<std::size_t> parse_shape(const std::string& text) {
  std::vector<std::size_t> dims;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || v == 0) {
      throw tbnorm::ConfigError("--shape: expected N,C,H,W positive integers, got '" + text + "'");
    }
    dims.push_back(v);
  }
  if (dims.size() != 4) throw tbnorm::ConfigError("--shape: expected 4 extents, got '" + text + "'");
  return dims;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Normalization layers and class-incremental experiments"};
  app.require_subcommand(1);

  const std::vector<std::string> experiments = {"toy-gaussian", "bias-check", "cil-run",
                                                "ablation", "oracle"};
  std::vector<CommonFlags> flags(experiments.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < experiments.size(); ++i) {
    auto* sub = app.add_subcommand(experiments[i]);
    add_common(sub, flags[i]);
    subs.push_back(sub);
  }

  std::string layer = "tbbn", shape = "12,6,3,3";
  std::size_t gc_task = 1, gc_bc = 0, gc_bp = 0, gc_groups = 2;
  std::uint64_t gc_seed = 0;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of one layer");
  gc->add_option("--layer", layer, "bn|gn|cn|tbbn");
  gc->add_option("--shape", shape, "N,C,H,W");
  gc->add_option("--t", gc_task, "Task index (TBBN)");
  gc->add_option("--bc", gc_bc, "Current rows (TBBN)");
  gc->add_option("--bp", gc_bp, "Memory rows (TBBN)");
  gc->add_option("--groups", gc_groups, "Groups (GN/CN)");
  gc->add_option("--seed", gc_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (gc->parsed()) {
      const auto dims = parse_shape(shape);
      tbnorm::LayerCheckSpec spec;
      spec.layer = tbnorm::parse_norm_kind(layer);
      spec.shape = {dims[0], dims[1], dims[2], dims[3]};
      spec.task = gc_task;
      spec.current = gc_bc;
      spec.exemplar = gc_bp;
      spec.groups = gc_groups;
      spec.seed = gc_seed;
      if (spec.layer == tbnorm::NormKind::tbbn && gc_bc + gc_bp != 0 &&
          gc_bc + gc_bp != dims[0]) {
        throw tbnorm::ConfigError("--bc + --bp must equal N");
      }
      const auto report = tbnorm::check_layer(spec);
      std::cout << tbnorm::to_json(report).dump(2) << '\n';
      return report.passed ? 0 : 1;
    }
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      const tbnorm::RunConfig cfg = resolve(experiments[i], flags[i]);
      const auto summary = tbnorm::run_experiment(cfg);
      std::cout << summary.dump(2) << '\n';
    }
    return 0;
  } catch (const tbnorm::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
