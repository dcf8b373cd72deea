#include "tbnorm/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tbnorm/errors.hpp"

namespace tbnorm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected on|off, got '" + v + "'");
}

std::vector<std::uint64_t> to_list(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_u64(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* on_off(bool b) { return b ? "on" : "off"; }

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  TrainConfig& t = cfg.train;
  SyntheticConfig& d = cfg.data;
  const std::string& v = value;
  if (key == "experiment") cfg.experiment = v;
  else if (key == "out") cfg.out = v;
  else if (key == "idx_dir") cfg.idx_dir = v;
  else if (key == "seeds") cfg.seeds = to_list(key, v);
  else if (key == "seed") cfg.seeds = {to_u64(key, v)};
  else if (key == "threads") cfg.threads = to_size(key, v);
  else if (key == "toy_batches") cfg.toy_batches = to_size(key, v);
  else if (key == "bias_batches") cfg.bias_batches = to_size(key, v);
  else if (key == "norm") t.norm = parse_norm_kind(v);
  else if (key == "groups") t.groups = to_size(key, v);
  else if (key == "bc") t.batch_current = to_size(key, v);
  else if (key == "bp") t.batch_exemplar = to_size(key, v);
  else if (key == "bessel") t.bessel = to_bool(key, v);
  else if (key == "lr") t.learning_rate = to_double(key, v);
  else if (key == "weight_decay") t.weight_decay = to_double(key, v);
  else if (key == "epochs") t.epochs = to_size(key, v);
  else if (key == "memory") t.memory_capacity = to_size(key, v);
  else if (key == "oracle_epochs") t.oracle_epochs = to_size(key, v);
  else if (key == "train_seed") t.seed = to_u64(key, v);
  else if (key == "balanced_stats_train") t.ablation.balanced_stats_train = to_bool(key, v);
  else if (key == "balanced_stats_test") t.ablation.balanced_stats_test = to_bool(key, v);
  else if (key == "balanced_affine") t.ablation.balanced_affine = to_bool(key, v);
  else if (key == "ablation_case") {
    const std::size_t c = to_size(key, v);
    if (c < 1 || c > 4) throw ConfigError("ablation_case: expected 1..4, got '" + v + "'");
    t.ablation = AblationFlags::ablation_case(static_cast<int>(c));
  }
  else if (key == "tasks") d.tasks = to_size(key, v);
  else if (key == "classes_per_task") d.classes_per_task = to_size(key, v);
  else if (key == "dim") d.dim = to_size(key, v);
  else if (key == "samples_per_class") d.samples_per_class = to_size(key, v);
  else if (key == "scale") d.scale = to_double(key, v);
  else if (key == "noise") d.noise = to_double(key, v);
  else if (key == "task_dims") d.task_dims = to_size(key, v);
  else if (key == "train_fraction") d.train_fraction = to_double(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::stringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string emit_config(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  const SyntheticConfig& d = cfg.data;
  std::ostringstream o;
  std::string seeds;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    seeds += (i ? "," : "") + std::to_string(cfg.seeds[i]);
  }
  o << "experiment = " << cfg.experiment << '\n'
    << "out = " << cfg.out << '\n'
    << "idx_dir = " << cfg.idx_dir << '\n'
    << "seeds = " << seeds << '\n'
    << "threads = " << cfg.threads << '\n'
    << "toy_batches = " << cfg.toy_batches << '\n'
    << "bias_batches = " << cfg.bias_batches << '\n'
    << "norm = " << to_string(t.norm) << '\n'
    << "groups = " << t.groups << '\n'
    << "bc = " << t.batch_current << '\n'
    << "bp = " << t.batch_exemplar << '\n'
    << "bessel = " << on_off(t.bessel) << '\n'
    << "lr = " << fmt(t.learning_rate) << '\n'
    << "weight_decay = " << fmt(t.weight_decay) << '\n'
    << "epochs = " << t.epochs << '\n'
    << "memory = " << t.memory_capacity << '\n'
    << "oracle_epochs = " << t.oracle_epochs << '\n'
    << "train_seed = " << t.seed << '\n'
    << "balanced_stats_train = " << on_off(t.ablation.balanced_stats_train) << '\n'
    << "balanced_stats_test = " << on_off(t.ablation.balanced_stats_test) << '\n'
    << "balanced_affine = " << on_off(t.ablation.balanced_affine) << '\n'
    << "tasks = " << d.tasks << '\n'
    << "classes_per_task = " << d.classes_per_task << '\n'
    << "dim = " << d.dim << '\n'
    << "samples_per_class = " << d.samples_per_class << '\n'
    << "scale = " << fmt(d.scale) << '\n'
    << "noise = " << fmt(d.noise) << '\n'
    << "task_dims = " << d.task_dims << '\n'
    << "train_fraction = " << fmt(d.train_fraction) << '\n';
  return o.str();
}

void validate(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  if (cfg.seeds.empty()) throw ConfigError("at least one seed is required");
  if (t.batch_current == 0) throw ConfigError("bc must be positive");
  if (cfg.data.tasks == 0) throw ConfigError("tasks must be positive");
  if (t.norm == NormKind::tbbn) {
    if (t.batch_exemplar == 0 && cfg.data.tasks > 1) {
      throw ConfigError("tbbn needs bp > 0 when tasks > 1");
    }
    for (std::size_t task = 2; task <= cfg.data.tasks; ++task) {
      if ((t.batch_current * (task - 1)) % t.batch_exemplar != 0) {
        throw ConfigError("bc * (t - 1) / bp is not an integer at t=" + std::to_string(task) +
                          " (bc=" + std::to_string(t.batch_current) +
                          ", bp=" + std::to_string(t.batch_exemplar) + ")");
      }
    }
  }
  if (!(t.learning_rate >= 0.0)) throw ConfigError("lr must be non-negative");
}

nlohmann::json to_json(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  const SyntheticConfig& d = cfg.data;
  return {{"experiment", cfg.experiment},
          {"out", cfg.out},
          {"idx_dir", cfg.idx_dir},
          {"seeds", cfg.seeds},
          {"threads", cfg.threads},
          {"toy_batches", cfg.toy_batches},
          {"bias_batches", cfg.bias_batches},
          {"train",
           {{"norm", to_string(t.norm)},
            {"groups", t.groups},
            {"bc", t.batch_current},
            {"bp", t.batch_exemplar},
            {"bessel", t.bessel},
            {"lr", t.learning_rate},
            {"weight_decay", t.weight_decay},
            {"epochs", t.epochs},
            {"memory", t.memory_capacity},
            {"oracle_epochs", t.oracle_epochs},
            {"train_seed", t.seed},
            {"balanced_stats_train", t.ablation.balanced_stats_train},
            {"balanced_stats_test", t.ablation.balanced_stats_test},
            {"balanced_affine", t.ablation.balanced_affine}}},
          {"data",
           {{"tasks", d.tasks},
            {"classes_per_task", d.classes_per_task},
            {"dim", d.dim},
            {"samples_per_class", d.samples_per_class},
            {"scale", d.scale},
            {"noise", d.noise},
            {"task_dims", d.task_dims},
            {"train_fraction", d.train_fraction}}}};
}

}  // namespace tbnorm
