#include "tbnorm/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "tbnorm/errors.hpp"

namespace tbnorm {

namespace {

constexpr char kMagic[8] = {'T', 'B', 'N', 'O', 'R', 'M', '1', '\n'};

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

void write_u64(std::ostream& out, std::uint64_t v) {
  v = to_le(v);
  out.write(reinterpret_cast<const char*>(&v), 8);
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8)) {
    throw std::runtime_error("checkpoint: truncated file");
  }
  return to_le(v);
}

struct Array {
  std::string name;
  std::span<double> value;
};

std::vector<Array> arrays_of(TinyModel& model) {
  std::vector<Array> out;
  for (auto& p : model.parameters()) out.push_back({p.name, p.value});
  for (auto& b : model.buffers()) out.push_back({b.name, b.value});
  return out;
}

}  // namespace

nlohmann::json spec_to_json(const ModelSpec& spec) {
  return {{"arch", to_string(spec.arch)},
          {"input", {spec.input.c, spec.input.h, spec.input.w}},
          {"hidden", spec.hidden},
          {"norm", to_string(spec.norm)},
          {"groups", spec.groups},
          {"balanced_stats_train", spec.ablation.balanced_stats_train},
          {"balanced_stats_test", spec.ablation.balanced_stats_test},
          {"balanced_affine", spec.ablation.balanced_affine},
          {"bessel", spec.bessel},
          {"epsilon", spec.epsilon},
          {"momentum", spec.momentum}};
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  spec.arch = parse_architecture(j.at("arch").get<std::string>());
  const auto in = j.at("input").get<std::vector<std::size_t>>();
  if (in.size() != 3) throw std::runtime_error("checkpoint: input shape must have 3 extents");
  spec.input = {1, in[0], in[1], in[2]};
  spec.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  spec.norm = parse_norm_kind(j.at("norm").get<std::string>());
  spec.groups = j.at("groups").get<std::size_t>();
  spec.ablation.balanced_stats_train = j.at("balanced_stats_train").get<bool>();
  spec.ablation.balanced_stats_test = j.at("balanced_stats_test").get<bool>();
  spec.ablation.balanced_affine = j.at("balanced_affine").get<bool>();
  spec.bessel = j.at("bessel").get<bool>();
  spec.epsilon = j.at("epsilon").get<double>();
  spec.momentum = j.at("momentum").get<double>();
  return spec;
}

void save_checkpoint(TinyModel& model, const std::filesystem::path& path) {
  nlohmann::json manifest;
  manifest["format"] = "TBNORM1";
  manifest["spec"] = spec_to_json(model.spec());
  manifest["classes"] = model.num_classes();
  nlohmann::json arrays = nlohmann::json::array();
  const auto all = arrays_of(model);
  for (const auto& a : all) arrays.push_back({{"name", a.name}, {"length", a.value.size()}});
  manifest["arrays"] = arrays;
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : all) {
    for (double v : a.value) write_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

TinyModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  }
  const std::uint64_t len = read_u64(in);
  if (len > (1u << 24)) throw std::runtime_error("checkpoint: manifest too large");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
    throw std::runtime_error("checkpoint: truncated manifest");
  }
  const auto manifest = nlohmann::json::parse(text);
  if (manifest.at("format") != "TBNORM1") throw std::runtime_error("checkpoint: unknown format");

  TinyModel model = TinyModel::skeleton(spec_from_json(manifest.at("spec")),
                                        manifest.at("classes").get<std::size_t>());
  const auto all = arrays_of(model);
  const auto& listed = manifest.at("arrays");
  if (listed.size() != all.size()) throw std::runtime_error("checkpoint: array count mismatch");
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (listed[i].at("name") != all[i].name ||
        listed[i].at("length").get<std::size_t>() != all[i].value.size()) {
      throw std::runtime_error("checkpoint: array '" + all[i].name + "' does not match");
    }
    for (double& v : all[i].value) v = std::bit_cast<double>(read_u64(in));
  }
  return model;
}

}  // namespace tbnorm
