#pragma once

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

#include "tdp/core/errors.hpp"
#include "tdp/models/training.hpp"

namespace tdp {

// Checkpoints are JSON documents: a kind tag, the network config, the shape
// manifest and the flat weight vector. Doubles round-trip exactly.

inline constexpr const char* kCheckpointFormat = "tdp-checkpoint";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json manifest_json(const std::vector<nn::ParamBlock>& m) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& b : m) out.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}, {"offset", b.offset}});
  return out;
}

inline std::vector<nn::ParamBlock> json_manifest(const nlohmann::json& j) {
  std::vector<nn::ParamBlock> out;
  for (const auto& b : j) {
    out.push_back({b.at("name").get<std::string>(), b.at("rows").get<int>(), b.at("cols").get<int>(),
                   b.at("offset").get<std::size_t>()});
  }
  return out;
}

inline nlohmann::json envelope(const char* kind, nlohmann::json config, const nn::ParamSet<double>& p) {
  return {{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"kind", kind},
          {"config", std::move(config)},  {"manifest", manifest_json(p.manifest())}, {"weights", p.values()}};
}

inline void check_envelope(const nlohmann::json& j, const char* kind) {
  if (j.value("format", "") != kCheckpointFormat) throw InputError("not a tdp checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) throw InputError("unsupported checkpoint version");
  if (j.value("kind", "") != kind) {
    throw InputError(std::string("checkpoint holds a ") + j.value("kind", "?") + " model, expected " + kind);
  }
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write checkpoint: " + path);
  f << j.dump() << '\n';
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("checkpoint not found: " + path);
  return nlohmann::json::parse(f);
}

}  // namespace detail

inline nlohmann::json to_json(const DenoiserNet<double>& net) {
  const auto& c = net.config();
  return detail::envelope("denoiser",
                          {{"element_dim", c.element_dim},
                           {"channels", c.channels},
                           {"blocks", c.blocks},
                           {"embed_dim", c.embed_dim},
                           {"max_step", c.max_step}},
                          net.params());
}

inline DenoiserNet<double> denoiser_from_json(const nlohmann::json& j) {
  detail::check_envelope(j, "denoiser");
  const auto& c = j.at("config");
  DenoiserNet<double> net(DenoiserConfig{c.at("element_dim").get<int>(), c.at("channels").get<int>(),
                                         c.at("blocks").get<int>(), c.at("embed_dim").get<int>(),
                                         c.at("max_step").get<int>()});
  net.params().assign(detail::json_manifest(j.at("manifest")), j.at("weights").get<std::vector<double>>());
  return net;
}

inline nlohmann::json to_json(const ValueModel& vm) {
  const auto& c = vm.net.config();
  auto j = detail::envelope("value",
                            {{"element_dim", c.element_dim},
                             {"channels", c.channels},
                             {"trunk_layers", c.trunk_layers},
                             {"embed_dim", c.embed_dim},
                             {"max_step", c.max_step}},
                            vm.net.params());
  j["return_mean"] = vm.return_mean;
  j["return_std"] = vm.return_std;
  return j;
}

inline ValueModel value_from_json(const nlohmann::json& j) {
  detail::check_envelope(j, "value");
  const auto& c = j.at("config");
  ValueModel vm{ValueNet<double>(ValueConfig{c.at("element_dim").get<int>(), c.at("channels").get<int>(),
                                             c.at("trunk_layers").get<int>(), c.at("embed_dim").get<int>(),
                                             c.at("max_step").get<int>()})};
  vm.net.params().assign(detail::json_manifest(j.at("manifest")), j.at("weights").get<std::vector<double>>());
  vm.return_mean = j.at("return_mean").get<double>();
  vm.return_std = j.at("return_std").get<double>();
  return vm;
}

inline nlohmann::json to_json(const InvDynNet<double>& net) {
  const auto& c = net.config();
  return detail::envelope("invdyn",
                          {{"state_dim", c.state_dim},
                           {"action_dim", c.action_dim},
                           {"hidden", c.hidden},
                           {"action_low", c.action_low},
                           {"action_high", c.action_high}},
                          net.params());
}

inline InvDynNet<double> invdyn_from_json(const nlohmann::json& j) {
  detail::check_envelope(j, "invdyn");
  const auto& c = j.at("config");
  InvDynNet<double> net(InvDynConfig{c.at("state_dim").get<int>(), c.at("action_dim").get<int>(),
                                     c.at("hidden").get<int>(), c.at("action_low").get<std::vector<double>>(),
                                     c.at("action_high").get<std::vector<double>>()});
  net.params().assign(detail::json_manifest(j.at("manifest")), j.at("weights").get<std::vector<double>>());
  return net;
}

inline void save_checkpoint(const std::string& path, const DenoiserNet<double>& n) { detail::write_json(path, to_json(n)); }
inline void save_checkpoint(const std::string& path, const ValueModel& v) { detail::write_json(path, to_json(v)); }
inline void save_checkpoint(const std::string& path, const InvDynNet<double>& n) { detail::write_json(path, to_json(n)); }

inline DenoiserNet<double> load_denoiser(const std::string& path) { return denoiser_from_json(detail::read_json(path)); }
inline ValueModel load_value(const std::string& path) { return value_from_json(detail::read_json(path)); }
inline InvDynNet<double> load_invdyn(const std::string& path) { return invdyn_from_json(detail::read_json(path)); }

}  // namespace tdp
