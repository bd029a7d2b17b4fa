#pragma once

#include "iot/config.hpp"
#include "iot/ebm_solver.hpp"
#include "iot/io.hpp"
#include "iot/light_solver.hpp"

#include <variant>

namespace iot {

inline constexpr int kCheckpointVersion = 1;

using AnyModel = std::variant<LightModel, EbmModel>;

/// Everything needed to resume or evaluate a run.
struct Checkpoint {
  RunConfig config;
  AnyModel model;
  std::string rng_state;  // textual std::mt19937_64 state
  long iteration = 0;

  bool is_ebm() const { return std::holds_alternative<EbmModel>(model); }
};

inline std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline Rng rng_from_string(const std::string& s) {
  Rng rng;
  std::istringstream is(s);
  is >> rng;
  if (!is) throw DataError("checkpoint: bad rng state");
  return rng;
}

namespace detail {

inline nlohmann::json mlp_to_json(const MlpParams& p) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& s = p.spec[i];
    layers.push_back({{"in", s.in_dim},
                      {"out", s.out_dim},
                      {"activation", std::string(to_string(s.activation))},
                      {"slope", s.slope},
                      {"weight", matrix_to_json(p.layers[i].weight)},
                      {"bias", std::vector<double>(p.layers[i].bias.begin(), p.layers[i].bias.end())}});
  }
  return layers;
}

inline MlpParams mlp_from_json(const nlohmann::json& j) {
  MlpParams p;
  for (const auto& l : j) {
    LayerSpec s{l.at("in").get<Eigen::Index>(), l.at("out").get<Eigen::Index>(),
                activation_from_string(l.at("activation").get<std::string>()), l.at("slope").get<double>()};
    Layer layer{matrix_from_json(l.at("weight")), vector_from_json(l.at("bias"))};
    if (layer.weight.rows() != s.out_dim || layer.weight.cols() != s.in_dim || layer.bias.size() != s.out_dim)
      throw DataError("checkpoint: layer shape does not match its spec");
    p.spec.push_back(s);
    p.layers.push_back(std::move(layer));
  }
  validate_spec(p.spec);
  return p;
}

}  // namespace detail

inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
  nlohmann::json j;
  j["format"] = "iot-checkpoint";
  j["version"] = kCheckpointVersion;
  j["variant"] = ck.config.variant;
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [sec, key, value] : config_entries(ck.config)) cfg[sec][key] = value;
  j["config"] = cfg;
  if (const auto* lm = std::get_if<LightModel>(&ck.model)) {
    j["params"] = {{"a_net", detail::mlp_to_json(lm->cost.a_net)},
                   {"v_net", detail::mlp_to_json(lm->cost.v_net)},
                   {"log_weight", std::vector<double>(lm->potential.log_weight.begin(), lm->potential.log_weight.end())},
                   {"center", matrix_to_json(lm->potential.center)},
                   {"log_scale", matrix_to_json(lm->potential.log_scale)}};
  } else {
    const auto& em = std::get<EbmModel>(ck.model);
    j["params"] = {{"f_net", detail::mlp_to_json(em.f_net)}, {"c_net", detail::mlp_to_json(em.c_net)}, {"eps", em.eps}};
  }
  j["rng"] = ck.rng_state;
  j["iteration"] = ck.iteration;
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "iot-checkpoint") throw DataError("checkpoint: not an iot checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw DataError("checkpoint: unsupported format version " + std::to_string(version));
    Checkpoint ck;
    for (const auto& [sec, entries] : j.at("config").items())
      for (const auto& [key, value] : entries.items()) set_config_value(ck.config, sec, key, value.get<std::string>());
    if (ck.config.variant != j.at("variant").get<std::string>()) throw DataError("checkpoint: variant tag mismatch");
    const auto& p = j.at("params");
    if (ck.config.variant == "ebm") {
      EbmModel m{detail::mlp_from_json(p.at("f_net")), detail::mlp_from_json(p.at("c_net")), p.at("eps").get<double>()};
      validate(m);
      ck.model = std::move(m);
    } else {
      LightModel m;
      m.cost = {detail::mlp_from_json(p.at("a_net")), detail::mlp_from_json(p.at("v_net"))};
      m.potential = {vector_from_json(p.at("log_weight")), matrix_from_json(p.at("center")),
                     matrix_from_json(p.at("log_scale"))};
      validate(m.cost);
      validate(m.potential);
      ck.model = std::move(m);
    }
    ck.rng_state = j.at("rng").get<std::string>();
    rng_from_string(ck.rng_state);
    ck.iteration = j.at("iteration").get<long>();
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  } catch (const std::domain_error& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  write_json(path, checkpoint_to_json(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_json(path)); }

}  // namespace iot
