#pragma once

#include "iot/ebm_solver.hpp"
#include "iot/io.hpp"
#include "iot/light_solver.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <optional>

namespace iot {

/// Raised for unknown keys, bad values and unknown presets.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::string task = "swissroll";  // swissroll | recoverable
  Eigen::Index p = 128;
  Eigen::Index q = 1024;
  Eigen::Index r = 1024;
};

/// One run: the solver variant plus everything it needs. Sections: [model], [train], [data], [ebm].
struct RunConfig {
  std::string variant = "light";  // light | naive_ss | ebm
  TrainConfig train;              // shared optimizer and batch settings; M, N, cost architecture
  EbmArchitecture ebm_arch;
  LangevinConfig langevin;
  DataConfig data;
};

inline EbmConfig ebm_config(const RunConfig& rc) {
  EbmConfig c;
  c.eps = rc.train.eps;
  c.arch = rc.ebm_arch;
  c.langevin = rc.langevin;
  c.lr_paired = rc.train.lr_paired;
  c.lr_unpaired = rc.train.lr_unpaired;
  c.iters = rc.train.iters;
  c.batch_paired = rc.train.batch_paired;
  c.batch_x = rc.train.batch_x;
  c.batch_y = rc.train.batch_y;
  c.seed = rc.train.seed;
  c.adam_beta1 = rc.train.adam_beta1;
  c.adam_beta2 = rc.train.adam_beta2;
  c.adam_eps = rc.train.adam_eps;
  return c;
}

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  std::istringstream is(text);
  is >> v;
  if (!is || !is.eof()) {
    // strtod also accepts hex floats and trailing whitespace
    char* end = nullptr;
    const double d = std::strtod(text.c_str(), &end);
    if (text.empty() || *end != '\0') throw ConfigError("config: bad value '" + text + "' for " + key);
    v = static_cast<T>(d);
    if (static_cast<double>(v) != d) throw ConfigError("config: bad value '" + text + "' for " + key);
  }
  return v;
}

inline std::vector<Eigen::Index> parse_widths(const std::string& key, const std::string& text) {
  std::vector<Eigen::Index> out;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) {
    for (auto& ch : tok)
      if (ch == ',') ch = ' ';
    std::istringstream inner(tok);
    std::string part;
    while (inner >> part) {
      const auto w = parse_number<long>(key, part);
      if (w < 1) throw ConfigError("config: layer widths must be >= 1 in " + key);
      out.push_back(w);
    }
  }
  return out;
}

inline std::string join_widths(const std::vector<Eigen::Index>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? " " : "") + std::to_string(w[i]);
  return s;
}

struct Key {
  const char* section;
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define IOT_NUM_KEY(sec, name, field, type)                                                              \
  Key {                                                                                                  \
    sec, #name, [](RunConfig& c, const std::string& v) { c.field = parse_number<type>(sec "." #name, v); }, \
        [](const RunConfig& c) {                                                                         \
          if constexpr (std::is_floating_point_v<type>) return format_double(c.field);                  \
          else return std::to_string(c.field);                                                           \
        }                                                                                                \
  }

inline const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"model", "variant",
          [](RunConfig& c, const std::string& v) {
            if (v != "light" && v != "naive_ss" && v != "ebm")
              throw ConfigError("config: model.variant must be light, naive_ss or ebm");
            c.variant = v;
            c.train.variant = v == "naive_ss" ? Objective::naive_ss : Objective::light;
          },
          [](const RunConfig& c) { return c.variant; }},
      IOT_NUM_KEY("model", eps, train.eps, double),
      IOT_NUM_KEY("model", heads, train.heads, long),
      IOT_NUM_KEY("model", components, train.components, long),
      Key{"model", "a_hidden", [](RunConfig& c, const std::string& v) { c.train.arch.a_hidden = parse_widths("model.a_hidden", v); },
          [](const RunConfig& c) { return join_widths(c.train.arch.a_hidden); }},
      Key{"model", "v_hidden", [](RunConfig& c, const std::string& v) { c.train.arch.v_hidden = parse_widths("model.v_hidden", v); },
          [](const RunConfig& c) { return join_widths(c.train.arch.v_hidden); }},
      Key{"model", "f_hidden", [](RunConfig& c, const std::string& v) { c.ebm_arch.f_hidden = parse_widths("model.f_hidden", v); },
          [](const RunConfig& c) { return join_widths(c.ebm_arch.f_hidden); }},
      Key{"model", "c_hidden", [](RunConfig& c, const std::string& v) { c.ebm_arch.c_hidden = parse_widths("model.c_hidden", v); },
          [](const RunConfig& c) { return join_widths(c.ebm_arch.c_hidden); }},
      IOT_NUM_KEY("model", slope, ebm_arch.slope, double),
      IOT_NUM_KEY("train", iters, train.iters, long),
      IOT_NUM_KEY("train", lr_paired, train.lr_paired, double),
      IOT_NUM_KEY("train", lr_unpaired, train.lr_unpaired, double),
      IOT_NUM_KEY("train", batch_paired, train.batch_paired, long),
      IOT_NUM_KEY("train", batch_x, train.batch_x, long),
      IOT_NUM_KEY("train", batch_y, train.batch_y, long),
      IOT_NUM_KEY("train", seed, train.seed, std::uint64_t),
      IOT_NUM_KEY("train", adam_beta1, train.adam_beta1, double),
      IOT_NUM_KEY("train", adam_beta2, train.adam_beta2, double),
      IOT_NUM_KEY("train", adam_eps, train.adam_eps, double),
      Key{"data", "task",
          [](RunConfig& c, const std::string& v) {
            if (v != "swissroll" && v != "recoverable") throw ConfigError("config: data.task must be swissroll or recoverable");
            c.data.task = v;
          },
          [](const RunConfig& c) { return c.data.task; }},
      IOT_NUM_KEY("data", p, data.p, long),
      IOT_NUM_KEY("data", q, data.q, long),
      IOT_NUM_KEY("data", r, data.r, long),
      IOT_NUM_KEY("ebm", steps, langevin.steps, int),
      IOT_NUM_KEY("ebm", eta, langevin.eta, double),
      IOT_NUM_KEY("ebm", sigma0, langevin.sigma0, double),
  };
  return table;
}

#undef IOT_NUM_KEY

}  // namespace detail

/// Sets section.key from its text form; unknown keys are rejected.
inline void set_config_value(RunConfig& c, const std::string& section, const std::string& key, const std::string& value) {
  for (const auto& k : detail::keys()) {
    if (section == k.section && key == k.name) {
      k.set(c, value);
      return;
    }
  }
  throw ConfigError("config: unknown key " + section + "." + key);
}

inline std::string get_config_value(const RunConfig& c, const std::string& section, const std::string& key) {
  for (const auto& k : detail::keys())
    if (section == k.section && key == k.name) return k.get(c);
  throw ConfigError("config: unknown key " + section + "." + key);
}

/// Every key with its current value, in a fixed order.
inline std::vector<std::tuple<std::string, std::string, std::string>> config_entries(const RunConfig& c) {
  std::vector<std::tuple<std::string, std::string, std::string>> out;
  for (const auto& k : detail::keys()) out.emplace_back(k.section, k.name, k.get(c));
  return out;
}

inline void validate(const RunConfig& c) {
  try {
    validate(c.train);
    if (c.variant == "ebm") validate(ebm_config(c));
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  }
  if (c.data.p < 1 || c.data.p > c.data.q || c.data.p > c.data.r) throw ConfigError("config: need 1 <= p <= q, r");
}

/// Named presets: default (Swiss roll light solver), weather, ebm_swissroll.
inline RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "default") return c;
  if (name == "weather") {
    c.train.components = 10;
    c.train.heads = 1;
    c.train.iters = 30000;
    return c;
  }
  if (name == "ebm_swissroll") {
    c.variant = "ebm";
    c.train.lr_paired = 5e-4;
    c.train.lr_unpaired = 2e-4;
    c.train.iters = 10000;
    c.train.batch_x = 128;
    c.train.batch_y = 128;
    return c;
  }
  throw ConfigError("config: unknown preset '" + name + "' (default, weather, ebm_swissroll)");
}

/// INI text with [model], [train], [data], [ebm] sections; list values are space separated.
inline void apply_ini(RunConfig& c, std::istream& is) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(is);
  } catch (const CLI::Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (item.parents.size() != 1)
      throw ConfigError("config: key " + item.fullname() + " must sit in a [model], [train], [data] or [ebm] section");
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? " " : "") + item.inputs[i];
    set_config_value(c, item.parents.front(), item.name, value);
  }
}

inline RunConfig load_config(const std::filesystem::path& path, const std::string& base = "default") {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  RunConfig c = preset(base);
  apply_ini(c, is);
  validate(c);
  return c;
}

inline std::string to_ini(const RunConfig& c) {
  std::string out, section;
  for (const auto& [sec, key, value] : config_entries(c)) {
    if (sec != section) {
      out += (section.empty() ? "[" : "\n[") + sec + "]\n";
      section = sec;
    }
    out += key + " = " + value + "\n";
  }
  return out;
}

/// Explicit seed, else IOT_SEED, else the config value.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t config_seed) {
  if (flag) return *flag;
  if (const char* env = std::getenv("IOT_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*env == '\0' || *end != '\0') throw ConfigError(std::string("IOT_SEED is not an integer: ") + env);
    return v;
  }
  return config_seed;
}

}  // namespace iot
