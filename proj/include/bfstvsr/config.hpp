#pragma once

// Run configuration: a JSON document with "preset", "model", "data", "train"
// and "out" keys. Unknown keys and wrong types are rejected with the JSON
// pointer of the offending value.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "bfstvsr/trainer.hpp"

namespace bfstvsr {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string ptr, const std::string& what)
      : std::runtime_error(ptr + ": " + what), pointer(std::move(ptr)) {}
  std::string pointer;
};

struct RunConfig {
  TrainConfig train = TrainConfig::desk();
  std::string out;
};

namespace detail {

using json = nlohmann::json;

inline std::string child(const std::string& ptr, const std::string& key) {
  std::string escaped;
  for (char ch : key) {
    if (ch == '~') escaped += "~0";
    else if (ch == '/') escaped += "~1";
    else escaped += ch;
  }
  return ptr + "/" + escaped;
}

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string ptr) : j_(j), ptr_(std::move(ptr)) {
    if (!j_.is_object()) throw ConfigError(ptr_.empty() ? "/" : ptr_, "expected an object");
  }

  /// Rejects keys not in `known`; call once all fields are declared.
  template <std::size_t N>
  void allow_only(const char* const (&known)[N]) const {
    for (const auto& [key, _] : j_.items()) {
      bool ok = false;
      for (const char* k : known) ok = ok || key == k;
      if (!ok) throw ConfigError(child(ptr_, key), "unknown key");
    }
  }

  template <class V>
  void get(const char* key, V& out) const {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    const auto p = child(ptr_, key);
    if constexpr (std::is_same_v<V, bool>) {
      if (!it->is_boolean()) throw ConfigError(p, "expected a boolean");
      out = it->template get<bool>();
    } else if constexpr (std::is_integral_v<V>) {
      if (!it->is_number_integer()) throw ConfigError(p, "expected an integer");
      if (std::is_unsigned_v<V> && it->is_number_integer() && !it->is_number_unsigned()) {
        throw ConfigError(p, "expected a non-negative integer");
      }
      out = it->template get<V>();
    } else if constexpr (std::is_floating_point_v<V>) {
      if (!it->is_number()) throw ConfigError(p, "expected a number");
      out = it->template get<V>();
    } else if constexpr (std::is_same_v<V, std::string>) {
      if (!it->is_string()) throw ConfigError(p, "expected a string");
      out = it->template get<std::string>();
    } else {
      if (!it->is_array()) throw ConfigError(p, "expected an array of integers");
      out.clear();
      for (std::size_t i = 0; i < it->size(); ++i) {
        if (!(*it)[i].is_number_integer()) throw ConfigError(p + "/" + std::to_string(i), "expected an integer");
        out.push_back((*it)[i].template get<int>());
      }
    }
  }

  const json* find(const char* key) const {
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const std::string& pointer() const { return ptr_; }

 private:
  const json& j_;
  std::string ptr_;
};

// Checks a validate() failure and attributes it to the section pointer.
template <class Fn>
void validated(const std::string& ptr, Fn&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(ptr.empty() ? "/" : ptr, e.what());
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("/", std::string("invalid JSON: ") + e.what());
  }
  detail::ObjectReader root(j, "");
  static const char* const kRoot[] = {"preset", "model", "data", "train", "out"};
  root.allow_only(kRoot);

  RunConfig rc;
  std::string preset = "desk";
  root.get("preset", preset);
  if (preset == "paper") {
    rc.train = TrainConfig::paper();
  } else if (preset != "desk") {
    throw ConfigError("/preset", "expected \"desk\" or \"paper\"");
  }
  root.get("out", rc.out);

  if (const auto* m = root.find("model")) {
    detail::ObjectReader r(*m, "/model");
    static const char* const kKeys[] = {"channels", "mapper_hidden", "decoder_hidden", "omega0", "encoder_omega",
                                        "encoder_dilation", "max_displacement_ratio", "frame_interval", "seed"};
    r.allow_only(kKeys);
    auto& mc = rc.train.model;
    r.get("channels", mc.channels);
    r.get("mapper_hidden", mc.mapper_hidden);
    r.get("decoder_hidden", mc.decoder_hidden);
    r.get("omega0", mc.omega0);
    r.get("encoder_omega", mc.encoder_omega);
    r.get("encoder_dilation", mc.encoder_dilation);
    r.get("max_displacement_ratio", mc.max_displacement_ratio);
    r.get("frame_interval", mc.frame_interval);
    r.get("seed", mc.seed);
    detail::validated("/model", [&] { mc.validate(); });
  }
  if (const auto* d = root.find("data")) {
    detail::ObjectReader r(*d, "/data");
    static const char* const kKeys[] = {"patch", "frames", "max_speed", "texture_components", "targets", "augment"};
    r.allow_only(kKeys);
    auto& dc = rc.train.data;
    r.get("patch", dc.patch);
    r.get("frames", dc.frames);
    r.get("max_speed", dc.max_speed);
    r.get("texture_components", dc.texture_components);
    r.get("targets", dc.targets);
    r.get("augment", dc.augment);
  }
  if (const auto* t = root.find("train")) {
    detail::ObjectReader r(*t, "/train");
    static const char* const kKeys[] = {"iterations",   "batch",         "lr_max",          "lr_min",
                                        "cosine_period", "lambda",       "charbonnier_eps", "substitution_horizon",
                                        "scale_min",    "scale_max",     "seed",            "validate_every",
                                        "validation_clips"};
    r.allow_only(kKeys);
    auto& tc = rc.train;
    r.get("iterations", tc.iterations);
    r.get("batch", tc.batch);
    r.get("lr_max", tc.lr_max);
    r.get("lr_min", tc.lr_min);
    r.get("cosine_period", tc.cosine_period);
    r.get("lambda", tc.lambda);
    r.get("charbonnier_eps", tc.charbonnier_eps);
    r.get("substitution_horizon", tc.substitution_horizon);
    r.get("scale_min", tc.scale_min);
    r.get("scale_max", tc.scale_max);
    r.get("seed", tc.seed);
    r.get("validate_every", tc.validate_every);
    r.get("validation_clips", tc.validation_clips);
  }
  detail::validated("", [&] { rc.train.validate(); });
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("/", "cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace bfstvsr
