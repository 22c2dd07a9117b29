#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lstego/autoencoder.hpp"
#include "lstego/trainer.hpp"

extern char** environ;

namespace lstego {

using Json = nlohmann::json;

// Every tunable in one tree. Files and environment overrides are merged on top.
inline Json default_config() {
  return Json::parse(R"({
    "data": {
      "resolution": 64,
      "train_dir": "", "val_dir": "", "test_dir": "",
      "train_first_seed": 0, "train_count": 5000,
      "val_first_seed": 1000000, "val_count": 200,
      "test_first_seed": 2000000, "test_count": 100
    },
    "autoencoder": {
      "steps": 2000, "batch": 16, "lr": 0.001, "perceptual_weight": 0.1,
      "perceptual_steps": 600, "calibration_images": 1000, "seed": 1, "min_images": 1000
    },
    "stego": {
      "secret_length": 100, "use_ecc": true, "batch": 16, "max_steps": 30000,
      "val_every": 250, "val_images": 64, "checkpoint_every": 500,
      "final_kernel": 3, "variant": "secret_only", "decoder_blocks": [2, 3, 3], "seed": 1,
      "alpha": 1.5, "beta_start": 0.1, "beta_max": 10.0, "t1": 0.90, "t2": 0.98,
      "ramp_steps": 10000, "lr": 8e-5, "weight_decay": 0.01, "ema_decay": 0.99, "patience": 5,
      "grad_clip": 0.0
    },
    "eval": { "seed": 7 },
    "baseline": { "block_size": 4, "quant_step": 36.0 }
  })");
}

namespace config_detail {

inline Json parse_scalar(const std::string& text, const Json& like) {
  try {
    if (like.is_boolean()) {
      std::string t = text;
      std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
      if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
      if (t == "0" || t == "false" || t == "no" || t == "off") return false;
      throw std::invalid_argument("not a boolean");
    }
    if (like.is_number_integer()) return std::stoll(text);
    if (like.is_number()) return std::stod(text);
    if (like.is_string()) return text;
    return Json::parse(text);
  } catch (const std::exception&) {
    throw std::invalid_argument("cannot parse '" + text + "' for a " + std::string(like.type_name()) + " setting");
  }
}

inline void merge(Json& base, const Json& patch, const std::string& where) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) throw std::invalid_argument("unknown config key '" + key + "'");
    if (base[it.key()].is_object()) {
      if (!it->is_object()) throw std::invalid_argument("config key '" + key + "' must be an object");
      merge(base[it.key()], *it, key);
    } else {
      base[it.key()] = *it;
    }
  }
}

}  // namespace config_detail

inline void merge_config(Json& base, const Json& patch) { config_detail::merge(base, patch, ""); }

inline void merge_config_file(Json& base, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  merge_config(base, Json::parse(in, nullptr, true, true));
}

// Sets one dotted key ("stego.ramp_steps") from text, keeping the value type.
inline void set_config_value(Json& cfg, const std::string& dotted, const std::string& text) {
  Json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw std::invalid_argument("unknown config key '" + dotted + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw std::invalid_argument("config key '" + dotted + "' is a section");
  *node = config_detail::parse_scalar(text, *node);
}

inline constexpr const char* kEnvPrefix = "LSTEGO_";

// LSTEGO_<SECTION>__<KEY>=value, e.g. LSTEGO_STEGO__RAMP_STEPS=3000.
inline void apply_env_overrides(Json& cfg, const std::string& prefix = kEnvPrefix) {
  for (char** e = environ; e && *e; ++e) {
    const std::string kv = *e;
    if (kv.rfind(prefix, 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    std::string key = kv.substr(prefix.size(), eq - prefix.size());
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    std::string dotted;
    for (std::size_t i = 0; i < key.size(); ++i) {
      if (key.compare(i, 2, "__") == 0) {
        dotted += '.';
        ++i;
      } else {
        dotted += key[i];
      }
    }
    set_config_value(cfg, dotted, kv.substr(eq + 1));
  }
}

inline AeTrainConfig ae_train_config(const Json& cfg) {
  const auto& a = cfg.at("autoencoder");
  AeTrainConfig c;
  c.steps = a.at("steps");
  c.batch = a.at("batch");
  c.lr = a.at("lr");
  c.perceptual_weight = a.at("perceptual_weight");
  c.perceptual_steps = a.at("perceptual_steps");
  c.calibration_images = a.at("calibration_images");
  c.seed = a.at("seed");
  c.min_images = a.at("min_images");
  return c;
}

inline TrainConfig stego_train_config(const Json& cfg) {
  const auto& s = cfg.at("stego");
  TrainConfig c;
  c.secret_length = s.at("secret_length");
  c.use_ecc = s.at("use_ecc");
  c.batch = s.at("batch");
  c.max_steps = s.at("max_steps");
  c.val_every = s.at("val_every");
  c.val_images = s.at("val_images");
  c.checkpoint_every = s.at("checkpoint_every");
  c.final_kernel = s.at("final_kernel");
  const std::string variant = s.at("variant");
  if (variant == "secret_only") c.variant = EncoderVariant::secret_only;
  else if (variant == "joint_conditioned") c.variant = EncoderVariant::joint_conditioned;
  else throw std::invalid_argument("stego.variant must be secret_only or joint_conditioned");
  c.decoder_blocks = s.at("decoder_blocks").get<std::array<int, 3>>();
  c.seed = s.at("seed");
  auto& sch = c.schedule;
  sch.alpha = s.at("alpha");
  sch.beta_start = s.at("beta_start");
  sch.beta_max = s.at("beta_max");
  sch.t1 = s.at("t1");
  sch.t2 = s.at("t2");
  sch.ramp_steps = s.at("ramp_steps");
  sch.lr = s.at("lr");
  sch.weight_decay = s.at("weight_decay");
  sch.ema_decay = s.at("ema_decay");
  sch.grad_clip = s.at("grad_clip");
  sch.patience = s.at("patience");
  sch.validate();
  return c;
}

}  // namespace lstego
