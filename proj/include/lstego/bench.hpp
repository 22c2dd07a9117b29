#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lstego/autoencoder.hpp"
#include "lstego/baseline.hpp"
#include "lstego/bitcodec.hpp"
#include "lstego/metrics.hpp"
#include "lstego/noise.hpp"
#include "lstego/perceptual.hpp"
#include "lstego/trainer.hpp"

namespace lstego::bench {

struct Extraction {
  SecretPayload channel;        // raw decoded bits
  SecretPayload data;           // after ECC (== channel without ECC)
  bool ecc_corrected = true;    // false when decoding failed
  double confidence = 0;        // mean |logit|, 0 for the handcrafted method
};

// A steganography method as seen by the harness.
struct Method {
  std::string name;
  std::string digest;
  int resolution = 0;  // covers resized to this, 0 keeps the input size
  int data_bits = 0;
  std::optional<EccConfig> ecc;
  std::function<Image(const Image& cover, const SecretPayload& channel)> embed_channel;
  std::function<Extraction(const Image& stego)> extract;

  int channel_bits() const { return ecc ? ecc->codeword_length_n : data_bits; }
  SecretPayload to_channel(const SecretPayload& data) const { return ecc ? ecc_encode(data, *ecc) : data; }
  Image prepare(const Image& cover) const {
    if (resolution <= 0 || (cover.height == resolution && cover.width == resolution)) return cover;
    return resize_bilinear(cover, resolution, resolution);
  }
  // 8-bit stego for a user-level secret.
  Image embed(const Image& cover, const SecretPayload& data) const {
    if (data.size() != data_bits)
      throw std::invalid_argument("secret has " + std::to_string(data.size()) + " bits, " + name + " carries " +
                                  std::to_string(data_bits));
    return quantize8(embed_channel(prepare(cover), to_channel(data)));
  }
};

inline Extraction finish_extraction(SecretPayload channel, const std::optional<EccConfig>& ecc, double confidence) {
  Extraction e;
  e.channel = std::move(channel);
  e.confidence = confidence;
  if (ecc) {
    auto d = ecc_decode(e.channel, *ecc);
    e.data = std::move(d.data);
    e.ecc_corrected = d.corrected;
  } else {
    e.data = e.channel;
  }
  return e;
}

// Learned method; the referenced objects must outlive the Method.
inline Method learned_method(const Autoencoder<float>& ae, const StegoModel<float>& model) {
  Method m;
  m.name = "latent";
  m.digest = model.encoder.params().digest() + model.decoder.params().digest();
  m.resolution = ae.config().resolution;
  m.ecc = model.ecc;
  m.data_bits = model.data_bits();
  m.embed_channel = [&ae, &model](const Image& cover, const SecretPayload& channel) {
    return model.embed(ae, cover, channel);
  };
  m.extract = [&model](const Image& stego) {
    auto d = decode_secret(model.decoder, stego);
    return finish_extraction(std::move(d.bits), model.ecc, d.confidence);
  };
  return m;
}

inline Method dwtdctsvd_method(int secret_length, const dwtdctsvd::FreqEmbedConfig& cfg, int resolution,
                               std::optional<EccConfig> ecc = std::nullopt) {
  Method m;
  m.name = "dwtdctsvd";
  m.digest = "b" + std::to_string(cfg.block_size) + "q" + std::to_string(cfg.quant_step);
  m.resolution = resolution;
  m.ecc = ecc;
  m.data_bits = ecc ? ecc->data_length_k : secret_length;
  const int n = ecc ? ecc->codeword_length_n : secret_length;
  m.embed_channel = [cfg](const Image& cover, const SecretPayload& channel) {
    return dwtdctsvd::dwtdctsvd_embed(cover, channel, cfg);
  };
  m.extract = [cfg, n, ecc](const Image& stego) {
    return finish_extraction(dwtdctsvd::dwtdctsvd_extract(stego, n, cfg), ecc, 0.0);
  };
  return m;
}

// -------------------------------------------------------------------- report

struct EvalRow {
  std::string image_id;
  std::string method;
  double psnr = 0, ssim = 0, perceptual = 0;
  double bit_acc_clean = 0, bit_acc_noised = 0, bit_acc_ecc = 0;
  int word_acc = 0;
  std::string kind;
  int severity = 0;
};

struct Stat {
  double mean = 0, std = 0;
};

inline Stat mean_std(std::span<const double> v) {
  Stat s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.std += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(v.size()));
  return s;
}

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"psnr",           "ssim",        "perceptual", "bit_acc_clean",
                                              "bit_acc_noised", "bit_acc_ecc", "word_acc"};
  return names;
}

inline double metric(const EvalRow& r, const std::string& name) {
  if (name == "psnr") return r.psnr;
  if (name == "ssim") return r.ssim;
  if (name == "perceptual") return r.perceptual;
  if (name == "bit_acc_clean") return r.bit_acc_clean;
  if (name == "bit_acc_noised") return r.bit_acc_noised;
  if (name == "bit_acc_ecc") return r.bit_acc_ecc;
  if (name == "word_acc") return r.word_acc;
  throw std::invalid_argument("unknown metric " + name);
}

struct EvalReport {
  std::vector<EvalRow> rows;
  nlohmann::json config = nlohmann::json::object();

  std::map<std::string, Stat> aggregate() const {
    std::map<std::string, Stat> out;
    for (const auto& name : metric_names()) {
      std::vector<double> v;
      for (const auto& r : rows) v.push_back(metric(r, name));
      out[name] = mean_std(v);
    }
    return out;
  }

  // Mean noised bit accuracy per kind (over all severities present).
  std::map<std::string, double> per_kind_bit_acc() const {
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& r : rows) {
      auto& [s, n] = acc[r.kind];
      s += r.bit_acc_noised;
      ++n;
    }
    std::map<std::string, double> out;
    for (const auto& [k, v] : acc) out[k] = v.first / v.second;
    return out;
  }

  std::string csv() const {
    std::string out = "image_id,method,psnr,ssim,perceptual,bit_acc_clean,bit_acc_noised,bit_acc_ecc,word_acc,kind,severity\n";
    char buf[512];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d,%s,%d\n", r.image_id.c_str(),
                    r.method.c_str(), r.psnr, r.ssim, r.perceptual, r.bit_acc_clean, r.bit_acc_noised, r.bit_acc_ecc,
                    r.word_acc, r.kind.c_str(), r.severity);
      out += buf;
    }
    return out;
  }

  nlohmann::json json() const {
    nlohmann::json j;
    j["config"] = config;
    j["count"] = rows.size();
    j["std_convention"] = "population";
    for (const auto& [k, s] : aggregate()) j["aggregate"][k] = {{"mean", s.mean}, {"std", s.std}};
    return j;
  }

  void write(const std::string& stem) const {
    std::ofstream(stem + ".csv") << csv();
    std::ofstream(stem + ".json") << json().dump(2) << '\n';
  }
};

inline std::uint64_t image_seed(std::uint64_t seed, std::size_t i) { return noise_detail::mix_seed(seed, 7919 + i); }

struct EvalOptions {
  std::uint64_t seed = 7;
  const PerceptualNet<float>* perceptual = nullptr;
  std::optional<PerturbationSpec> fixed;  // otherwise one random kind per image
};

// Clean and noised metrics for one cover under one perturbation.
struct ImageOutcome {
  Image cover, stego;
  SecretPayload data, channel;
  Extraction clean;
};

inline ImageOutcome embed_and_check(const Method& m, const Image& cover, std::uint64_t seed) {
  ImageOutcome o;
  o.cover = m.prepare(cover);
  o.data = random_secret(m.data_bits, seed);
  o.channel = m.to_channel(o.data);
  o.stego = quantize8(m.embed_channel(o.cover, o.channel));
  o.clean = m.extract(o.stego);
  return o;
}

inline EvalRow noised_row(const Method& m, const ImageOutcome& o, const PerturbationSpec& spec, std::uint64_t seed,
                          const std::string& id) {
  EvalRow r;
  r.image_id = id;
  r.method = m.name;
  r.bit_acc_clean = bit_accuracy(o.clean.channel, o.channel);
  const Image noised = quantize8(apply_perturbation(o.stego, spec, seed));
  const auto ex = m.extract(noised);
  r.bit_acc_noised = bit_accuracy(ex.channel, o.channel);
  r.bit_acc_ecc = bit_accuracy(ex.data, o.data);
  r.word_acc = word_accuracy(ex.data, o.data);
  r.kind = std::string(to_string(spec.kind));
  r.severity = spec.severity;
  return r;
}

inline EvalReport evaluate(const Method& m, std::span<const Image> images, const EvalOptions& opt,
                           std::span<const std::string> ids = {}) {
  if (images.empty()) throw std::invalid_argument("evaluation dataset is empty");
  EvalReport rep;
  rep.config = {{"method", m.name}, {"digest", m.digest}, {"seed", opt.seed}, {"data_bits", m.data_bits},
                {"channel_bits", m.channel_bits()}, {"images", images.size()},
                {"noise_policy", opt.fixed ? opt.fixed->label() : "random_single_kind_severity_1_5"}};
  if (m.ecc) rep.config["ecc"] = {m.ecc->codeword_length_n, m.ecc->data_length_k, m.ecc->correctable_errors_t};
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto s = image_seed(opt.seed, i);
    const auto o = embed_and_check(m, images[i], s);
    std::mt19937_64 rng(s ^ 0x5bd1e995ULL);
    const auto spec = opt.fixed ? *opt.fixed : sample_single_perturbation(rng);
    auto r = noised_row(m, o, spec, rng(), ids.empty() ? "img" + std::to_string(i) : ids[i]);
    r.psnr = psnr(o.stego, o.cover);
    r.ssim = ssim(o.stego, o.cover);
    if (opt.perceptual) r.perceptual = opt.perceptual->distance(o.stego, o.cover);
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

// Every kind at every severity 1..5 on every image.
inline EvalReport evaluate_per_kind(const Method& m, std::span<const Image> images, const EvalOptions& opt) {
  if (images.empty()) throw std::invalid_argument("evaluation dataset is empty");
  EvalReport rep;
  rep.config = {{"method", m.name}, {"digest", m.digest}, {"seed", opt.seed}, {"mode", "per_kind"},
                {"images", images.size()}};
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto s = image_seed(opt.seed, i);
    const auto o = embed_and_check(m, images[i], s);
    const double p = psnr(o.stego, o.cover), q = ssim(o.stego, o.cover);
    for (auto kind : kAllNoiseKinds)
      for (int sev = 1; sev <= 5; ++sev) {
        auto r = noised_row(m, o, {kind, sev}, noise_detail::mix_seed(s, static_cast<int>(kind) * 8 + sev),
                            "img" + std::to_string(i));
        r.psnr = p;
        r.ssim = q;
        rep.rows.push_back(std::move(r));
      }
  }
  return rep;
}

// kind -> severity -> mean noised bit accuracy
inline std::map<std::string, std::array<double, 6>> severity_table(const EvalReport& rep) {
  std::map<std::string, std::array<double, 6>> sum, cnt;
  for (const auto& r : rep.rows) {
    sum[r.kind][r.severity] += r.bit_acc_noised;
    cnt[r.kind][r.severity] += 1;
  }
  for (auto& [k, a] : sum)
    for (int s = 0; s < 6; ++s) a[s] = cnt[k][s] > 0 ? a[s] / cnt[k][s] : NAN;
  return sum;
}

}  // namespace lstego::bench
