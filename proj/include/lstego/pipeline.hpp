#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lstego/autoencoder.hpp"
#include "lstego/config.hpp"
#include "lstego/perceptual.hpp"
#include "lstego/synth.hpp"
#include "lstego/trainer.hpp"

namespace lstego {

// Dataset splits: an image folder when configured, otherwise procedural scenes.
enum class Split { train, val, test };

inline std::vector<Image> load_folder(const std::filesystem::path& dir, int resolution) {
  std::vector<Image> out;
  for (const auto& p : list_pngs(dir)) {
    Image im = read_png(p.string());
    if (im.height != resolution || im.width != resolution) im = resize_bilinear(im, resolution, resolution);
    out.push_back(std::move(im));
  }
  if (out.empty()) throw std::invalid_argument("no PNG images in " + dir.string());
  return out;
}

inline std::vector<Image> load_split(const Json& cfg, Split split) {
  const auto& d = cfg.at("data");
  const char* name = split == Split::train ? "train" : split == Split::val ? "val" : "test";
  const int res = d.at("resolution");
  const std::string dir = d.at(std::string(name) + "_dir");
  if (!dir.empty()) return load_folder(dir, res);
  return synth::generate_dataset(d.at(std::string(name) + "_first_seed").get<std::uint64_t>(),
                                 d.at(std::string(name) + "_count").get<int>(), res);
}

// Autoencoder archive: E, G, sigma, plus the frozen perceptual backend.
struct AeBundle {
  Autoencoder<float> ae;
  PerceptualNet<float> perceptual;
};

inline void save_ae_bundle(const std::string& path, const AeBundle& b, const Json& echo = {}) {
  Archive a;
  b.ae.save_to(a);
  a.put_params("perceptual.", b.perceptual.params());
  if (!echo.is_null()) a.meta["config"] = echo;
  a.save(path);
}

inline AeBundle load_ae_bundle(const std::string& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("autoencoder archive not found: " + path);
  const Archive a = Archive::load(path);
  AeBundle b{Autoencoder<float>::load_from(a), PerceptualNet<float>()};
  a.load_params("perceptual.", b.perceptual.params());
  b.perceptual.params().set_trainable(false);
  return b;
}

inline AeBundle train_ae_bundle(const Json& cfg, const std::function<void(const AeTrainLog&)>& on_log = {}) {
  AutoencoderConfig ac;
  ac.resolution = cfg.at("data").at("resolution");
  const auto tc = ae_train_config(cfg);
  AeBundle b{Autoencoder<float>(ac, tc.seed), PerceptualNet<float>(tc.seed + 5)};
  const auto images = load_split(cfg, Split::train);
  train_reference_autoencoder<float>(b.ae, b.perceptual, images, tc, on_log);
  return b;
}

inline double mean_reconstruction_psnr(const Autoencoder<float>& ae, std::span<const Image> images) {
  double s = 0;
  for (const auto& im : images) s += psnr(quantize8(ae.reconstruct(im)), im);
  return s / static_cast<double>(images.size());
}

// Stego archive: the autoencoder bundle plus F and D, so one file is a usable model.
struct StegoBundle {
  AeBundle ae;
  StegoModel<float> model;
};

inline void save_stego_bundle(const std::string& path, const AeBundle& ae, const StegoModel<float>& model,
                              const Json& echo = {}) {
  Archive a;
  ae.ae.save_to(a);
  a.put_params("perceptual.", ae.perceptual.params());
  model.save_to(a);
  if (!echo.is_null()) a.meta["config"] = echo;
  a.save(path);
}

inline StegoBundle load_stego_bundle(const std::string& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("model archive not found: " + path);
  const Archive a = Archive::load(path);
  AeBundle ae{Autoencoder<float>::load_from(a), PerceptualNet<float>()};
  a.load_params("perceptual.", ae.perceptual.params());
  ae.perceptual.params().set_trainable(false);
  auto model = StegoModel<float>::load_from(a);
  if (!model.ae_digest.empty() && model.ae_digest != ae.ae.digest())
    throw std::runtime_error("model archive " + path + " pairs F/D with a different autoencoder");
  return {std::move(ae), std::move(model)};
}

inline Json archive_config(const std::string& path) {
  if (!std::filesystem::exists(path)) return {};
  return Archive::load(path).meta.value("config", Json());
}

inline Json ae_echo(const Json& cfg) { return {{"data", cfg.at("data")}, {"autoencoder", cfg.at("autoencoder")}}; }
inline Json stego_echo(const Json& cfg) {
  Json e = ae_echo(cfg);
  e["stego"] = cfg.at("stego");
  return e;
}

// Loads `path` when it was produced from the same settings, else trains and saves it.
inline AeBundle cached_ae(const Json& cfg, const std::string& path,
                          const std::function<void(const AeTrainLog&)>& on_log = {}) {
  if (archive_config(path) == ae_echo(cfg)) return load_ae_bundle(path);
  auto b = train_ae_bundle(cfg, on_log);
  std::filesystem::create_directories(std::filesystem::absolute(path).parent_path());
  save_ae_bundle(path, b, ae_echo(cfg));
  return b;
}

struct StegoRun {
  StegoModel<float> model;
  TrainResult result;
};

inline StegoRun train_stego(const Json& cfg, const AeBundle& ae, const std::string& checkpoint = "",
                            const std::string& log_csv = "", bool resume = false,
                            const std::function<void(const StepMetrics&, const TrainState&)>& on_step = {}) {
  auto tc = stego_train_config(cfg);
  tc.checkpoint = checkpoint;
  const auto train = load_split(cfg, Split::train);
  const auto val = load_split(cfg, Split::val);
  Trainer<float> trainer(ae.ae, ae.perceptual, train, val, tc);
  if (!log_csv.empty()) trainer.open_log(log_csv);
  if (resume) {
    if (checkpoint.empty() || !std::filesystem::exists(checkpoint))
      throw std::runtime_error("cannot resume: checkpoint not found");
    trainer.load_checkpoint(checkpoint);
  }
  auto result = trainer.run(on_step);
  return {trainer.model(), std::move(result)};
}

inline StegoModel<float> cached_stego(const Json& cfg, const AeBundle& ae, const std::string& path,
                                      const std::function<void(const StepMetrics&, const TrainState&)>& on_step = {}) {
  if (archive_config(path) == stego_echo(cfg)) return load_stego_bundle(path).model;
  std::filesystem::create_directories(std::filesystem::absolute(path).parent_path());
  const std::string ckpt = path + "." + std::to_string(std::hash<std::string>{}(stego_echo(cfg).dump()) % 1000000007) + ".ckpt";
  auto run = train_stego(cfg, ae, ckpt, path + ".log.csv", std::filesystem::exists(ckpt), on_step);
  save_stego_bundle(path, ae, run.model, stego_echo(cfg));
  return std::move(run.model);
}

}  // namespace lstego
