#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lstego/core/archive.hpp"
#include "lstego/core/nn.hpp"
#include "lstego/core/optim.hpp"
#include "lstego/image.hpp"
#include "lstego/metrics.hpp"
#include "lstego/perceptual.hpp"

namespace lstego {

struct AutoencoderConfig {
  int resolution = 64;
  int latent_channels = 3;
  std::array<int, 3> widths{32, 64, 128};  // at full, 1/2 and 1/4 resolution
  static constexpr int factor = 4;
};

// Continuous-latent image autoencoder {E, G} with downsample factor 4.
struct LatentCode {
  Tensor<float> values;  // [1, C', H/4, W/4]
  int downsample_factor = AutoencoderConfig::factor;
};

template <typename T>
class Autoencoder {
 public:
  explicit Autoencoder(AutoencoderConfig cfg = {}, std::uint64_t seed = 1) : cfg_(cfg) {
    std::mt19937_64 rng(seed);
    const auto [w1, w2, w3] = cfg.widths;
    const int c = cfg.latent_channels;
    e_in_ = nn::Conv2d<T>(enc_, "in", 3, w1, 3, 1, 1, rng);
    e_down1_ = nn::Conv2d<T>(enc_, "down1", w1, w2, 3, 2, 1, rng);
    e_res1_ = nn::ResBlock<T>(enc_, "res1", w2, rng);
    e_down2_ = nn::Conv2d<T>(enc_, "down2", w2, w3, 3, 2, 1, rng);
    e_res2_ = nn::ResBlock<T>(enc_, "res2", w3, rng);
    e_out_ = nn::Conv2d<T>(enc_, "out", w3, c, 1, 1, 0, rng);

    g_in_ = nn::Conv2d<T>(dec_, "in", c, w3, 3, 1, 1, rng);
    g_res1_ = nn::ResBlock<T>(dec_, "res1", w3, rng);
    g_up1_ = nn::Conv2d<T>(dec_, "up1", w3, w2, 3, 1, 1, rng);
    g_res2_ = nn::ResBlock<T>(dec_, "res2", w2, rng);
    g_up2_ = nn::Conv2d<T>(dec_, "up2", w2, w1, 3, 1, 1, rng);
    g_out_ = nn::Conv2d<T>(dec_, "out", w1, 3, 3, 1, 1, rng);
    latent_std_.assign(c, 1.0);
  }

  const AutoencoderConfig& config() const { return cfg_; }
  int factor() const { return AutoencoderConfig::factor; }

  Shape latent_shape(int h, int w) const {
    return {cfg_.latent_channels, h / factor(), w / factor()};
  }

  Var<T> encode(const Var<T>& x) const {
    const auto& s = x.shape();
    if (s.size() != 4 || s[1] != 3 || s[2] % factor() || s[3] % factor())
      throw std::invalid_argument("encode: image dims must be divisible by " + std::to_string(factor()));
    auto h = ops::silu(e_in_(x));
    h = ops::silu(e_down1_(h));
    h = e_res1_(h);
    h = ops::silu(e_down2_(h));
    h = e_res2_(h);
    return e_out_(ops::silu(h));
  }

  Var<T> decode_raw(const Var<T>& z) const {
    const auto& s = z.shape();
    if (s.size() != 4 || s[1] != cfg_.latent_channels)
      throw std::invalid_argument("decode: latent has " + shape_str(s) + ", expected channels " +
                                  std::to_string(cfg_.latent_channels));
    auto h = g_in_(z);
    h = g_res1_(h);
    h = ops::silu(g_up1_(ops::upsample_nearest(ops::silu(h), 2)));
    h = g_res2_(h);
    h = ops::silu(g_up2_(ops::upsample_nearest(ops::silu(h), 2)));
    return g_out_(h);
  }

  // Output is explicitly clamped to the canonical range.
  Var<T> decode(const Var<T>& z) const { return ops::clamp(decode_raw(z), T(-1), T(1)); }

  LatentCode encode(const Image& img) const {
    auto z = encode(Var<T>::constant(img.to_tensor<T>()));
    return {z.value().template cast<float>(), factor()};
  }

  Image decode(const LatentCode& z) const {
    if (z.values.rank() != 4 || z.values.dim(1) != cfg_.latent_channels)
      throw std::invalid_argument("decode: latent shape mismatch " + shape_str(z.values.shape()));
    return Image::from_tensor(decode(Var<T>::constant(z.values.template cast<T>())).value());
  }

  Image reconstruct(const Image& img) const { return decode(encode(img)); }

  const std::vector<double>& latent_std() const { return latent_std_; }
  void set_latent_std(std::vector<double> s) {
    if (static_cast<int>(s.size()) != cfg_.latent_channels) throw std::invalid_argument("latent_std size mismatch");
    for (double v : s)
      if (!(std::isfinite(v) && v > 0)) throw std::invalid_argument("latent_std must be finite and positive");
    latent_std_ = std::move(s);
  }

  // Per-channel standard deviation of E(x) over the given images.
  std::vector<double> measure_latent_std(std::span<const Image> images) const {
    const int c = cfg_.latent_channels;
    std::vector<double> sum(c, 0), sq(c, 0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < images.size(); i += 32) {
      const std::size_t end = std::min(images.size(), i + 32);
      auto z = encode(Var<T>::constant(images_to_batch<T>(images.subspan(i, end - i)))).value();
      const std::size_t hw = static_cast<std::size_t>(z.dim(2)) * z.dim(3);
      for (int n = 0; n < z.dim(0); ++n)
        for (int ch = 0; ch < c; ++ch)
          for (std::size_t p = 0; p < hw; ++p) {
            const double v = z[(n * c + ch) * hw + p];
            sum[ch] += v;
            sq[ch] += v * v;
          }
      count += static_cast<std::size_t>(z.dim(0)) * hw;
    }
    std::vector<double> sd(c);
    for (int ch = 0; ch < c; ++ch) {
      const double m = sum[ch] / count;
      sd[ch] = std::sqrt(std::max(0.0, sq[ch] / count - m * m));
    }
    return sd;
  }

  bool frozen() const { return frozen_; }
  void freeze() {
    enc_.set_trainable(false);
    dec_.set_trainable(false);
    frozen_ = true;
  }
  void unfreeze() {
    enc_.set_trainable(true);
    dec_.set_trainable(true);
    frozen_ = false;
  }

  nn::ParamSet<T>& encoder_params() { return enc_; }
  nn::ParamSet<T>& decoder_params() { return dec_; }
  std::size_t parameter_count() const { return enc_.count() + dec_.count(); }
  std::string digest() const { return enc_.digest() + dec_.digest(); }

  std::string training_data_digest;

  void save_to(Archive& a) const {
    a.meta["autoencoder"] = {{"resolution", cfg_.resolution},
                             {"latent_channels", cfg_.latent_channels},
                             {"factor", factor()},
                             {"widths", cfg_.widths},
                             {"latent_std", latent_std_},
                             {"frozen", frozen_},
                             {"training_data_digest", training_data_digest},
                             {"digest", digest()}};
    a.put_params("ae.enc.", enc_);
    a.put_params("ae.dec.", dec_);
  }

  static Autoencoder load_from(const Archive& a) {
    const auto& m = a.meta.at("autoencoder");
    AutoencoderConfig cfg;
    cfg.resolution = m.at("resolution");
    cfg.latent_channels = m.at("latent_channels");
    cfg.widths = m.at("widths").get<std::array<int, 3>>();
    Autoencoder ae(cfg);
    a.load_params("ae.enc.", ae.enc_);
    a.load_params("ae.dec.", ae.dec_);
    ae.set_latent_std(m.at("latent_std").get<std::vector<double>>());
    ae.training_data_digest = m.value("training_data_digest", "");
    if (m.value("frozen", true)) ae.freeze();
    return ae;
  }

 private:
  AutoencoderConfig cfg_;
  nn::ParamSet<T> enc_, dec_;
  nn::Conv2d<T> e_in_, e_down1_, e_down2_, e_out_;
  nn::ResBlock<T> e_res1_, e_res2_;
  nn::Conv2d<T> g_in_, g_up1_, g_up2_, g_out_;
  nn::ResBlock<T> g_res1_, g_res2_;
  std::vector<double> latent_std_;
  bool frozen_ = false;
};

inline std::string images_digest(std::span<const Image> imgs) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& im : imgs)
    for (float v : im.pixels) {
      h ^= to_byte(v);
      h *= 1099511628211ULL;
    }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------- latent probe

struct QualityReport {
  double psnr = 0;
  double ssim = 0;
  double perceptual = 0;
};

struct ProbeResult {
  Image perturbed;
  Image reconstruction;
  QualityReport quality;  // perturbed vs reconstruction
};

// G(E(x) + k U sigma), U ~ uniform[-1, 1] per latent element from `seed`.
template <typename T>
ProbeResult latent_perturb_probe(const Autoencoder<T>& ae, const PerceptualNet<T>* perceptual, const Image& img,
                                 double k, std::uint64_t seed) {
  if (!(k >= 0)) throw std::invalid_argument("probe strength k must be >= 0");
  LatentCode z = ae.encode(img);
  ProbeResult r;
  r.reconstruction = ae.decode(z);
  if (k > 0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int c = z.values.dim(1);
    const std::size_t hw = z.values.size() / c;
    for (int ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < hw; ++p)
        z.values[ch * hw + p] += static_cast<float>(k * u(rng) * ae.latent_std()[ch]);
  }
  r.perturbed = k > 0 ? ae.decode(z) : r.reconstruction;
  r.quality.psnr = psnr(r.perturbed, r.reconstruction);
  r.quality.ssim = ssim(r.perturbed, r.reconstruction);
  if (perceptual) r.quality.perceptual = perceptual->distance(r.perturbed, r.reconstruction);
  return r;
}

// ------------------------------------------------------------------- training

struct AeTrainConfig {
  int steps = 6000;
  int batch = 16;
  double lr = 1e-3;
  double perceptual_weight = 0.1;
  int perceptual_steps = 600;
  int calibration_images = 1000;
  std::uint64_t seed = 1;
  int min_images = 1000;
};

struct AeTrainLog {
  int step;
  double loss;
  double seconds;
};

// Trains the perceptual backend, then E and G with pixel + perceptual loss,
// then freezes both and measures the per-channel latent std.
template <typename T>
void train_reference_autoencoder(Autoencoder<T>& ae, PerceptualNet<T>& perceptual, std::span<const Image> images,
                                 const AeTrainConfig& cfg,
                                 const std::function<void(const AeTrainLog&)>& on_log = {}) {
  if (static_cast<int>(images.size()) < cfg.min_images)
    throw std::invalid_argument("reference autoencoder needs at least " + std::to_string(cfg.min_images) +
                                " training images, got " + std::to_string(images.size()));
  for (const auto& im : images)
    if (im.height != ae.config().resolution || im.width != ae.config().resolution)
      throw std::invalid_argument("training images must match the autoencoder resolution");
  const auto t0 = std::chrono::steady_clock::now();
  perceptual.train(images, cfg.perceptual_steps, 16, cfg.seed + 101);

  ae.unfreeze();
  optim::AdamW<T> opt({.lr = cfg.lr, .weight_decay = 0.0});
  opt.attach(ae.encoder_params());
  opt.attach(ae.decoder_params());
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
  std::bernoulli_distribution flip(0.5);
  double ema = 0;
  for (int step = 0; step < cfg.steps; ++step) {
    // cosine decay to 5% of the base rate
    const double prog = static_cast<double>(step) / cfg.steps;
    opt.set_lr(cfg.lr * (0.05 + 0.95 * 0.5 * (1 + std::cos(3.14159265358979 * prog))));
    std::vector<Image> batch;
    for (int i = 0; i < cfg.batch; ++i) {
      Image im = images[pick(rng)];
      if (flip(rng))
        for (int c = 0; c < 3; ++c)
          for (int y = 0; y < im.height; ++y) std::reverse(&im.at(c, y, 0), &im.at(c, y, 0) + im.width);
      batch.push_back(std::move(im));
    }
    auto x = Var<T>::constant(images_to_batch<T>(batch));
    auto y = ae.decode(ae.encode(x));
    auto loss = ops::add(ops::mse(y, x), ops::scale(perceptual.distance(y, x), static_cast<T>(cfg.perceptual_weight)));
    opt.zero_grad();
    loss.backward();
    opt.step();
    ema = step == 0 ? loss.item() : 0.98 * ema + 0.02 * loss.item();
    if (on_log && (step % 50 == 0 || step + 1 == cfg.steps))
      on_log({step, ema, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  }
  ae.freeze();
  const std::size_t ncal = std::min<std::size_t>(images.size(), cfg.calibration_images);
  ae.set_latent_std(ae.measure_latent_std(images.subspan(0, ncal)));
  ae.training_data_digest = images_digest(images);
}

}  // namespace lstego
