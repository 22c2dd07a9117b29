#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lstego/autoencoder.hpp"
#include "lstego/bitcodec.hpp"
#include "lstego/core/archive.hpp"
#include "lstego/core/optim.hpp"
#include "lstego/metrics.hpp"
#include "lstego/noise.hpp"
#include "lstego/perceptual.hpp"
#include "lstego/secret_decoder.hpp"
#include "lstego/secret_encoder.hpp"

namespace lstego {

// ------------------------------------------------------------------ schedule

struct TrainSchedule {
  double alpha = 1.5;
  double beta_start = 0.1;
  double beta_max = 10.0;
  double t1 = 0.90;
  double t2 = 0.98;
  int ramp_steps = 10000;
  double lr = 8e-5;
  double weight_decay = 0.01;
  double grad_clip = 0;  // global gradient norm cap, 0 disables
  double ema_decay = 0.99;
  int patience = 5;

  void validate() const {
    if (!(0 < t1 && t1 < t2 && t2 < 1)) throw std::invalid_argument("schedule needs 0 < t1 < t2 < 1");
    if (!(beta_start < beta_max)) throw std::invalid_argument("schedule needs beta_start < beta_max");
    if (ramp_steps < 0) throw std::invalid_argument("ramp_steps must be >= 0");
    if (grad_clip < 0) throw std::invalid_argument("grad_clip must be >= 0");
    if (!(ema_decay >= 0 && ema_decay < 1)) throw std::invalid_argument("ema_decay must be in [0, 1)");
  }
};

enum class Phase { WARMUP_FIXED_BATCH = 1, FULL_DATA = 2, NOISE_AND_RAMP = 3 };

inline std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::WARMUP_FIXED_BATCH: return "WARMUP_FIXED_BATCH";
    case Phase::FULL_DATA: return "FULL_DATA";
    case Phase::NOISE_AND_RAMP: return "NOISE_AND_RAMP";
  }
  return "?";
}

struct TrainState {
  Phase phase = Phase::WARMUP_FIXED_BATCH;
  double beta_current = 0.1;
  long step = 0;
  double ema_bit_acc = 0;   // bias-corrected, see curriculum_update
  double ema_val_loss = 0;
  long ema_count = 0;
  long ramp_start_step = -1;  // step at which phase 3 was entered
  double best_val_loss = 0;
  int val_rounds = 0;
  int rounds_without_improvement = 0;

  bool noise_enabled() const { return phase == Phase::NOISE_AND_RAMP; }

  nlohmann::json to_json() const {
    return {{"phase", static_cast<int>(phase)}, {"phase_name", std::string(to_string(phase))},
            {"beta_current", beta_current},     {"step", step},
            {"ema_bit_acc", ema_bit_acc},       {"ema_val_loss", ema_val_loss},
            {"ema_count", ema_count},           {"ramp_start_step", ramp_start_step},
            {"best_val_loss", best_val_loss},   {"val_rounds", val_rounds},
            {"rounds_without_improvement", rounds_without_improvement}};
  }
  static TrainState from_json(const nlohmann::json& j) {
    TrainState s;
    s.phase = static_cast<Phase>(j.at("phase").get<int>());
    s.beta_current = j.at("beta_current");
    s.step = j.at("step");
    s.ema_bit_acc = j.at("ema_bit_acc");
    s.ema_val_loss = j.at("ema_val_loss");
    s.ema_count = j.at("ema_count");
    s.ramp_start_step = j.at("ramp_start_step");
    s.best_val_loss = j.at("best_val_loss");
    s.val_rounds = j.at("val_rounds");
    s.rounds_without_improvement = j.at("rounds_without_improvement");
    return s;
  }
};

inline TrainState initial_state(const TrainSchedule& sch) {
  TrainState s;
  s.beta_current = sch.beta_start;
  return s;
}

// One training-step tick. The smoothed accuracy is an exponential moving
// average with Adam-style bias correction, so the first measurement is taken
// at face value. At most one phase transition happens per tick; entering
// phase 3 starts the beta ramp, which reaches beta_max ramp_steps ticks later.
inline TrainState curriculum_update(TrainState s, const TrainSchedule& sch, double measured_bit_acc) {
  if (!(measured_bit_acc >= 0 && measured_bit_acc <= 1)) throw std::invalid_argument("bit accuracy must be in [0, 1]");
  ++s.step;
  ++s.ema_count;
  const double d = sch.ema_decay;
  const double raw_prev = s.ema_count > 1 ? s.ema_bit_acc * (1 - std::pow(d, static_cast<double>(s.ema_count - 1))) : 0;
  const double raw = d * raw_prev + (1 - d) * measured_bit_acc;
  s.ema_bit_acc = d == 0 ? measured_bit_acc : raw / (1 - std::pow(d, static_cast<double>(s.ema_count)));

  if (s.phase == Phase::WARMUP_FIXED_BATCH) {
    if (s.ema_bit_acc >= sch.t1) s.phase = Phase::FULL_DATA;
  } else if (s.phase == Phase::FULL_DATA) {
    if (s.ema_bit_acc >= sch.t2) {
      s.phase = Phase::NOISE_AND_RAMP;
      s.ramp_start_step = s.step;
    }
  }
  if (s.phase == Phase::NOISE_AND_RAMP) {
    const double frac = sch.ramp_steps == 0
                            ? 1.0
                            : std::min(1.0, static_cast<double>(s.step - s.ramp_start_step) / sch.ramp_steps);
    s.beta_current = sch.beta_start + (sch.beta_max - sch.beta_start) * frac;
  } else {
    s.beta_current = sch.beta_start;
  }
  return s;
}

inline bool ramp_complete(const TrainState& s, const TrainSchedule& sch) {
  return s.phase == Phase::NOISE_AND_RAMP && s.step - s.ramp_start_step >= sch.ramp_steps;
}

// ------------------------------------------------------------------- losses

// Perceptual distance + alpha * MSE in YUV.
template <typename T>
Var<T> quality_loss(const PerceptualNet<T>& perceptual, const Var<T>& stego, const Var<T>& cover, double alpha) {
  if (stego.shape() != cover.shape()) throw std::invalid_argument("quality_loss: stego and cover shapes differ");
  auto p = perceptual.distance(stego, cover);
  if (alpha == 0) return p;
  return ops::add(p, ops::scale(ops::mse(rgb_to_yuv(stego), rgb_to_yuv(cover)), static_cast<T>(alpha)));
}

template <typename T>
struct LossTerms {
  Var<T> total, quality, recovery;
};

// beta * quality + recovery
template <typename T>
LossTerms<T> total_loss(const PerceptualNet<T>& perceptual, const Var<T>& stego, const Var<T>& cover,
                        const Var<T>& logits, const Tensor<T>& truth, double beta, double alpha) {
  LossTerms<T> l;
  l.quality = quality_loss(perceptual, stego, cover, alpha);
  l.recovery = recovery_loss(logits, truth);
  l.total = ops::add(ops::scale(l.quality, static_cast<T>(beta)), l.recovery);
  return l;
}

// -------------------------------------------------------------- stego model

// F and D plus the settings needed to use them.
template <typename T>
struct StegoModel {
  SecretEncoder<T> encoder;
  SecretDecoder<T> decoder;
  std::optional<EccConfig> ecc;
  std::string ae_digest;
  nlohmann::json info = nlohmann::json::object();  // schedule, metrics, ...

  StegoModel(const SecretEncoderConfig& ec, const SecretDecoderConfig& dc, std::uint64_t seed)
      : encoder(ec, seed * 2 + 11), decoder(dc, seed * 2 + 12) {
    if (ec.secret_length != dc.secret_length) throw std::invalid_argument("encoder and decoder secret lengths differ");
  }

  int channel_bits() const { return encoder.config().secret_length; }
  int data_bits() const { return ecc ? ecc->data_length_k : channel_bits(); }

  // stego = G(E(x) + F(s)) on a batch
  Var<T> embed(const Autoencoder<T>& ae, const Var<T>& cover, const Var<T>& bits) const {
    return embed_latent(ae, ae.encode(cover), cover, bits);
  }
  Var<T> embed_latent(const Autoencoder<T>& ae, const Var<T>& z, const Var<T>& cover, const Var<T>& bits) const {
    auto delta = encoder.config().variant == EncoderVariant::secret_only ? encoder(bits) : encoder(cover, bits);
    return ae.decode(ops::add(z, delta));
  }

  // Channel payload (n bits when ECC is configured) for a user-level secret.
  SecretPayload to_channel(const SecretPayload& data) const {
    if (data.size() != data_bits())
      throw std::invalid_argument("secret has " + std::to_string(data.size()) + " bits, model carries " +
                                  std::to_string(data_bits()));
    return ecc ? ecc_encode(data, *ecc) : data;
  }

  Image embed(const Autoencoder<T>& ae, const Image& cover, const SecretPayload& channel_bits_payload) const {
    const int r = ae.config().resolution;
    const Image in = (cover.height == r && cover.width == r) ? cover : resize_bilinear(cover, r, r);
    std::vector<SecretPayload> one{channel_bits_payload};
    auto x = Var<T>::constant(in.to_tensor<T>());
    return Image::from_tensor(embed(ae, x, Var<T>::constant(payloads_to_tensor<T>(one))).value());
  }

  void save_to(Archive& a) const {
    const auto& ec = encoder.config();
    const auto& dc = decoder.config();
    a.meta["stego"] = {
        {"secret_length", ec.secret_length},
        {"latent", {ec.latent_channels, ec.latent_h, ec.latent_w}},
        {"final_kernel", ec.final_kernel},
        {"variant", ec.variant == EncoderVariant::secret_only ? "secret_only" : "joint_conditioned"},
        {"joint_width", ec.joint_width},
        {"decoder_resolution", dc.resolution},
        {"decoder_widths", dc.widths},
        {"decoder_blocks", dc.blocks},
        {"ae_digest", ae_digest},
        {"info", info},
    };
    if (ecc)
      a.meta["stego"]["ecc"] = {{"n", ecc->codeword_length_n}, {"k", ecc->data_length_k}, {"t", ecc->correctable_errors_t}};
    a.put_params("stego.F.", encoder.params());
    a.put_params("stego.D.", decoder.params());
  }

  static StegoModel load_from(const Archive& a) {
    if (!a.meta.contains("stego")) throw std::runtime_error("archive does not contain a stego model");
    const auto& m = a.meta.at("stego");
    SecretEncoderConfig ec;
    ec.secret_length = m.at("secret_length");
    ec.latent_channels = m.at("latent")[0];
    ec.latent_h = m.at("latent")[1];
    ec.latent_w = m.at("latent")[2];
    ec.final_kernel = m.at("final_kernel");
    ec.variant = m.at("variant") == "secret_only" ? EncoderVariant::secret_only : EncoderVariant::joint_conditioned;
    ec.joint_width = m.value("joint_width", 32);
    SecretDecoderConfig dc;
    dc.secret_length = ec.secret_length;
    dc.resolution = m.at("decoder_resolution");
    dc.widths = m.at("decoder_widths").get<std::array<int, 3>>();
    dc.blocks = m.at("decoder_blocks").get<std::array<int, 3>>();
    StegoModel model(ec, dc, 0);
    a.load_params("stego.F.", model.encoder.params());
    a.load_params("stego.D.", model.decoder.params());
    model.ae_digest = m.value("ae_digest", "");
    model.info = m.value("info", nlohmann::json::object());
    if (m.contains("ecc")) model.ecc = EccConfig{m["ecc"]["n"], m["ecc"]["k"], m["ecc"]["t"]};
    return model;
  }
};

// ------------------------------------------------------------- training step

struct StepMetrics {
  double loss = 0, quality = 0, recovery = 0, bit_acc = 0, beta = 0;
  Phase phase = Phase::WARMUP_FIXED_BATCH;
  bool noised = false;
};

template <typename T>
double batch_bit_accuracy(const Tensor<T>& logits, const Tensor<T>& truth) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) ok += (logits[i] > T(0)) == (truth[i] > T(0.5));
  return static_cast<double>(ok) / static_cast<double>(logits.size());
}

template <typename T>
std::vector<SecretPayload> sample_secrets(int count, int length, std::mt19937_64& rng) {
  std::vector<SecretPayload> s;
  for (int i = 0; i < count; ++i) s.push_back(random_secret(length, rng));
  return s;
}

// Per-sample noise chains drawn from the training-time sampler.
template <typename T>
Var<T> apply_training_noise(const Var<T>& stego, std::mt19937_64& rng) {
  const int n = stego.dim(0);
  std::vector<Var<T>> parts;
  for (int i = 0; i < n; ++i) {
    const auto chain = sample_perturbation(rng);
    parts.push_back(apply_chain(ops::slice_batch(stego, i), chain, rng()));
  }
  return n == 1 ? parts[0] : ops::stack_batch(parts);
}

// One optimiser step on F and D. covers: [N,3,H,W], latents: E(covers).
// The curriculum state is not advanced here.
template <typename T>
StepMetrics training_step(StegoModel<T>& model, optim::AdamW<T>& opt, const Autoencoder<T>& ae,
                          const PerceptualNet<T>& perceptual, const Tensor<T>& covers, const Tensor<T>& latents,
                          const TrainSchedule& sch, const TrainState& state, std::mt19937_64& rng) {
  if (!ae.frozen()) throw std::logic_error("autoencoder must be frozen during steganography training");
  const int n = covers.dim(0);
  const auto secrets = sample_secrets<T>(n, model.channel_bits(), rng);
  const Tensor<T> truth = payloads_to_tensor<T>(secrets);
  auto x = Var<T>::constant(covers);
  auto stego = model.embed_latent(ae, Var<T>::constant(latents), x, Var<T>::constant(truth));
  auto seen = state.noise_enabled() ? apply_training_noise(stego, rng) : stego;
  auto logits = model.decoder(seen);
  auto terms = total_loss(perceptual, stego, x, logits, truth, state.beta_current, sch.alpha);

  StepMetrics m;
  m.loss = terms.total.item();
  m.quality = terms.quality.item();
  m.recovery = terms.recovery.item();
  m.bit_acc = batch_bit_accuracy(logits.value(), truth);
  m.beta = state.beta_current;
  m.phase = state.phase;
  m.noised = state.noise_enabled();
  if (!std::isfinite(m.loss)) {
    nlohmann::json dump = state.to_json();
    dump["loss"] = m.loss;
    dump["quality"] = m.quality;
    dump["recovery"] = m.recovery;
    throw std::runtime_error("non-finite training loss; state: " + dump.dump());
  }
  opt.zero_grad();
  terms.total.backward();
  opt.step();
  return m;
}

// -------------------------------------------------------------------- train

struct TrainConfig {
  TrainSchedule schedule;
  int secret_length = 100;  // channel bits
  bool use_ecc = false;
  int batch = 16;
  long max_steps = 30000;
  int val_every = 250;
  int val_images = 64;
  double val_ema = 0.5;  // smoothing of the validation loss for early stopping
  int checkpoint_every = 1000;
  int final_kernel = 3;
  EncoderVariant variant = EncoderVariant::secret_only;
  std::array<int, 3> decoder_blocks{2, 3, 3};
  std::uint64_t seed = 1;
  std::string log_csv;      // per-step metrics, appended
  std::string checkpoint;   // resumable checkpoint path
};

struct ValidationMetrics {
  double loss = 0, bit_acc_clean = 0, bit_acc_noised = 0, psnr = 0;
};

struct TrainResult {
  long steps = 0;
  bool early_stopped = false;
  TrainState state;
  ValidationMetrics final_val;
  double seconds = 0;
  std::vector<TrainState> history;  // state after each step
};

template <typename T>
ValidationMetrics validate(const StegoModel<T>& model, const Autoencoder<T>& ae, const PerceptualNet<T>& perceptual,
                           const Tensor<T>& covers, const Tensor<T>& latents, const TrainSchedule& sch,
                           const TrainState& state, std::uint64_t seed, int chunk = 16) {
  std::mt19937_64 rng(seed);
  ValidationMetrics v;
  const int n = covers.dim(0);
  for (int start = 0; start < n; start += chunk) {
    const int m = std::min(chunk, n - start);
    std::vector<Tensor<T>> xs, zs;
    for (int i = 0; i < m; ++i) {
      xs.push_back(batch_slice(covers, start + i));
      zs.push_back(batch_slice(latents, start + i));
    }
    const auto x = Var<T>::constant(batch_stack<T>(xs));
    const auto secrets = sample_secrets<T>(m, model.channel_bits(), rng);
    const Tensor<T> truth = payloads_to_tensor<T>(secrets);
    auto stego = model.embed_latent(ae, Var<T>::constant(batch_stack<T>(zs)), x, Var<T>::constant(truth));
    auto clean_logits = model.decoder(stego);
    auto noised = apply_training_noise(stego, rng);
    auto noised_logits = model.decoder(noised);
    auto seen_logits = state.noise_enabled() ? noised_logits : clean_logits;
    auto terms = total_loss(perceptual, stego, x, seen_logits, truth, state.beta_current, sch.alpha);
    v.loss += terms.total.item() * m;
    v.bit_acc_clean += batch_bit_accuracy(clean_logits.value(), truth) * m;
    v.bit_acc_noised += batch_bit_accuracy(noised_logits.value(), truth) * m;
    const auto si = batch_to_images(stego.value());
    const auto ci = batch_to_images(x.value());
    for (int i = 0; i < m; ++i) v.psnr += psnr(quantize8(si[i]), ci[i]);
  }
  v.loss /= n;
  v.bit_acc_clean /= n;
  v.bit_acc_noised /= n;
  v.psnr /= n;
  return v;
}

namespace train_detail {

inline std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}
inline void rng_from_string(std::mt19937_64& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng;
}

inline nlohmann::json schedule_json(const TrainSchedule& s) {
  return {{"alpha", s.alpha},         {"beta_start", s.beta_start}, {"beta_max", s.beta_max},
          {"t1", s.t1},               {"t2", s.t2},                 {"ramp_steps", s.ramp_steps},
          {"lr", s.lr},               {"weight_decay", s.weight_decay}, {"ema_decay", s.ema_decay},
          {"patience", s.patience},   {"grad_clip", s.grad_clip}};
}

template <typename T>
Tensor<T> gather(const Tensor<T>& all, std::span<const std::size_t> idx) {
  std::vector<Tensor<T>> parts;
  for (auto i : idx) parts.push_back(batch_slice(all, static_cast<int>(i)));
  return batch_stack<T>(parts);
}

template <typename T>
Tensor<T> encode_all(const Autoencoder<T>& ae, const Tensor<T>& images, int chunk = 32) {
  std::vector<Tensor<T>> parts;
  const int n = images.dim(0);
  for (int s = 0; s < n; s += chunk) {
    std::vector<Tensor<T>> xs;
    for (int i = s; i < std::min(n, s + chunk); ++i) xs.push_back(batch_slice(images, i));
    const auto z = ae.encode(Var<T>::constant(batch_stack<T>(xs))).value();
    for (int i = 0; i < z.dim(0); ++i) parts.push_back(batch_slice(z, i));
  }
  return batch_stack<T>(parts);
}

}  // namespace train_detail

// Checkpointable training session. Holds everything that evolves across steps.
template <typename T>
class Trainer {
 public:
  Trainer(const Autoencoder<T>& ae, const PerceptualNet<T>& perceptual, std::span<const Image> train_images,
          std::span<const Image> val_images, TrainConfig cfg)
      : ae_(ae), perceptual_(perceptual), cfg_(std::move(cfg)), model_(make_model(ae, cfg_)),
        opt_({.lr = cfg_.schedule.lr, .weight_decay = cfg_.schedule.weight_decay,
              .max_grad_norm = cfg_.schedule.grad_clip}), rng_(cfg_.seed) {
    cfg_.schedule.validate();
    if (!ae.frozen()) throw std::invalid_argument("autoencoder must be frozen before steganography training");
    if (train_images.empty()) throw std::invalid_argument("no training images");
    if (val_images.empty()) throw std::invalid_argument("no validation images");
    if (static_cast<int>(train_images.size()) < cfg_.batch) throw std::invalid_argument("fewer training images than the batch size");
    const int r = ae.config().resolution;
    auto prep = [r](std::span<const Image> in) {
      std::vector<Image> out;
      for (const auto& im : in) out.push_back((im.height == r && im.width == r) ? im : resize_bilinear(im, r, r));
      return out;
    };
    train_x_ = images_to_batch<T>(prep(train_images));
    val_x_ = images_to_batch<T>(prep(val_images.subspan(0, std::min<std::size_t>(val_images.size(), cfg_.val_images))));
    train_z_ = train_detail::encode_all(ae, train_x_);
    val_z_ = train_detail::encode_all(ae, val_x_);
    opt_.attach(model_.encoder.params());
    opt_.attach(model_.decoder.params());
    state_ = initial_state(cfg_.schedule);
    ae_digest_before_ = ae.digest();
    std::uniform_int_distribution<std::size_t> pick(0, train_x_.dim(0) - 1);
    for (int i = 0; i < cfg_.batch; ++i) fixed_batch_.push_back(pick(rng_));
    if (cfg_.use_ecc) {
      model_.ecc = ecc_for_channel(cfg_.secret_length);
      if (!model_.ecc) throw std::invalid_argument("no t=5 BCH code fits " + std::to_string(cfg_.secret_length) + " channel bits");
    }
  }

  const TrainState& state() const { return state_; }
  StegoModel<T>& model() { return model_; }
  const TrainConfig& config() const { return cfg_; }

  // One curriculum tick: training step + state update (+ validation).
  StepMetrics step() {
    std::vector<std::size_t> idx;
    if (state_.phase == Phase::WARMUP_FIXED_BATCH) {
      idx = fixed_batch_;
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, train_x_.dim(0) - 1);
      for (int i = 0; i < cfg_.batch; ++i) idx.push_back(pick(rng_));
    }
    auto m = training_step(model_, opt_, ae_, perceptual_, train_detail::gather(train_x_, idx),
                           train_detail::gather(train_z_, idx), cfg_.schedule, state_, rng_);
    state_ = curriculum_update(state_, cfg_.schedule, m.bit_acc);
    log_step(m);
    if (cfg_.val_every > 0 && state_.step % cfg_.val_every == 0) run_validation();
    return m;
  }

  // Early stopping only counts once the beta ramp has finished.
  bool should_stop() const {
    return ramp_complete(state_, cfg_.schedule) && state_.rounds_without_improvement >= cfg_.schedule.patience;
  }

  TrainResult run(const std::function<void(const StepMetrics&, const TrainState&)>& on_step = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult r;
    while (state_.step < cfg_.max_steps && !should_stop()) {
      auto m = step();
      r.history.push_back(state_);
      if (on_step) on_step(m, state_);
      if (!cfg_.checkpoint.empty() && cfg_.checkpoint_every > 0 && state_.step % cfg_.checkpoint_every == 0)
        save_checkpoint(cfg_.checkpoint);
    }
    if (ae_.digest() != ae_digest_before_) throw std::logic_error("autoencoder parameters changed during training");
    r.early_stopped = should_stop();
    r.steps = state_.step;
    r.state = state_;
    r.final_val = validate(model_, ae_, perceptual_, val_x_, val_z_, cfg_.schedule, state_, cfg_.seed + 77);
    last_val_ = r.final_val;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    finalize_info(r);
    if (!cfg_.checkpoint.empty()) save_checkpoint(cfg_.checkpoint);
    return r;
  }

  void run_validation() {
    const auto v = validate(model_, ae_, perceptual_, val_x_, val_z_, cfg_.schedule, state_, cfg_.seed + 77);
    last_val_ = v;
    const double a = cfg_.val_ema;
    state_.ema_val_loss = state_.val_rounds == 0 ? v.loss : a * state_.ema_val_loss + (1 - a) * v.loss;
    ++state_.val_rounds;
    // The loss scale changes with beta, so the baseline resets until the ramp is done.
    if (!ramp_complete(state_, cfg_.schedule) || state_.val_rounds == 1 || state_.ema_val_loss < state_.best_val_loss) {
      state_.best_val_loss = state_.ema_val_loss;
      state_.rounds_without_improvement = 0;
    } else {
      ++state_.rounds_without_improvement;
    }
    if (log_) {
      *log_ << "val," << state_.step << ',' << v.loss << ',' << v.bit_acc_clean << ',' << v.bit_acc_noised << ','
            << v.psnr << ',' << state_.ema_val_loss << '\n';
      log_->flush();
    }
  }

  const ValidationMetrics& last_validation() const { return last_val_; }

  // Everything needed to continue bit-identically: parameters, optimiser
  // moments, curriculum state, RNG state and the fixed warmup batch.
  void save_checkpoint(const std::string& path) const {
    Archive a;
    model_.save_to(a);
    auto& opt_state = a.meta["optimizer"];
    opt_state["step"] = opt_.step_count();
    auto& slots = const_cast<optim::AdamW<T>&>(opt_).slots();
    const auto& names = opt_.names();
    for (std::size_t i = 0; i < slots.size(); ++i) {
      a.put("opt." + std::to_string(i) + ".m", slots[i].m);
      a.put("opt." + std::to_string(i) + ".v", slots[i].v);
    }
    opt_state["names"] = names;
    a.meta["train_state"] = state_.to_json();
    a.meta["rng"] = train_detail::rng_to_string(rng_);
    a.meta["fixed_batch"] = fixed_batch_;
    a.meta["schedule"] = train_detail::schedule_json(cfg_.schedule);
    a.save(path);
  }

  void load_checkpoint(const std::string& path) {
    const Archive a = Archive::load(path);
    auto loaded = StegoModel<T>::load_from(a);
    copy_params(loaded.encoder.params(), model_.encoder.params());
    copy_params(loaded.decoder.params(), model_.decoder.params());
    model_.ecc = loaded.ecc;
    auto& slots = opt_.slots();
    const auto names = a.meta.at("optimizer").at("names").get<std::vector<std::string>>();
    if (names != opt_.names()) throw std::runtime_error("checkpoint optimizer layout does not match the model");
    for (std::size_t i = 0; i < slots.size(); ++i) {
      slots[i].m = a.get<T>("opt." + std::to_string(i) + ".m");
      slots[i].v = a.get<T>("opt." + std::to_string(i) + ".v");
    }
    opt_.set_step_count(a.meta.at("optimizer").at("step"));
    state_ = TrainState::from_json(a.meta.at("train_state"));
    train_detail::rng_from_string(rng_, a.meta.at("rng"));
    fixed_batch_ = a.meta.at("fixed_batch").get<std::vector<std::size_t>>();
  }

  void open_log(const std::string& path) {
    const bool fresh = !std::filesystem::exists(path);
    log_.emplace(path, std::ios::app);
    if (!*log_) throw std::runtime_error("cannot open log " + path);
    if (fresh) *log_ << "kind,step,loss,quality_or_bitacc_clean,recovery_or_bitacc_noised,bit_acc_or_psnr,beta_or_ema,phase\n";
  }

 private:
  static StegoModel<T> make_model(const Autoencoder<T>& ae, const TrainConfig& cfg) {
    const int r = ae.config().resolution, f = ae.factor();
    SecretEncoderConfig ec;
    ec.secret_length = cfg.secret_length;
    ec.latent_channels = ae.config().latent_channels;
    ec.latent_h = r / f;
    ec.latent_w = r / f;
    ec.final_kernel = cfg.final_kernel;
    ec.variant = cfg.variant;
    SecretDecoderConfig dc;
    dc.secret_length = cfg.secret_length;
    dc.resolution = r;
    dc.blocks = cfg.decoder_blocks;
    StegoModel<T> m(ec, dc, cfg.seed);
    m.ae_digest = ae.digest();
    return m;
  }

  static void copy_params(const nn::ParamSet<T>& from, nn::ParamSet<T>& to) {
    for (std::size_t i = 0; i < to.items().size(); ++i) to.items()[i].second.mutable_value() = from.items()[i].second.value();
  }

  void log_step(const StepMetrics& m) {
    if (!log_) return;
    *log_ << "train," << state_.step << ',' << m.loss << ',' << m.quality << ',' << m.recovery << ',' << m.bit_acc
          << ',' << m.beta << ',' << static_cast<int>(m.phase) << '\n';
  }

  void finalize_info(const TrainResult& r) {
    model_.info["schedule"] = train_detail::schedule_json(cfg_.schedule);
    model_.info["steps"] = r.steps;
    model_.info["early_stopped"] = r.early_stopped;
    model_.info["final_state"] = r.state.to_json();
    model_.info["validation"] = {{"loss", r.final_val.loss},
                                 {"bit_acc_clean", r.final_val.bit_acc_clean},
                                 {"bit_acc_noised", r.final_val.bit_acc_noised},
                                 {"psnr", r.final_val.psnr}};
    model_.info["train_images"] = train_x_.dim(0);
    model_.info["batch"] = cfg_.batch;
    model_.info["seed"] = cfg_.seed;
  }

  const Autoencoder<T>& ae_;
  const PerceptualNet<T>& perceptual_;
  TrainConfig cfg_;
  StegoModel<T> model_;
  optim::AdamW<T> opt_;
  std::mt19937_64 rng_;
  TrainState state_;
  Tensor<T> train_x_, train_z_, val_x_, val_z_;
  std::vector<std::size_t> fixed_batch_;
  std::string ae_digest_before_;
  ValidationMetrics last_val_;
  std::optional<std::ofstream> log_;
};

}  // namespace lstego
