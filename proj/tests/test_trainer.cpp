#include <gtest/gtest.h>

#include "lstego/synth.hpp"
#include "lstego/trainer.hpp"
#include "test_util.hpp"

using namespace lstego;
using namespace lstego::testing;

namespace {

AutoencoderConfig tiny_ae(int res) {
  AutoencoderConfig c;
  c.resolution = res;
  c.widths = {8, 12, 16};
  return c;
}

TrainConfig tiny_train(int L) {
  TrainConfig c;
  c.secret_length = L;
  c.batch = 4;
  c.max_steps = 12;
  c.val_every = 5;
  c.val_images = 4;
  c.decoder_blocks = {1, 1, 1};
  c.seed = 3;
  c.schedule.lr = 1e-3;
  return c;
}

// Shared frozen AE + perceptual net, trained just enough to be non-degenerate.
struct Fixture {
  Autoencoder<float> ae{tiny_ae(32), 1};
  PerceptualNet<float> perceptual{2};
  std::vector<Image> train = synth::generate_dataset(0, 24, 32);
  std::vector<Image> val = synth::generate_dataset(5000, 4, 32);
  Fixture() {
    AeTrainConfig c;
    c.steps = 30;
    c.batch = 4;
    c.perceptual_steps = 5;
    c.min_images = 1;
    c.calibration_images = 24;
    train_reference_autoencoder(ae, perceptual, train, c);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

template <typename T>
void jitter(nn::ParamSet<T>& ps, std::uint64_t seed, double sd) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  for (auto& [name, p] : ps.items())
    for (auto& v : p.mutable_value().vec()) v += static_cast<T>(n(rng));
}

}  // namespace

TEST(Schedule, DefaultsAndValidation) {
  TrainSchedule s;
  EXPECT_EQ(s.alpha, 1.5);
  EXPECT_EQ(s.beta_start, 0.1);
  EXPECT_EQ(s.beta_max, 10.0);
  EXPECT_EQ(s.t1, 0.9);
  EXPECT_EQ(s.t2, 0.98);
  EXPECT_EQ(s.lr, 8e-5);
  EXPECT_EQ(s.ramp_steps, 10000);
  EXPECT_EQ(s.patience, 5);
  EXPECT_NO_THROW(s.validate());
  auto bad = s;
  bad.t1 = 0.99;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = s;
  bad.beta_start = 20;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Curriculum, ThresholdExamples) {
  TrainSchedule s;
  const auto s0 = initial_state(s);
  EXPECT_EQ(s0.phase, Phase::WARMUP_FIXED_BATCH);
  EXPECT_EQ(curriculum_update(s0, s, 0.89).phase, Phase::WARMUP_FIXED_BATCH);
  const auto s1 = curriculum_update(s0, s, 0.91);
  EXPECT_EQ(s1.phase, Phase::FULL_DATA);
  EXPECT_EQ(s1.beta_current, 0.1);
  EXPECT_THROW(curriculum_update(s0, s, 1.2), std::invalid_argument);
  EXPECT_THROW(curriculum_update(s0, s, -0.1), std::invalid_argument);
}

TEST(Curriculum, RampReachesBetaMaxAndNoise) {
  TrainSchedule s;
  s.ramp_steps = 100;
  auto st = curriculum_update(initial_state(s), s, 0.95);
  ASSERT_EQ(st.phase, Phase::FULL_DATA);
  st = curriculum_update(st, s, 0.99);
  // bias-corrected EMA of (0.95, 0.99) with decay 0.99 is just under 0.97
  EXPECT_EQ(st.phase, Phase::FULL_DATA);
  while (st.phase != Phase::NOISE_AND_RAMP) st = curriculum_update(st, s, 0.99);
  EXPECT_TRUE(st.noise_enabled());
  EXPECT_EQ(st.beta_current, s.beta_start);
  const long start = st.ramp_start_step;
  for (int i = 0; i < 50; ++i) st = curriculum_update(st, s, 0.99);
  EXPECT_NEAR(st.beta_current, 0.1 + 9.9 * 0.5, 1e-12);
  for (int i = 0; i < 50; ++i) st = curriculum_update(st, s, 0.99);
  EXPECT_EQ(st.step - start, 100);
  EXPECT_DOUBLE_EQ(st.beta_current, 10.0);
  EXPECT_TRUE(ramp_complete(st, s));
  for (int i = 0; i < 10; ++i) st = curriculum_update(st, s, 0.2);
  EXPECT_DOUBLE_EQ(st.beta_current, 10.0);
  EXPECT_EQ(st.phase, Phase::NOISE_AND_RAMP);
}

TEST(Curriculum, EmaMatchesDirectFormula) {
  TrainSchedule s;
  auto st = initial_state(s);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 0.8);  // stay in warmup
  double raw = 0;
  for (int i = 1; i <= 300; ++i) {
    const double a = u(rng);
    st = curriculum_update(st, s, a);
    raw = 0.99 * raw + 0.01 * a;
    EXPECT_NEAR(st.ema_bit_acc, raw / (1 - std::pow(0.99, i)), 1e-12);
  }
}

TEST(Curriculum, MonotonePhaseAndBetaOverRandomRuns) {
  TrainSchedule s;
  s.ramp_steps = 200;
  std::mt19937_64 rng(1);
  for (int run = 0; run < 50; ++run) {
    std::uniform_real_distribution<double> u(0.3 + run * 0.014, 1.0);
    auto st = initial_state(s);
    for (int i = 0; i < 600; ++i) {
      const auto next = curriculum_update(st, s, u(rng));
      ASSERT_GE(static_cast<int>(next.phase), static_cast<int>(st.phase));
      ASSERT_LE(static_cast<int>(next.phase) - static_cast<int>(st.phase), 1);
      ASSERT_GE(next.beta_current, st.beta_current);
      ASSERT_EQ(next.step, st.step + 1);
      st = next;
    }
  }
}

TEST(Curriculum, StateJsonRoundtrip) {
  TrainSchedule s;
  auto st = initial_state(s);
  for (int i = 0; i < 20; ++i) st = curriculum_update(st, s, 0.995);
  st.ema_val_loss = 0.25;
  st.best_val_loss = 0.2;
  st.val_rounds = 3;
  st.rounds_without_improvement = 1;
  const auto back = TrainState::from_json(nlohmann::json::parse(st.to_json().dump()));
  EXPECT_EQ(back.to_json(), st.to_json());
}

TEST(Losses, QualityLossComponents) {
  PerceptualNet<double> p(1);
  const auto a = Var<double>::constant(random_tensor({2, 3, 16, 16}, 1, -0.9, 0.9));
  const auto b = Var<double>::constant(random_tensor({2, 3, 16, 16}, 2, -0.9, 0.9));
  EXPECT_EQ(quality_loss(p, a, a, 1.5).item(), 0.0);
  EXPECT_EQ(quality_loss(p, a, b, 0.0).item(), p.distance(a, b).item());
  // perceptual + alpha * mse over YUV, both recomputed here
  const auto ya = rgb_to_yuv(a).value(), yb = rgb_to_yuv(b).value();
  double mse = 0;
  for (std::size_t i = 0; i < ya.size(); ++i) mse += (ya[i] - yb[i]) * (ya[i] - yb[i]);
  mse /= static_cast<double>(ya.size());
  EXPECT_NEAR(quality_loss(p, a, b, 1.5).item(), p.distance(a, b).item() + 1.5 * mse, 1e-12);
  EXPECT_NEAR(0.02 + 1.5 * 0.001, 0.0215, 1e-15);
  EXPECT_THROW(quality_loss(p, a, Var<double>::constant(Tensor<double>({2, 3, 8, 8})), 1.5), std::invalid_argument);
}

TEST(Losses, TotalLossIsAffineInBeta) {
  PerceptualNet<double> p(1);
  const auto a = Var<double>::constant(random_tensor({1, 3, 16, 16}, 1, -0.9, 0.9));
  const auto b = Var<double>::constant(random_tensor({1, 3, 16, 16}, 2, -0.9, 0.9));
  const auto logits = Var<double>::constant(random_tensor({1, 8}, 3, -3, 3));
  Tensor<double> truth({1, 8});
  for (std::size_t i = 0; i < 8; ++i) truth[i] = static_cast<double>(i % 2);
  const auto l0 = total_loss(p, a, b, logits, truth, 0.0, 1.5);
  EXPECT_EQ(l0.total.item(), recovery_loss(logits, truth).item());
  const auto l1 = total_loss(p, a, b, logits, truth, 1.0, 1.5), l10 = total_loss(p, a, b, logits, truth, 10.0, 1.5);
  EXPECT_NEAR(l10.total.item() - l1.total.item(), 9.0 * l1.quality.item(), 1e-12);
  EXPECT_NEAR(10.0 * 0.05 + 0.02, 0.52, 1e-15);
  // identical images and saturated correct logits
  Tensor<double> sat({1, 8});
  for (std::size_t i = 0; i < 8; ++i) sat[i] = truth[i] > 0.5 ? 30.0 : -30.0;
  EXPECT_LT(total_loss(p, a, a, Var<double>::constant(sat), truth, 10.0, 1.5).total.item(), 1e-12);
}

TEST(Losses, GradientOfTotalLossMatchesFiniteDifferences) {
  // 16x16 covers, L = 8, all in double
  Autoencoder<double> ae(tiny_ae(16), 3);
  ae.freeze();
  PerceptualNet<double> p(4);
  SecretEncoderConfig ec;
  ec.secret_length = 8;
  ec.latent_h = ec.latent_w = 4;
  SecretDecoderConfig dc;
  dc.secret_length = 8;
  dc.resolution = 16;
  dc.widths = {4, 6, 8};
  dc.blocks = {1, 1, 1};
  StegoModel<double> model(ec, dc, 5);
  jitter(model.encoder.params(), 6, 0.05);
  const auto x = Var<double>::constant(random_tensor({2, 3, 16, 16}, 7, -0.8, 0.8));
  Tensor<double> truth({2, 8});
  for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = static_cast<double>((i * 3) % 5 < 2);
  auto f = [&] {
    auto stego = model.embed(ae, x, Var<double>::constant(truth));
    return total_loss(p, stego, x, model.decoder(stego), truth, 2.0, 1.5).total;
  };
  for (auto* ps : {&model.encoder.params(), &model.decoder.params()})
    for (auto& [name, v] : ps->items()) {
      const auto r = check_gradient(f, v, sample_coords(v.size(), 12, 8));
      EXPECT_LT(r.rel_error, 1e-3) << name;
    }
  // the frozen autoencoder receives nothing
  f().backward();
  for (auto& [name, v] : ae.decoder_params().items()) EXPECT_FALSE(v.has_grad()) << name;
}

TEST(TrainingStep, ZeroInitStegoIsReconstruction) {
  auto& fx = fixture();
  Trainer<float> tr(fx.ae, fx.perceptual, fx.train, fx.val, tiny_train(8));
  const auto x = Var<float>::constant(images_to_batch<float>(std::span(fx.train.data(), 3)));
  Tensor<float> bits({3, 8}, 1.f);
  EXPECT_EQ(tr.model().embed(fx.ae, x, Var<float>::constant(bits)).value(), fx.ae.decode(fx.ae.encode(x)).value());
}

TEST(TrainingStep, RequiresFrozenAutoencoder) {
  auto& fx = fixture();
  Autoencoder<float> warm(tiny_ae(32), 9);
  EXPECT_THROW(Trainer<float>(warm, fx.perceptual, fx.train, fx.val, tiny_train(8)), std::invalid_argument);
  StegoModel<float> m(SecretEncoderConfig{.secret_length = 8, .latent_h = 8, .latent_w = 8},
                      SecretDecoderConfig{.secret_length = 8, .resolution = 32, .blocks = {0, 0, 0}}, 1);
  optim::AdamW<float> opt;
  std::mt19937_64 rng(1);
  const auto x = images_to_batch<float>(std::span(fx.train.data(), 2));
  EXPECT_THROW(training_step(m, opt, warm, fx.perceptual, x, warm.encode(Var<float>::constant(x)).value(),
                             TrainSchedule{}, initial_state(TrainSchedule{}), rng),
               std::logic_error);
}

TEST(TrainingStep, NonFiniteLossAborts) {
  auto& fx = fixture();
  StegoModel<float> m(SecretEncoderConfig{.secret_length = 8, .latent_h = 8, .latent_w = 8},
                      SecretDecoderConfig{.secret_length = 8, .resolution = 32, .blocks = {0, 0, 0}}, 1);
  for (auto& [name, p] : m.decoder.params().items())
    if (name == "head.bias") p.mutable_value().fill(NAN);
  optim::AdamW<float> opt;
  opt.attach(m.encoder.params());
  opt.attach(m.decoder.params());
  std::mt19937_64 rng(1);
  const auto x = images_to_batch<float>(std::span(fx.train.data(), 2));
  try {
    training_step(m, opt, fx.ae, fx.perceptual, x, fx.ae.encode(Var<float>::constant(x)).value(), TrainSchedule{},
                  initial_state(TrainSchedule{}), rng);
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("phase"), std::string::npos);
  }
}

TEST(Trainer, RunKeepsAutoencoderFrozenAndLogsMonotoneStates) {
  auto& fx = fixture();
  const auto digest = fx.ae.digest();
  auto cfg = tiny_train(8);
  cfg.schedule.t1 = 0.5;  // reach later phases within a few steps
  cfg.schedule.t2 = 0.55;
  cfg.schedule.ramp_steps = 4;
  cfg.max_steps = 20;
  Trainer<float> tr(fx.ae, fx.perceptual, fx.train, fx.val, cfg);
  const auto r = tr.run();
  EXPECT_EQ(fx.ae.digest(), digest);
  ASSERT_EQ(static_cast<long>(r.history.size()), r.steps);
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    EXPECT_GE(static_cast<int>(r.history[i].phase), static_cast<int>(r.history[i - 1].phase));
    EXPECT_GE(r.history[i].beta_current, r.history[i - 1].beta_current);
  }
  EXPECT_GT(r.final_val.psnr, 0);
  EXPECT_EQ(tr.model().info["steps"], r.steps);
}

TEST(Trainer, ResumeGivesIdenticalNextLoss) {
  auto& fx = fixture();
  const auto dir = std::filesystem::temp_directory_path();
  const auto ckpt = (dir / "lstego_trainer_resume.ckpt").string();
  auto cfg = tiny_train(8);
  cfg.schedule.t1 = 0.5;
  cfg.schedule.t2 = 0.6;

  Trainer<float> a(fx.ae, fx.perceptual, fx.train, fx.val, cfg);
  for (int i = 0; i < 6; ++i) a.step();
  a.save_checkpoint(ckpt);
  std::vector<double> uninterrupted;
  for (int i = 0; i < 3; ++i) uninterrupted.push_back(a.step().loss);

  Trainer<float> b(fx.ae, fx.perceptual, fx.train, fx.val, cfg);
  b.load_checkpoint(ckpt);
  EXPECT_EQ(b.state().to_json(), TrainState::from_json(Archive::load(ckpt).meta["train_state"]).to_json());
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(b.step().loss, uninterrupted[i], 1e-5 * std::abs(uninterrupted[i])) << i;
  std::filesystem::remove(ckpt);
}

TEST(Trainer, StegoModelArchiveRoundtrip) {
  auto& fx = fixture();
  auto cfg = tiny_train(32);
  cfg.use_ecc = true;
  Trainer<float> tr(fx.ae, fx.perceptual, fx.train, fx.val, cfg);
  for (int i = 0; i < 2; ++i) tr.step();
  ASSERT_TRUE(tr.model().ecc.has_value());
  EXPECT_EQ(tr.model().ecc->codeword_length_n, 32);
  Archive a;
  tr.model().save_to(a);
  const auto back = StegoModel<float>::load_from(a);
  EXPECT_EQ(back.encoder.params().digest(), tr.model().encoder.params().digest());
  EXPECT_EQ(back.decoder.params().digest(), tr.model().decoder.params().digest());
  EXPECT_EQ(back.ecc, tr.model().ecc);
  EXPECT_EQ(back.ae_digest, fx.ae.digest());
  const auto data = random_secret(back.data_bits(), 1);
  EXPECT_EQ(back.to_channel(data).size(), 32);
  EXPECT_THROW(back.to_channel(random_secret(back.data_bits() + 1, 1)), std::invalid_argument);
}

TEST(Trainer, EccRejectedWhenNoCodeFits) {
  auto& fx = fixture();
  auto cfg = tiny_train(8);
  cfg.use_ecc = true;
  EXPECT_THROW(Trainer<float>(fx.ae, fx.perceptual, fx.train, fx.val, cfg), std::invalid_argument);
}
