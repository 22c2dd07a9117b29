#include <gtest/gtest.h>

#include "lstego/autoencoder.hpp"
#include "lstego/secret_encoder.hpp"
#include "test_util.hpp"

using namespace lstego;
using namespace lstego::testing;

namespace {

SecretEncoderConfig cfg_for(int L, int latent, int k, EncoderVariant v = EncoderVariant::secret_only) {
  SecretEncoderConfig c;
  c.secret_length = L;
  c.latent_h = c.latent_w = latent;
  c.final_kernel = k;
  c.variant = v;
  return c;
}

// Give the zero-initialised head some weight so outputs are nonzero.
template <typename T>
void jitter(SecretEncoder<T>& f, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.1);
  for (auto& [name, p] : f.params().items())
    for (auto& v : p.mutable_value().vec()) v += static_cast<T>(n(rng));
}

}  // namespace

TEST(SecretEncoder, ParameterCounts) {
  // L*H'W'C'/4 + H'W'C'/4 + (k*k*C'*C' + C')
  EXPECT_EQ(SecretEncoder<float>(cfg_for(100, 64, 3)).parameter_count(), 100u * 3072 + 3072 + (3 * 3 * 3 * 3 + 3));
  EXPECT_EQ(SecretEncoder<float>(cfg_for(100, 64, 3)).parameter_count(), 310356u);
  EXPECT_EQ(SecretEncoder<float>(cfg_for(100, 64, 1)).parameter_count(), 310284u);
  EXPECT_EQ(SecretEncoder<float>(cfg_for(32, 16, 3)).parameter_count(), 32u * 192 + 192 + 84);
}

TEST(SecretEncoder, ConfigValidation) {
  EXPECT_THROW(SecretEncoder<float>(cfg_for(0, 16, 3)), std::invalid_argument);
  EXPECT_THROW(SecretEncoder<float>(cfg_for(8, 15, 3)), std::invalid_argument);
  EXPECT_THROW(SecretEncoder<float>(cfg_for(8, 16, 5)), std::invalid_argument);
}

TEST(SecretEncoder, ZeroAtInitForAnySecret) {
  for (int k : {1, 3}) {
    SecretEncoder<float> f(cfg_for(100, 16, k), 7);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto d = f.encode_secret(random_secret(100, s));
      EXPECT_EQ(d.shape(), (Shape{1, 3, 16, 16}));
      for (float v : d.vec()) ASSERT_EQ(v, 0.f);
    }
  }
}

TEST(SecretEncoder, LengthMismatchThrows) {
  SecretEncoder<float> f(cfg_for(32, 16, 3));
  EXPECT_THROW(f.encode_secret(random_secret(31, 1)), std::invalid_argument);
  EXPECT_THROW(f(Var<float>::constant(Tensor<float>({2, 33}))), std::invalid_argument);
}

TEST(SecretEncoder, ZeroInitStegoEqualsReconstruction) {
  AutoencoderConfig ac;
  ac.resolution = 32;
  ac.widths = {8, 12, 16};
  Autoencoder<float> ae(ac, 3);
  SecretEncoder<float> f(cfg_for(16, 8, 3), 4);
  for (std::uint64_t i = 0; i < 10; ++i) {
    const auto x = random_image(32, 32, i);
    const auto z = ae.encode(Var<float>::constant(x.to_tensor()));
    std::vector<SecretPayload> s{random_secret(16, 100 + i)};
    const auto stego = ae.decode(ops::add(z, f(Var<float>::constant(payloads_to_tensor<float>(s))))).value();
    EXPECT_EQ(stego, ae.decode(z).value());
  }
}

TEST(SecretEncoder, OutputDependsOnSecretOnly) {
  SecretEncoder<double> f(cfg_for(16, 8, 3), 1);
  jitter(f, 2);
  const auto s = random_secret(16, 5);
  const auto a = f.encode_secret(s), b = f.encode_secret(s);
  EXPECT_EQ(a, b);
  // the two-argument call ignores the cover for this variant
  std::vector<SecretPayload> one{s};
  const auto bits = Var<double>::constant(payloads_to_tensor<double>(one));
  const auto c1 = f(Var<double>::constant(random_tensor({1, 3, 32, 32}, 1)), bits).value();
  const auto c2 = f(Var<double>::constant(random_tensor({1, 3, 32, 32}, 2)), bits).value();
  EXPECT_EQ(c1, c2);
  EXPECT_NE(f.encode_secret(s), f.encode_secret(s.inverted()));
}

TEST(SecretEncoder, GradientsReachAllParameters) {
  SecretEncoder<double> f(cfg_for(8, 4, 3), 1);
  jitter(f, 3);
  Tensor<double> bits({2, 8});
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = static_cast<double>((i * 5) % 3 == 0);
  const auto b = Var<double>::constant(bits);
  for (auto& [name, p] : f.params().items()) {
    const auto r = check_gradient([&] { return probe_loss(f(b), 9); }, p, sample_coords(p.size(), 40, 1));
    EXPECT_LT(r.rel_error, 1e-6) << name;
    EXPECT_GT(r.analytic_norm, 0) << name;
  }
}

TEST(SecretEncoder, ZeroHeadStillPassesGradientToHead) {
  // at init only the head's weight and bias receive gradient; it is nonzero
  SecretEncoder<double> f(cfg_for(8, 4, 3), 1);
  Tensor<double> bits({1, 8}, 1.0);
  probe_loss(f(Var<double>::constant(bits)), 2).backward();
  for (auto& [name, p] : f.params().items())
    if (name.starts_with("out.")) {
      ASSERT_TRUE(p.has_grad()) << name;
      double n = 0;
      for (double g : p.grad().vec()) n += g * g;
      EXPECT_GT(n, 0) << name;
    }
}

TEST(JointEncoder, ZeroAtInitAndShape) {
  SecretEncoder<float> f(cfg_for(16, 8, 3, EncoderVariant::joint_conditioned), 2);
  std::vector<SecretPayload> s{random_secret(16, 1), random_secret(16, 2)};
  const auto cover = Var<float>::constant(random_tensor({2, 3, 32, 32}, 3).cast<float>());
  const auto d = f(cover, Var<float>::constant(payloads_to_tensor<float>(s))).value();
  EXPECT_EQ(d.shape(), (Shape{2, 3, 8, 8}));
  for (float v : d.vec()) EXPECT_EQ(v, 0.f);
  EXPECT_THROW(f(Var<float>::constant(payloads_to_tensor<float>(s))), std::invalid_argument);
  EXPECT_THROW(f(Var<float>::constant(Tensor<float>({2, 3, 30, 30})), Var<float>::constant(payloads_to_tensor<float>(s))),
               std::invalid_argument);
  EXPECT_GT(f.parameter_count(), SecretEncoder<float>(cfg_for(16, 8, 3)).parameter_count());
}

TEST(JointEncoder, SeesTheCoverOnceTrained) {
  SecretEncoder<double> f(cfg_for(8, 4, 3, EncoderVariant::joint_conditioned), 2);
  jitter(f, 5);
  Tensor<double> bits({1, 8}, 1.0);
  const auto b = Var<double>::constant(bits);
  const auto a = f(Var<double>::constant(random_tensor({1, 3, 16, 16}, 1)), b).value();
  const auto c = f(Var<double>::constant(random_tensor({1, 3, 16, 16}, 2)), b).value();
  EXPECT_NE(a, c);
  // cover is detached: no gradient flows back into it
  auto cover = Var<double>::leaf(random_tensor({1, 3, 16, 16}, 1));
  probe_loss(f(cover, b), 3).backward();
  EXPECT_FALSE(cover.has_grad());
}
