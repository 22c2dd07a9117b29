#pragma once

#include <random>
#include <stdexcept>
#include <string>

#include "lstego/bitcodec.hpp"
#include "lstego/core/nn.hpp"
#include "lstego/noise.hpp"

namespace lstego {

enum class EncoderVariant { secret_only, joint_conditioned };

struct SecretEncoderConfig {
  int secret_length = 100;
  int latent_channels = 3;
  int latent_h = 16, latent_w = 16;
  int final_kernel = 3;  // 1 or 3
  EncoderVariant variant = EncoderVariant::secret_only;
  int joint_width = 32;  // hidden width of the joint variant's conv stack

  void validate() const {
    if (secret_length < 1) throw std::invalid_argument("secret length must be >= 1");
    if (latent_channels < 1) throw std::invalid_argument("latent channels must be >= 1");
    if (latent_h < 2 || latent_w < 2 || latent_h % 2 || latent_w % 2)
      throw std::invalid_argument("latent spatial dims must be even and >= 2");
    if (final_kernel != 1 && final_kernel != 3) throw std::invalid_argument("final kernel must be 1 or 3");
  }
  Shape latent_shape(int batch = 1) const { return {batch, latent_channels, latent_h, latent_w}; }
};

// F: secret bits -> latent offset. Linear + SiLU at half latent resolution,
// nearest x2 upsample, then a zero-initialised conv so F(s) = 0 at start.
template <typename T>
class SecretEncoder {
 public:
  explicit SecretEncoder(SecretEncoderConfig cfg, std::uint64_t seed = 1) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    const int hidden = cfg_.latent_channels * (cfg_.latent_h / 2) * (cfg_.latent_w / 2);
    fc_ = nn::Linear<T>(params_, "fc", cfg_.secret_length, hidden, rng);
    const int k = cfg_.final_kernel;
    if (cfg_.variant == EncoderVariant::secret_only) {
      out_ = nn::Conv2d<T>(params_, "out", cfg_.latent_channels, cfg_.latent_channels, k, 1, k / 2, rng, 0.0);
    } else {
      const int w = cfg_.joint_width;
      j1_ = nn::Conv2d<T>(params_, "joint1", cfg_.latent_channels + 3, w, 3, 1, 1, rng);
      j2_ = nn::Conv2d<T>(params_, "joint2", w, w, 3, 1, 1, rng);
      out_ = nn::Conv2d<T>(params_, "out", w, cfg_.latent_channels, k, 1, k / 2, rng, 0.0);
    }
  }

  const SecretEncoderConfig& config() const { return cfg_; }
  nn::ParamSet<T>& params() { return params_; }
  const nn::ParamSet<T>& params() const { return params_; }
  std::size_t parameter_count() const { return params_.count(); }

  // bits: [N, L] of {0, 1}. Secret-only variant.
  Var<T> operator()(const Var<T>& bits) const {
    if (cfg_.variant != EncoderVariant::secret_only)
      throw std::invalid_argument("joint-conditioned encoder needs the cover image");
    return out_(embed(bits));
  }

  // Joint variant: cover [N, 3, H, W] is blurred (sigma 2), average-pooled to
  // the latent grid and concatenated with the upsampled secret embedding.
  Var<T> operator()(const Var<T>& cover, const Var<T>& bits) const {
    if (cfg_.variant == EncoderVariant::secret_only) return (*this)(bits);
    const int f = cover.dim(2) / cfg_.latent_h;
    if (f < 1 || cover.dim(2) != f * cfg_.latent_h || cover.dim(3) != f * cfg_.latent_w)
      throw std::invalid_argument("cover size is not a multiple of the latent grid");
    auto small = ops::filter2d(ops::detach(cover), noise_detail::gaussian_kernel(2.0));
    if (f > 1) small = ops::avg_pool(small, f);
    auto h = ops::concat_channels(embed(bits), small);
    h = ops::silu(j1_(h));
    h = ops::silu(j2_(h));
    return out_(h);
  }

  Tensor<float> encode_secret(const SecretPayload& s) const {
    check_length(s);
    std::vector<SecretPayload> one{s};
    return (*this)(Var<T>::constant(payloads_to_tensor<T>(one))).value().template cast<float>();
  }

 private:
  void check_length(const SecretPayload& s) const {
    if (s.size() != cfg_.secret_length)
      throw std::invalid_argument("secret has " + std::to_string(s.size()) + " bits, encoder expects " +
                                  std::to_string(cfg_.secret_length));
  }

  Var<T> embed(const Var<T>& bits) const {
    if (bits.shape().size() != 2 || bits.dim(1) != cfg_.secret_length)
      throw std::invalid_argument("secret batch must be [N, " + std::to_string(cfg_.secret_length) + "]");
    auto h = ops::silu(fc_(bits));
    h = ops::reshape(h, {bits.dim(0), cfg_.latent_channels, cfg_.latent_h / 2, cfg_.latent_w / 2});
    return ops::upsample_nearest(h, 2);
  }

  SecretEncoderConfig cfg_;
  nn::ParamSet<T> params_;
  nn::Linear<T> fc_;
  nn::Conv2d<T> j1_, j2_, out_;
};

}  // namespace lstego
