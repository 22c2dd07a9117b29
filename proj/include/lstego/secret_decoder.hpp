#pragma once

#include <array>
#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lstego/bitcodec.hpp"
#include "lstego/core/nn.hpp"
#include "lstego/image.hpp"

namespace lstego {

struct SecretDecoderConfig {
  int secret_length = 100;
  int resolution = 64;                       // images are resized to this first
  std::array<int, 3> widths{32, 64, 128};    // stage widths, each stage halves the grid
  std::array<int, 3> blocks{2, 3, 3};        // residual blocks per stage

  int depth() const { return blocks[0] + blocks[1] + blocks[2]; }
  void validate() const {
    if (secret_length < 1) throw std::invalid_argument("secret length must be >= 1");
    if (resolution < 16) throw std::invalid_argument("decoder resolution must be >= 16");
    for (int b : blocks)
      if (b < 0) throw std::invalid_argument("block counts must be >= 0");
  }
};

// D: residual CNN, global average pool, linear head to L logits.
template <typename T>
class SecretDecoder {
 public:
  explicit SecretDecoder(SecretDecoderConfig cfg, std::uint64_t seed = 2) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    int prev = 3;
    for (int s = 0; s < 3; ++s) {
      const int w = cfg_.widths[s];
      downs_.emplace_back(params_, "stage" + std::to_string(s) + ".down", prev, w, 3, 2, 1, rng);
      for (int b = 0; b < cfg_.blocks[s]; ++b)
        blocks_.push_back({s, nn::ResBlock<T>(params_, "stage" + std::to_string(s) + ".block" + std::to_string(b), w, rng)});
      prev = w;
    }
    head_ = nn::Linear<T>(params_, "head", prev, cfg_.secret_length, rng);
  }

  const SecretDecoderConfig& config() const { return cfg_; }
  nn::ParamSet<T>& params() { return params_; }
  const nn::ParamSet<T>& params() const { return params_; }
  std::size_t parameter_count() const { return params_.count(); }

  // x: [N, 3, H, W] in the canonical range -> logits [N, L]
  Var<T> operator()(const Var<T>& x) const {
    if (x.shape().size() != 4 || x.dim(1) != 3 || x.dim(2) < 8 || x.dim(3) < 8)
      throw std::invalid_argument("secret decoder input must be [N, 3, H>=8, W>=8], got " + shape_str(x.shape()));
    Var<T> h = x;
    std::size_t bi = 0;
    for (int s = 0; s < 3; ++s) {
      h = ops::silu(downs_[s](h));
      for (; bi < blocks_.size() && blocks_[bi].first == s; ++bi) h = blocks_[bi].second(h);
    }
    h = ops::silu(h);
    return head_(ops::global_avg_pool(h));
  }

 private:
  SecretDecoderConfig cfg_;
  nn::ParamSet<T> params_;
  std::vector<nn::Conv2d<T>> downs_;
  std::vector<std::pair<int, nn::ResBlock<T>>> blocks_;
  nn::Linear<T> head_;
};

// Bits from logits: 1 iff logit > 0 (exact zero decodes to 0).
template <typename T>
SecretPayload logits_to_bits(std::span<const T> logits) {
  SecretPayload p = SecretPayload::zeros(static_cast<int>(logits.size()));
  for (std::size_t i = 0; i < logits.size(); ++i) p.set(static_cast<int>(i), logits[i] > T(0) ? 1 : 0);
  return p;
}

struct DecodedSecret {
  std::vector<double> logits;
  SecretPayload bits;
  double confidence = 0;  // mean |logit|
};

template <typename T>
DecodedSecret decode_secret(const SecretDecoder<T>& dec, const Image& img) {
  if (img.height < 8 || img.width < 8) throw std::invalid_argument("image too small for the secret decoder");
  const int r = dec.config().resolution;
  const Image in = (img.height == r && img.width == r) ? img : resize_bilinear(img, r, r);
  const auto out = dec(Var<T>::constant(in.to_tensor<T>())).value();
  DecodedSecret d;
  d.logits.assign(out.data(), out.data() + out.size());
  d.bits = logits_to_bits<double>(d.logits);
  for (double l : d.logits) d.confidence += std::abs(l);
  d.confidence /= static_cast<double>(d.logits.size());
  return d;
}

// Mean binary cross-entropy between logits [N, L] and target bits.
template <typename T>
Var<T> recovery_loss(const Var<T>& logits, const Tensor<T>& truth) {
  if (logits.shape() != truth.shape())
    throw std::invalid_argument("recovery_loss: logits " + shape_str(logits.shape()) + " vs targets " +
                                shape_str(truth.shape()));
  return ops::bce_with_logits(logits, truth);
}

inline double recovery_loss(std::span<const double> logits, const SecretPayload& truth) {
  if (static_cast<int>(logits.size()) != truth.size()) throw std::invalid_argument("recovery_loss: length mismatch");
  const int n = truth.size();
  Tensor<double> l({1, n}), t({1, n});
  for (int i = 0; i < n; ++i) {
    l[i] = logits[i];
    t[i] = truth[i];
  }
  return recovery_loss(Var<double>::constant(l), t).item();
}

}  // namespace lstego
