#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "lstego/core/archive.hpp"
#include "lstego/core/nn.hpp"
#include "lstego/core/optim.hpp"
#include "lstego/image.hpp"

namespace lstego {

// Deep-feature perceptual distance. Features from a small frozen CNN are
// unit-normalised across channels; the distance is the squared difference
// summed over channels, averaged over space, batch and layers.
template <typename T>
class PerceptualNet {
 public:
  explicit PerceptualNet(std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    c1_ = nn::Conv2d<T>(params_, "conv1", 3, 16, 3, 1, 1, rng);
    c2_ = nn::Conv2d<T>(params_, "conv2", 16, 32, 3, 2, 1, rng);
    c3_ = nn::Conv2d<T>(params_, "conv3", 32, 32, 3, 2, 1, rng);
  }

  std::vector<Var<T>> features(const Var<T>& x) const {
    std::vector<Var<T>> f;
    f.push_back(ops::silu(c1_(x)));
    f.push_back(ops::silu(c2_(f.back())));
    f.push_back(ops::silu(c3_(f.back())));
    return f;
  }

  Var<T> distance(const Var<T>& a, const Var<T>& b) const {
    a.value().check_same(b.value());
    return distance_to_features(a, features(b));
  }

  // Reuses precomputed reference features (e.g. of a fixed cover batch).
  Var<T> distance_to_features(const Var<T>& a, const std::vector<Var<T>>& ref) const {
    auto fa = features(a);
    Var<T> total;
    for (std::size_t l = 0; l < fa.size(); ++l) {
      const auto& s = fa[l].shape();
      auto d = ops::sub(ops::unit_normalize_channels(fa[l]), ops::unit_normalize_channels(ref[l]));
      // sum over channels, mean over batch*space == mean over all * C
      auto term = ops::scale(ops::mean(ops::mul(d, d)), static_cast<T>(s[1]));
      total = total ? ops::add(total, term) : term;
    }
    return ops::scale(total, T(1) / static_cast<T>(fa.size()));
  }

  double distance(const Image& a, const Image& b) const {
    if (!a.same_shape(b)) throw std::invalid_argument("perceptual_distance: image shapes differ");
    return distance(Var<T>::constant(a.to_tensor<T>()), Var<T>::constant(b.to_tensor<T>())).item();
  }

  nn::ParamSet<T>& params() { return params_; }
  const nn::ParamSet<T>& params() const { return params_; }

  // Fits the feature layers as the encoder of a small denoising autoencoder,
  // then freezes them. The decoder is discarded.
  void train(std::span<const Image> images, int steps, int batch, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    nn::ParamSet<T> head;
    nn::Conv2d<T> d1(head, "dec1", 32, 32, 3, 1, 1, rng), d2(head, "dec2", 32, 16, 3, 1, 1, rng),
        d3(head, "dec3", 16, 3, 3, 1, 1, rng);
    params_.set_trainable(true);
    optim::AdamW<T> opt({.lr = 2e-3, .weight_decay = 0.0});
    opt.attach(params_);
    opt.attach(head);
    std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int step = 0; step < steps; ++step) {
      std::vector<Image> clean;
      for (int i = 0; i < batch; ++i) clean.push_back(images[pick(rng)]);
      Tensor<T> target = images_to_batch<T>(clean);
      Tensor<T> noisy = target;
      const double sd = 0.1 * (static_cast<double>(step % 4) / 3.0);
      for (auto& v : noisy.vec()) v += static_cast<T>(sd * gauss(rng));
      auto f = features(Var<T>::constant(noisy));
      auto h = ops::silu(d1(f.back()));
      h = ops::silu(d2(ops::upsample_nearest(h, 2)));
      auto y = d3(ops::upsample_nearest(h, 2));
      auto loss = ops::mse(y, Var<T>::constant(target));
      opt.zero_grad();
      loss.backward();
      opt.step();
    }
    params_.set_trainable(false);
  }

 private:
  nn::ParamSet<T> params_;
  nn::Conv2d<T> c1_, c2_, c3_;
};

}  // namespace lstego
