#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lstego/core/ops.hpp"

namespace lstego::nn {

// Ordered, named parameter registry shared by the networks.
template <typename T>
class ParamSet {
 public:
  Var<T> add(std::string name, Tensor<T> init) {
    auto v = Var<T>::leaf(std::move(init), trainable_);
    params_.emplace_back(std::move(name), v);
    return v;
  }

  std::vector<std::pair<std::string, Var<T>>>& items() { return params_; }
  const std::vector<std::pair<std::string, Var<T>>>& items() const { return params_; }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : params_) n += v.size();
    return n;
  }

  void set_trainable(bool t) {
    trainable_ = t;
    for (auto& [_, v] : params_) {
      v.set_requires_grad(t);
      if (!t) v.zero_grad();
    }
  }
  bool trainable() const { return trainable_; }

  void zero_grad() {
    for (auto& [_, v] : params_) v.zero_grad();
  }

  // FNV-1a over names and raw parameter bytes.
  std::string digest() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* p, std::size_t n) {
      const auto* b = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 1099511628211ULL;
      }
    };
    for (const auto& [name, v] : params_) {
      mix(name.data(), name.size());
      mix(v.value().data(), v.size() * sizeof(T));
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
  }

 private:
  std::vector<std::pair<std::string, Var<T>>> params_;
  bool trainable_ = true;
};

template <typename T>
Tensor<T> uniform_tensor(Shape s, T bound, std::mt19937_64& rng) {
  Tensor<T> t(std::move(s));
  std::uniform_real_distribution<double> u(-static_cast<double>(bound), static_cast<double>(bound));
  for (auto& v : t.vec()) v = static_cast<T>(u(rng));
  return t;
}

template <typename T>
struct Conv2d {
  Var<T> weight, bias;
  int stride = 1, pad = 0;

  Conv2d() = default;
  // gain scales the He-uniform bound; gain 0 gives an all-zero layer.
  Conv2d(ParamSet<T>& ps, const std::string& name, int cin, int cout, int k, int stride_, int pad_,
         std::mt19937_64& rng, double gain = 1.0)
      : stride(stride_), pad(pad_) {
    const double bound = gain * std::sqrt(6.0 / (cin * k * k));
    weight = ps.add(name + ".weight", uniform_tensor<T>({cout, cin, k, k}, static_cast<T>(bound), rng));
    bias = ps.add(name + ".bias", Tensor<T>({cout}));
  }
  Var<T> operator()(const Var<T>& x) const { return ops::conv2d(x, weight, bias, stride, pad); }
};

template <typename T>
struct Linear {
  Var<T> weight, bias;

  Linear() = default;
  Linear(ParamSet<T>& ps, const std::string& name, int in, int out, std::mt19937_64& rng, double gain = 1.0) {
    const double bound = gain / std::sqrt(static_cast<double>(in));
    weight = ps.add(name + ".weight", uniform_tensor<T>({out, in}, static_cast<T>(bound), rng));
    bias = ps.add(name + ".bias", uniform_tensor<T>({out}, static_cast<T>(bound), rng));
  }
  Var<T> operator()(const Var<T>& x) const { return ops::linear(x, weight, bias); }
};

// x + conv(silu(conv(silu(x)))), second conv started small.
template <typename T>
struct ResBlock {
  Conv2d<T> c1, c2;

  ResBlock() = default;
  ResBlock(ParamSet<T>& ps, const std::string& name, int ch, std::mt19937_64& rng)
      : c1(ps, name + ".conv1", ch, ch, 3, 1, 1, rng), c2(ps, name + ".conv2", ch, ch, 3, 1, 1, rng, 0.1) {}

  Var<T> operator()(const Var<T>& x) const { return ops::add(x, c2(ops::silu(c1(ops::silu(x))))); }
};

}  // namespace lstego::nn
