#pragma once

#include <cmath>
#include <vector>

#include "lstego/core/nn.hpp"

namespace lstego::optim {

struct AdamWConfig {
  double lr = 8e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double max_grad_norm = 0;  // global L2 clip before the update, 0 disables
};

// Adam with decoupled weight decay. Binds to one or more parameter sets.
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  void attach(nn::ParamSet<T>& ps) {
    for (auto& [name, v] : ps.items()) {
      slots_.push_back({v, Tensor<T>(v.shape()), Tensor<T>(v.shape())});
      names_.push_back(name);
    }
  }

  void set_lr(double lr) { cfg_.lr = lr; }
  const AdamWConfig& config() const { return cfg_; }
  long step_count() const { return step_; }

  void zero_grad() {
    for (auto& s : slots_) s.param.zero_grad();
  }

  // Global L2 norm of the current gradients.
  double grad_norm() const {
    double ss = 0;
    for (const auto& s : slots_) {
      if (!s.param.has_grad()) continue;
      const auto& g = s.param.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ss += static_cast<double>(g[i]) * g[i];
    }
    return std::sqrt(ss);
  }

  void step() {
    ++step_;
    double scale = 1.0;
    if (cfg_.max_grad_norm > 0) {
      const double n = grad_norm();
      if (n > cfg_.max_grad_norm) scale = cfg_.max_grad_norm / n;
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (auto& s : slots_) {
      if (!s.param.has_grad()) continue;
      auto& w = s.param.mutable_value();
      const auto& g = s.param.grad();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = scale * g[i];
        const double m = cfg_.beta1 * s.m[i] + (1 - cfg_.beta1) * gi;
        const double v = cfg_.beta2 * s.v[i] + (1 - cfg_.beta2) * gi * gi;
        s.m[i] = static_cast<T>(m);
        s.v[i] = static_cast<T>(v);
        double wi = w[i] * (1.0 - cfg_.lr * cfg_.weight_decay);
        wi -= cfg_.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
        w[i] = static_cast<T>(wi);
      }
    }
  }

  // Moment buffers exposed by parameter name for checkpointing.
  struct Slot {
    Var<T> param;
    Tensor<T> m, v;
  };
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<std::string>& names() const { return names_; }
  void set_step_count(long s) { step_ = s; }

 private:
  AdamWConfig cfg_;
  std::vector<Slot> slots_;
  std::vector<std::string> names_;
  long step_ = 0;
};

}  // namespace lstego::optim
