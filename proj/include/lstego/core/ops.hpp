#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <stdexcept>

#include "lstego/core/autograd.hpp"

namespace lstego::ops {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapR = Eigen::Map<const RowMat<T>>;

inline void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

template <typename T>
Node<T>* input(Node<T>& n, std::size_t i) {
  return n.inputs[i]->requires_grad ? n.inputs[i].get() : nullptr;
}

struct ConvGeom {
  int n, ci, h, w, co, k, stride, pad, ho, wo;
  int kdim() const { return ci * k * k; }
  int hwo() const { return ho * wo; }
  bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

template <typename T>
void im2col(const T* x, const ConvGeom& g, T* col) {
  const int hwo = g.hwo();
  for (int c = 0; c < g.ci; ++c)
    for (int ki = 0; ki < g.k; ++ki)
      for (int kj = 0; kj < g.k; ++kj) {
        T* row = col + static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * hwo;
        const T* xc = x + static_cast<std::size_t>(c) * g.h * g.w;
        for (int oh = 0; oh < g.ho; ++oh) {
          const int ih = oh * g.stride - g.pad + ki;
          T* r = row + oh * g.wo;
          if (ih < 0 || ih >= g.h) {
            std::fill(r, r + g.wo, T(0));
            continue;
          }
          const T* xr = xc + static_cast<std::size_t>(ih) * g.w;
          if (g.stride == 1) {
            const int off = kj - g.pad;
            for (int ow = 0; ow < g.wo; ++ow) {
              const int iw = ow + off;
              r[ow] = (iw >= 0 && iw < g.w) ? xr[iw] : T(0);
            }
          } else {
            for (int ow = 0; ow < g.wo; ++ow) {
              const int iw = ow * g.stride - g.pad + kj;
              r[ow] = (iw >= 0 && iw < g.w) ? xr[iw] : T(0);
            }
          }
        }
      }
}

template <typename T>
void col2im(const T* col, const ConvGeom& g, T* dx) {
  const int hwo = g.hwo();
  for (int c = 0; c < g.ci; ++c)
    for (int ki = 0; ki < g.k; ++ki)
      for (int kj = 0; kj < g.k; ++kj) {
        const T* row = col + static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * hwo;
        T* xc = dx + static_cast<std::size_t>(c) * g.h * g.w;
        for (int oh = 0; oh < g.ho; ++oh) {
          const int ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= g.h) continue;
          const T* r = row + oh * g.wo;
          T* xr = xc + static_cast<std::size_t>(ih) * g.w;
          for (int ow = 0; ow < g.wo; ++ow) {
            const int iw = ow * g.stride - g.pad + kj;
            if (iw >= 0 && iw < g.w) xr[iw] += r[ow];
          }
        }
      }
}

inline int reflect(int i, int n) {
  // Mirror without repeating the edge sample (cv2 BORDER_REFLECT_101).
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace detail

// ---------------------------------------------------------------- elementwise

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  a.value().check_same(b.value());
  Tensor<T> out = a.value();
  out += b.value();
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& n) {
    for (std::size_t i = 0; i < 2; ++i)
      if (auto* in = detail::input(n, i)) in->grad_buffer() += n.grad;
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  a.value().check_same(b.value());
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& n) {
    if (auto* in = detail::input(n, 0)) in->grad_buffer() += n.grad;
    if (auto* in = detail::input(n, 1)) {
      auto& g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  a.value().check_same(b.value());
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& n) {
    const auto& av = n.inputs[0]->value;
    const auto& bv = n.inputs[1]->value;
    if (auto* in = detail::input(n, 0)) {
      auto& g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * bv[i];
    }
    if (auto* in = detail::input(n, 1)) {
      auto& g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out = a.value();
  out *= s;
  return make_result<T>(std::move(out), {a}, [s](Node<T>& n) {
    auto& g = n.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * n.grad[i];
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  Tensor<T> out = a.value();
  for (auto& v : out.vec()) v += s;
  return make_result<T>(std::move(out), {a},
                        [](Node<T>& n) { n.inputs[0]->grad_buffer() += n.grad; });
}

// Elementwise multiply / add by a constant tensor that either matches `a` or
// matches one batch sample of it (broadcast over dim 0).
template <typename T>
Var<T> mul_const(const Var<T>& a, const Tensor<T>& c) {
  const std::size_t per = c.size();
  detail::require(per > 0 && a.size() % per == 0, "mul_const: incompatible constant");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c[i % per];
  return make_result<T>(std::move(out), {a}, [c, per](Node<T>& n) {
    auto& g = n.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * c[i % per];
  });
}

template <typename T>
Var<T> add_const(const Var<T>& a, const Tensor<T>& c) {
  const std::size_t per = c.size();
  detail::require(per > 0 && a.size() % per == 0, "add_const: incompatible constant");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i % per];
  return make_result<T>(std::move(out), {a},
                        [](Node<T>& n) { n.inputs[0]->grad_buffer() += n.grad; });
}

template <typename T>
Var<T> silu(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.vec()) v = v / (T(1) + std::exp(-v));
  return make_result<T>(std::move(out), {a}, [](Node<T>& n) {
    const auto& x = n.inputs[0]->value;
    auto& g = n.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T s = T(1) / (T(1) + std::exp(-x[i]));
      g[i] += n.grad[i] * s * (T(1) + x[i] * (T(1) - s));
    }
  });
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.vec()) v = std::tanh(v);
  return make_result<T>(std::move(out), {a}, [](Node<T>& n) {
    auto& g = n.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * (T(1) - n.value[i] * n.value[i]);
  });
}

// Hard clamp; gradient passes only where the input is strictly inside.
template <typename T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
  Tensor<T> out = a.value();
  for (auto& v : out.vec()) v = std::min(hi, std::max(lo, v));
  return make_result<T>(std::move(out), {a}, [lo, hi](Node<T>& n) {
    const auto& x = n.inputs[0]->value;
    auto& g = n.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > lo && x[i] < hi) g[i] += n.grad[i];
  });
}

template <typename T>
Var<T> detach(const Var<T>& a) {
  return Var<T>::constant(a.value());
}

// Forward value is `replacement` exactly; backward is the identity to `a`.
template <typename T>
Var<T> straight_through(const Var<T>& a, Tensor<T> replacement) {
  a.value().check_same(replacement);
  return make_result<T>(std::move(replacement), {a},
                        [](Node<T>& n) { n.inputs[0]->grad_buffer() += n.grad; });
}

template <typename T>
Var<T> round_st(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.vec()) v = std::round(v);
  return straight_through(a, std::move(out));
}

// ------------------------------------------------------------------ reductions

template <typename T>
Var<T> sum(const Var<T>& a) {
  T s = 0;
  for (T v : a.value().vec()) s += v;
  return make_result<T>(Tensor<T>({1}, s), {a}, [](Node<T>& n) {
    auto& g = n.inputs[0]->grad_buffer();
    for (auto& v : g.vec()) v += n.grad[0];
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  a.value().check_same(b.value());
  const std::size_t n_el = a.size();
  T s = 0;
  for (std::size_t i = 0; i < n_el; ++i) {
    const T d = a.value()[i] - b.value()[i];
    s += d * d;
  }
  return make_result<T>(Tensor<T>({1}, s / static_cast<T>(n_el)), {a, b}, [n_el](Node<T>& n) {
    const auto& av = n.inputs[0]->value;
    const auto& bv = n.inputs[1]->value;
    const T k = T(2) * n.grad[0] / static_cast<T>(n_el);
    if (auto* in = detail::input(n, 0)) {
      auto& g = in->grad_buffer();
      for (std::size_t i = 0; i < n_el; ++i) g[i] += k * (av[i] - bv[i]);
    }
    if (auto* in = detail::input(n, 1)) {
      auto& g = in->grad_buffer();
      for (std::size_t i = 0; i < n_el; ++i) g[i] -= k * (av[i] - bv[i]);
    }
  });
}

// Mean binary cross-entropy from logits, max(l,0) - l*t + log(1 + exp(-|l|)).
template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, const Tensor<T>& targets) {
  logits.value().check_same(targets);
  const std::size_t n_el = logits.size();
  T s = 0;
  for (std::size_t i = 0; i < n_el; ++i) {
    const T l = logits.value()[i];
    s += std::max(l, T(0)) - l * targets[i] + std::log1p(std::exp(-std::abs(l)));
  }
  return make_result<T>(Tensor<T>({1}, s / static_cast<T>(n_el)), {logits},
                        [targets, n_el](Node<T>& n) {
                          const auto& l = n.inputs[0]->value;
                          auto& g = n.inputs[0]->grad_buffer();
                          const T k = n.grad[0] / static_cast<T>(n_el);
                          for (std::size_t i = 0; i < n_el; ++i) {
                            const T sig = T(1) / (T(1) + std::exp(-l[i]));
                            g[i] += k * (sig - targets[i]);
                          }
                        });
}

// ------------------------------------------------------------------ structure

template <typename T>
Var<T> reshape(const Var<T>& a, Shape s) {
  Tensor<T> out = a.value().reshaped(std::move(s));
  return make_result<T>(std::move(out), {a}, [](Node<T>& n) {
    auto& g = n.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  detail::require(sa.size() == 4 && sb.size() == 4 && sa[0] == sb[0] && sa[2] == sb[2] && sa[3] == sb[3],
                  "concat_channels: incompatible shapes");
  const int n = sa[0], ca = sa[1], cb = sb[1];
  const std::size_t hw = static_cast<std::size_t>(sa[2]) * sa[3];
  Tensor<T> out({n, ca + cb, sa[2], sa[3]});
  for (int i = 0; i < n; ++i) {
    std::copy_n(a.value().data() + i * ca * hw, ca * hw, out.data() + i * (ca + cb) * hw);
    std::copy_n(b.value().data() + i * cb * hw, cb * hw, out.data() + (i * (ca + cb) + ca) * hw);
  }
  return make_result<T>(std::move(out), {a, b}, [n, ca, cb, hw](Node<T>& nd) {
    for (std::size_t which = 0; which < 2; ++which) {
      auto* in = detail::input(nd, which);
      if (!in) continue;
      auto& g = in->grad_buffer();
      const int c = which == 0 ? ca : cb;
      const int off = which == 0 ? 0 : ca;
      for (int i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c * hw; ++j) g[i * c * hw + j] += nd.grad[(i * (ca + cb) + off) * hw + j];
    }
  });
}

template <typename T>
Var<T> upsample_nearest(const Var<T>& a, int factor) {
  const auto& s = a.shape();
  const int n = s[0], c = s[1], h = s[2], w = s[3];
  Tensor<T> out({n, c, h * factor, w * factor});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h * factor; ++y)
        for (int x = 0; x < w * factor; ++x) out.at(i, ch, y, x) = a.value().at(i, ch, y / factor, x / factor);
  return make_result<T>(std::move(out), {a}, [factor](Node<T>& nd) {
    auto& g = nd.inputs[0]->grad_buffer();
    const auto& gs = nd.grad.shape();
    for (int i = 0; i < gs[0]; ++i)
      for (int ch = 0; ch < gs[1]; ++ch)
        for (int y = 0; y < gs[2]; ++y)
          for (int x = 0; x < gs[3]; ++x) g.at(i, ch, y / factor, x / factor) += nd.grad.at(i, ch, y, x);
  });
}

template <typename T>
Var<T> avg_pool(const Var<T>& a, int k) {
  const auto& s = a.shape();
  detail::require(s[2] % k == 0 && s[3] % k == 0, "avg_pool: size not divisible");
  const int n = s[0], c = s[1], ho = s[2] / k, wo = s[3] / k;
  const T inv = T(1) / static_cast<T>(k * k);
  Tensor<T> out({n, c, ho, wo});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < s[2]; ++y)
        for (int x = 0; x < s[3]; ++x) out.at(i, ch, y / k, x / k) += inv * a.value().at(i, ch, y, x);
  return make_result<T>(std::move(out), {a}, [k, inv](Node<T>& nd) {
    auto& g = nd.inputs[0]->grad_buffer();
    const auto& gs = g.shape();
    for (int i = 0; i < gs[0]; ++i)
      for (int ch = 0; ch < gs[1]; ++ch)
        for (int y = 0; y < gs[2]; ++y)
          for (int x = 0; x < gs[3]; ++x) g.at(i, ch, y, x) += inv * nd.grad.at(i, ch, y / k, x / k);
  });
}

// [N,C,H,W] -> [N,C]
template <typename T>
Var<T> global_avg_pool(const Var<T>& a) {
  const auto& s = a.shape();
  const int n = s[0], c = s[1];
  const std::size_t hw = static_cast<std::size_t>(s[2]) * s[3];
  Tensor<T> out({n, c});
  for (int i = 0; i < n * c; ++i) {
    T acc = 0;
    for (std::size_t j = 0; j < hw; ++j) acc += a.value()[i * hw + j];
    out[i] = acc / static_cast<T>(hw);
  }
  return make_result<T>(std::move(out), {a}, [n, c, hw](Node<T>& nd) {
    auto& g = nd.inputs[0]->grad_buffer();
    for (int i = 0; i < n * c; ++i) {
      const T v = nd.grad[i] / static_cast<T>(hw);
      for (std::size_t j = 0; j < hw; ++j) g[i * hw + j] += v;
    }
  });
}

// -------------------------------------------------------------------- layers

// x:[N,Ci,H,W], w:[Co,Ci,k,k], b:[Co] (may be an empty Var). Zero padding.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  detail::require(xs.size() == 4 && ws.size() == 4 && xs[1] == ws[1] && ws[2] == ws[3],
                  "conv2d: incompatible input/weight shapes");
  detail::ConvGeom g{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], stride, pad, 0, 0};
  g.ho = (g.h + 2 * pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * pad - g.k) / stride + 1;
  detail::require(g.ho > 0 && g.wo > 0, "conv2d: output would be empty");
  const bool has_bias = static_cast<bool>(b);

  Tensor<T> out({g.n, g.co, g.ho, g.wo});
  std::vector<T> col(g.pointwise() ? 0 : static_cast<std::size_t>(g.kdim()) * g.hwo());
  detail::CMapR<T> wm(w.value().data(), g.co, g.kdim());
  const std::size_t xstride = static_cast<std::size_t>(g.ci) * g.h * g.w;
  const std::size_t ystride = static_cast<std::size_t>(g.co) * g.hwo();
  for (int i = 0; i < g.n; ++i) {
    const T* xi = x.value().data() + i * xstride;
    const T* cp = xi;
    if (!g.pointwise()) {
      detail::im2col(xi, g, col.data());
      cp = col.data();
    }
    detail::CMapR<T> cm(cp, g.kdim(), g.hwo());
    detail::MapR<T> ym(out.data() + i * ystride, g.co, g.hwo());
    ym.noalias() = wm * cm;
    if (has_bias)
      for (int c = 0; c < g.co; ++c) ym.row(c).array() += b.value()[c];
  }

  std::vector<Var<T>> ins{x, w};
  if (has_bias) ins.push_back(b);
  return make_result<T>(std::move(out), std::move(ins), [g, has_bias, xstride, ystride](Node<T>& nd) {
    const auto& xv = nd.inputs[0]->value;
    const auto& wv = nd.inputs[1]->value;
    auto* xin = detail::input(nd, 0);
    auto* win = detail::input(nd, 1);
    auto* bin = has_bias ? detail::input(nd, 2) : nullptr;
    std::vector<T> col(static_cast<std::size_t>(g.kdim()) * g.hwo());
    detail::CMapR<T> wm(wv.data(), g.co, g.kdim());
    T* dw = win ? win->grad_buffer().data() : nullptr;
    T* dx = xin ? xin->grad_buffer().data() : nullptr;
    T* db = bin ? bin->grad_buffer().data() : nullptr;
    for (int i = 0; i < g.n; ++i) {
      detail::CMapR<T> dy(nd.grad.data() + i * ystride, g.co, g.hwo());
      if (db)
        for (int c = 0; c < g.co; ++c) db[c] += dy.row(c).sum();
      if (dw) {
        const T* cp = xv.data() + i * xstride;
        if (!g.pointwise()) {
          detail::im2col(cp, g, col.data());
          cp = col.data();
        }
        detail::CMapR<T> cm(cp, g.kdim(), g.hwo());
        detail::MapR<T> dwm(dw, g.co, g.kdim());
        dwm.noalias() += dy * cm.transpose();
      }
      if (dx) {
        if (g.pointwise()) {
          detail::MapR<T> dxm(dx + i * xstride, g.ci, g.hwo());
          dxm.noalias() += wm.transpose() * dy;
        } else {
          detail::MapR<T> dcol(col.data(), g.kdim(), g.hwo());
          dcol.noalias() = wm.transpose() * dy;
          detail::col2im(col.data(), g, dx + i * xstride);
        }
      }
    }
  });
}

// x:[N,in], w:[out,in], b:[out]
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  detail::require(xs.size() == 2 && ws.size() == 2 && xs[1] == ws[1], "linear: incompatible shapes");
  const int n = xs[0], in = xs[1], out_dim = ws[0];
  Tensor<T> out({n, out_dim});
  detail::CMapR<T> xm(x.value().data(), n, in);
  detail::CMapR<T> wm(w.value().data(), out_dim, in);
  detail::MapR<T> ym(out.data(), n, out_dim);
  ym.noalias() = xm * wm.transpose();
  for (int i = 0; i < n; ++i)
    for (int o = 0; o < out_dim; ++o) ym(i, o) += b.value()[o];
  return make_result<T>(std::move(out), {x, w, b}, [n, in, out_dim](Node<T>& nd) {
    detail::CMapR<T> dy(nd.grad.data(), n, out_dim);
    if (auto* xi = detail::input(nd, 0)) {
      detail::CMapR<T> wm(nd.inputs[1]->value.data(), out_dim, in);
      detail::MapR<T> dx(xi->grad_buffer().data(), n, in);
      dx.noalias() += dy * wm;
    }
    if (auto* wi = detail::input(nd, 1)) {
      detail::CMapR<T> xm(nd.inputs[0]->value.data(), n, in);
      detail::MapR<T> dw(wi->grad_buffer().data(), out_dim, in);
      dw.noalias() += dy.transpose() * xm;
    }
    if (auto* bi = detail::input(nd, 2)) {
      auto& db = bi->grad_buffer();
      for (int o = 0; o < out_dim; ++o) db[o] += dy.col(o).sum();
    }
  });
}

// Per-pixel affine channel mix: y_c = sum_d m[c][d] x_d + offset_c.
template <typename T, std::size_t C>
Var<T> channel_mix(const Var<T>& x, const std::array<std::array<double, C>, C>& m,
                   const std::array<double, C>& offset = {}) {
  const auto& s = x.shape();
  detail::require(s.size() == 4 && s[1] == static_cast<int>(C), "channel_mix: channel count mismatch");
  const std::size_t hw = static_cast<std::size_t>(s[2]) * s[3];
  Tensor<T> out(s);
  for (int i = 0; i < s[0]; ++i)
    for (std::size_t c = 0; c < C; ++c) {
      T* o = out.data() + (i * C + c) * hw;
      for (std::size_t p = 0; p < hw; ++p) o[p] = static_cast<T>(offset[c]);
      for (std::size_t d = 0; d < C; ++d) {
        const T k = static_cast<T>(m[c][d]);
        const T* xi = x.value().data() + (i * C + d) * hw;
        for (std::size_t p = 0; p < hw; ++p) o[p] += k * xi[p];
      }
    }
  return make_result<T>(std::move(out), {x}, [m, hw](Node<T>& nd) {
    auto& g = nd.inputs[0]->grad_buffer();
    const int n = g.dim(0);
    for (int i = 0; i < n; ++i)
      for (std::size_t c = 0; c < C; ++c) {
        const T* gy = nd.grad.data() + (i * C + c) * hw;
        for (std::size_t d = 0; d < C; ++d) {
          const T k = static_cast<T>(m[c][d]);
          T* gx = g.data() + (i * C + d) * hw;
          for (std::size_t p = 0; p < hw; ++p) gx[p] += k * gy[p];
        }
      }
  });
}

// Depthwise correlation with a fixed odd-sized kernel and reflect-101 borders.
template <typename T>
Var<T> filter2d(const Var<T>& x, const Tensor<double>& kernel) {
  const auto& s = x.shape();
  const int kh = kernel.dim(0), kw = kernel.dim(1);
  detail::require(kh % 2 == 1 && kw % 2 == 1, "filter2d: kernel must have odd size");
  const int rh = kh / 2, rw = kw / 2, h = s[2], w = s[3];
  Tensor<T> out(s);
  const int planes = s[0] * s[1];
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int p = 0; p < planes; ++p) {
    const T* xi = x.value().data() + p * hw;
    T* o = out.data() + p * hw;
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        T acc = 0;
        for (int a = 0; a < kh; ++a) {
          const int yy = detail::reflect(y + a - rh, h);
          for (int bb = 0; bb < kw; ++bb)
            acc += static_cast<T>(kernel[a * kw + bb]) * xi[yy * w + detail::reflect(xx + bb - rw, w)];
        }
        o[y * w + xx] = acc;
      }
  }
  return make_result<T>(std::move(out), {x}, [kernel, kh, kw, rh, rw, h, w, planes, hw](Node<T>& nd) {
    auto& g = nd.inputs[0]->grad_buffer();
    for (int p = 0; p < planes; ++p) {
      const T* gy = nd.grad.data() + p * hw;
      T* gx = g.data() + p * hw;
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          const T v = gy[y * w + xx];
          for (int a = 0; a < kh; ++a) {
            const int yy = detail::reflect(y + a - rh, h);
            for (int bb = 0; bb < kw; ++bb)
              gx[yy * w + detail::reflect(xx + bb - rw, w)] += static_cast<T>(kernel[a * kw + bb]) * v;
          }
        }
    }
  });
}

// Channel-wise unit normalisation of feature vectors: x / sqrt(sum_c x^2 + eps).
template <typename T>
Var<T> unit_normalize_channels(const Var<T>& x, T eps = T(1e-8)) {
  const auto& s = x.shape();
  const int n = s[0], c = s[1];
  const std::size_t hw = static_cast<std::size_t>(s[2]) * s[3];
  Tensor<T> out(s);
  Tensor<T> inv_norm({n, 1, s[2], s[3]});
  for (int i = 0; i < n; ++i)
    for (std::size_t p = 0; p < hw; ++p) {
      T ss = eps;
      for (int ch = 0; ch < c; ++ch) {
        const T v = x.value()[(i * c + ch) * hw + p];
        ss += v * v;
      }
      const T inv = T(1) / std::sqrt(ss);
      inv_norm[i * hw + p] = inv;
      for (int ch = 0; ch < c; ++ch) out[(i * c + ch) * hw + p] = x.value()[(i * c + ch) * hw + p] * inv;
    }
  return make_result<T>(std::move(out), {x}, [inv_norm, n, c, hw](Node<T>& nd) {
    auto& g = nd.inputs[0]->grad_buffer();
    for (int i = 0; i < n; ++i)
      for (std::size_t p = 0; p < hw; ++p) {
        // dy/dx = inv * (I - y y^T)
        T dot = 0;
        for (int ch = 0; ch < c; ++ch) dot += nd.grad[(i * c + ch) * hw + p] * nd.value[(i * c + ch) * hw + p];
        const T inv = inv_norm[i * hw + p];
        for (int ch = 0; ch < c; ++ch) {
          const std::size_t k = (i * c + ch) * hw + p;
          g[k] += inv * (nd.grad[k] - nd.value[k] * dot);
        }
      }
  });
}

// Orthonormal 8x8 block DCT-II (or its inverse) applied per channel plane.
template <typename T>
Var<T> block_dct8(const Var<T>& x, bool inverse) {
  static const auto basis = [] {
    std::array<double, 64> d{};
    const double pi = 3.14159265358979323846;
    for (int k = 0; k < 8; ++k)
      for (int n = 0; n < 8; ++n)
        d[k * 8 + n] = (k == 0 ? std::sqrt(1.0 / 8) : std::sqrt(2.0 / 8)) * std::cos(pi * (2 * n + 1) * k / 16.0);
    return d;
  }();
  const auto& s = x.shape();
  detail::require(s[2] % 8 == 0 && s[3] % 8 == 0, "block_dct8: size must be a multiple of 8");
  // forward: Y = D X D^T, inverse: X = D^T Y D
  auto apply = [](const T* in, T* out, int h, int w, int planes, bool inv) {
    for (int p = 0; p < planes; ++p)
      for (int by = 0; by < h; by += 8)
        for (int bx = 0; bx < w; bx += 8) {
          double tmp[64];
          const T* src = in + static_cast<std::size_t>(p) * h * w;
          T* dst = out + static_cast<std::size_t>(p) * h * w;
          for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c) {
              double acc = 0;
              for (int k = 0; k < 8; ++k) {
                const double m = inv ? basis[k * 8 + r] : basis[r * 8 + k];
                acc += m * src[(by + k) * w + bx + c];
              }
              tmp[r * 8 + c] = acc;
            }
          for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c) {
              double acc = 0;
              for (int k = 0; k < 8; ++k) {
                const double m = inv ? basis[k * 8 + c] : basis[c * 8 + k];
                acc += tmp[r * 8 + k] * m;
              }
              dst[(by + r) * w + bx + c] = static_cast<T>(acc);
            }
        }
  };
  Tensor<T> out(s);
  const int planes = s[0] * s[1];
  apply(x.value().data(), out.data(), s[2], s[3], planes, inverse);
  return make_result<T>(std::move(out), {x}, [apply, inverse, s, planes](Node<T>& nd) {
    Tensor<T> tmp(s);
    apply(nd.grad.data(), tmp.data(), s[2], s[3], planes, !inverse);
    nd.inputs[0]->grad_buffer() += tmp;
  });
}

// Edge-replicating pad on the bottom/right so H and W become multiples of m.
template <typename T>
Var<T> pad_replicate_to_multiple(const Var<T>& x, int m) {
  const auto& s = x.shape();
  const int h = s[2], w = s[3];
  const int ph = (h + m - 1) / m * m, pw = (w + m - 1) / m * m;
  if (ph == h && pw == w) return x;
  Tensor<T> out({s[0], s[1], ph, pw});
  for (int i = 0; i < s[0]; ++i)
    for (int c = 0; c < s[1]; ++c)
      for (int y = 0; y < ph; ++y)
        for (int xx = 0; xx < pw; ++xx) out.at(i, c, y, xx) = x.value().at(i, c, std::min(y, h - 1), std::min(xx, w - 1));
  return make_result<T>(std::move(out), {x}, [h, w](Node<T>& nd) {
    auto& g = nd.inputs[0]->grad_buffer();
    const auto& gs = nd.grad.shape();
    for (int i = 0; i < gs[0]; ++i)
      for (int c = 0; c < gs[1]; ++c)
        for (int y = 0; y < gs[2]; ++y)
          for (int xx = 0; xx < gs[3]; ++xx) g.at(i, c, std::min(y, h - 1), std::min(xx, w - 1)) += nd.grad.at(i, c, y, xx);
  });
}

template <typename T>
Var<T> crop(const Var<T>& x, int h, int w) {
  const auto& s = x.shape();
  if (s[2] == h && s[3] == w) return x;
  Tensor<T> out({s[0], s[1], h, w});
  for (int i = 0; i < s[0]; ++i)
    for (int c = 0; c < s[1]; ++c)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) out.at(i, c, y, xx) = x.value().at(i, c, y, xx);
  return make_result<T>(std::move(out), {x}, [h, w](Node<T>& nd) {
    auto& g = nd.inputs[0]->grad_buffer();
    for (int i = 0; i < g.dim(0); ++i)
      for (int c = 0; c < g.dim(1); ++c)
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx) g.at(i, c, y, xx) += nd.grad.at(i, c, y, xx);
  });
}


// Sample i of a batch, as a batch of one.
template <typename T>
Var<T> slice_batch(const Var<T>& x, int i) {
  const std::size_t per = x.size() / static_cast<std::size_t>(x.dim(0));
  Tensor<T> out = batch_slice(x.value(), i);
  return make_result<T>(std::move(out), {x}, [i, per](Node<T>& nd) {
    auto& g = nd.inputs[0]->grad_buffer();
    for (std::size_t j = 0; j < per; ++j) g[i * per + j] += nd.grad[j];
  });
}

template <typename T>
Var<T> stack_batch(const std::vector<Var<T>>& xs) {
  detail::require(!xs.empty(), "stack_batch: no inputs");
  std::vector<Tensor<T>> vals;
  for (const auto& x : xs) vals.push_back(x.value());
  Tensor<T> out = batch_stack<T>(vals);
  return make_result<T>(std::move(out), xs, [](Node<T>& nd) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < nd.inputs.size(); ++k) {
      const std::size_t sz = nd.inputs[k]->value.size();
      if (nd.inputs[k]->requires_grad) {
        auto& g = nd.inputs[k]->grad_buffer();
        for (std::size_t j = 0; j < sz; ++j) g[j] += nd.grad[off + j];
      }
      off += sz;
    }
  });
}

}  // namespace lstego::ops
