#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lstego/core/ops.hpp"
#include "lstego/image.hpp"
#include "lstego/noise_constants.hpp"

namespace lstego {

enum class NoiseKind {
  gaussian_noise,
  shot_noise,
  impulse_noise,
  speckle_noise,
  gaussian_blur,
  defocus_blur,
  brightness,
  contrast,
  saturate,
  fog,
  frost,
  spatter,
  pixelate,
  jpeg_compression,
};

inline constexpr int kNumNoiseKinds = 14;

inline constexpr std::array<NoiseKind, kNumNoiseKinds> kAllNoiseKinds{
    NoiseKind::gaussian_noise, NoiseKind::shot_noise, NoiseKind::impulse_noise, NoiseKind::speckle_noise,
    NoiseKind::gaussian_blur,  NoiseKind::defocus_blur, NoiseKind::brightness,  NoiseKind::contrast,
    NoiseKind::saturate,       NoiseKind::fog,        NoiseKind::frost,         NoiseKind::spatter,
    NoiseKind::pixelate,       NoiseKind::jpeg_compression};

enum class DiffClass { differentiable, approximated, straight_through };

inline constexpr std::string_view to_string(NoiseKind k) {
  constexpr std::array<std::string_view, kNumNoiseKinds> names{
      "gaussian_noise", "shot_noise", "impulse_noise", "speckle_noise", "gaussian_blur", "defocus_blur", "brightness",
      "contrast",       "saturate",   "fog",           "frost",         "spatter",       "pixelate",     "jpeg_compression"};
  return names[static_cast<int>(k)];
}

inline constexpr std::string_view to_string(DiffClass c) {
  switch (c) {
    case DiffClass::differentiable: return "differentiable";
    case DiffClass::approximated: return "approximated";
    case DiffClass::straight_through: return "straight_through";
  }
  return "?";
}

inline NoiseKind parse_noise_kind(std::string_view s) {
  for (auto k : kAllNoiseKinds)
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown perturbation kind '" + std::string(s) + "'");
}

inline constexpr DiffClass diff_class(NoiseKind k) {
  switch (k) {
    case NoiseKind::jpeg_compression: return DiffClass::approximated;
    case NoiseKind::fog:
    case NoiseKind::frost:
    case NoiseKind::spatter:
    case NoiseKind::pixelate: return DiffClass::straight_through;
    default: return DiffClass::differentiable;
  }
}

struct PerturbationSpec {
  NoiseKind kind = NoiseKind::brightness;
  int severity = 0;  // 0 is the identity

  DiffClass diff_class() const { return lstego::diff_class(kind); }
  std::string label() const { return std::string(to_string(kind)) + "@" + std::to_string(severity); }
  friend bool operator==(const PerturbationSpec&, const PerturbationSpec&) = default;
};

namespace noise_detail {

inline Tensor<double> gaussian_kernel(double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  const int n = 2 * r + 1;
  Tensor<double> k({n, n});
  double total = 0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double d2 = (y - r) * (y - r) + (x - r) * (x - r);
      k[y * n + x] = std::exp(-0.5 * d2 / (sigma * sigma));
      total += k[y * n + x];
    }
  for (auto& v : k.vec()) v /= total;
  return k;
}

// Antialiased disk (8x8 supersampled coverage), then softened by a Gaussian.
inline Tensor<double> disk_kernel(double radius, double alias_sigma) {
  const int r = static_cast<int>(std::ceil(radius)) + 1;
  const int n = 2 * r + 1;
  Tensor<double> k({n, n});
  double total = 0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      int hits = 0;
      for (int sy = 0; sy < 8; ++sy)
        for (int sx = 0; sx < 8; ++sx) {
          const double py = y - r + (sy + 0.5) / 8 - 0.5, px = x - r + (sx + 0.5) / 8 - 0.5;
          hits += py * py + px * px <= radius * radius;
        }
      k[y * n + x] = hits / 64.0;
      total += k[y * n + x];
    }
  for (auto& v : k.vec()) v /= total;
  if (alias_sigma > 0.05) {
    const auto g = gaussian_kernel(alias_sigma);
    const int gr = g.dim(0) / 2;
    Tensor<double> s({n, n});
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        double acc = 0;
        for (int a = -gr; a <= gr; ++a)
          for (int b = -gr; b <= gr; ++b) {
            const int yy = y + a, xx = x + b;
            if (yy >= 0 && yy < n && xx >= 0 && xx < n) acc += g[(a + gr) * g.dim(1) + b + gr] * k[yy * n + xx];
          }
        s[y * n + x] = acc;
      }
    double st = 0;
    for (double v : s.vec()) st += v;
    for (auto& v : s.vec()) v /= st;
    return s;
  }
  return k;
}

// Diamond-square plasma fractal on a power-of-two map, normalised to [0, 1].
inline std::vector<double> plasma_fractal(int mapsize, double wibbledecay, std::mt19937_64& rng) {
  std::vector<double> m(static_cast<std::size_t>(mapsize) * mapsize, 0.0);
  auto at = [&](int y, int x) -> double& { return m[static_cast<std::size_t>((y + mapsize) % mapsize) * mapsize + (x + mapsize) % mapsize]; };
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double wibble = 100;
  for (int step = mapsize; step >= 2; step /= 2) {
    const int half = step / 2;
    wibble /= wibbledecay;
    // squares
    for (int y = 0; y < mapsize; y += step)
      for (int x = 0; x < mapsize; x += step) {
        const double avg = (at(y, x) + at(y + step, x) + at(y, x + step) + at(y + step, x + step)) / 4;
        at(y + half, x + half) = avg + wibble * u(rng);
      }
    // diamonds
    for (int y = 0; y < mapsize; y += half)
      for (int x = (y / half % 2 == 0) ? half : 0; x < mapsize; x += step) {
        const double avg = (at(y - half, x) + at(y + half, x) + at(y, x - half) + at(y, x + half)) / 4;
        at(y, x) = avg + wibble * u(rng);
      }
  }
  const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
  const double mn = *lo, range = std::max(1e-12, *hi - *lo);
  for (auto& v : m) v = (v - mn) / range;
  return m;
}

inline int next_pow2(int v) {
  int p = 1;
  while (p < v) p *= 2;
  return p;
}

inline double blur_value(const std::vector<double>& src, int h, int w, int y, int x, const Tensor<double>& k) {
  const int r = k.dim(0) / 2;
  double acc = 0;
  for (int a = -r; a <= r; ++a)
    for (int b = -r; b <= r; ++b)
      acc += k[(a + r) * k.dim(1) + b + r] * src[static_cast<std::size_t>(ops::detail::reflect(y + a, h)) * w +
                                                    ops::detail::reflect(x + b, w)];
  return acc;
}

inline std::vector<double> blur_plane(const std::vector<double>& src, int h, int w, double sigma) {
  if (sigma <= 0) return src;
  const auto k = gaussian_kernel(sigma);
  std::vector<double> out(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out[static_cast<std::size_t>(y) * w + x] = blur_value(src, h, w, y, x, k);
  return out;
}

// Procedural frost: bright fractal haze with thin crystal streaks, bluish tint.
inline std::array<std::vector<double>, 3> frost_texture(int h, int w, std::mt19937_64& rng) {
  const int ms = next_pow2(std::max(h, w));
  const auto haze = plasma_fractal(ms, 1.6, rng);
  std::vector<double> streaks(static_cast<std::size_t>(h) * w, 0.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int count = (h * w) / 24;
  for (int s = 0; s < count; ++s) {
    double y = u(rng) * h, x = u(rng) * w;
    const double ang = u(rng) * 6.283185307, len = 2 + u(rng) * 6, bright = 0.4 + 0.6 * u(rng);
    for (double t = 0; t < len; t += 0.5) {
      const int iy = static_cast<int>(y + t * std::sin(ang)), ix = static_cast<int>(x + t * std::cos(ang));
      if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
        auto& v = streaks[static_cast<std::size_t>(iy) * w + ix];
        v = std::max(v, bright);
      }
    }
  }
  streaks = blur_plane(streaks, h, w, 0.5);
  std::array<std::vector<double>, 3> out;
  constexpr std::array<double, 3> tint{0.88, 0.94, 1.0};
  for (int c = 0; c < 3; ++c) {
    out[c].resize(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = 0.25 + 0.45 * haze[static_cast<std::size_t>(y) * ms + x] + 0.6 * streaks[static_cast<std::size_t>(y) * w + x];
        out[c][static_cast<std::size_t>(y) * w + x] = std::clamp(v * tint[c], 0.0, 1.0);
      }
  }
  return out;
}

// Area-weighted resampling of one plane (used for box downsampling).
inline std::vector<double> box_resize(const std::vector<double>& src, int h, int w, int oh, int ow) {
  auto axis = [](int in, int out) {
    std::vector<std::vector<std::pair<int, double>>> taps(out);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      const double lo = o * scale, hi = (o + 1) * scale;
      for (int i = static_cast<int>(std::floor(lo)); i < std::min(in, static_cast<int>(std::ceil(hi))); ++i) {
        const double ov = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
        if (ov > 0) taps[o].emplace_back(i, ov / scale);
      }
    }
    return taps;
  };
  const auto ty = axis(h, oh), tx = axis(w, ow);
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (auto [iy, wy] : ty[y])
        for (auto [ix, wx] : tx[x]) acc += wy * wx * src[static_cast<std::size_t>(iy) * w + ix];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

// Non-differentiable corruptions on one [0,1]-scale image, planar [3][h*w].
using Planes = std::array<std::vector<double>, 3>;

inline Planes raw_corruption(const Planes& in, int h, int w, NoiseKind kind, int sev, std::mt19937_64& rng) {
  namespace nc = noise_constants;
  Planes out = in;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  switch (kind) {
    case NoiseKind::fog: {
      const auto [strength, decay] = nc::fog[sev];
      double xmax = 0;
      for (const auto& p : in) xmax = std::max(xmax, *std::max_element(p.begin(), p.end()));
      const int ms = next_pow2(std::max(h, w));
      const auto plasma = plasma_fractal(ms, decay, rng);
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            auto& v = out[c][static_cast<std::size_t>(y) * w + x];
            v = (v + strength * plasma[static_cast<std::size_t>(y) * ms + x]) * xmax / (xmax + strength);
          }
      break;
    }
    case NoiseKind::frost: {
      const auto [wi, wf] = nc::frost[sev];
      const auto tex = frost_texture(h, w, rng);
      for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < hw; ++i) out[c][i] = wi * in[c][i] + wf * tex[c][i];
      break;
    }
    case NoiseKind::spatter: {
      const auto& p = nc::spatter[sev];
      std::normal_distribution<double> g(p.loc, p.scale);
      std::vector<double> layer(hw);
      for (auto& v : layer) v = g(rng);
      layer = blur_plane(layer, h, w, p.sigma);
      if (!p.mud) {
        // Water: soft translucent droplets tinted towards the water colour.
        std::vector<double> m(hw);
        for (std::size_t i = 0; i < hw; ++i) m[i] = layer[i] < p.threshold ? 0.0 : std::min(1.0, (layer[i] - p.threshold) * 8.0);
        m = blur_plane(m, h, w, 0.5);
        for (int c = 0; c < 3; ++c)
          for (std::size_t i = 0; i < hw; ++i) {
            const double a = std::min(1.0, p.intensity * m[i]);
            out[c][i] = in[c][i] * (1 - a) + a * nc::water_color[c];
          }
      } else {
        std::vector<double> m(hw);
        for (std::size_t i = 0; i < hw; ++i) m[i] = layer[i] > p.threshold ? 1.0 : 0.0;
        m = blur_plane(m, h, w, p.intensity);
        for (auto& v : m)
          if (v < 0.8) v = 0;
        for (int c = 0; c < 3; ++c)
          for (std::size_t i = 0; i < hw; ++i) out[c][i] = in[c][i] * (1 - m[i]) + m[i] * nc::mud_color[c];
      }
      break;
    }
    case NoiseKind::pixelate: {
      const double f = nc::pixelate_fraction[sev];
      const int oh = std::max(1, static_cast<int>(std::lround(h * f))), ow = std::max(1, static_cast<int>(std::lround(w * f)));
      for (int c = 0; c < 3; ++c) {
        const auto small = box_resize(in[c], h, w, oh, ow);
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            out[c][static_cast<std::size_t>(y) * w + x] = small[static_cast<std::size_t>(y * oh / h) * ow + (x * ow / w)];
      }
      break;
    }
    default:
      throw std::invalid_argument("raw_corruption: " + std::string(to_string(kind)) + " is not a straight-through kind");
  }
  for (auto& p : out)
    for (auto& v : p) v = std::clamp(v, 0.0, 1.0);
  return out;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// y = (x - m) c + m with m the per-(sample, channel) spatial mean.
template <typename T>
Var<T> contrast_op(const Var<T>& x, T c) {
  const auto& s = x.shape();
  const std::size_t hw = static_cast<std::size_t>(s[2]) * s[3];
  const int planes = s[0] * s[1];
  Tensor<T> out = x.value();
  for (int p = 0; p < planes; ++p) {
    T m = 0;
    for (std::size_t i = 0; i < hw; ++i) m += out[p * hw + i];
    m /= static_cast<T>(hw);
    for (std::size_t i = 0; i < hw; ++i) out[p * hw + i] = (out[p * hw + i] - m) * c + m;
  }
  return make_result<T>(std::move(out), {x}, [c, hw, planes](Node<T>& nd) {
    auto& g = nd.inputs[0]->grad_buffer();
    for (int p = 0; p < planes; ++p) {
      T gm = 0;
      for (std::size_t i = 0; i < hw; ++i) gm += nd.grad[p * hw + i];
      gm /= static_cast<T>(hw);
      for (std::size_t i = 0; i < hw; ++i) g[p * hw + i] += c * nd.grad[p * hw + i] + (T(1) - c) * gm;
    }
  });
}

// u + sqrt(max(u, 0) / rate + eps) * e, with e a fixed standard normal draw.
template <typename T>
Var<T> shot_noise_op(const Var<T>& u, const Tensor<T>& e, T rate) {
  constexpr T eps = T(1e-4);
  Tensor<T> out = u.value();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] += std::sqrt(std::max(out[i], T(0)) / rate + eps) * e[i];
  return make_result<T>(std::move(out), {u}, [e, rate](Node<T>& nd) {
    const auto& x = nd.inputs[0]->value;
    auto& g = nd.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      T d = T(1);
      if (x[i] > 0) d += e[i] / (T(2) * rate * std::sqrt(x[i] / rate + eps));
      g[i] += nd.grad[i] * d;
    }
  });
}

template <typename T>
Var<T> to_unit_range(const Var<T>& x) {
  return ops::add_scalar(ops::scale(x, T(0.5)), T(0.5));
}
template <typename T>
Var<T> from_unit_range(const Var<T>& u) {
  return ops::add_scalar(ops::scale(u, T(2)), T(-1));
}

}  // namespace noise_detail

// Forwards raw_noise(x) exactly; the gradient treats the corruption as the
// identity, i.e. n(x) = x + [n(x) - x] with the bracket detached.
template <typename T>
Var<T> straight_through(const Var<T>& x, const std::function<Tensor<T>(const Tensor<T>&)>& raw_noise) {
  Tensor<T> y = raw_noise(x.value());
  if (y.shape() != x.shape()) throw std::invalid_argument("straight_through: raw noise changed the image shape");
  return ops::straight_through(x, std::move(y));
}

// ------------------------------------------------------------ differentiable JPEG

namespace jpeg_detail {

inline constexpr std::array<int, 64> kLumaTable{16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                                                14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                                                18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                                                49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
inline constexpr std::array<int, 64> kChromaTable{17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                                                  24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                                                  99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                                                  99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

// libjpeg's quality scaling with baseline clamping to [1, 255].
inline std::array<int, 64> scaled_table(const std::array<int, 64>& base, int quality) {
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> out{};
  for (int i = 0; i < 64; ++i) out[i] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
  return out;
}

inline constexpr std::array<std::array<double, 3>, 3> kRgbToYcc{{
    {0.299, 0.587, 0.114},
    {-0.168735892, -0.331264108, 0.5},
    {0.5, -0.418687589, -0.081312411},
}};
inline constexpr std::array<std::array<double, 3>, 3> kYccToRgb{{
    {1.0, 0.0, 1.402},
    {1.0, -0.344136286, -0.714136286},
    {1.0, 1.772, 0.0},
}};

}  // namespace jpeg_detail

// Differentiable JPEG surrogate (4:4:4, baseline tables). Input and output in
// the canonical range. Rounding of quantised coefficients is value-exact with
// an identity gradient.
template <typename T>
Var<T> differentiable_jpeg(const Var<T>& x, int quality) {
  using namespace jpeg_detail;
  if (quality < 1 || quality > 100) throw std::invalid_argument("jpeg quality must be in 1..100");
  const auto& s = x.shape();
  const int h = s[2], w = s[3];
  // canonical [-1,1] -> [0,255] -> level-shifted YCbCr
  auto u = ops::add_scalar(ops::scale(x, T(127.5)), T(127.5));
  auto ycc = ops::channel_mix<T, 3>(u, kRgbToYcc, {-128.0, 0.0, 0.0});
  ycc = ops::pad_replicate_to_multiple(ycc, 8);
  const int ph = ycc.dim(2), pw = ycc.dim(3);
  Tensor<T> q({3, ph, pw}), inv_q({3, ph, pw});
  const auto lt = scaled_table(kLumaTable, quality), ct = scaled_table(kChromaTable, quality);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < ph; ++y)
      for (int xx = 0; xx < pw; ++xx) {
        const int v = (c == 0 ? lt : ct)[(y % 8) * 8 + (xx % 8)];
        q[(static_cast<std::size_t>(c) * ph + y) * pw + xx] = static_cast<T>(v);
        inv_q[(static_cast<std::size_t>(c) * ph + y) * pw + xx] = T(1) / static_cast<T>(v);
      }
  auto coeffs = ops::block_dct8(ycc, false);
  auto quant = ops::round_st(ops::mul_const(coeffs, inv_q));
  auto rec = ops::block_dct8(ops::mul_const(quant, q), true);
  rec = ops::crop(rec, h, w);
  auto rgb = ops::channel_mix<T, 3>(rec, kYccToRgb, {128.0, 128.0, 128.0});
  auto out = ops::add_scalar(ops::scale(rgb, T(1) / T(127.5)), T(-1));
  return ops::clamp(out, T(-1), T(1));
}

inline Image differentiable_jpeg(const Image& img, int quality) {
  return Image::from_tensor(differentiable_jpeg(Var<double>::constant(img.to_tensor<double>()), quality).value());
}

// ---------------------------------------------------------- apply / sample

namespace noise_detail {

// One sample (batch of one) through one corruption.
template <typename T>
Var<T> apply_one(const Var<T>& x, const PerturbationSpec& spec, std::uint64_t seed) {
  namespace nc = noise_constants;
  const int sev = spec.severity;
  const auto& s = x.shape();
  const int h = s[2], w = s[3];
  const std::size_t n = x.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  auto finish = [](const Var<T>& u) { return ops::clamp(from_unit_range(u), T(-1), T(1)); };

  switch (spec.kind) {
    case NoiseKind::gaussian_noise: {
      Tensor<T> e(s);
      for (auto& v : e.vec()) v = static_cast<T>(nc::gaussian_noise_std[sev] * gauss(rng));
      return finish(ops::add_const(to_unit_range(x), e));
    }
    case NoiseKind::shot_noise: {
      Tensor<T> e(s);
      for (auto& v : e.vec()) v = static_cast<T>(gauss(rng));
      return finish(shot_noise_op(to_unit_range(x), e, static_cast<T>(nc::shot_noise_rate[sev])));
    }
    case NoiseKind::impulse_noise: {
      Tensor<T> keep(s, T(1)), val(s, T(0));
      for (std::size_t i = 0; i < n; ++i)
        if (unif(rng) < nc::impulse_amount[sev]) {
          keep[i] = 0;
          val[i] = unif(rng) < 0.5 ? T(0) : T(1);
        }
      return finish(ops::add_const(ops::mul_const(to_unit_range(x), keep), val));
    }
    case NoiseKind::speckle_noise: {
      Tensor<T> f(s);
      for (auto& v : f.vec()) v = static_cast<T>(1.0 + nc::speckle_std[sev] * gauss(rng));
      return finish(ops::mul_const(to_unit_range(x), f));
    }
    case NoiseKind::gaussian_blur:
      return ops::clamp(ops::filter2d(x, gaussian_kernel(nc::gaussian_blur_sigma[sev])), T(-1), T(1));
    case NoiseKind::defocus_blur: {
      const auto [r, a] = nc::defocus[sev];
      return ops::clamp(ops::filter2d(x, disk_kernel(r, a)), T(-1), T(1));
    }
    case NoiseKind::brightness:
      return finish(ops::add_scalar(to_unit_range(x), static_cast<T>(nc::brightness_shift[sev])));
    case NoiseKind::contrast:
      return finish(contrast_op(to_unit_range(x), static_cast<T>(nc::contrast_factor[sev])));
    case NoiseKind::saturate: {
      const double f = nc::saturate_factor[sev];
      std::array<std::array<double, 3>, 3> m{};
      constexpr std::array<double, 3> luma{0.299, 0.587, 0.114};
      for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 3; ++d) m[c][d] = (c == d ? f : 0.0) + (1.0 - f) * luma[d];
      return ops::clamp(ops::channel_mix<T, 3>(x, m), T(-1), T(1));
    }
    case NoiseKind::jpeg_compression:
      return differentiable_jpeg(x, nc::jpeg_quality[sev]);
    case NoiseKind::fog:
    case NoiseKind::frost:
    case NoiseKind::spatter:
    case NoiseKind::pixelate: {
      const auto kind = spec.kind;
      return straight_through<T>(x, [&](const Tensor<T>& v) {
        Planes p;
        const std::size_t hw = static_cast<std::size_t>(h) * w;
        for (int c = 0; c < 3; ++c) {
          p[c].resize(hw);
          for (std::size_t i = 0; i < hw; ++i) p[c][i] = 0.5 * (static_cast<double>(v[c * hw + i]) + 1.0);
        }
        const auto r = raw_corruption(p, h, w, kind, sev, rng);
        Tensor<T> out(v.shape());
        for (int c = 0; c < 3; ++c)
          for (std::size_t i = 0; i < hw; ++i) out[c * hw + i] = static_cast<T>(2.0 * r[c][i] - 1.0);
        return out;
      });
    }
  }
  throw std::invalid_argument("unknown perturbation kind");
}

}  // namespace noise_detail

// Applies one corruption to a batch [N,3,H,W]; sample i uses a seed derived
// from (seed, i). Severity 0 returns the input unchanged.
template <typename T>
Var<T> apply_perturbation(const Var<T>& x, const PerturbationSpec& spec, std::uint64_t seed) {
  if (spec.severity < 0 || spec.severity > 5) throw std::invalid_argument("severity must be in 0..5");
  if (static_cast<int>(spec.kind) < 0 || static_cast<int>(spec.kind) >= kNumNoiseKinds)
    throw std::invalid_argument("unknown perturbation kind");
  if (spec.severity == 0) return x;
  const int n = x.dim(0);
  if (n == 1) return noise_detail::apply_one(x, spec, noise_detail::mix_seed(seed, 0));
  std::vector<Var<T>> parts;
  for (int i = 0; i < n; ++i)
    parts.push_back(noise_detail::apply_one(ops::slice_batch(x, i), spec, noise_detail::mix_seed(seed, i)));
  return ops::stack_batch(parts);
}

template <typename T>
Var<T> apply_chain(const Var<T>& x, const std::vector<PerturbationSpec>& chain, std::uint64_t seed) {
  Var<T> y = x;
  for (std::size_t i = 0; i < chain.size(); ++i)
    y = apply_perturbation(y, chain[i], noise_detail::mix_seed(seed, 1000 + i));
  return y;
}

inline Image apply_perturbation(const Image& img, const PerturbationSpec& spec, std::uint64_t seed) {
  if (spec.severity == 0) return img;
  return Image::from_tensor(apply_perturbation(Var<double>::constant(img.to_tensor<double>()), spec, seed).value());
}

inline Image apply_chain(const Image& img, const std::vector<PerturbationSpec>& chain, std::uint64_t seed) {
  return Image::from_tensor(apply_chain(Var<double>::constant(img.to_tensor<double>()), chain, seed).value());
}

inline constexpr double kCompositeRate = 0.5;

// With probability 0.5: [contrast, brightness, jpeg] at random severities plus
// one random individual kind; otherwise just the individual kind. The
// individual draw is always the last element.
inline std::vector<PerturbationSpec> sample_perturbation(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> sev(1, 5), kind(0, kNumNoiseKinds - 1);
  std::bernoulli_distribution composite(kCompositeRate);
  std::vector<PerturbationSpec> out;
  if (composite(rng)) {
    out.push_back({NoiseKind::contrast, sev(rng)});
    out.push_back({NoiseKind::brightness, sev(rng)});
    out.push_back({NoiseKind::jpeg_compression, sev(rng)});
  }
  const auto k = kAllNoiseKinds[kind(rng)];
  out.push_back({k, sev(rng)});
  return out;
}

// Evaluation policy: one random kind at a uniform severity in 1..5.
inline PerturbationSpec sample_single_perturbation(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> sev(1, 5), kind(0, kNumNoiseKinds - 1);
  const auto k = kAllNoiseKinds[kind(rng)];
  return {k, sev(rng)};
}

}  // namespace lstego
