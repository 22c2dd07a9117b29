#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lstego/bitcodec.hpp"
#include "lstego/core/ops.hpp"
#include "lstego/image.hpp"

namespace lstego {

// BT.601 luma with analog chroma scaling: U = 0.492 (B - Y), V = 0.877 (R - Y).
inline constexpr std::array<std::array<double, 3>, 3> kRgbToYuv{{
    {0.299, 0.587, 0.114},
    {0.492 * -0.299, 0.492 * -0.587, 0.492 * (1.0 - 0.114)},
    {0.877 * (1.0 - 0.299), 0.877 * -0.587, 0.877 * -0.114},
}};

// Pure linear map, so it commutes with the value-range convention.
template <typename T>
Var<T> rgb_to_yuv(const Var<T>& x) {
  return ops::channel_mix<T, 3>(x, kRgbToYuv);
}

inline Image rgb_to_yuv(const Image& img) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int d = 0; d < 3; ++d) acc += kRgbToYuv[c][d] * img.at(d, y, x);
        out.at(c, y, x) = static_cast<float>(acc);
      }
  return out;
}

inline constexpr double kPsnrCap = 100.0;

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": image shapes differ");
}

// On the [0, 1] working scale with peak 1; identical images give the cap.
inline double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b, "psnr");
  double se = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = 0.5 * (static_cast<double>(a.pixels[i]) - b.pixels[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.pixels.size());
  if (mse == 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

// Gaussian-window SSIM (11x11, sigma 1.5, valid region), averaged over channels,
// on the [0, 1] working scale.
inline double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  constexpr int win = 11, r = 5;
  if (a.height < win || a.width < win) throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  std::array<double, win> g{};
  double gs = 0;
  for (int i = 0; i < win; ++i) {
    g[i] = std::exp(-0.5 * (i - r) * (i - r) / (1.5 * 1.5));
    gs += g[i];
  }
  for (auto& v : g) v /= gs;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int ho = a.height - 2 * r, wo = a.width - 2 * r;

  auto blur = [&](const std::vector<double>& src, int h, int w) {
    std::vector<double> tmp(static_cast<std::size_t>(h) * wo), out(static_cast<std::size_t>(ho) * wo);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < wo; ++x) {
        double acc = 0;
        for (int k = 0; k < win; ++k) acc += g[k] * src[static_cast<std::size_t>(y) * w + x + k];
        tmp[static_cast<std::size_t>(y) * wo + x] = acc;
      }
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x) {
        double acc = 0;
        for (int k = 0; k < win; ++k) acc += g[k] * tmp[static_cast<std::size_t>(y + k) * wo + x];
        out[static_cast<std::size_t>(y) * wo + x] = acc;
      }
    return out;
  };

  double total = 0;
  const std::size_t plane = a.plane();
  for (int c = 0; c < 3; ++c) {
    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      x[i] = to_unit(a.pixels[c * plane + i]);
      y[i] = to_unit(b.pixels[c * plane + i]);
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = blur(x, a.height, a.width), my = blur(y, a.height, a.width);
    const auto sxx = blur(xx, a.height, a.width), syy = blur(yy, a.height, a.width), sxy = blur(xy, a.height, a.width);
    double acc = 0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
      acc += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / 3.0;
}

inline int hamming_distance(const SecretPayload& a, const SecretPayload& b) {
  if (a.size() != b.size()) throw std::invalid_argument("payload lengths differ");
  int d = 0;
  for (int i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

inline double bit_accuracy(const SecretPayload& pred, const SecretPayload& truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("bit_accuracy: payload lengths differ");
  if (truth.size() == 0) throw std::invalid_argument("bit_accuracy: empty payload");
  return static_cast<double>(truth.size() - hamming_distance(pred, truth)) / truth.size();
}

// 1 iff fewer than 20% of the bits differ.
inline int word_accuracy(const SecretPayload& pred, const SecretPayload& truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("word_accuracy: payload lengths differ");
  return 5 * hamming_distance(pred, truth) < truth.size() ? 1 : 0;
}

}  // namespace lstego
