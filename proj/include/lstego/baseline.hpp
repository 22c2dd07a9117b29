#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lstego/bitcodec.hpp"
#include "lstego/image.hpp"
#include "lstego/metrics.hpp"

// Handcrafted DWT-DCT-SVD watermark on the U channel of YUV.
namespace lstego::dwtdctsvd {

struct FreqEmbedConfig {
  int block_size = 4;
  double quant_step = 36.0;  // on the 0-255 scale
  int refine_passes = 4;     // re-embed after 8-bit rounding and clipping

  void validate() const {
    if (block_size < 2) throw std::invalid_argument("block size must be >= 2");
    if (!(quant_step > 0)) throw std::invalid_argument("quant_step must be positive");
  }
};

using Plane = Eigen::MatrixXd;

// ---------------------------------------------------------------- transforms

// One-level orthonormal Haar. Input dims must be even.
struct Haar {
  Plane ll, lh, hl, hh;
};

inline Haar haar_forward(const Plane& x) {
  const int h = static_cast<int>(x.rows()) / 2, w = static_cast<int>(x.cols()) / 2;
  Haar r{Plane(h, w), Plane(h, w), Plane(h, w), Plane(h, w)};
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const double a = x(2 * i, 2 * j), b = x(2 * i, 2 * j + 1), c = x(2 * i + 1, 2 * j), d = x(2 * i + 1, 2 * j + 1);
      r.ll(i, j) = (a + b + c + d) / 2;
      r.lh(i, j) = (a - b + c - d) / 2;
      r.hl(i, j) = (a + b - c - d) / 2;
      r.hh(i, j) = (a - b - c + d) / 2;
    }
  return r;
}

inline Plane haar_inverse(const Haar& r) {
  const int h = static_cast<int>(r.ll.rows()), w = static_cast<int>(r.ll.cols());
  Plane x(2 * h, 2 * w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const double s = r.ll(i, j), p = r.lh(i, j), q = r.hl(i, j), t = r.hh(i, j);
      x(2 * i, 2 * j) = (s + p + q + t) / 2;
      x(2 * i, 2 * j + 1) = (s - p + q - t) / 2;
      x(2 * i + 1, 2 * j) = (s + p - q - t) / 2;
      x(2 * i + 1, 2 * j + 1) = (s - p - q + t) / 2;
    }
  return x;
}

// Orthonormal DCT-II basis, rows are frequencies.
inline Plane dct_matrix(int n) {
  Plane m(n, n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      m(k, i) = (k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n)) * std::cos(M_PI * (2 * i + 1) * k / (2.0 * n));
  return m;
}

// --------------------------------------------------------- quantisation cell

// Bit carried by a value: parity of its cell index floor(v / step).
inline int cell_bit(double v, double step) {
  const long q = static_cast<long>(std::floor(v / step));
  return static_cast<int>(((q % 2) + 2) % 2);
}

// Centre of the nearest cell whose parity equals `bit`, kept >= floor_value.
inline double quantize_to_bit(double v, int bit, double step, double floor_value = 0.0) {
  const long q = static_cast<long>(std::floor(v / step));
  auto centre = [step](long c) { return (static_cast<double>(c) + 0.5) * step; };
  long best;
  if (((q % 2) + 2) % 2 == bit) {
    best = q;
  } else {
    best = std::abs(centre(q - 1) - v) <= std::abs(centre(q + 1) - v) ? q - 1 : q + 1;
  }
  while (centre(best) < floor_value) best += 2;
  return centre(best);
}

// ------------------------------------------------------------ block access

inline int capacity(int height, int width, const FreqEmbedConfig& cfg) {
  const int lh = (height + 1) / 2, lw = (width + 1) / 2;
  return (lh / cfg.block_size) * (lw / cfg.block_size);
}

namespace detail {

inline Plane pad_even(const Plane& p) {
  const int h = static_cast<int>(p.rows()), w = static_cast<int>(p.cols());
  const int ph = h + (h % 2), pw = w + (w % 2);
  Plane out(ph, pw);
  for (int i = 0; i < ph; ++i)
    for (int j = 0; j < pw; ++j) out(i, j) = p(std::min(i, h - 1), std::min(j, w - 1));
  return out;
}

// Image -> YUV planes on the 0-255 scale.
inline std::array<Plane, 3> to_yuv255(const Image& img) {
  std::array<Plane, 3> out{Plane(img.height, img.width), Plane(img.height, img.width), Plane(img.height, img.width)};
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      std::array<double, 3> rgb;
      for (int c = 0; c < 3; ++c) rgb[c] = 255.0 * (img.at(c, y, x) + 1.0) / 2.0;
      for (int k = 0; k < 3; ++k)
        out[k](y, x) = kRgbToYuv[k][0] * rgb[0] + kRgbToYuv[k][1] * rgb[1] + kRgbToYuv[k][2] * rgb[2];
    }
  return out;
}

inline Image from_yuv255(const std::array<Plane, 3>& yuv) {
  static const Eigen::Matrix3d inv = [] {
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = kRgbToYuv[r][c];
    return Eigen::Matrix3d(m.inverse());
  }();
  const int h = static_cast<int>(yuv[0].rows()), w = static_cast<int>(yuv[0].cols());
  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d rgb = inv * Eigen::Vector3d(yuv[0](y, x), yuv[1](y, x), yuv[2](y, x));
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = static_cast<float>(std::clamp(rgb[c], 0.0, 255.0) / 255.0 * 2.0 - 1.0);
    }
  return img;
}

inline double leading_singular_value(const Plane& block) {
  return Eigen::JacobiSVD<Plane>(block).singularValues()(0);
}

// Rewrites the leading singular value of every used block of the U plane.
inline Plane embed_plane(const Plane& u, const SecretPayload& bits, const FreqEmbedConfig& cfg) {
  const int h = static_cast<int>(u.rows()), w = static_cast<int>(u.cols());
  Haar hr = haar_forward(pad_even(u));
  const int b = cfg.block_size;
  const int per_row = static_cast<int>(hr.ll.cols()) / b;
  const Plane d = dct_matrix(b);
  for (int i = 0; i < bits.size(); ++i) {
    const int by = (i / per_row) * b, bx = (i % per_row) * b;
    const Plane coeffs = d * hr.ll.block(by, bx, b, b) * d.transpose();
    Eigen::JacobiSVD<Plane> svd(coeffs, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::VectorXd s = svd.singularValues();
    const double second = s.size() > 1 ? s(1) : 0.0;
    s(0) = quantize_to_bit(s(0), bits[i], cfg.quant_step, second);
    const Plane rebuilt = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
    hr.ll.block(by, bx, b, b) = d.transpose() * rebuilt * d;
  }
  return haar_inverse(hr).topLeftCorner(h, w);
}

inline SecretPayload extract_plane(const Plane& u, int length, const FreqEmbedConfig& cfg) {
  const Haar hr = haar_forward(pad_even(u));
  const int b = cfg.block_size;
  const int per_row = static_cast<int>(hr.ll.cols()) / b;
  const Plane d = dct_matrix(b);
  SecretPayload out = SecretPayload::zeros(length);
  for (int i = 0; i < length; ++i) {
    const int by = (i / per_row) * b, bx = (i % per_row) * b;
    const Plane coeffs = d * hr.ll.block(by, bx, b, b) * d.transpose();
    out.set(i, static_cast<std::uint8_t>(cell_bit(leading_singular_value(coeffs), cfg.quant_step)));
  }
  return out;
}

inline void check_capacity(const Image& img, int length, const FreqEmbedConfig& cfg) {
  cfg.validate();
  if (length < 1) throw std::invalid_argument("secret length must be >= 1");
  const int cap = capacity(img.height, img.width, cfg);
  if (cap < length)
    throw std::invalid_argument("image " + std::to_string(img.width) + "x" + std::to_string(img.height) + " holds " +
                                std::to_string(cap) + " bits, secret needs " + std::to_string(length));
}

}  // namespace detail

inline SecretPayload dwtdctsvd_extract(const Image& stego, int length, const FreqEmbedConfig& cfg = {}) {
  detail::check_capacity(stego, length, cfg);
  return detail::extract_plane(detail::to_yuv255(stego)[1], length, cfg);
}

// Returns an 8-bit-representable stego. Y and V are carried over; clipping
// and rounding are corrected by re-embedding a few times.
inline Image dwtdctsvd_embed(const Image& cover, const SecretPayload& secret, const FreqEmbedConfig& cfg = {}) {
  detail::check_capacity(cover, secret.size(), cfg);
  auto yuv = detail::to_yuv255(cover);
  Image stego;
  for (int pass = 0; pass <= cfg.refine_passes; ++pass) {
    yuv[1] = detail::embed_plane(yuv[1], secret, cfg);
    stego = quantize8(detail::from_yuv255(yuv));
    if (dwtdctsvd_extract(stego, secret.size(), cfg) == secret) break;
    yuv[1] = detail::to_yuv255(stego)[1];
  }
  return stego;
}

}  // namespace lstego::dwtdctsvd
