#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lstego/image.hpp"

namespace lstego::synth {

// Procedural scenes used as a self-contained desk-scale dataset: smooth
// backgrounds, overlapping soft-edged shapes, gratings and sensor grain.

namespace detail {

using Rgb = std::array<float, 3>;

inline float smoothstep(float t) { return t * t * (3.f - 2.f * t); }

// Value noise on a (cells+1)^2 lattice, smoothstep-interpolated.
inline std::vector<float> value_noise(int size, int cells, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  std::vector<float> lattice(static_cast<std::size_t>(cells + 1) * (cells + 1));
  for (auto& v : lattice) v = u(rng);
  std::vector<float> out(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const float fy = static_cast<float>(y) / size * cells, fx = static_cast<float>(x) / size * cells;
      const int iy = static_cast<int>(fy), ix = static_cast<int>(fx);
      const float ty = smoothstep(fy - iy), tx = smoothstep(fx - ix);
      auto L = [&](int a, int b) { return lattice[a * (cells + 1) + b]; };
      const float top = L(iy, ix) * (1 - tx) + L(iy, ix + 1) * tx;
      const float bot = L(iy + 1, ix) * (1 - tx) + L(iy + 1, ix + 1) * tx;
      out[static_cast<std::size_t>(y) * size + x] = top * (1 - ty) + bot * ty;
    }
  return out;
}

inline Rgb random_color(std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.f, 1.f);
  // Mix saturated and muted tones.
  Rgb c{u(rng), u(rng), u(rng)};
  const float mute = u(rng) * 0.7f;
  const float g = (c[0] + c[1] + c[2]) / 3.f;
  for (auto& v : c) v = v * (1 - mute) + g * mute;
  return c;
}

}  // namespace detail

inline Image generate_scene(std::uint64_t seed, int size = 64) {
  using namespace detail;
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 17);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  const int n = size;
  std::vector<Rgb> px(static_cast<std::size_t>(n) * n);

  // Background: two-colour linear gradient modulated by low-frequency noise.
  const Rgb c0 = random_color(rng), c1 = random_color(rng);
  const float ang = u(rng) * 6.2831853f;
  const float dx = std::cos(ang), dy = std::sin(ang);
  const auto bg_noise = value_noise(n, 3 + static_cast<int>(u(rng) * 3), rng);
  const float bg_amp = 0.05f + 0.15f * u(rng);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const float t = std::clamp(0.5f + ((x - n / 2.f) * dx + (y - n / 2.f) * dy) / n, 0.f, 1.f);
      auto& p = px[static_cast<std::size_t>(y) * n + x];
      for (int c = 0; c < 3; ++c) p[c] = c0[c] * (1 - t) + c1[c] * t + bg_amp * bg_noise[static_cast<std::size_t>(y) * n + x];
    }

  // Shapes, rendered back to front with a soft signed-distance edge.
  const int shapes = 2 + static_cast<int>(u(rng) * 6);
  for (int s = 0; s < shapes; ++s) {
    const int kind = static_cast<int>(u(rng) * 3);
    const float cx = u(rng) * n, cy = u(rng) * n;
    const float rx = n * (0.08f + 0.3f * u(rng)), ry = n * (0.08f + 0.3f * u(rng));
    const float rot = u(rng) * 3.1415926f;
    const float cr = std::cos(rot), sr = std::sin(rot);
    const float soft = 0.7f + 1.5f * u(rng);
    const float alpha = 0.6f + 0.4f * u(rng);
    const Rgb col = random_color(rng);
    const Rgb col2 = random_color(rng);
    const bool grating = u(rng) < 0.3f;
    const float freq = (1.5f + 4.f * u(rng)) * 6.2831853f / n;
    const float gang = u(rng) * 3.1415926f;
    const float gx = std::cos(gang) * freq, gy = std::sin(gang) * freq;
    const float gamp = 0.08f + 0.12f * u(rng);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const float lx = ((x - cx) * cr + (y - cy) * sr), ly = (-(x - cx) * sr + (y - cy) * cr);
        float dist;  // negative inside, in pixels (approximate)
        if (kind == 0) {
          const float r = std::sqrt((lx * lx) / (rx * rx) + (ly * ly) / (ry * ry));
          dist = (r - 1.f) * std::min(rx, ry);
        } else if (kind == 1) {
          dist = std::max(std::abs(lx) - rx, std::abs(ly) - ry);
        } else {
          // Isoceles triangle pointing along local +y.
          const float e1 = ly - ry;
          const float e2 = (-ly * rx * 0.5f + std::abs(lx) * ry * 2.f - rx * ry) / std::sqrt(rx * rx * 0.25f + 4 * ry * ry);
          dist = std::max(e1, e2);
        }
        const float cover = alpha * std::clamp(0.5f - dist / soft, 0.f, 1.f);
        if (cover <= 0.f) continue;
        const float t = std::clamp(0.5f + ly / (2 * ry), 0.f, 1.f);
        const float g = grating ? gamp * std::sin(x * gx + y * gy) : 0.f;
        auto& p = px[static_cast<std::size_t>(y) * n + x];
        for (int c = 0; c < 3; ++c) {
          const float v = col[c] * (1 - 0.5f * t) + col2[c] * 0.5f * t + g;
          p[c] = p[c] * (1 - cover) + v * cover;
        }
      }
  }

  // Sensor grain.
  std::normal_distribution<float> gauss(0.f, 1.f);
  const float grain = 0.015f * u(rng);
  Image img(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = px[static_cast<std::size_t>(y) * n + x][c] + grain * gauss(rng);
        img.at(c, y, x) = from_unit(std::clamp(v, 0.f, 1.f));
      }
  return quantize8(img);
}

inline std::vector<Image> generate_dataset(std::uint64_t first_seed, int count, int size = 64) {
  std::vector<Image> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(generate_scene(first_seed + static_cast<std::uint64_t>(i), size));
  return out;
}

inline void write_dataset(const std::filesystem::path& dir, std::uint64_t first_seed, int count, int size = 64) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%06d.png", i);
    write_png((dir / name).string(), generate_scene(first_seed + static_cast<std::uint64_t>(i), size));
  }
}

}  // namespace lstego::synth
