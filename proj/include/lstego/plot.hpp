#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "lstego/image.hpp"

// Minimal raster charts (bar and line) written as PNG.
namespace lstego::plot {

namespace detail {

// 5x7 glyphs, one byte per row, bit 4 = leftmost column.
struct Glyph {
  char c;
  std::array<std::uint8_t, 7> rows;
};

inline const std::vector<Glyph>& font() {
  static const std::vector<Glyph> f{
      {'0', {14, 17, 19, 21, 25, 17, 14}}, {'1', {4, 12, 4, 4, 4, 4, 14}},     {'2', {14, 17, 1, 2, 4, 8, 31}},
      {'3', {31, 2, 4, 2, 1, 17, 14}},     {'4', {2, 6, 10, 18, 31, 2, 2}},    {'5', {31, 16, 30, 1, 1, 17, 14}},
      {'6', {6, 8, 16, 30, 17, 17, 14}},   {'7', {31, 1, 2, 4, 8, 8, 8}},      {'8', {14, 17, 17, 14, 17, 17, 14}},
      {'9', {14, 17, 17, 15, 1, 2, 12}},   {'A', {14, 17, 17, 31, 17, 17, 17}}, {'B', {30, 17, 17, 30, 17, 17, 30}},
      {'C', {14, 17, 16, 16, 16, 17, 14}}, {'D', {28, 18, 17, 17, 17, 18, 28}}, {'E', {31, 16, 16, 30, 16, 16, 31}},
      {'F', {31, 16, 16, 30, 16, 16, 16}}, {'G', {14, 17, 16, 23, 17, 17, 15}}, {'H', {17, 17, 17, 31, 17, 17, 17}},
      {'I', {14, 4, 4, 4, 4, 4, 14}},      {'J', {7, 2, 2, 2, 2, 18, 12}},     {'K', {17, 18, 20, 24, 20, 18, 17}},
      {'L', {16, 16, 16, 16, 16, 16, 31}}, {'M', {17, 27, 21, 21, 17, 17, 17}}, {'N', {17, 17, 25, 21, 19, 17, 17}},
      {'O', {14, 17, 17, 17, 17, 17, 14}}, {'P', {30, 17, 17, 30, 16, 16, 16}}, {'Q', {14, 17, 17, 17, 21, 18, 13}},
      {'R', {30, 17, 17, 30, 20, 18, 17}}, {'S', {15, 16, 16, 14, 1, 1, 30}},   {'T', {31, 4, 4, 4, 4, 4, 4}},
      {'U', {17, 17, 17, 17, 17, 17, 14}}, {'V', {17, 17, 17, 17, 17, 10, 4}},  {'W', {17, 17, 17, 21, 21, 21, 10}},
      {'X', {17, 17, 10, 4, 10, 17, 17}},  {'Y', {17, 17, 17, 10, 4, 4, 4}},    {'Z', {31, 1, 2, 4, 8, 16, 31}},
      {'.', {0, 0, 0, 0, 0, 12, 12}},      {'-', {0, 0, 0, 31, 0, 0, 0}},      {'_', {0, 0, 0, 0, 0, 0, 31}},
      {':', {0, 12, 12, 0, 12, 12, 0}},    {'/', {0, 1, 2, 4, 8, 16, 0}},      {'(', {2, 4, 8, 8, 8, 4, 2}},
      {')', {8, 4, 2, 2, 2, 4, 8}},        {'=', {0, 0, 31, 0, 31, 0, 0}},     {',', {0, 0, 0, 0, 12, 4, 8}},
      {'@', {14, 17, 1, 13, 21, 21, 14}},  {'%', {24, 25, 2, 4, 8, 19, 3}},    {'+', {0, 4, 4, 31, 4, 4, 0}},
  };
  return f;
}

inline const Glyph* find_glyph(char c) {
  c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const auto& g : font())
    if (g.c == c) return &g;
  return nullptr;
}

using Rgb = std::array<float, 3>;

struct Canvas {
  Image img;
  explicit Canvas(int h, int w) : img(h, w) {
    for (auto& v : img.pixels) v = 1.f;
  }
  void put(int x, int y, const Rgb& c) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    for (int k = 0; k < 3; ++k) img.at(k, y, x) = c[k];
  }
  void rect(int x0, int y0, int x1, int y1, const Rgb& c) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
      for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) put(x, y, c);
  }
  void line(int x0, int y0, int x1, int y1, const Rgb& c) {
    const int n = std::max(std::abs(x1 - x0), std::abs(y1 - y0)) + 1;
    for (int i = 0; i <= n; ++i) {
      const double t = static_cast<double>(i) / n;
      const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0))), y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
      rect(x, y, x + 1, y + 1, c);
    }
  }
  void text(int x, int y, const std::string& s, const Rgb& c, bool vertical = false) {
    for (char ch : s) {
      if (const Glyph* g = find_glyph(ch))
        for (int r = 0; r < 7; ++r)
          for (int col = 0; col < 5; ++col)
            if (g->rows[r] & (1 << (4 - col))) vertical ? put(x + r, y - col, c) : put(x + col, y + r, c);
      vertical ? y -= 6 : x += 6;
    }
  }
};

inline const std::array<Rgb, 6>& palette() {
  static const std::array<Rgb, 6> p{{{-0.6f, -0.2f, 0.5f},
                                     {0.8f, -0.1f, -0.7f},
                                     {-0.5f, 0.4f, -0.5f},
                                     {0.5f, -0.7f, -0.5f},
                                     {0.3f, -0.4f, 0.6f},
                                     {-0.2f, -0.2f, -0.2f}}};
  return p;
}

inline std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.2f", v);
  return b;
}

constexpr Rgb kBlack{-1.f, -1.f, -1.f};
constexpr Rgb kGrid{0.7f, 0.7f, 0.7f};

}  // namespace detail

// Vertical bars with rotated category labels; values in [lo, hi].
inline Image bar_chart(const std::string& title, const std::vector<std::pair<std::string, double>>& bars, double lo,
                       double hi) {
  using namespace detail;
  const int bw = 24, left = 48, bottom = 110, top = 24;
  const int w = left + static_cast<int>(bars.size()) * bw + 16, h = 360;
  Canvas cv(h, w);
  cv.text(left, 6, title, kBlack);
  const int y0 = h - bottom, y1 = top;
  auto ypix = [&](double v) { return y0 - static_cast<int>(std::lround((std::clamp(v, lo, hi) - lo) / (hi - lo) * (y0 - y1))); };
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4;
    cv.line(left, ypix(v), w - 8, ypix(v), kGrid);
    cv.text(4, ypix(v) - 3, fmt(v), kBlack);
  }
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const int x = left + static_cast<int>(i) * bw + 4;
    cv.rect(x, ypix(bars[i].second), x + bw - 8, y0, palette()[0]);
    cv.text(x + 4, y0 + 6 + static_cast<int>(bars[i].first.size()) * 6, bars[i].first, kBlack, true);
  }
  cv.line(left, y0, w - 8, y0, kBlack);
  cv.line(left, y0, left, y1, kBlack);
  return cv.img;
}

struct Series {
  std::string name;
  std::vector<double> y;
};

// Lines over shared x values; each series gets its own colour and legend entry.
inline Image line_chart(const std::string& title, const std::string& xlabel, const std::vector<double>& x,
                        const std::vector<Series>& series, double lo, double hi) {
  using namespace detail;
  const int w = 420, h = 300, left = 48, right = 16, top = 24, bottom = 40;
  Canvas cv(h, w);
  cv.text(left, 6, title, kBlack);
  const double xmin = *std::min_element(x.begin(), x.end()), xmax = *std::max_element(x.begin(), x.end());
  const double xr = xmax > xmin ? xmax - xmin : 1.0;
  auto xpix = [&](double v) { return left + static_cast<int>(std::lround((v - xmin) / xr * (w - left - right))); };
  auto ypix = [&](double v) {
    return h - bottom - static_cast<int>(std::lround((std::clamp(v, lo, hi) - lo) / (hi - lo) * (h - top - bottom)));
  };
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4;
    cv.line(left, ypix(v), w - right, ypix(v), kGrid);
    cv.text(4, ypix(v) - 3, fmt(v), kBlack);
  }
  for (double v : x) cv.text(xpix(v) - 6, h - bottom + 6, fmt(v), kBlack);
  cv.text(left + (w - left) / 2 - static_cast<int>(xlabel.size()) * 3, h - 14, xlabel, kBlack);
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& c = palette()[s % palette().size()];
    for (std::size_t i = 0; i + 1 < x.size() && i + 1 < series[s].y.size(); ++i)
      cv.line(xpix(x[i]), ypix(series[s].y[i]), xpix(x[i + 1]), ypix(series[s].y[i + 1]), c);
    for (std::size_t i = 0; i < x.size() && i < series[s].y.size(); ++i)
      cv.rect(xpix(x[i]) - 2, ypix(series[s].y[i]) - 2, xpix(x[i]) + 2, ypix(series[s].y[i]) + 2, c);
    cv.rect(w - 120, top + 4 + static_cast<int>(s) * 10, w - 112, top + 10 + static_cast<int>(s) * 10, c);
    cv.text(w - 108, top + 4 + static_cast<int>(s) * 10, series[s].name, kBlack);
  }
  cv.line(left, h - bottom, w - right, h - bottom, kBlack);
  cv.line(left, h - bottom, left, top, kBlack);
  return cv.img;
}

}  // namespace lstego::plot
