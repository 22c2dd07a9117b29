#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lstego/core/tensor.hpp"

namespace lstego {

// RGB image, planar channel-first, canonical value range [-1, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // 3 * height * width

  Image() = default;
  Image(int h, int w, float fill = 0.f) : height(h), width(w), pixels(static_cast<std::size_t>(3) * h * w, fill) {
    if (h <= 0 || w <= 0) throw std::invalid_argument("image dimensions must be positive");
  }

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  float& at(int c, int y, int x) { return pixels[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  float at(int c, int y, int x) const { return pixels[c * plane() + static_cast<std::size_t>(y) * width + x]; }

  bool same_shape(const Image& o) const { return height == o.height && width == o.width; }

  template <typename T = float>
  Tensor<T> to_tensor() const {
    return Tensor<T>({1, 3, height, width}, std::vector<T>(pixels.begin(), pixels.end()));
  }

  template <typename T>
  static Image from_tensor(const Tensor<T>& t, int n = 0) {
    const auto& s = t.shape();
    if (s.size() != 4 || s[1] != 3) throw std::invalid_argument("expected an [N,3,H,W] tensor");
    Image img(s[2], s[3]);
    const std::size_t per = img.pixels.size();
    for (std::size_t i = 0; i < per; ++i) img.pixels[i] = static_cast<float>(t[n * per + i]);
    return img;
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.height == b.height && a.width == b.width && a.pixels == b.pixels;
  }
};

template <typename T = float>
Tensor<T> images_to_batch(std::span<const Image> imgs) {
  if (imgs.empty()) throw std::invalid_argument("empty image batch");
  const int h = imgs[0].height, w = imgs[0].width;
  std::vector<T> v;
  v.reserve(imgs.size() * imgs[0].pixels.size());
  for (const auto& im : imgs) {
    if (im.height != h || im.width != w) throw std::invalid_argument("batch images differ in size");
    v.insert(v.end(), im.pixels.begin(), im.pixels.end());
  }
  return Tensor<T>({static_cast<int>(imgs.size()), 3, h, w}, std::move(v));
}

template <typename T>
std::vector<Image> batch_to_images(const Tensor<T>& t) {
  std::vector<Image> out;
  for (int n = 0; n < t.dim(0); ++n) out.push_back(Image::from_tensor(t, n));
  return out;
}

inline float to_unit(float v) { return 0.5f * (v + 1.f); }
inline float from_unit(float v) { return 2.f * v - 1.f; }

inline std::uint8_t to_byte(float v) {
  const float u = std::clamp(to_unit(v), 0.f, 1.f);
  return static_cast<std::uint8_t>(std::lround(u * 255.f));
}
inline float from_byte(std::uint8_t b) { return from_unit(static_cast<float>(b) / 255.f); }

// Snap to the 8-bit grid, i.e. what a PNG save/load roundtrip yields.
inline Image quantize8(const Image& img) {
  Image out = img;
  for (auto& v : out.pixels) v = from_byte(to_byte(v));
  return out;
}

// Separable resampling with a triangle kernel widened by the scale factor, so
// downscaling is antialiased and upscaling is plain bilinear.
inline Image resize_bilinear(const Image& src, int out_h, int out_w) {
  if (src.height == out_h && src.width == out_w) return src;
  auto weights = [](int in, int out) {
    struct Tap {
      int first;
      std::vector<float> w;
    };
    std::vector<Tap> taps(out);
    const double scale = static_cast<double>(in) / out;
    const double support = std::max(1.0, scale);
    for (int o = 0; o < out; ++o) {
      const double center = (o + 0.5) * scale - 0.5;
      const int lo = static_cast<int>(std::floor(center - support)) + 1;
      const int hi = static_cast<int>(std::ceil(center + support)) - 1;
      double total = 0;
      std::vector<double> w;
      for (int i = lo; i <= hi; ++i) {
        const double d = std::abs(i - center) / support;
        w.push_back(std::max(0.0, 1.0 - d));
        total += w.back();
      }
      taps[o].first = lo;
      for (double x : w) taps[o].w.push_back(static_cast<float>(x / total));
    }
    return taps;
  };
  const auto th = weights(src.height, out_h);
  const auto tw = weights(src.width, out_w);
  Image tmp(src.height, out_w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < src.height; ++y)
      for (int x = 0; x < out_w; ++x) {
        float acc = 0;
        for (std::size_t k = 0; k < tw[x].w.size(); ++k)
          acc += tw[x].w[k] * src.at(c, y, std::clamp(tw[x].first + static_cast<int>(k), 0, src.width - 1));
        tmp.at(c, y, x) = acc;
      }
  Image out(out_h, out_w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x) {
        float acc = 0;
        for (std::size_t k = 0; k < th[y].w.size(); ++k)
          acc += th[y].w[k] * tmp.at(c, std::clamp(th[y].first + static_cast<int>(k), 0, src.height - 1), x);
        out.at(c, y, x) = acc;
      }
  return out;
}

// ------------------------------------------------------------------- PNG I/O

inline Image read_png(const std::string& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw std::runtime_error("cannot open " + path);
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8)) throw std::runtime_error(path + ": not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw std::runtime_error("libpng initialisation failed");
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  std::vector<png_bytep> rows;
  std::vector<unsigned char> buf;
  int h = 0, w = 0;
  if (setjmp(png_jmpbuf(png))) throw std::runtime_error(path + ": corrupt PNG data");
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  h = static_cast<int>(png_get_image_height(png, info));
  w = static_cast<int>(png_get_image_width(png, info));
  if (png_get_channels(png, info) != 3) throw std::runtime_error(path + ": unsupported PNG layout");
  buf.resize(static_cast<std::size_t>(h) * w * 3);
  rows.resize(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = from_byte(buf[(static_cast<std::size_t>(y) * w + x) * 3 + c]);
  return img;
}

inline void write_png(const std::string& path, const Image& img) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw std::runtime_error("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw std::runtime_error("libpng initialisation failed");
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  std::vector<unsigned char> buf(static_cast<std::size_t>(img.height) * img.width * 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) buf[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] = to_byte(img.at(c, y, x));
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * img.width * 3;

  if (setjmp(png_jmpbuf(png))) throw std::runtime_error("failed writing " + path);
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
}

// Sorted list of *.png files in a directory.
inline std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::invalid_argument(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (e.is_regular_file() && ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace lstego
