#pragma once

#include <array>

// Severity tables for the corruption library, indexed by severity 1..5
// (entry 0 unused). Values follow the common ImageNet-C reference constants on
// a [0, 1] pixel scale. Constants measured in pixels were defined for 224 px
// images and are rescaled by kSpatialScale to the 64 px working resolution.
namespace lstego::noise_constants {

inline constexpr double kSpatialScale = 64.0 / 224.0;

template <typename V>
using Table = std::array<V, 6>;

inline constexpr Table<double> gaussian_noise_std{0, 0.08, 0.12, 0.18, 0.26, 0.38};

// Poisson rate multiplier; sampled with the Gaussian approximation
// u + sqrt(u / c) * N(0, 1) so the corruption stays differentiable.
inline constexpr Table<double> shot_noise_rate{0, 60, 25, 12, 5, 3};

// Fraction of pixels replaced by salt or pepper.
inline constexpr Table<double> impulse_amount{0, 0.03, 0.06, 0.09, 0.17, 0.27};

inline constexpr Table<double> speckle_std{0, 0.15, 0.2, 0.35, 0.45, 0.6};

inline constexpr Table<double> gaussian_blur_sigma{0, 1 * kSpatialScale, 2 * kSpatialScale, 3 * kSpatialScale,
                                                   4 * kSpatialScale, 6 * kSpatialScale};

struct Defocus {
  double radius, alias_sigma;
};
inline constexpr Table<Defocus> defocus{{{0, 0},
                                         {3 * kSpatialScale, 0.1 * kSpatialScale},
                                         {4 * kSpatialScale, 0.5 * kSpatialScale},
                                         {6 * kSpatialScale, 0.5 * kSpatialScale},
                                         {8 * kSpatialScale, 0.5 * kSpatialScale},
                                         {10 * kSpatialScale, 0.5 * kSpatialScale}}};

// Additive shift on all channels (the reference shifts HSV value).
inline constexpr Table<double> brightness_shift{0, 0.1, 0.2, 0.3, 0.4, 0.5};

// (x - channel mean) * c + channel mean
inline constexpr Table<double> contrast_factor{0, 0.4, 0.3, 0.2, 0.1, 0.05};

// Chroma scaling about BT.601 luma. The reference multiplies HSV saturation by
// these factors; its small additive saturation offsets are not modelled.
inline constexpr Table<double> saturate_factor{0, 0.3, 0.1, 2.0, 5.0, 20.0};

struct Fog {
  double strength, wibble_decay;
};
inline constexpr Table<Fog> fog{{{0, 0}, {1.5, 2.0}, {2.0, 2.0}, {2.5, 1.7}, {2.5, 1.5}, {3.0, 1.4}}};

// c0 * x + c1 * frost_texture
struct Frost {
  double image_weight, frost_weight;
};
inline constexpr Table<Frost> frost{{{0, 0}, {1.0, 0.4}, {0.8, 0.6}, {0.7, 0.7}, {0.65, 0.7}, {0.6, 0.75}}};

// Liquid layer ~ N(loc, scale), blurred, thresholded. mud == false is water.
struct Spatter {
  double loc, scale, sigma, threshold, intensity;
  bool mud;
};
inline constexpr Table<Spatter> spatter{{{0, 0, 0, 0, 0, false},
                                         {0.65, 0.3, 4 * kSpatialScale, 0.69, 0.6, false},
                                         {0.65, 0.3, 3 * kSpatialScale, 0.68, 0.6, false},
                                         {0.65, 0.3, 2 * kSpatialScale, 0.68, 0.5, false},
                                         {0.65, 0.3, 1 * kSpatialScale, 0.65, 1.5 * kSpatialScale, true},
                                         {0.67, 0.4, 1 * kSpatialScale, 0.65, 1.5 * kSpatialScale, true}}};
inline constexpr std::array<double, 3> water_color{175 / 255.0, 238 / 255.0, 238 / 255.0};
inline constexpr std::array<double, 3> mud_color{63 / 255.0, 42 / 255.0, 20 / 255.0};

// Box-downsample to this fraction of the side, then nearest upsample.
inline constexpr Table<double> pixelate_fraction{0, 0.6, 0.5, 0.4, 0.3, 0.25};

inline constexpr Table<int> jpeg_quality{0, 25, 18, 15, 10, 7};

}  // namespace lstego::noise_constants
