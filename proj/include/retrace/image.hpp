// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "retrace/math.hpp"

namespace retrace {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Dense row-major grid of pixels/texels. T is Vec3 for RGB data and
// double for scalar data. Row 0 is the top of the image.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{}) : w_(width), h_(height), data_(size_t(width) * height, fill) {}

  int width() const { return w_; }
  int height() const { return h_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int x, int y) { return data_[size_t(y) * w_ + x]; }
  const T& at(int x, int y) const { return data_[size_t(y) * w_ + x]; }
  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  void fill(const T& v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Grid& o) const { return w_ == o.w_ && h_ == o.h_ && data_ == o.data_; }

 private:
  int w_ = 0, h_ = 0;
  std::vector<T> data_;
};

using Image = Grid<Vec3>;
using ScalarGrid = Grid<double>;
using MaskGrid = Grid<uint8_t>;

// One bilinear lookup: four texel indices with weights that are >= 0 and
// sum to 1. Texel centers sit at ((i+0.5)/W, (j+0.5)/H).
struct Footprint {
  int x[4];
  int y[4];
  double w[4];
};

// Footprint on a clamped grid (texture atlas). Out-of-range coordinates are
// clamped to the border; the caller may count clamps via `clamped`.
inline Footprint bilinear_footprint_clamped(double u, double v, int width, int height,
                                            bool* clamped = nullptr) {
  if (clamped) *clamped = (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0);
  u = clamp(u, 0.0, 1.0);
  v = clamp(v, 0.0, 1.0);
  double gx = u * width - 0.5;
  double gy = v * height - 0.5;
  double fx = std::floor(gx);
  double fy = std::floor(gy);
  double ax = gx - fx;
  double ay = gy - fy;
  int x0 = int(fx), y0 = int(fy);
  int x1 = x0 + 1, y1 = y0 + 1;
  x0 = std::clamp(x0, 0, width - 1);
  x1 = std::clamp(x1, 0, width - 1);
  y0 = std::clamp(y0, 0, height - 1);
  y1 = std::clamp(y1, 0, height - 1);
  Footprint fp;
  fp.x[0] = x0; fp.y[0] = y0; fp.w[0] = (1 - ax) * (1 - ay);
  fp.x[1] = x1; fp.y[1] = y0; fp.w[1] = ax * (1 - ay);
  fp.x[2] = x0; fp.y[2] = y1; fp.w[2] = (1 - ax) * ay;
  fp.x[3] = x1; fp.y[3] = y1; fp.w[3] = ax * ay;
  return fp;
}

// Footprint on a horizontally wrapping, vertically clamped grid
// (equirectangular environment map).
inline Footprint bilinear_footprint_wrapped(double u, double v, int width, int height) {
  v = clamp(v, 0.0, 1.0);
  double gx = u * width - 0.5;
  double gy = v * height - 0.5;
  double fx = std::floor(gx);
  double fy = std::floor(gy);
  double ax = gx - fx;
  double ay = gy - fy;
  int x0 = int(fx), y0 = int(fy);
  auto wrap = [width](int x) {
    x %= width;
    return x < 0 ? x + width : x;
  };
  int x1 = wrap(x0 + 1);
  x0 = wrap(x0);
  int y1 = std::clamp(y0 + 1, 0, height - 1);
  y0 = std::clamp(y0, 0, height - 1);
  Footprint fp;
  fp.x[0] = x0; fp.y[0] = y0; fp.w[0] = (1 - ax) * (1 - ay);
  fp.x[1] = x1; fp.y[1] = y0; fp.w[1] = ax * (1 - ay);
  fp.x[2] = x0; fp.y[2] = y1; fp.w[2] = (1 - ax) * ay;
  fp.x[3] = x1; fp.y[3] = y1; fp.w[3] = ax * ay;
  return fp;
}

inline Vec3 sample_bilinear(const Image& img, const Footprint& fp) {
  Vec3 out;
  for (int k = 0; k < 4; ++k) out += img.at(fp.x[k], fp.y[k]) * fp.w[k];
  return out;
}

inline double sample_bilinear(const ScalarGrid& img, const Footprint& fp) {
  double out = 0;
  for (int k = 0; k < 4; ++k) out += img.at(fp.x[k], fp.y[k]) * fp.w[k];
  return out;
}

}  // namespace retrace
