// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0
//
// Equirectangular environment radiance grid with a luminance-weighted
// importance sampling table. Mapping convention (stated exactly because
// target images and relighting maps must agree on it): up axis is +Y,
// u = (atan2(z, x) + pi) / 2pi with the seam at phi = -pi mapping to
// u = 0, v = arccos(y) / pi so v = 0 is the top row. Horizontal wrap,
// vertical clamp.

#pragma once

#include <vector>

#include "retrace/image.hpp"
#include "retrace/math.hpp"

namespace retrace {

inline double luminance(const Vec3& c) { return 0.2126 * c.x + 0.7152 * c.y + 0.0722 * c.z; }

struct EnvSample {
  Vec3 dir;
  double pdf = 0.0;  // 1/steradian
  Vec3 radiance;
};

class EnvironmentMap {
 public:
  EnvironmentMap() = default;
  EnvironmentMap(int width, int height, Vec3 fill = Vec3()) : values_(width, height, fill) {
    rebuild_table();
  }
  explicit EnvironmentMap(Image values) : values_(std::move(values)) { rebuild_table(); }

  int width() const { return values_.width(); }
  int height() const { return values_.height(); }
  Image& values() { return values_; }  // mutating values does not touch the table
  const Image& values() const { return values_; }

  static Vec2 dir_to_uv(const Vec3& d) {
    double u = (std::atan2(d.z, d.x) + kPi) / kTwoPi;
    double v = std::acos(clamp(d.y, -1.0, 1.0)) / kPi;
    if (u >= 1.0) u -= 1.0;  // atan2 returns +pi at the seam
    return {u, v};
  }

  static Vec3 uv_to_dir(const Vec2& uv) {
    double phi = uv.x * kTwoPi - kPi;
    double theta = uv.y * kPi;
    double st = std::sin(theta);
    return {st * std::cos(phi), std::cos(theta), st * std::sin(phi)};
  }

  Footprint texel_footprint(const Vec3& dir) const {
    Vec2 uv = dir_to_uv(dir);
    return bilinear_footprint_wrapped(uv.x, uv.y, width(), height());
  }

  Vec3 eval(const Vec3& dir) const {
    return sample_bilinear(values_, texel_footprint(dir));
  }

  // Snapshot of texel luminances used for importance sampling. Rebuilt
  // explicitly (once per optimization epoch); evaluation keeps reading the
  // live values, so the pdf stays a valid, fixed importance distribution
  // while texels move.
  void rebuild_table() {
    const int w = width(), h = height();
    table_lum_.assign(size_t(w) * h, 0.0);
    row_weight_.assign(h, 0.0);
    row_cdf_.assign(h + 1, 0.0);
    col_cdf_.assign(size_t(h) * (w + 1), 0.0);
    dcos_.assign(h, 0.0);
    total_ = 0.0;
    for (int y = 0; y < h; ++y) {
      dcos_[y] = std::cos(kPi * y / h) - std::cos(kPi * (y + 1) / h);
      double row_sum = 0.0;
      for (int x = 0; x < w; ++x) {
        double l = luminance(values_.at(x, y));
        table_lum_[size_t(y) * w + x] = l;
        row_sum += l;
        col_cdf_[size_t(y) * (w + 1) + x + 1] = row_sum;
      }
      if (row_sum > 0.0)
        for (int x = 1; x <= w; ++x) col_cdf_[size_t(y) * (w + 1) + x] /= row_sum;
      row_weight_[y] = dcos_[y] * row_sum;
      total_ += row_weight_[y];
      row_cdf_[y + 1] = total_;
    }
    if (total_ > 0.0)
      for (int y = 1; y <= h; ++y) row_cdf_[y] /= total_;
  }

  // Normalized marginals, exposed for validation.
  std::vector<double> row_marginal() const {
    std::vector<double> out(height());
    for (int y = 0; y < height(); ++y) out[y] = total_ > 0.0 ? row_weight_[y] / total_ : 0.0;
    return out;
  }
  std::vector<double> col_conditional(int row) const {
    std::vector<double> out(width());
    for (int x = 0; x < width(); ++x)
      out[x] = col_cdf_[size_t(row) * (width() + 1) + x + 1] -
               col_cdf_[size_t(row) * (width() + 1) + x];
    return out;
  }

  // Direction drawn proportional to luminance x sin(theta); within a texel
  // cos(theta) and phi are uniform, which makes the pdf piecewise constant
  // and exactly equal to pdf() for the returned direction.
  EnvSample sample(const Vec2& u) const {
    EnvSample out;
    const int w = width(), h = height();
    if (total_ <= 0.0) {
      // black map: uniform sphere
      double z = 1.0 - 2.0 * u.x;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      double phi = kTwoPi * u.y;
      out.dir = {r * std::cos(phi), z, r * std::sin(phi)};
      out.pdf = 1.0 / (4.0 * kPi);
      out.radiance = eval(out.dir);
      return out;
    }
    // row from u.x, column from u.y; the CDF inversion remainders place
    // the sample inside the texel
    int row = int(std::upper_bound(row_cdf_.begin() + 1, row_cdf_.end(), u.x) -
                  (row_cdf_.begin() + 1));
    row = std::clamp(row, 0, h - 1);
    double row_lo = row_cdf_[row], row_hi = row_cdf_[row + 1];
    double ur = row_hi > row_lo ? (u.x - row_lo) / (row_hi - row_lo) : 0.5;

    const double* ccdf = &col_cdf_[size_t(row) * (w + 1)];
    int col = int(std::upper_bound(ccdf + 1, ccdf + w + 1, u.y) - (ccdf + 1));
    col = std::clamp(col, 0, w - 1);
    double col_lo = ccdf[col], col_hi = ccdf[col + 1];
    double uc = col_hi > col_lo ? (u.y - col_lo) / (col_hi - col_lo) : 0.5;

    double cos_top = std::cos(kPi * row / h);
    double cos_theta = cos_top - ur * dcos_[row];
    double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
    double phi = ((col + uc) / w) * kTwoPi - kPi;
    out.dir = {sin_theta * std::cos(phi), cos_theta, sin_theta * std::sin(phi)};
    out.pdf = pdf_from_texel(col, row);
    // (u, v) are known here; skip the dir -> uv round trip for the lookup
    double v_coord = std::acos(clamp(cos_theta, -1.0, 1.0)) / kPi;
    out.radiance =
        sample_bilinear(values_, bilinear_footprint_wrapped((col + uc) / w, v_coord, w, h));
    return out;
  }

  double pdf(const Vec3& dir) const {
    if (total_ <= 0.0) return 1.0 / (4.0 * kPi);
    Vec2 uv = dir_to_uv(dir);
    int col = std::clamp(int(uv.x * width()), 0, width() - 1);
    int row = std::clamp(int(uv.y * height()), 0, height() - 1);
    return pdf_from_texel(col, row);
  }

 private:
  double pdf_from_texel(int col, int row) const {
    // P(texel) = lum * dcos / total spread over dphi x dcos of solid angle
    double l = table_lum_[size_t(row) * width() + col];
    return width() * l / (kTwoPi * total_);
  }

  Image values_;
  std::vector<double> table_lum_;
  std::vector<double> row_weight_;
  std::vector<double> row_cdf_;
  std::vector<double> col_cdf_;
  std::vector<double> dcos_;
  double total_ = 0.0;
};

}  // namespace retrace
