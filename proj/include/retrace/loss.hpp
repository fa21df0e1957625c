// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0
//
// Losses: per-view reconstruction MSE, the multi-view gradient
// consistency scalar (normalized per-texel gradient variance across
// views), and the composite loss that modulates each view's
// reconstruction term by e^consistency.

#pragma once

#include <vector>

#include "retrace/gradients.hpp"
#include "retrace/image.hpp"

namespace retrace {

struct ReconLoss {
  double mse = 0.0;        // mean over masked pixel-channels
  Image d_pixel;           // d mse / d pixel, zero outside the mask
  int masked_pixels = 0;
};

// Mean squared error over masked pixels and channels. The derivative image
// is 2(rendered - target)/count on masked pixels.
inline ReconLoss recon_loss(const Image& rendered, const Image& target, const MaskGrid& mask) {
  if (rendered.width() != target.width() || rendered.height() != target.height() ||
      rendered.width() != mask.width() || rendered.height() != mask.height())
    throw Error("recon_loss: image dimensions differ");
  ReconLoss out;
  out.d_pixel = Image(rendered.width(), rendered.height());
  for (size_t i = 0; i < mask.size(); ++i) out.masked_pixels += mask[i] ? 1 : 0;
  if (out.masked_pixels == 0) throw Error("recon_loss: empty mask, nothing to supervise");
  double count = 3.0 * out.masked_pixels;
  double sum = 0.0;
  for (size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    Vec3 diff = rendered[i] - target[i];
    sum += dot(diff, diff);
    out.d_pixel[i] = diff * (2.0 / count);
  }
  out.mse = sum / count;
  return out;
}

enum class MvclMode { kOff, kPerView, kGlobal };

inline const char* to_string(MvclMode m) {
  switch (m) {
    case MvclMode::kOff: return "off";
    case MvclMode::kPerView: return "per-view";
    case MvclMode::kGlobal: return "global";
  }
  return "?";
}

struct MvclResult {
  std::vector<double> per_view;  // view i's share of the normalized variance
  double global = 0.0;
  int64_t qualifying = 0;        // texel-channels with coverage >= 2
};

namespace detail {

struct MvclAccumulator {
  const std::vector<const GradientBuffers*>& views;
  const std::vector<double>& inv_max;
  MvclResult& result;
  std::vector<double>& per_view_acc;
  double& global_acc;

  template <typename Get>
  void texel(Get&& get) {
    const size_t n = views.size();
    // bitwise-equal fast path: equal gradients have exactly zero variance
    double first = get(0) * inv_max[0];
    bool all_equal = true;
    for (size_t i = 1; i < n && all_equal; ++i) all_equal = get(i) * inv_max[i] == first;
    result.qualifying++;
    if (all_equal) return;
    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) mean += get(i) * inv_max[i];
    mean /= double(n);
    for (size_t i = 0; i < n; ++i) {
      double dev = get(i) * inv_max[i] - mean;
      double contrib = dev * dev / double(n - 1);
      per_view_acc[i] += contrib;
      global_acc += contrib;
    }
  }
};

}  // namespace detail

// Normalized unbiased variance, across views, of per-texel gradients.
// Each view's buffers are first normalized by that view's max absolute
// entry over the participating maps, bounding entries to [-1, 1]; the
// per-texel variance sum is averaged over qualifying texel-channels
// (coverage >= 2) and divided by the analytic bound N/(N-1), which pins
// the scalar into [0, 1]. A view's scalar is its own share of the same
// sum, so per-view scalars add up to the global one.
inline MvclResult mvcl(const std::vector<const GradientBuffers*>& views,
                       const Grid<int>& coverage, const MapSet& maps) {
  const size_t n = views.size();
  if (n < 2) throw Error("mvcl: needs at least 2 views (unbiased variance undefined)");
  MvclResult result;
  result.per_view.assign(n, 0.0);

  std::vector<double> inv_max(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double m = views[i]->max_abs(maps);
    inv_max[i] = m > 0.0 ? 1.0 / m : 0.0;
  }

  std::vector<double> per_view_acc(n, 0.0);
  double global_acc = 0.0;
  detail::MvclAccumulator acc{views, inv_max, result, per_view_acc, global_acc};

  const int res = coverage.width();
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      if (coverage.at(x, y) < 2) continue;
      size_t idx = size_t(y) * res + x;
      for (int c = 0; c < 3; ++c) {
        if (maps.diffuse) acc.texel([&](size_t i) { return views[i]->diffuse[idx][c]; });
        if (maps.specular) acc.texel([&](size_t i) { return views[i]->specular[idx][c]; });
      }
      if (maps.roughness) acc.texel([&](size_t i) { return views[i]->roughness[idx]; });
    }
  }

  if (result.qualifying > 0) {
    double bound = double(n) / double(n - 1);
    double denom = double(result.qualifying) * bound;
    result.global = clamp(global_acc / denom, 0.0, 1.0);
    for (size_t i = 0; i < n; ++i) result.per_view[i] = clamp(per_view_acc[i] / denom, 0.0, 1.0);
  }
  return result;
}

struct CompositeLoss {
  double value = 0.0;
  std::vector<double> view_weights;  // detached e^mvcl factors
};

// L = mean_i(recon_i * e^{mvcl_i}); the exponential factors are detached
// weights on each view's gradient. Global mode shares one factor; off
// reduces to the plain mean (weights exactly 1).
inline CompositeLoss composite_loss(const std::vector<double>& recon,
                                    const std::vector<double>& mvcl_scalars, MvclMode mode) {
  const size_t n = recon.size();
  CompositeLoss out;
  out.view_weights.assign(n, 1.0);
  switch (mode) {
    case MvclMode::kOff:
      break;
    case MvclMode::kPerView:
      if (mvcl_scalars.size() != n) throw Error("composite_loss: per-view scalar count mismatch");
      for (size_t i = 0; i < n; ++i) out.view_weights[i] = std::exp(mvcl_scalars[i]);
      break;
    case MvclMode::kGlobal:
      if (mvcl_scalars.empty()) throw Error("composite_loss: missing global scalar");
      for (size_t i = 0; i < n; ++i) out.view_weights[i] = std::exp(mvcl_scalars[0]);
      break;
  }
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) sum += recon[i] * out.view_weights[i];
  out.value = sum / double(n);
  return out;
}

}  // namespace retrace
