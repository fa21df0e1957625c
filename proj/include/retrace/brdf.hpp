// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reflection model: Lambertian diffuse plus a Cook-Torrance microfacet
// lobe with a normalized Blinn-Phong distribution, Schlick Fresnel and
// Smith shadowing-masking using the Schlick-GGX single-direction term.
// All parameters carry analytic derivatives so the renderer can splat
// loss gradients onto texels.

#pragma once

#include "retrace/math.hpp"

namespace retrace {

constexpr double kAlphaMin = 0.02;

struct BrdfParams {
  Vec3 diffuse;       // albedo rho, [0,1] per channel
  Vec3 specular_f0;   // Fresnel base reflectance, [0,1] per channel
  double roughness = 0.5;  // alpha, [kAlphaMin, 1]
};

struct BrdfDerivs {
  Vec3 d_diffuse;    // df_c / d rho_c (same for every channel: 1/pi)
  Vec3 d_specular;   // df_c / d F0_c
  Vec3 d_roughness;  // df_c / d alpha
};

namespace detail {

struct SpecGeom {
  double ci, co, ch, hi;  // n.wi, n.wo, n.h, h.wi
  bool valid = false;
};

inline SpecGeom spec_geometry(const Vec3& wi, const Vec3& wo, const Frame& frame) {
  SpecGeom g;
  g.ci = dot(frame.n, wi);
  g.co = dot(frame.n, wo);
  if (g.ci <= 0.0 || g.co <= 0.0) return g;
  Vec3 h = wi + wo;
  double len = length(h);
  if (len < 1e-12) return g;
  h = h / len;
  g.ch = dot(frame.n, h);
  g.hi = dot(h, wi);
  g.valid = g.ch > 0.0 && g.hi > 0.0;
  return g;
}

inline double blinn_exponent(double alpha) { return 2.0 / (alpha * alpha) - 2.0; }

inline double g1_schlick(double cv, double k) { return cv / (cv * (1.0 - k) + k); }

}  // namespace detail

// f(P, wi, wo) = rho/pi + D F G / (4 (n.wo)(n.wi)); zero outside the
// upper hemisphere.
inline Vec3 eval_brdf(const BrdfParams& p, const Vec3& wi, const Vec3& wo, const Frame& frame) {
  auto g = detail::spec_geometry(wi, wo, frame);
  if (g.ci <= 0.0 || g.co <= 0.0) return {0, 0, 0};
  Vec3 f = p.diffuse * kInvPi;
  if (!g.valid || (p.specular_f0.x == 0 && p.specular_f0.y == 0 && p.specular_f0.z == 0))
    return f;
  double alpha = std::max(p.roughness, kAlphaMin);
  double e = detail::blinn_exponent(alpha);
  double pow_ch = std::pow(g.ch, e);
  if (!(pow_ch > 0.0)) return f;  // lobe underflow at grazing half vectors
  double d = (e + 2.0) * (0.5 * kInvPi) * pow_ch;
  double k = 0.5 * alpha * alpha;
  double geo = detail::g1_schlick(g.ci, k) * detail::g1_schlick(g.co, k);
  double s = d * geo / (4.0 * g.ci * g.co);
  double schlick = std::pow(1.0 - g.hi, 5.0);
  Vec3 fresnel = p.specular_f0 + (Vec3(1, 1, 1) - p.specular_f0) * schlick;
  return f + fresnel * s;
}

// Analytic partials of eval_brdf for each parameter, at fixed directions.
// Requires both cosines > 0; returns zeros otherwise.
inline BrdfDerivs brdf_param_derivatives(const BrdfParams& p, const Vec3& wi, const Vec3& wo,
                                         const Frame& frame) {
  BrdfDerivs out;
  auto g = detail::spec_geometry(wi, wo, frame);
  if (g.ci <= 0.0 || g.co <= 0.0) return out;
  out.d_diffuse = Vec3(kInvPi, kInvPi, kInvPi);
  if (!g.valid) return out;

  double alpha = std::max(p.roughness, kAlphaMin);
  double e = detail::blinn_exponent(alpha);
  double pow_ch = std::pow(g.ch, e);
  if (!(pow_ch > 0.0)) return out;
  double d = (e + 2.0) * (0.5 * kInvPi) * pow_ch;
  double k = 0.5 * alpha * alpha;
  double g1i = detail::g1_schlick(g.ci, k);
  double g1o = detail::g1_schlick(g.co, k);
  double geo = g1i * g1o;
  double denom = 1.0 / (4.0 * g.ci * g.co);

  double schlick = std::pow(1.0 - g.hi, 5.0);
  out.d_specular = Vec3(1, 1, 1) * ((1.0 - schlick) * d * geo * denom);

  // dD/dalpha through e(alpha), dG/dalpha through k(alpha)
  double de_dalpha = -4.0 / (alpha * alpha * alpha);
  double log_ch = std::log(g.ch);
  double dd_dalpha = d * (1.0 / (e + 2.0) + log_ch) * de_dalpha;
  auto dg1_dk = [](double cv, double k_) {
    double dv = cv * (1.0 - k_) + k_;
    return -cv * (1.0 - cv) / (dv * dv);
  };
  double dgeo_dalpha = (dg1_dk(g.ci, k) * g1o + g1i * dg1_dk(g.co, k)) * alpha;
  Vec3 fresnel = p.specular_f0 + (Vec3(1, 1, 1) - p.specular_f0) * schlick;
  out.d_roughness = fresnel * ((dd_dalpha * geo + d * dgeo_dalpha) * denom);
  return out;
}

struct LobeWeights {
  double diffuse = 1.0;
  double specular = 0.0;
};

// Mixture weights proportional to the channel means of rho and F0, with a
// floor of 0.1 on each when both lobes are present.
inline LobeWeights lobe_weights(const BrdfParams& p) {
  double wd = mean(p.diffuse);
  double ws = mean(p.specular_f0);
  LobeWeights w;
  if (wd <= 0.0 && ws <= 0.0) return w;             // black BRDF: nominal diffuse lobe
  if (ws <= 0.0) return w;                          // diffuse only
  if (wd <= 0.0) return {0.0, 1.0};                 // specular only
  double sum = wd + ws;
  w.diffuse = std::max(wd / sum, 0.1);
  w.specular = std::max(ws / sum, 0.1);
  double norm = w.diffuse + w.specular;
  w.diffuse /= norm;
  w.specular /= norm;
  return w;
}

// Mixture pdf of sample_brdf over the sphere, in 1/steradian.
inline double pdf_brdf(const BrdfParams& p, const Vec3& wi, const Vec3& wo, const Frame& frame) {
  LobeWeights w = lobe_weights(p);
  double co = dot(frame.n, wo);
  if (co <= 0.0) return 0.0;
  double pdf = 0.0;
  double ci = dot(frame.n, wi);
  if (ci > 0.0) pdf += w.diffuse * ci * kInvPi;
  if (w.specular > 0.0) {
    Vec3 h = wi + wo;
    double len = length(h);
    if (len > 1e-12) {
      h = h / len;
      double ch = dot(frame.n, h);
      double ho = dot(h, wo);
      if (ch > 0.0 && ho > 1e-12) {
        double alpha = std::max(p.roughness, kAlphaMin);
        double e = detail::blinn_exponent(alpha);
        double pdf_h = (e + 1.0) * (0.5 * kInvPi) * std::pow(ch, e);
        pdf += w.specular * pdf_h / (4.0 * ho);
      }
    }
  }
  return pdf;
}

struct BrdfSample {
  Vec3 wi;
  double pdf = 0.0;
  Vec3 value;        // eval_brdf at wi; zero for below-horizon samples
  bool valid = false;  // false when the sampled direction carries no contribution
};

// Draws wi from the diffuse/specular mixture. u drives the lobe shape,
// lobe_u the lobe choice. The pdf is the full mixture density, so the
// estimator value/pdf is correct regardless of which lobe fired.
inline BrdfSample sample_brdf(const BrdfParams& p, const Vec3& wo, const Frame& frame,
                              const Vec2& u, double lobe_u) {
  BrdfSample out;
  if (dot(frame.n, wo) <= 0.0) return out;
  LobeWeights w = lobe_weights(p);
  if (lobe_u < w.diffuse) {
    // cosine-weighted hemisphere
    double r = std::sqrt(u.x);
    double phi = kTwoPi * u.y;
    double z = std::sqrt(std::max(0.0, 1.0 - u.x));
    out.wi = frame.to_world({r * std::cos(phi), r * std::sin(phi), z});
  } else {
    double alpha = std::max(p.roughness, kAlphaMin);
    double e = detail::blinn_exponent(alpha);
    double cos_h = std::pow(u.x, 1.0 / (e + 1.0));
    double sin_h = std::sqrt(std::max(0.0, 1.0 - cos_h * cos_h));
    double phi = kTwoPi * u.y;
    Vec3 h = frame.to_world({sin_h * std::cos(phi), sin_h * std::sin(phi), cos_h});
    double ho = dot(h, wo);
    if (ho <= 0.0) {
      out.wi = h * (2.0 * ho) - wo;  // below-horizon reflection, no contribution
      out.pdf = pdf_brdf(p, out.wi, wo, frame);
      return out;
    }
    out.wi = h * (2.0 * ho) - wo;
  }
  out.pdf = pdf_brdf(p, out.wi, wo, frame);
  if (out.pdf <= 0.0) return out;
  if (dot(frame.n, out.wi) <= 0.0) return out;  // valid pdf, zero contribution
  out.value = eval_brdf(p, out.wi, wo, frame);
  out.valid = true;
  return out;
}

// Power heuristic (beta = 2) for combining two sampling strategies.
inline double power_heuristic(double pf, double pg) {
  double f2 = pf * pf, g2 = pg * pg;
  double denom = f2 + g2;
  return denom > 0.0 ? f2 / denom : 0.0;
}

}  // namespace retrace
