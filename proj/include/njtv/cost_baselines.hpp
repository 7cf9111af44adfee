#pragma once

#include <cmath>
#include <vector>

#include "njtv/cost_njtv.hpp"
#include "njtv/se3.hpp"
#include "njtv/volume.hpp"

namespace njtv {

struct JointHistogram {
  int bins = 64;
  std::vector<double> h;  // bins x bins, row = fixed bin, col = moving bin
  double mass = 0;
  double fixed_lo = 0, fixed_hi = 0, moving_lo = 0, moving_hi = 0;

  double& at(int i, int j) {
    return h[static_cast<size_t>(i) * static_cast<size_t>(bins) +
             static_cast<size_t>(j)];
  }
  double at(int i, int j) const {
    return h[static_cast<size_t>(i) * static_cast<size_t>(bins) +
             static_cast<size_t>(j)];
  }
};

namespace detail {

inline void intensity_window(const Volume& v, double& lo, double& hi) {
  lo = std::numeric_limits<double>::infinity();
  hi = -lo;
  for (size_t i = 0; i < v.data.size(); ++i) {
    if (v.is_missing(i)) continue;
    lo = std::min(lo, v.data[i]);
    hi = std::max(hi, v.data[i]);
  }
  if (!(hi > lo)) hi = lo + 1.0;
}

inline void smooth_rows(std::vector<double>& h, int bins,
                        const std::vector<double>& kernel, bool columns) {
  const int r = static_cast<int>(kernel.size()) / 2;
  std::vector<double> tmp(h.size(), 0.0);
  for (int i = 0; i < bins; ++i) {
    for (int j = 0; j < bins; ++j) {
      double s = 0, wsum = 0;
      for (int t = -r; t <= r; ++t) {
        const int jj = j + t;
        if (jj < 0 || jj >= bins) continue;
        const double w = kernel[static_cast<size_t>(t + r)];
        const size_t idx = columns
                               ? static_cast<size_t>(jj) * bins + i
                               : static_cast<size_t>(i) * bins + jj;
        s += w * h[idx];
        wsum += w;
      }
      const size_t out = columns ? static_cast<size_t>(j) * bins + i
                                 : static_cast<size_t>(i) * bins + j;
      tmp[out] = wsum > 0 ? s / wsum : 0.0;
    }
  }
  h.swap(tmp);
}

}  // namespace detail

/// Joint intensity histogram of fixed/moving pairs over the overlap, with
/// bilinear intensity spreading and separable Gaussian smoothing (FWHM in
/// bins). The moving image is sampled trilinearly at the pulled-back,
/// jittered fixed grid.
inline JointHistogram joint_histogram(const Volume& fixed,
                                      const Volume& moving,
                                      const RigidParams& q, int bins = 64,
                                      double fwhm = 2.0,
                                      const JitteredGrid& grid =
                                          JitteredGrid::disabled()) {
  JointHistogram jh;
  jh.bins = bins;
  jh.h.assign(static_cast<size_t>(bins) * static_cast<size_t>(bins), 0.0);
  detail::intensity_window(fixed, jh.fixed_lo, jh.fixed_hi);
  detail::intensity_window(moving, jh.moving_lo, jh.moving_hi);
  const double fscale = (bins - 1) / (jh.fixed_hi - jh.fixed_lo);
  const double mscale = (bins - 1) / (jh.moving_hi - jh.moving_lo);

  double overlap = 0;
  const Affine4 pullback =
      moving.world.inverse() * exp_se3(q).inverse() * fixed.world;
  const int nx = fixed.dims[0], ny = fixed.dims[1], nz = fixed.dims[2];
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const size_t idx = fixed.index(i, j, k);
        if (fixed.is_missing(idx)) continue;
        const Vec3 off = grid.offset(idx);
        const Vec3 y = {i + off[0], j + off[1], k + off[2]};
        std::optional<double> fv = trilinear_sample(fixed, y);
        if (!fv) continue;
        std::optional<double> mv = trilinear_sample(moving, pullback.apply(y));
        // Out-of-FOV moving samples count as intensity 0 (the same
        // convention the gradient-based cost uses). Dropping them makes
        // the information measures overlap-dependent: rotating away from
        // alignment sheds background border voxels, which raises the
        // marginal entropies and lowers the cost.
        if (mv) overlap += 1.0;
        const double mval = mv ? *mv : 0.0;
        const double u = std::clamp((*fv - jh.fixed_lo) * fscale, 0.0,
                                    static_cast<double>(bins - 1));
        const double w = std::clamp((mval - jh.moving_lo) * mscale, 0.0,
                                    static_cast<double>(bins - 1));
        const int u0 = std::min(static_cast<int>(u), bins - 2);
        const int w0 = std::min(static_cast<int>(w), bins - 2);
        const double fu = u - u0, fw = w - w0;
        jh.at(u0, w0) += (1 - fu) * (1 - fw);
        jh.at(u0 + 1, w0) += fu * (1 - fw);
        jh.at(u0, w0 + 1) += (1 - fu) * fw;
        jh.at(u0 + 1, w0 + 1) += fu * fw;
        jh.mass += 1.0;
      }
    }
  }
  if (jh.mass <= 0 || overlap <= 0)
    throw DomainError("joint_histogram: no overlapping field of view");

  if (fwhm > 0) {
    const double sigma = fwhm / 2.3548200450309493;
    const int r = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
    std::vector<double> kernel(static_cast<size_t>(2 * r + 1));
    for (int t = -r; t <= r; ++t)
      kernel[static_cast<size_t>(t + r)] =
          std::exp(-0.5 * t * t / (sigma * sigma));
    detail::smooth_rows(jh.h, bins, kernel, false);
    detail::smooth_rows(jh.h, bins, kernel, true);
    double m = 0;
    for (double x : jh.h) m += x;
    jh.mass = m;
  }
  return jh;
}

namespace detail {

struct Entropies {
  double h_fixed = 0, h_moving = 0, h_joint = 0;
};

inline Entropies entropies(const JointHistogram& jh) {
  if (jh.mass <= 0) throw DomainError("entropies: empty histogram");
  const int b = jh.bins;
  std::vector<double> pf(static_cast<size_t>(b), 0.0);
  std::vector<double> pm(static_cast<size_t>(b), 0.0);
  Entropies e;
  const double inv = 1.0 / jh.mass;
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) {
      const double p = jh.at(i, j) * inv;
      if (p > 0) e.h_joint -= p * std::log(p);
      pf[static_cast<size_t>(i)] += p;
      pm[static_cast<size_t>(j)] += p;
    }
  }
  for (int i = 0; i < b; ++i) {
    if (pf[static_cast<size_t>(i)] > 0)
      e.h_fixed -= pf[static_cast<size_t>(i)] *
                   std::log(pf[static_cast<size_t>(i)]);
    if (pm[static_cast<size_t>(i)] > 0)
      e.h_moving -= pm[static_cast<size_t>(i)] *
                    std::log(pm[static_cast<size_t>(i)]);
  }
  return e;
}

}  // namespace detail

inline double mi(const JointHistogram& jh) {
  const auto e = detail::entropies(jh);
  return e.h_fixed + e.h_moving - e.h_joint;
}

inline double nmi(const JointHistogram& jh) {
  const auto e = detail::entropies(jh);
  return (e.h_fixed + e.h_moving) / std::max(e.h_joint, 1e-300);
}

/// Entropy correlation coefficient: 2 - 2 H12 / (H1 + H2).
inline double ecc(const JointHistogram& jh) {
  const auto e = detail::entropies(jh);
  const double denom = e.h_fixed + e.h_moving;
  if (denom <= 0) return 0.0;
  return 2.0 - 2.0 * e.h_joint / denom;
}

/// Negated Pearson correlation over the overlap, so that all cost
/// functions are minimized.
inline double ncc(const Volume& fixed, const Volume& moving,
                  const RigidParams& q,
                  const JitteredGrid& grid = JitteredGrid::disabled()) {
  const Affine4 pullback =
      moving.world.inverse() * exp_se3(q).inverse() * fixed.world;
  double n = 0, sf = 0, sm = 0, sff = 0, smm = 0, sfm = 0;
  const int nx = fixed.dims[0], ny = fixed.dims[1], nz = fixed.dims[2];
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const size_t idx = fixed.index(i, j, k);
        if (fixed.is_missing(idx)) continue;
        const Vec3 off = grid.offset(idx);
        const Vec3 y = {i + off[0], j + off[1], k + off[2]};
        std::optional<double> fv = trilinear_sample(fixed, y);
        if (!fv) continue;
        std::optional<double> mv = trilinear_sample(moving, pullback.apply(y));
        if (!mv) continue;
        n += 1;
        sf += *fv;
        sm += *mv;
        sff += *fv * *fv;
        smm += *mv * *mv;
        sfm += *fv * *mv;
      }
    }
  }
  if (n <= 1) throw DomainError("ncc: no overlapping field of view");
  const double vf = sff - sf * sf / n;
  const double vm = smm - sm * sm / n;
  if (vf <= 0 || vm <= 0)
    throw DomainError("ncc: zero variance in the overlap");
  return -(sfm - sf * sm / n) / std::sqrt(vf * vm);
}

}  // namespace njtv
