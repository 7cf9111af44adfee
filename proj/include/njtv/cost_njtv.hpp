#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "njtv/bspline.hpp"
#include "njtv/mixtures.hpp"
#include "njtv/parallel.hpp"
#include "njtv/se3.hpp"
#include "njtv/volume.hpp"

namespace njtv {

/// Spline-encoded lambda*||grad f|| field of one modality.
struct ChannelField {
  SplineField mag;
  ChannelScale lambda;
};

/// Rigid parameters for channels 2..C; channel 1 is the fixed image.
struct GroupAlignment {
  std::vector<RigidParams> params;
};

/// Sub-voxel sampling offsets on the fixed grid: one uniform [0,1)^3 draw
/// per voxel, fixed for the whole registration run. amplitude 0 disables
/// jitter. Offsets are a pure function of (seed, voxel index).
struct JitteredGrid {
  uint64_t seed = 0;
  double amplitude = 1.0;

  Vec3 offset(size_t voxel_index) const {
    if (amplitude == 0.0) return {0, 0, 0};
    const uint64_t base = detail::splitmix64(seed ^ (voxel_index * 3ULL));
    return {amplitude * detail::to_unit_double(detail::splitmix64(base)),
            amplitude * detail::to_unit_double(detail::splitmix64(base + 1)),
            amplitude * detail::to_unit_double(detail::splitmix64(base + 2))};
  }

  static JitteredGrid disabled() { return JitteredGrid{0, 0.0}; }
};

/// Gradient magnitude -> spline encoding, once per channel; the fields are
/// reused at every cost evaluation.
inline std::vector<ChannelField> prepare_channels(
    const std::vector<Volume>& volumes,
    const std::vector<ChannelScale>& lambdas) {
  if (volumes.size() < 2)
    throw DomainError("prepare_channels: need at least 2 volumes");
  if (volumes.size() != lambdas.size())
    throw DomainError("prepare_channels: one lambda per volume required");
  std::vector<ChannelField> out;
  out.reserve(volumes.size());
  for (size_t c = 0; c < volumes.size(); ++c) {
    ChannelField f;
    f.mag = spline_encode(gradient_magnitude(volumes[c], lambdas[c].lambda));
    f.lambda = lambdas[c];
    out.push_back(std::move(f));
  }
  return out;
}

/// Pulls a fixed voxel coordinate back into moving voxel coordinates:
/// Mc^-1 exp(q)^-1 M1 [y;1].
inline Vec3 fixed_to_moving(const Vec3& y, const RigidParams& q,
                            const Affine4& m1, const Affine4& mc) {
  const Affine4 t = mc.inverse() * exp_se3(q).inverse() * m1;
  return t.apply(y);
}

struct CostTerms {
  double jtv = 0;
  double ctv = 0;
  long voxels = 0;
};

namespace detail {

/// One pass over the fixed grid accumulating the JTV and CTV integrals.
/// Moving samples outside their FOV contribute zero magnitude; spline
/// undershoot is clamped at zero; jittered points off the fixed grid are
/// skipped. Sums are scaled by the fixed voxel volume.
inline CostTerms accumulate_tv_terms(const std::vector<ChannelField>& ch,
                                     const GroupAlignment& a,
                                     const JitteredGrid& grid) {
  const size_t c_total = ch.size();
  if (c_total < 2) throw DomainError("njtv_cost: need at least 2 channels");
  if (a.params.size() != c_total - 1)
    throw DomainError("njtv_cost: need C-1 rigid parameter sets");

  const SplineField& fixed = ch[0].mag;
  const Affine4& m1 = fixed.world;
  std::vector<Affine4> pullback(c_total - 1);
  for (size_t c = 1; c < c_total; ++c)
    pullback[c - 1] =
        ch[c].mag.world.inverse() * exp_se3(a.params[c - 1]).inverse() * m1;

  const int nx = fixed.dims[0], ny = fixed.dims[1], nz = fixed.dims[2];
  std::vector<CostTerms> slabs(static_cast<size_t>(nz));
  chunked_reduce(nz, [&](int k) {
    CostTerms t;
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const size_t idx = fixed.index(i, j, k);
        const Vec3 off = grid.offset(idx);
        const Vec3 y = {i + off[0], j + off[1], k + off[2]};
        if (!fixed.in_fov(y)) continue;
        double m = fixed.sample_unchecked(y);
        if (m < 0) m = 0;
        double sum = m, sum2 = m * m;
        for (size_t c = 1; c < c_total; ++c) {
          const Vec3 p = pullback[c - 1].apply(y);
          if (!ch[c].mag.in_fov(p)) continue;
          double mc = ch[c].mag.sample_unchecked(p);
          if (mc < 0) mc = 0;
          sum += mc;
          sum2 += mc * mc;
        }
        t.jtv += std::sqrt(sum2);
        t.ctv += sum;
        ++t.voxels;
      }
    }
    slabs[static_cast<size_t>(k)] = t;
    return 0.0;
  });
  CostTerms total;
  for (const auto& t : slabs) {
    total.jtv += t.jtv;
    total.ctv += t.ctv;
    total.voxels += t.voxels;
  }
  const double vol = fixed.voxel_size[0] * fixed.voxel_size[1] *
                     fixed.voxel_size[2];
  total.jtv *= vol;
  total.ctv *= vol;
  return total;
}

}  // namespace detail

inline double jtv_cost(const std::vector<ChannelField>& ch,
                       const GroupAlignment& a, const JitteredGrid& grid) {
  return detail::accumulate_tv_terms(ch, a, grid).jtv;
}

inline double ctv_cost(const std::vector<ChannelField>& ch,
                       const GroupAlignment& a, const JitteredGrid& grid) {
  return detail::accumulate_tv_terms(ch, a, grid).ctv;
}

/// NJTV = sqrt(C) * JTV - CTV. Zero when all channel magnitudes agree
/// pointwise; nonnegative pointwise by Cauchy-Schwarz.
inline double njtv_cost(const std::vector<ChannelField>& ch,
                        const GroupAlignment& a, const JitteredGrid& grid) {
  const CostTerms t = detail::accumulate_tv_terms(ch, a, grid);
  return std::sqrt(static_cast<double>(ch.size())) * t.jtv - t.ctv;
}

/// Pointwise NJTV integrand for one voxel's magnitude tuple.
inline double njtv_integrand(const std::vector<double>& mags) {
  double sum = 0, sum2 = 0;
  for (double m : mags) {
    sum += m;
    sum2 += m * m;
  }
  return std::sqrt(static_cast<double>(mags.size())) * std::sqrt(sum2) - sum;
}

/// 1D sweep of the NJTV integrand with C-1 magnitudes held fixed; rows of
/// (swept magnitude, integrand value). With modulated=false the sqrt(C)
/// factor is dropped; the raw quantity JTV - CTV is then nonpositive by the
/// triangle inequality, so the sweep reports its magnitude CTV - JTV. That
/// unmodulated integrand is minimized by annihilating the swept gradient
/// (argmin 0) instead of matching it -- the degenerate behaviour the
/// modulation exists to fix.
inline std::vector<std::pair<double, double>> integrand_sweep(
    int c_total, const std::vector<double>& fixed_mags, double m_lo,
    double m_hi, double step, bool modulated = true) {
  if (c_total < 2) throw DomainError("integrand_sweep: C must be >= 2");
  if (fixed_mags.size() != static_cast<size_t>(c_total - 1))
    throw DomainError("integrand_sweep: need C-1 fixed magnitudes");
  double sum = 0, sum2 = 0;
  for (double m : fixed_mags) {
    sum += m;
    sum2 += m * m;
  }
  const double mod = modulated ? std::sqrt(static_cast<double>(c_total)) : 1.0;
  const double sign = modulated ? 1.0 : -1.0;
  std::vector<std::pair<double, double>> rows;
  const int n = static_cast<int>(std::floor((m_hi - m_lo) / step + 0.5)) + 1;
  rows.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double m = m_lo + i * step;
    rows.emplace_back(m, sign * (mod * std::sqrt(sum2 + m * m) - (sum + m)));
  }
  return rows;
}

}  // namespace njtv
