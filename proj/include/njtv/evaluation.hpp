#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "njtv/se3.hpp"
#include "njtv/volume.hpp"

namespace njtv {

struct ParamError {
  Vec3 translation_mm{0, 0, 0};  // absolute components
  Vec3 rotation_deg{0, 0, 0};
};

/// Error on the composed transform exp(q_est) * exp(q_true)^-1: absolute
/// translation components and absolute extrinsic x-y-z Euler angles (se(3)
/// coordinates are not additive, so raw parameter differences would not be
/// meaningful).
inline ParamError param_error(const RigidParams& q_est,
                              const RigidParams& q_true) {
  const Affine4 delta = exp_se3(q_est) * exp_se3(q_true).inverse();
  const auto e = euler_from_rigid(delta);
  ParamError out;
  for (int i = 0; i < 3; ++i) {
    out.translation_mm[static_cast<size_t>(i)] =
        std::abs(e[static_cast<size_t>(i)]);
    out.rotation_deg[static_cast<size_t>(i)] =
        std::abs(e[static_cast<size_t>(i + 3)]);
  }
  return out;
}

struct GeometricStats {
  double gmean = 0, gsd = 1;
};

/// exp(mean(log v)), exp(std(log v)); zeros floored at 1e-6.
inline GeometricStats geometric_stats(const std::vector<double>& values) {
  if (values.empty()) throw DomainError("geometric_stats: empty input");
  double s = 0;
  for (double v : values) {
    if (v < 0) throw DomainError("geometric_stats: negative value");
    s += std::log(std::max(v, 1e-6));
  }
  const double mean = s / values.size();
  double s2 = 0;
  for (double v : values) {
    const double d = std::log(std::max(v, 1e-6)) - mean;
    s2 += d * d;
  }
  GeometricStats out;
  out.gmean = std::exp(mean);
  out.gsd = std::exp(std::sqrt(s2 / values.size()));
  return out;
}

/// One row of the error table: one (trial, channel, axis) observation.
struct ErrorRow {
  std::string method;
  int trial = 0;
  int channel = 0;
  int axis = 0;
  double trans_err_mm = 0;
  double rot_err_deg = 0;
  double inu = 0;
  double noise = 0;
  double downsampling = 1;
  double offset = 0;  // fraction of the maximum simulated shift
};

struct LogLinearFit {
  double intercept = 0;
  double beta_inu = 0, beta_noise = 0, beta_ds = 0, beta_offset = 0;
  double residual_variance = 0;
  size_t n = 0;
};

namespace detail {

/// Solves the 5x5 normal equations by Gaussian elimination with partial
/// pivoting; near-zero pivots signal a rank-deficient design.
inline std::array<double, 5> solve5(std::array<std::array<double, 5>, 5> a,
                                    std::array<double, 5> b) {
  for (int col = 0; col < 5; ++col) {
    int piv = col;
    for (int r = col + 1; r < 5; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < 1e-10)
      throw DomainError("loglinear_fit: rank-deficient design matrix");
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (int r = 0; r < 5; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 5; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::array<double, 5> x{};
  for (int i = 0; i < 5; ++i) x[i] = b[i] / a[i][i];
  return x;
}

}  // namespace detail

/// OLS of log(|translation error|) on 1 + INU + noise + downsampling +
/// offset; errors along each axis are independent rows. Zeros floored at
/// 1e-6 before the log.
inline LogLinearFit loglinear_fit(const std::vector<ErrorRow>& rows) {
  if (rows.size() < 10)
    throw DomainError("loglinear_fit: need at least 10 rows");
  std::array<std::array<double, 5>, 5> xtx{};
  std::array<double, 5> xty{};
  for (const auto& r : rows) {
    const double y = std::log(std::max(r.trans_err_mm, 1e-6));
    const std::array<double, 5> x{1.0, r.inu, r.noise, r.downsampling,
                                  r.offset};
    for (int i = 0; i < 5; ++i) {
      xty[i] += x[i] * y;
      for (int j = 0; j < 5; ++j) xtx[i][j] += x[i] * x[j];
    }
  }
  // Zero-variance regressors make X'X rank deficient; detect explicitly so
  // the error is attributed to the regressor, not the solver.
  for (int i = 1; i < 5; ++i) {
    const double mean = xtx[0][i] / rows.size();
    if (xtx[i][i] / rows.size() - mean * mean < 1e-12)
      throw DomainError("loglinear_fit: zero-variance regressor");
  }
  const auto beta = detail::solve5(xtx, xty);
  LogLinearFit fit;
  fit.intercept = beta[0];
  fit.beta_inu = beta[1];
  fit.beta_noise = beta[2];
  fit.beta_ds = beta[3];
  fit.beta_offset = beta[4];
  fit.n = rows.size();
  double rss = 0;
  for (const auto& r : rows) {
    const double y = std::log(std::max(r.trans_err_mm, 1e-6));
    const double yhat = beta[0] + beta[1] * r.inu + beta[2] * r.noise +
                        beta[3] * r.downsampling + beta[4] * r.offset;
    rss += (y - yhat) * (y - yhat);
  }
  fit.residual_variance = rss / rows.size();
  return fit;
}

struct CornerError {
  double median_mm = 0, max_mm = 0;
};

/// Displacement of the 8 corner voxels of v mapped through world and each
/// transform (the RIRE-style metric).
inline CornerError corner_error(const Affine4& r_est, const Affine4& r_true,
                                const Volume& v) {
  if (!se3::is_rigid(r_est) || !se3::is_rigid(r_true))
    throw DomainError("corner_error: inputs must be rigid");
  std::vector<double> d;
  d.reserve(8);
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 p = {(corner & 1) ? static_cast<double>(v.dims[0] - 1) : 0.0,
                    (corner & 2) ? static_cast<double>(v.dims[1] - 1) : 0.0,
                    (corner & 4) ? static_cast<double>(v.dims[2] - 1) : 0.0};
    const Vec3 w = v.world.apply(p);
    const Vec3 a = r_est.apply(w);
    const Vec3 b = r_true.apply(w);
    d.push_back(norm(a - b));
  }
  std::sort(d.begin(), d.end());
  CornerError out;
  out.median_mm = 0.5 * (d[3] + d[4]);
  out.max_mm = d[7];
  return out;
}

}  // namespace njtv
