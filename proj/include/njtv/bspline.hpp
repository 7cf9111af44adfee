#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "njtv/volume.hpp"

namespace njtv {

namespace detail {

// Single pole of the quadratic B-spline prefilter.
inline constexpr double kQuadPole = -0.17157287525380990239662255158060;
// = 2*sqrt(2) - 3

/// In-place causal/anticausal IIR prefilter of one line, mirror boundary.
inline void prefilter_line(double* c, int n, ptrdiff_t stride) {
  const double z = kQuadPole;
  const double gain = (1.0 - z) * (1.0 - 1.0 / z);
  auto at = [&](int i) -> double& { return c[stride * i]; };
  for (int i = 0; i < n; ++i) at(i) *= gain;
  // Causal initialization: sum of the mirrored signal, truncated where
  // |z|^k drops below machine precision.
  const int horizon = static_cast<int>(
      std::ceil(std::log(1e-16) / std::log(std::abs(z))));
  double sum;
  if (horizon < 2 * n - 2) {
    sum = at(0);
    double zk = z;
    for (int k = 1; k < horizon; ++k) {
      sum += zk * at(k < n ? k : 2 * (n - 1) - k);
      zk *= z;
    }
  } else {
    // Short line: exact geometric sum over the full mirror period.
    sum = 0.0;
    double zk = 1.0;
    for (int k = 0; k <= 2 * n - 3; ++k) {
      sum += zk * at(k < n ? k : 2 * (n - 1) - k);
      zk *= z;
    }
    sum /= (1.0 - std::pow(z, 2 * (n - 1)));
  }
  at(0) = sum;
  for (int i = 1; i < n; ++i) at(i) += z * at(i - 1);
  at(n - 1) = (z / (z * z - 1.0)) * (z * at(n - 2) + at(n - 1));
  for (int i = n - 2; i >= 0; --i) at(i) = z * (at(i + 1) - at(i));
}

inline int mirror_index(int i, int n) {
  // Reflect about the end samples, period 2(n-1).
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i < n ? i : period - i;
}

/// Quadratic B-spline weights at fractional offset f in [-0.5, 0.5],
/// for coefficient indices {i-1, i, i+1} where i = round(x).
inline void quad_weights(double f, double w[3]) {
  w[0] = 0.5 * (0.5 - f) * (0.5 - f);
  w[1] = 0.75 - f * f;
  w[2] = 0.5 * (0.5 + f) * (0.5 + f);
}

}  // namespace detail

/// Prefiltered degree-2 B-spline representation of a Volume. Sampling at
/// integer voxel coordinates reproduces the source values.
struct SplineField {
  std::array<int, 3> dims{0, 0, 0};
  Vec3 voxel_size{1, 1, 1};
  Affine4 world;
  std::vector<double> coeffs;
  static constexpr int degree = 2;

  size_t index(int i, int j, int k) const {
    return static_cast<size_t>(i) +
           static_cast<size_t>(dims[0]) *
               (static_cast<size_t>(j) +
                static_cast<size_t>(dims[1]) * static_cast<size_t>(k));
  }

  bool in_fov(const Vec3& p) const {
    return p[0] >= 0.0 && p[0] <= dims[0] - 1 && p[1] >= 0.0 &&
           p[1] <= dims[1] - 1 && p[2] >= 0.0 && p[2] <= dims[2] - 1;
  }

  /// Caller must guarantee in_fov(p).
  double sample_unchecked(const Vec3& p) const {
    int ic[3];
    double wx[3], wy[3], wz[3];
    double w[3][3] = {};
    for (int a = 0; a < 3; ++a) {
      const int i = static_cast<int>(std::floor(p[a] + 0.5));
      ic[a] = i;
      detail::quad_weights(p[a] - i, w[a]);
    }
    for (int t = 0; t < 3; ++t) {
      wx[t] = w[0][t];
      wy[t] = w[1][t];
      wz[t] = w[2][t];
    }
    const int nx = dims[0], ny = dims[1], nz = dims[2];
    int ix[3], iy[3], iz[3];
    for (int t = 0; t < 3; ++t) {
      ix[t] = detail::mirror_index(ic[0] - 1 + t, nx);
      iy[t] = detail::mirror_index(ic[1] - 1 + t, ny);
      iz[t] = detail::mirror_index(ic[2] - 1 + t, nz);
    }
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
      const size_t zoff = static_cast<size_t>(iz[c]) * ny;
      double sz = 0.0;
      for (int b = 0; b < 3; ++b) {
        const double* row =
            coeffs.data() + (zoff + static_cast<size_t>(iy[b])) * nx;
        sz += wy[b] * (wx[0] * row[ix[0]] + wx[1] * row[ix[1]] +
                       wx[2] * row[ix[2]]);
      }
      s += wz[c] * sz;
    }
    return s;
  }
};

/// Computes degree-2 B-spline coefficients by recursive prefiltering with
/// mirror boundary conditions.
inline SplineField spline_encode(const Volume& v) {
  for (int a = 0; a < 3; ++a)
    if (v.dims[a] < 3)
      throw DomainError("spline_encode: every dimension must be >= 3");
  SplineField s;
  s.dims = v.dims;
  s.voxel_size = v.voxel_size;
  s.world = v.world;
  s.coeffs = v.data;
  const int nx = v.dims[0], ny = v.dims[1], nz = v.dims[2];
  double* c = s.coeffs.data();
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      detail::prefilter_line(c + v.index(0, j, k), nx, 1);
  for (int k = 0; k < nz; ++k)
    for (int i = 0; i < nx; ++i)
      detail::prefilter_line(c + v.index(i, 0, k), ny, nx);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      detail::prefilter_line(c + v.index(i, j, 0), nz,
                             static_cast<ptrdiff_t>(nx) * ny);
  return s;
}

inline std::optional<double> spline_sample(const SplineField& s,
                                           const Vec3& p) {
  if (!s.in_fov(p)) return std::nullopt;
  return s.sample_unchecked(p);
}

}  // namespace njtv
