#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "njtv/error.hpp"

namespace njtv {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Vec3 operator-(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Vec3 operator*(double s, const Vec3& a) {
  return {s * a[0], s * a[1], s * a[2]};
}
inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// Row-major 4x4 homogeneous matrix with last row (0,0,0,1).
struct Affine4 {
  std::array<double, 16> m{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};

  double& operator()(int r, int c) { return m[static_cast<size_t>(4 * r + c)]; }
  double operator()(int r, int c) const {
    return m[static_cast<size_t>(4 * r + c)];
  }

  static Affine4 identity() { return Affine4{}; }

  static Affine4 translation(const Vec3& t) {
    Affine4 a;
    a(0, 3) = t[0];
    a(1, 3) = t[1];
    a(2, 3) = t[2];
    return a;
  }

  static Affine4 scaling(const Vec3& s) {
    Affine4 a;
    a(0, 0) = s[0];
    a(1, 1) = s[1];
    a(2, 2) = s[2];
    return a;
  }

  Vec3 apply(const Vec3& p) const {
    return {m[0] * p[0] + m[1] * p[1] + m[2] * p[2] + m[3],
            m[4] * p[0] + m[5] * p[1] + m[6] * p[2] + m[7],
            m[8] * p[0] + m[9] * p[1] + m[10] * p[2] + m[11]};
  }

  /// Rotate/scale only, without translation.
  Vec3 apply_linear(const Vec3& p) const {
    return {m[0] * p[0] + m[1] * p[1] + m[2] * p[2],
            m[4] * p[0] + m[5] * p[1] + m[6] * p[2],
            m[8] * p[0] + m[9] * p[1] + m[10] * p[2]};
  }

  Vec3 translation_part() const { return {m[3], m[7], m[11]}; }

  /// Euclidean norm of column c of the 3x3 block (voxel size along axis c).
  double column_norm(int c) const {
    return std::sqrt((*this)(0, c) * (*this)(0, c) +
                     (*this)(1, c) * (*this)(1, c) +
                     (*this)(2, c) * (*this)(2, c));
  }

  double det3() const {
    return m[0] * (m[5] * m[10] - m[6] * m[9]) -
           m[1] * (m[4] * m[10] - m[6] * m[8]) +
           m[2] * (m[4] * m[9] - m[5] * m[8]);
  }

  Affine4 inverse() const {
    const double d = det3();
    if (d == 0.0 || !std::isfinite(d))
      throw DomainError("Affine4::inverse: singular matrix");
    Affine4 r;
    const double inv = 1.0 / d;
    // Inverse of the 3x3 block by adjugate.
    r.m[0] = (m[5] * m[10] - m[6] * m[9]) * inv;
    r.m[1] = (m[2] * m[9] - m[1] * m[10]) * inv;
    r.m[2] = (m[1] * m[6] - m[2] * m[5]) * inv;
    r.m[4] = (m[6] * m[8] - m[4] * m[10]) * inv;
    r.m[5] = (m[0] * m[10] - m[2] * m[8]) * inv;
    r.m[6] = (m[2] * m[4] - m[0] * m[6]) * inv;
    r.m[8] = (m[4] * m[9] - m[5] * m[8]) * inv;
    r.m[9] = (m[1] * m[8] - m[0] * m[9]) * inv;
    r.m[10] = (m[0] * m[5] - m[1] * m[4]) * inv;
    // -A^-1 t
    r.m[3] = -(r.m[0] * m[3] + r.m[1] * m[7] + r.m[2] * m[11]);
    r.m[7] = -(r.m[4] * m[3] + r.m[5] * m[7] + r.m[6] * m[11]);
    r.m[11] = -(r.m[8] * m[3] + r.m[9] * m[7] + r.m[10] * m[11]);
    return r;
  }
};

inline Affine4 operator*(const Affine4& a, const Affine4& b) {
  Affine4 r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      double s = 0;
      for (int k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
      r(i, j) = s;
    }
  }
  return r;
}

inline double max_abs_diff(const Affine4& a, const Affine4& b) {
  double d = 0;
  for (size_t i = 0; i < 16; ++i) d = std::max(d, std::abs(a.m[i] - b.m[i]));
  return d;
}

}  // namespace njtv
