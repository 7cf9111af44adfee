#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "njtv/affine.hpp"

namespace njtv {

/// 6-vector in the se(3) algebra: q[0..2] translation (mm), q[3..5]
/// rotation coefficients over the generator basis below.
using RigidParams = std::array<double, 6>;

namespace se3 {

/// Generator basis. The rotation generators carry a 1/2 factor, so the
/// basis is not orthonormal under the Frobenius inner product (rotation
/// generators have norm 1/sqrt(2)); the logarithm therefore projects onto
/// the dual basis B_i / Tr(B_i B_i^T) to make exp and log exact inverses.
inline const std::array<Affine4, 6>& basis() {
  static const std::array<Affine4, 6> b = [] {
    std::array<Affine4, 6> a{};
    for (auto& m : a) m.m.fill(0.0);
    a[0](0, 3) = 1.0;
    a[1](1, 3) = 1.0;
    a[2](2, 3) = 1.0;
    a[3](0, 1) = 0.5;
    a[3](1, 0) = -0.5;
    a[4](0, 2) = 0.5;
    a[4](2, 0) = -0.5;
    a[5](1, 2) = 0.5;
    a[5](2, 1) = -0.5;
    // Zero out the homogeneous row that Affine4 defaults to (0,0,0,1).
    for (auto& m : a) m(3, 3) = 0.0;
    return a;
  }();
  return b;
}

inline Affine4 algebra_element(const RigidParams& q) {
  Affine4 a;
  a.m.fill(0.0);
  const auto& b = basis();
  for (int i = 0; i < 6; ++i)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) a(r, c) += q[i] * b[i](r, c);
  a(3, 3) = 1.0;  // keep Affine4's homogeneous-row convention for storage
  return a;
}

inline bool is_rigid(const Affine4& m, double tol = 1e-6) {
  // Columns orthonormal and det +1.
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      double d = m(0, i) * m(0, j) + m(1, i) * m(1, j) + m(2, i) * m(2, j);
      if (std::abs(d - (i == j ? 1.0 : 0.0)) > tol) return false;
    }
  }
  return std::abs(m.det3() - 1.0) < tol;
}

}  // namespace se3

/// Closed-form matrix exponential of the algebra element of q (Rodrigues
/// rotation, V-matrix translation), with a series fallback below angle 1e-8.
inline Affine4 exp_se3(const RigidParams& q) {
  const Affine4 a = se3::algebra_element(q);
  // Rotation vector from the skew block.
  const double wx = a(2, 1), wy = a(0, 2), wz = a(1, 0);
  const double theta = std::sqrt(wx * wx + wy * wy + wz * wz);

  // S and S^2 of the skew matrix.
  double S[3][3] = {{0, -wz, wy}, {wz, 0, -wx}, {-wy, wx, 0}};
  double S2[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      S2[i][j] = S[i][0] * S[0][j] + S[i][1] * S[1][j] + S[i][2] * S[2][j];

  double cr, cr2;  // coefficients of S and S^2 in R
  double cv, cv2;  // coefficients of S and S^2 in V
  if (theta < 1e-8) {
    cr = 1.0 - theta * theta / 6.0;
    cr2 = 0.5 - theta * theta / 24.0;
    cv = 0.5 - theta * theta / 24.0;
    cv2 = 1.0 / 6.0 - theta * theta / 120.0;
  } else {
    const double s = std::sin(theta), c = std::cos(theta);
    cr = s / theta;
    cr2 = (1.0 - c) / (theta * theta);
    cv = cr2;
    cv2 = (theta - s) / (theta * theta * theta);
  }

  Affine4 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r(i, j) = (i == j ? 1.0 : 0.0) + cr * S[i][j] + cr2 * S2[i][j];
  const double t[3] = {a(0, 3), a(1, 3), a(2, 3)};
  for (int i = 0; i < 3; ++i) {
    double v = t[i];
    for (int j = 0; j < 3; ++j)
      v += (cv * S[i][j] + cv2 * S2[i][j]) * t[j];
    r(i, 3) = v;
  }
  return r;
}

/// Principal-branch logarithm of a rigid transform, projected onto the
/// dual generator basis so that exp_se3(log_se3(R)) = R.
inline RigidParams log_se3(const Affine4& m) {
  if (!se3::is_rigid(m))
    throw DomainError("log_se3: matrix is not a rigid transform");
  const double tr = m(0, 0) + m(1, 1) + m(2, 2);
  const double ct = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
  const double theta = std::acos(ct);
  if (theta > M_PI - 1e-9)
    throw DomainError("log_se3: rotation angle at the pi branch cut");

  // Skew part of log(R): k * (R - R^T) with k = theta / (2 sin theta).
  const double k = theta < 1e-8 ? 0.5 + theta * theta / 12.0
                                : theta / (2.0 * std::sin(theta));
  const double wx = k * (m(2, 1) - m(1, 2));
  const double wy = k * (m(0, 2) - m(2, 0));
  const double wz = k * (m(1, 0) - m(0, 1));

  double S[3][3] = {{0, -wz, wy}, {wz, 0, -wx}, {-wy, wx, 0}};
  double S2[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      S2[i][j] = S[i][0] * S[0][j] + S[i][1] * S[1][j] + S[i][2] * S[2][j];

  // V^-1 = I - S/2 + c * S^2.
  double c;
  if (theta < 1e-8) {
    c = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    c = (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) /
        (theta * theta);
  }
  const double t[3] = {m(0, 3), m(1, 3), m(2, 3)};
  double u[3];
  for (int i = 0; i < 3; ++i) {
    u[i] = t[i];
    for (int j = 0; j < 3; ++j) u[i] += (-0.5 * S[i][j] + c * S2[i][j]) * t[j];
  }

  // Dual-basis projection: q_i = Tr(B_i L^T) / Tr(B_i B_i^T). For the
  // printed basis this is u for translations and 2 * Tr(B_i L^T) for
  // rotations, which reduces to the skew entries below.
  return {u[0], u[1], u[2], -2.0 * wz, 2.0 * wy, -2.0 * wx};
}

/// Translation (mm) and extrinsic x-y-z Euler angles (degrees) of a rigid
/// transform, i.e. R = Rz(rz) Ry(ry) Rx(rx). Gimbal lock resolves rx = 0.
inline std::array<double, 6> euler_from_rigid(const Affine4& m) {
  if (!se3::is_rigid(m))
    throw DomainError("euler_from_rigid: matrix is not a rigid transform");
  const double deg = 180.0 / M_PI;
  double rx, ry, rz;
  const double sy = -m(2, 0);
  if (std::abs(sy) > 1.0 - 1e-12) {
    ry = std::copysign(M_PI / 2.0, sy);
    rx = 0.0;
    rz = std::atan2(-m(0, 1), m(1, 1));
  } else {
    ry = std::asin(sy);
    rx = std::atan2(m(2, 1), m(2, 2));
    rz = std::atan2(m(1, 0), m(0, 0));
  }
  return {m(0, 3), m(1, 3), m(2, 3), rx * deg, ry * deg, rz * deg};
}

/// Rigid matrix from translation (mm) and extrinsic x-y-z Euler angles
/// (degrees): R = Rz Ry Rx, the inverse convention of euler_from_rigid.
inline Affine4 rigid_from_euler(const std::array<double, 6>& tr) {
  const double rad = M_PI / 180.0;
  const double cx = std::cos(tr[3] * rad), sx = std::sin(tr[3] * rad);
  const double cy = std::cos(tr[4] * rad), sy = std::sin(tr[4] * rad);
  const double cz = std::cos(tr[5] * rad), sz = std::sin(tr[5] * rad);
  Affine4 m;
  m(0, 0) = cz * cy;
  m(0, 1) = cz * sy * sx - sz * cx;
  m(0, 2) = cz * sy * cx + sz * sx;
  m(1, 0) = sz * cy;
  m(1, 1) = sz * sy * sx + cz * cx;
  m(1, 2) = sz * sy * cx - cz * sx;
  m(2, 0) = -sy;
  m(2, 1) = cy * sx;
  m(2, 2) = cy * cx;
  m(0, 3) = tr[0];
  m(1, 3) = tr[1];
  m(2, 3) = tr[2];
  return m;
}

}  // namespace njtv
