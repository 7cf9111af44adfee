#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "njtv/affine.hpp"
#include "njtv/error.hpp"

namespace njtv {

/// 3D scalar grid with a voxel-to-world affine. x is the fastest axis.
struct Volume {
  std::array<int, 3> dims{0, 0, 0};
  Vec3 voxel_size{1, 1, 1};
  Affine4 world;
  std::vector<double> data;
  // Nonempty iff the source file contained NaNs; 1 marks a replaced voxel.
  std::vector<uint8_t> missing;

  size_t size() const {
    return static_cast<size_t>(dims[0]) * static_cast<size_t>(dims[1]) *
           static_cast<size_t>(dims[2]);
  }
  size_t index(int i, int j, int k) const {
    return static_cast<size_t>(i) +
           static_cast<size_t>(dims[0]) *
               (static_cast<size_t>(j) +
                static_cast<size_t>(dims[1]) * static_cast<size_t>(k));
  }
  double at(int i, int j, int k) const { return data[index(i, j, k)]; }
  double& at(int i, int j, int k) { return data[index(i, j, k)]; }

  bool is_missing(size_t idx) const {
    return !missing.empty() && missing[idx] != 0;
  }

  double voxel_volume_mm3() const {
    return voxel_size[0] * voxel_size[1] * voxel_size[2];
  }
};

inline Volume make_volume(std::array<int, 3> dims, Vec3 voxel_size = {1, 1, 1},
                          Affine4 world = Affine4::identity(),
                          double fill = 0.0) {
  Volume v;
  v.dims = dims;
  v.voxel_size = voxel_size;
  v.world = world;
  v.data.assign(static_cast<size_t>(dims[0]) * dims[1] * dims[2], fill);
  return v;
}

inline std::optional<double> trilinear_sample(const Volume& v, const Vec3& p) {
  for (int a = 0; a < 3; ++a)
    if (!(p[a] >= 0.0 && p[a] <= static_cast<double>(v.dims[a] - 1)))
      return std::nullopt;
  int i0 = static_cast<int>(std::floor(p[0]));
  int j0 = static_cast<int>(std::floor(p[1]));
  int k0 = static_cast<int>(std::floor(p[2]));
  i0 = std::min(i0, v.dims[0] - 2 < 0 ? 0 : v.dims[0] - 2);
  j0 = std::min(j0, v.dims[1] - 2 < 0 ? 0 : v.dims[1] - 2);
  k0 = std::min(k0, v.dims[2] - 2 < 0 ? 0 : v.dims[2] - 2);
  const double fx = p[0] - i0, fy = p[1] - j0, fz = p[2] - k0;
  const int i1 = std::min(i0 + 1, v.dims[0] - 1);
  const int j1 = std::min(j0 + 1, v.dims[1] - 1);
  const int k1 = std::min(k0 + 1, v.dims[2] - 1);
  const double c000 = v.at(i0, j0, k0), c100 = v.at(i1, j0, k0);
  const double c010 = v.at(i0, j1, k0), c110 = v.at(i1, j1, k0);
  const double c001 = v.at(i0, j0, k1), c101 = v.at(i1, j0, k1);
  const double c011 = v.at(i0, j1, k1), c111 = v.at(i1, j1, k1);
  const double c00 = c000 + fx * (c100 - c000);
  const double c10 = c010 + fx * (c110 - c010);
  const double c01 = c001 + fx * (c101 - c001);
  const double c11 = c011 + fx * (c111 - c011);
  const double c0 = c00 + fy * (c10 - c00);
  const double c1 = c01 + fy * (c11 - c01);
  return c0 + fz * (c1 - c0);
}

/// Per-voxel spatial derivative, units intensity/mm.
struct VectorVolume {
  std::array<int, 3> dims{0, 0, 0};
  Vec3 voxel_size{1, 1, 1};
  Affine4 world;
  std::vector<double> gx, gy, gz;

  size_t index(int i, int j, int k) const {
    return static_cast<size_t>(i) +
           static_cast<size_t>(dims[0]) *
               (static_cast<size_t>(j) +
                static_cast<size_t>(dims[1]) * static_cast<size_t>(k));
  }
};

/// Central differences on the interior, one-sided at boundary faces,
/// divided by the voxel width of each axis.
inline VectorVolume finite_diff_gradient(const Volume& v) {
  VectorVolume g;
  g.dims = v.dims;
  g.voxel_size = v.voxel_size;
  g.world = v.world;
  const size_t n = v.size();
  g.gx.assign(n, 0.0);
  g.gy.assign(n, 0.0);
  g.gz.assign(n, 0.0);
  const int nx = v.dims[0], ny = v.dims[1], nz = v.dims[2];
  const double sx = 1.0 / v.voxel_size[0];
  const double sy = 1.0 / v.voxel_size[1];
  const double sz = 1.0 / v.voxel_size[2];
  auto diff1 = [](double lo, double hi, int span) {
    return (hi - lo) / static_cast<double>(span);
  };
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const size_t idx = v.index(i, j, k);
        if (nx > 1) {
          const int il = std::max(i - 1, 0), ih = std::min(i + 1, nx - 1);
          g.gx[idx] = diff1(v.at(il, j, k), v.at(ih, j, k), ih - il) * sx;
        }
        if (ny > 1) {
          const int jl = std::max(j - 1, 0), jh = std::min(j + 1, ny - 1);
          g.gy[idx] = diff1(v.at(i, jl, k), v.at(i, jh, k), jh - jl) * sy;
        }
        if (nz > 1) {
          const int kl = std::max(k - 1, 0), kh = std::min(k + 1, nz - 1);
          g.gz[idx] = diff1(v.at(i, j, kl), v.at(i, j, kh), kh - kl) * sz;
        }
      }
    }
  }
  return g;
}

/// lambda * ||grad f||_2 per voxel.
inline Volume gradient_magnitude(const Volume& v, double lambda) {
  if (!std::isfinite(lambda) || lambda < 0)
    throw DomainError("gradient_magnitude: lambda must be finite and >= 0");
  VectorVolume g = finite_diff_gradient(v);
  Volume out = v;
  out.missing.clear();
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = lambda * std::sqrt(g.gx[i] * g.gx[i] + g.gy[i] * g.gy[i] +
                                     g.gz[i] * g.gz[i]);
  return out;
}

/// Block-mean pooling; the world is updated so pooled voxel centers map to
/// the mean of their source-block centers. Trailing voxels that do not fill
/// a block are dropped.
inline Volume downsample(const Volume& v, std::array<int, 3> factors) {
  for (int a = 0; a < 3; ++a) {
    if (factors[a] < 1) throw DomainError("downsample: factor must be >= 1");
    if (factors[a] > v.dims[a])
      throw DomainError("downsample: factor exceeds dimension");
  }
  Volume out;
  out.dims = {v.dims[0] / factors[0], v.dims[1] / factors[1],
              v.dims[2] / factors[2]};
  out.voxel_size = {v.voxel_size[0] * factors[0], v.voxel_size[1] * factors[1],
                    v.voxel_size[2] * factors[2]};
  // New voxel index u maps to source index f*u + (f-1)/2.
  Affine4 block = Affine4::scaling({static_cast<double>(factors[0]),
                                    static_cast<double>(factors[1]),
                                    static_cast<double>(factors[2])});
  block(0, 3) = (factors[0] - 1) / 2.0;
  block(1, 3) = (factors[1] - 1) / 2.0;
  block(2, 3) = (factors[2] - 1) / 2.0;
  out.world = v.world * block;
  out.data.assign(out.size(), 0.0);
  const double inv_count = 1.0 / (factors[0] * factors[1] * factors[2]);
  for (int k = 0; k < out.dims[2]; ++k) {
    for (int j = 0; j < out.dims[1]; ++j) {
      for (int i = 0; i < out.dims[0]; ++i) {
        double s = 0;
        for (int dk = 0; dk < factors[2]; ++dk)
          for (int dj = 0; dj < factors[1]; ++dj)
            for (int di = 0; di < factors[0]; ++di)
              s += v.at(i * factors[0] + di, j * factors[1] + dj,
                        k * factors[2] + dk);
        out.at(i, j, k) = s * inv_count;
      }
    }
  }
  return out;
}

}  // namespace njtv
