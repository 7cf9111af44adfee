#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "njtv/parallel.hpp"
#include "njtv/registration.hpp"
#include "njtv/se3.hpp"
#include "njtv/volume.hpp"

namespace njtv {

namespace detail {

/// Deterministic uniform/gaussian draws on top of mt19937_64, avoiding the
/// implementation-defined std distributions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * to_unit_double(gen_());
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = to_unit_double(gen_());
    } while (u1 <= 0.0);
    u2 = to_unit_double(gen_());
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  int uniform_int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(uniform(0.0, hi - lo + 1.0 - 1e-12));
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0;
};

/// Separable Gaussian blur with the FWHM given in mm, mirror boundary.
inline void gaussian_smooth_inplace(Volume& v, double fwhm_mm) {
  if (fwhm_mm <= 0) return;
  for (int axis = 0; axis < 3; ++axis) {
    const double sigma = fwhm_mm / 2.3548200450309493 / v.voxel_size[axis];
    if (sigma < 1e-3) continue;
    const int r = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
    std::vector<double> kernel(static_cast<size_t>(2 * r + 1));
    double ksum = 0;
    for (int t = -r; t <= r; ++t) {
      kernel[static_cast<size_t>(t + r)] =
          std::exp(-0.5 * t * t / (sigma * sigma));
      ksum += kernel[static_cast<size_t>(t + r)];
    }
    for (auto& k : kernel) k /= ksum;

    const int n = v.dims[axis];
    std::vector<double> line(static_cast<size_t>(n));
    const int d0 = axis == 0 ? 1 : 0;
    const int d1 = axis == 2 ? 1 : 2;
    const int n0 = v.dims[d0], n1 = v.dims[d1];
    for (int b = 0; b < n1; ++b) {
      for (int a = 0; a < n0; ++a) {
        auto idx_of = [&](int t) {
          int c[3];
          c[axis] = t;
          c[d0] = a;
          c[d1] = b;
          return v.index(c[0], c[1], c[2]);
        };
        for (int t = 0; t < n; ++t) line[static_cast<size_t>(t)] =
            v.data[idx_of(t)];
        for (int t = 0; t < n; ++t) {
          double s = 0;
          for (int u = -r; u <= r; ++u) {
            int tt = t + u;
            if (tt < 0) tt = -tt;
            if (tt > n - 1) tt = 2 * (n - 1) - tt;
            tt = std::clamp(tt, 0, n - 1);
            s += kernel[static_cast<size_t>(u + r)] *
                 line[static_cast<size_t>(tt)];
          }
          v.data[idx_of(t)] = s;
        }
      }
    }
  }
}

}  // namespace detail

struct DegradationSpec {
  double inu_magnitude = 0.4;    // max |field - 1|, in [0, 1]
  double inu_fwhm_mm = 50.0;
  int max_downsample_factor = 2;  // 1..6, axis drawn at random
  double max_noise_percent = 10;  // of the max intensity, [0, 50]
  double crop_mm = 20.0;
  double max_offset_mm = 20.0;    // translation range +-
  double max_offset_deg = 10.0;   // rotation range +-
  uint64_t seed = 0;
};

/// Geometry shared across channels; intensities per channel from a contrast
/// table over {background, shell, compartment A, compartment B}.
inline std::vector<Volume> make_phantom(std::array<int, 3> dims, int channels,
                                        uint64_t seed) {
  if (channels < 2) throw DomainError("make_phantom: need >= 2 channels");
  for (int a = 0; a < 3; ++a)
    if (dims[a] < 32) throw DomainError("make_phantom: dims must be >= 32");

  // T1w/T2w/PDw-like contrast reversals, cycled for more channels.
  static const double contrast[3][4] = {
      {0.0, 30.0, 100.0, 60.0},
      {0.0, 90.0, 40.0, 80.0},
      {0.0, 60.0, 70.0, 90.0},
  };

  const Affine4 world = Affine4::translation({-(dims[0] - 1) / 2.0,
                                              -(dims[1] - 1) / 2.0,
                                              -(dims[2] - 1) / 2.0});

  // Region label per voxel from nested ellipsoids in normalized coords.
  const double ex = (dims[0] - 1) / 2.0, ey = (dims[1] - 1) / 2.0,
               ez = (dims[2] - 1) / 2.0;
  std::vector<uint8_t> label(
      static_cast<size_t>(dims[0]) * dims[1] * dims[2], 0);
  size_t idx = 0;
  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i, ++idx) {
        const double x = (i - ex) / ex, y = (j - ey) / ey, z = (k - ez) / ez;
        // Egg-shaped outer envelope: distinct semi-axes plus axis-dependent
        // tapering, so even the coarsest pyramid level sees a shape with no
        // rotational or 180°-flip symmetry. Interior blobs below reinforce
        // the asymmetry at finer scales.
        const double yt = y / (1.0 + 0.22 * x);
        const double zt = z / (1.0 - 0.15 * y);
        const double r_outer =
            x * x / 0.85 + yt * yt / 0.68 + zt * zt / 0.52;
        if (r_outer > 1.0) continue;  // background
        label[idx] = 1;               // shell / generic interior
        const double ax = x - 0.32, ay = y + 0.16, az = z - 0.10;
        const double sx = x - 0.00, sy = y + 0.30, sz = z + 0.30;
        const double bx = x + 0.24, by = y - 0.22, bz = z + 0.16;
        if (ax * ax / 0.16 + ay * ay / 0.10 + az * az / 0.07 < 1.0)
          label[idx] = 2;
        else if (sx * sx / 0.05 + sy * sy / 0.05 + sz * sz / 0.20 < 1.0)
          label[idx] = 2;  // elongated stem, shares compartment-A contrast
        else if (bx * bx / 0.07 + by * by / 0.14 + bz * bz / 0.10 < 1.0)
          label[idx] = 3;
      }
    }
  }

  // Shared multi-scale texture over the anatomy, scaled per channel
  // (contrast reversals included), so structural detail is co-located
  // across modalities. Real anatomy has gradient structure at every
  // scale; without it the aligned optimum is too shallow for reliable
  // capture. The coarse component survives heavy pyramid downsampling,
  // the fine component anchors the full-resolution optimum.
  auto noise_field = [&](uint64_t lane, double fwhm) {
    Volume f = make_volume(dims, {1, 1, 1}, world);
    detail::Rng rng(derive_seed(seed, lane));
    for (auto& t : f.data) t = rng.gaussian();
    detail::gaussian_smooth_inplace(f, fwhm);
    double fmax = 0;
    for (double t : f.data) fmax = std::max(fmax, std::abs(t));
    const double norm = 1.0 / std::max(fmax, 1e-12);
    for (auto& t : f.data) t *= norm;
    return f;
  };
  const Volume tex_coarse = noise_field(50, 14.0);
  const Volume tex_fine = noise_field(51, 4.0);
  static const double texture_gain[3] = {1.0, -1.0, 0.75};

  std::vector<Volume> out;
  out.reserve(static_cast<size_t>(channels));
  for (int c = 0; c < channels; ++c) {
    Volume v = make_volume(dims, {1, 1, 1}, world);
    const double* table = contrast[c % 3];
    for (size_t t = 0; t < label.size(); ++t) v.data[t] = table[label[t]];
    // Soften region boundaries so gradients are well sampled.
    detail::gaussian_smooth_inplace(v, 3.0);
    const double gain = texture_gain[c % 3];
    for (size_t t = 0; t < v.data.size(); ++t)
      v.data[t] += gain * tex.data[t] * (label[t] != 0 ? 1.0 : 0.0);
    out.push_back(std::move(v));
  }
  return out;
}

/// Multiplicative bias field exp(g), g smoothed white noise rescaled so
/// max |field - 1| equals `magnitude` exactly.
inline Volume simulate_inu(const Volume& v, double magnitude, double fwhm_mm,
                           uint64_t seed) {
  if (magnitude < 0 || magnitude > 1)
    throw DomainError("simulate_inu: magnitude must be in [0, 1]");
  if (magnitude == 0) return v;
  Volume g = make_volume(v.dims, v.voxel_size, v.world);
  detail::Rng rng(seed);
  for (auto& x : g.data) x = rng.gaussian();
  detail::gaussian_smooth_inplace(g, fwhm_mm);
  double gmax = 0, gmin = 0;
  for (double x : g.data) {
    gmax = std::max(gmax, x);
    gmin = std::min(gmin, x);
  }
  // Scale a so max(exp(a g) - 1, 1 - exp(a g)) = magnitude; the binding
  // side is the positive extreme when gmax >= -gmin.
  double a;
  if (gmax >= -gmin && gmax > 0) {
    a = std::log1p(magnitude) / gmax;
  } else if (gmin < 0) {
    a = std::log1p(-magnitude) / gmin;
  } else {
    return v;  // flat field
  }
  Volume out = v;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] *= std::exp(a * g.data[i]);
  return out;
}

/// Mean-pools along one axis only.
inline Volume simulate_thick_slices(const Volume& v, int factor, int axis) {
  if (factor < 1 || factor > 6)
    throw DomainError("simulate_thick_slices: factor must be in 1..6");
  if (axis < 0 || axis > 2)
    throw DomainError("simulate_thick_slices: axis must be 0..2");
  if (factor == 1) return v;
  std::array<int, 3> f{1, 1, 1};
  f[static_cast<size_t>(axis)] = factor;
  return downsample(v, f);
}

/// output = sqrt((x + n1)^2 + n2^2), n1, n2 ~ N(0, sigma^2) with
/// sigma = percent/100 * max(x).
inline Volume add_rician_noise(const Volume& v, double percent,
                               uint64_t seed) {
  if (percent < 0 || percent > 50)
    throw DomainError("add_rician_noise: percent must be in [0, 50]");
  Volume out = v;
  if (percent == 0) {
    for (auto& x : out.data) x = std::abs(x);
    return out;
  }
  double vmax = -std::numeric_limits<double>::infinity();
  for (double x : v.data) vmax = std::max(vmax, x);
  const double sigma = percent / 100.0 * vmax;
  detail::Rng rng(seed);
  for (auto& x : out.data) {
    const double n1 = sigma * rng.gaussian();
    const double n2 = sigma * rng.gaussian();
    x = std::sqrt((x + n1) * (x + n1) + n2 * n2);
  }
  return out;
}

/// Removes ceil(mm / voxel_size) voxels from both ends of one axis; the
/// retained voxels keep their world coordinates exactly.
inline Volume crop_fov(const Volume& v, int axis, double mm = 20.0) {
  if (axis < 0 || axis > 2) throw DomainError("crop_fov: axis must be 0..2");
  const int ncut = static_cast<int>(
      std::ceil(mm / v.voxel_size[static_cast<size_t>(axis)]));
  if (2 * ncut >= v.dims[static_cast<size_t>(axis)])
    throw DomainError("crop_fov: nothing left after cropping");
  Volume out;
  out.dims = v.dims;
  out.dims[static_cast<size_t>(axis)] -= 2 * ncut;
  out.voxel_size = v.voxel_size;
  Vec3 shift{0, 0, 0};
  shift[static_cast<size_t>(axis)] = static_cast<double>(ncut);
  out.world = v.world * Affine4::translation(shift);
  out.data.assign(out.size(), 0.0);
  int lo[3] = {0, 0, 0};
  lo[axis] = ncut;
  for (int k = 0; k < out.dims[2]; ++k)
    for (int j = 0; j < out.dims[1]; ++j)
      for (int i = 0; i < out.dims[0]; ++i)
        out.at(i, j, k) = v.at(i + lo[0], j + lo[1], k + lo[2]);
  if (!v.missing.empty()) {
    out.missing.assign(out.size(), 0);
    for (int k = 0; k < out.dims[2]; ++k)
      for (int j = 0; j < out.dims[1]; ++j)
        for (int i = 0; i < out.dims[0]; ++i)
          out.missing[out.index(i, j, k)] =
              v.missing[v.index(i + lo[0], j + lo[1], k + lo[2])];
  }
  return out;
}

struct RepositionResult {
  Volume volume;
  Affine4 applied;    // world <- applied * world
  RigidParams q_true; // log of the transform in the estimation gauge
  std::array<double, 6> sampled;  // tx,ty,tz (mm), rx,ry,rz (deg)
};

/// Repositions by header edit only (no resampling): world <- T * world with
/// T from uniformly sampled translations and Euler angles. The returned
/// ground truth is log(T^-1), the parameter vector a registration against
/// the unmoved original should recover.
inline RepositionResult apply_random_rigid(const Volume& v,
                                           double max_offset_mm,
                                           double max_offset_deg,
                                           uint64_t seed) {
  detail::Rng rng(seed);
  std::array<double, 6> s{};
  for (int i = 0; i < 3; ++i) s[static_cast<size_t>(i)] =
      rng.uniform(-max_offset_mm, max_offset_mm);
  for (int i = 3; i < 6; ++i) s[static_cast<size_t>(i)] =
      rng.uniform(-max_offset_deg, max_offset_deg);
  RepositionResult out;
  out.sampled = s;
  out.applied = rigid_from_euler(s);
  out.volume = v;
  out.volume.world = out.applied * v.world;
  out.q_true = log_se3(out.applied.inverse());
  return out;
}

struct ChannelDegradation {
  double inu_magnitude = 0;
  int downsample_factor = 1;
  int downsample_axis = 0;
  double noise_percent = 0;
  int crop_axis = 0;
  std::array<double, 6> offset{};  // tx,ty,tz mm, rx,ry,rz deg
  Affine4 reposition;              // the applied T
};

struct CostEstimate {
  std::string method;
  std::vector<RigidParams> q;  // per channel, fixed = 0
  bool ok = true;
  std::string error;
};

struct TrialRecord {
  int trial = 0;
  uint64_t seed = 0;
  std::vector<ChannelDegradation> degradations;   // per channel
  std::vector<RigidParams> q_true;                // per channel, gauge-fixed
  std::vector<CostEstimate> estimates;            // per requested cost
};

struct SimulationConfig {
  std::array<int, 3> dims{96, 96, 96};
  int channels = 3;
  DegradationSpec degradation;
  std::vector<CostKind> costs{CostKind::njtv, CostKind::mi};
  // A denser pyramid than the two-level library default: intermediate levels
  // warm-start full resolution so that it needs ~1 Powell cycle instead of
  // ~20, an order-of-magnitude speedup per trial at identical accuracy.
  RegistrationOptions reg_options = [] {
    RegistrationOptions o;
    o.pyramid = {8, 4, 2, 1};
    return o;
  }();
  // INU magnitude is drawn from {0, inu_magnitude} per trial (shared by all
  // channels of the trial) so INU-on/INU-off cohorts can be compared.
  bool binary_inu = true;
};

/// One full trial: phantom -> per-channel INU, thick slices, noise, crop,
/// rigid reposition -> registration with each requested cost.
inline TrialRecord run_trial(const SimulationConfig& cfg, int trial,
                             uint64_t master_seed) {
  const uint64_t tseed = derive_seed(master_seed,
                                     static_cast<uint64_t>(trial) + 1);
  TrialRecord rec;
  rec.trial = trial;
  rec.seed = tseed;

  std::vector<Volume> clean =
      make_phantom(cfg.dims, cfg.channels, derive_seed(tseed, 0));

  const DegradationSpec& d = cfg.degradation;
  detail::Rng trial_rng(derive_seed(tseed, 1));
  const double trial_inu =
      cfg.binary_inu ? (trial_rng.uniform() < 0.5 ? 0.0 : d.inu_magnitude)
                     : trial_rng.uniform(0.0, d.inu_magnitude);

  std::vector<Volume> degraded;
  std::vector<Affine4> repositions;
  for (int c = 0; c < cfg.channels; ++c) {
    const uint64_t cseed = derive_seed(tseed, 10 + static_cast<uint64_t>(c));
    detail::Rng rng(derive_seed(cseed, 0));
    ChannelDegradation cd;
    cd.inu_magnitude = trial_inu;
    cd.downsample_factor = rng.uniform_int(1, d.max_downsample_factor);
    cd.downsample_axis = rng.uniform_int(0, 2);
    cd.noise_percent = rng.uniform(0.0, d.max_noise_percent);
    cd.crop_axis = rng.uniform_int(0, 2);

    Volume v = simulate_inu(clean[static_cast<size_t>(c)], cd.inu_magnitude,
                            d.inu_fwhm_mm, derive_seed(cseed, 1));
    v = simulate_thick_slices(v, cd.downsample_factor, cd.downsample_axis);
    v = add_rician_noise(v, cd.noise_percent, derive_seed(cseed, 2));
    v = crop_fov(v, cd.crop_axis, d.crop_mm);
    RepositionResult rp = apply_random_rigid(v, d.max_offset_mm,
                                             d.max_offset_deg,
                                             derive_seed(cseed, 3));
    cd.offset = rp.sampled;
    cd.reposition = rp.applied;
    repositions.push_back(rp.applied);
    degraded.push_back(std::move(rp.volume));
    rec.degradations.push_back(cd);
  }

  // Ground truth in the estimation gauge: channel 0 fixed, so the optimum
  // satisfies exp(q_c) = T_1 T_c^-1.
  rec.q_true.assign(static_cast<size_t>(cfg.channels),
                    RigidParams{0, 0, 0, 0, 0, 0});
  for (int c = 1; c < cfg.channels; ++c)
    rec.q_true[static_cast<size_t>(c)] = log_se3(
        repositions[0] * repositions[static_cast<size_t>(c)].inverse());

  for (CostKind cost : cfg.costs) {
    CostEstimate est;
    est.method = to_string(cost);
    est.q.assign(static_cast<size_t>(cfg.channels),
                 RigidParams{0, 0, 0, 0, 0, 0});
    try {
      RegistrationOptions opts = cfg.reg_options;
      opts.cost = cost;
      opts.fixed_index = 0;
      opts.jitter_seed = derive_seed(tseed, 2);
      if (cost == CostKind::njtv) {
        RegistrationResult r = register_groupwise(degraded, opts);
        for (int c = 1; c < cfg.channels; ++c)
          est.q[static_cast<size_t>(c)] =
              r.channels[static_cast<size_t>(c)].q;
      } else {
        for (int c = 1; c < cfg.channels; ++c) {
          RegistrationResult r = register_pairwise(
              degraded[0], degraded[static_cast<size_t>(c)], opts);
          est.q[static_cast<size_t>(c)] = r.channels[1].q;
        }
      }
    } catch (const std::exception& ex) {
      est.ok = false;
      est.error = ex.what();
    }
    rec.estimates.push_back(std::move(est));
  }
  return rec;
}

inline std::vector<TrialRecord> run_simulation(const SimulationConfig& cfg,
                                               int n_trials,
                                               uint64_t master_seed) {
  if (n_trials < 1) throw DomainError("run_simulation: n_trials must be >= 1");
  std::vector<TrialRecord> out;
  out.reserve(static_cast<size_t>(n_trials));
  for (int t = 0; t < n_trials; ++t)
    out.push_back(run_trial(cfg, t, master_seed));
  return out;
}

}  // namespace njtv
