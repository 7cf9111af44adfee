#pragma once

#include <string>
#include <vector>

#include "njtv/cost_baselines.hpp"
#include "njtv/cost_njtv.hpp"
#include "njtv/mixtures.hpp"
#include "njtv/powell.hpp"

namespace njtv {

enum class CostKind { njtv, mi, nmi, ecc, ncc };

inline std::string to_string(CostKind c) {
  switch (c) {
    case CostKind::njtv: return "njtv";
    case CostKind::mi: return "mi";
    case CostKind::nmi: return "nmi";
    case CostKind::ecc: return "ecc";
    case CostKind::ncc: return "ncc";
  }
  return "?";
}

inline CostKind cost_from_string(const std::string& s) {
  if (s == "njtv") return CostKind::njtv;
  if (s == "mi") return CostKind::mi;
  if (s == "nmi") return CostKind::nmi;
  if (s == "ecc") return CostKind::ecc;
  if (s == "ncc") return CostKind::ncc;
  throw DomainError("unknown cost function: " + s);
}

struct RegistrationOptions {
  CostKind cost = CostKind::njtv;
  size_t fixed_index = 0;
  std::vector<int> pyramid{8, 1};
  uint64_t jitter_seed = 0;
  bool jitter = true;
  double translation_tol = 0.02;  // mm
  double rotation_tol = 0.001;   // algebra coordinates
  int max_cycles = 64;
  int histogram_bins = 64;
  // FWHM 2 bins at 64 bins matches the usual 7-bin kernel on a 256-bin
  // histogram; a full 7-bin kernel here over-smooths and puts a local
  // maximum of the information measures right at exact alignment.
  double histogram_fwhm = 2.0;
};

struct LevelDiagnostics {
  int factor = 1;
  double cost_before = 0;
  double cost_after = 0;
  int cycles = 0;
  int evaluations = 0;
};

struct ChannelResult {
  RigidParams q{0, 0, 0, 0, 0, 0};
  Affine4 matrix;  // exp_se3(q)
  double cost = 0;
};

struct RegistrationResult {
  std::vector<ChannelResult> channels;  // input order; fixed entry = identity
  size_t fixed_index = 0;
  double final_cost = 0;
  std::vector<LevelDiagnostics> levels;
};

namespace detail {

/// Per-axis pyramid factor clamped so downsampled dims stay >= 3 (the
/// spline encoder's minimum).
inline std::array<int, 3> level_factors(const Volume& v, int factor) {
  std::array<int, 3> f;
  for (int a = 0; a < 3; ++a)
    f[a] = std::max(1, std::min(factor, v.dims[a] / 3));
  return f;
}

inline StoppingCriteria stacked_criteria(const RegistrationOptions& opts,
                                         size_t n_moving) {
  StoppingCriteria crit;
  crit.max_cycles = opts.max_cycles;
  for (size_t c = 0; c < n_moving; ++c) {
    for (int i = 0; i < 3; ++i)
      crit.tolerances.push_back(opts.translation_tol);
    for (int i = 0; i < 3; ++i) crit.tolerances.push_back(opts.rotation_tol);
  }
  return crit;
}

}  // namespace detail

/// Groupwise NJTV registration of >= 2 volumes. Channel opts.fixed_index is
/// the gauge and always reports identity. Lambdas are estimated once at
/// full resolution; each pyramid level reuses the previous level's
/// parameters as a warm start (rigid parameters are resolution-independent
/// in world units).
inline RegistrationResult register_groupwise(const std::vector<Volume>& vols,
                                             const RegistrationOptions& opts) {
  if (vols.size() < 2)
    throw DomainError("register_groupwise: need at least 2 volumes");
  if (opts.cost != CostKind::njtv)
    throw DomainError("register_groupwise: only the njtv cost is groupwise");
  if (opts.fixed_index >= vols.size())
    throw DomainError("register_groupwise: fixed_index out of range");

  // Reorder so the fixed volume is channel 1.
  std::vector<size_t> order;
  order.push_back(opts.fixed_index);
  for (size_t c = 0; c < vols.size(); ++c)
    if (c != opts.fixed_index) order.push_back(c);

  std::vector<ChannelScale> lambdas(order.size());
  for (size_t c = 0; c < order.size(); ++c)
    lambdas[c] = estimate_lambda(vols[order[c]]);

  const size_t n_moving = vols.size() - 1;
  std::vector<double> x(6 * n_moving, 0.0);
  const StoppingCriteria crit = detail::stacked_criteria(opts, n_moving);
  const JitteredGrid grid = opts.jitter
                                ? JitteredGrid{opts.jitter_seed, 1.0}
                                : JitteredGrid::disabled();

  RegistrationResult res;
  res.fixed_index = opts.fixed_index;

  for (int factor : opts.pyramid) {
    std::vector<Volume> level;
    level.reserve(order.size());
    for (size_t c = 0; c < order.size(); ++c) {
      const Volume& src = vols[order[c]];
      const auto f = detail::level_factors(src, factor);
      level.push_back(f == std::array<int, 3>{1, 1, 1} ? src
                                                       : downsample(src, f));
    }
    const std::vector<ChannelField> channels =
        prepare_channels(level, lambdas);

    auto objective = [&](const std::vector<double>& p) {
      GroupAlignment a;
      a.params.resize(n_moving);
      for (size_t c = 0; c < n_moving; ++c)
        for (int i = 0; i < 6; ++i) a.params[c][static_cast<size_t>(i)] =
            p[6 * c + static_cast<size_t>(i)];
      return njtv_cost(channels, a, grid);
    };

    LevelDiagnostics diag;
    diag.factor = factor;
    diag.cost_before = objective(x);
    PowellResult pr = powell_minimize(objective, x, crit);
    x = pr.x;
    diag.cost_after = pr.f;
    diag.cycles = pr.cycles;
    diag.evaluations = pr.evaluations;
    res.levels.push_back(diag);
    res.final_cost = pr.f;
  }

  res.channels.assign(vols.size(), ChannelResult{});
  for (size_t c = 0; c < n_moving; ++c) {
    ChannelResult cr;
    for (int i = 0; i < 6; ++i)
      cr.q[static_cast<size_t>(i)] = x[6 * c + static_cast<size_t>(i)];
    cr.matrix = exp_se3(cr.q);
    cr.cost = res.final_cost;
    res.channels[order[c + 1]] = cr;
  }
  res.channels[opts.fixed_index].cost = res.final_cost;
  return res;
}

/// Pairwise registration with one of the information-theoretic baselines or
/// NCC, using the same pyramid and warm-start protocol. The joint histogram
/// is rebuilt at every cost evaluation.
inline RegistrationResult register_pairwise(const Volume& fixed,
                                            const Volume& moving,
                                            const RegistrationOptions& opts) {
  if (opts.cost == CostKind::njtv)
    throw DomainError("register_pairwise: use register_groupwise for njtv");

  std::vector<double> x(6, 0.0);
  const StoppingCriteria crit = detail::stacked_criteria(opts, 1);
  const JitteredGrid grid = opts.jitter
                                ? JitteredGrid{opts.jitter_seed, 1.0}
                                : JitteredGrid::disabled();

  RegistrationResult res;
  res.fixed_index = 0;

  for (int factor : opts.pyramid) {
    const auto ff = detail::level_factors(fixed, factor);
    const auto mf = detail::level_factors(moving, factor);
    const Volume fl =
        ff == std::array<int, 3>{1, 1, 1} ? fixed : downsample(fixed, ff);
    const Volume ml =
        mf == std::array<int, 3>{1, 1, 1} ? moving : downsample(moving, mf);

    auto objective = [&](const std::vector<double>& p) {
      RigidParams q;
      for (int i = 0; i < 6; ++i)
        q[static_cast<size_t>(i)] = p[static_cast<size_t>(i)];
      switch (opts.cost) {
        case CostKind::mi:
          return -mi(joint_histogram(fl, ml, q, opts.histogram_bins,
                                     opts.histogram_fwhm, grid));
        case CostKind::nmi:
          return -nmi(joint_histogram(fl, ml, q, opts.histogram_bins,
                                      opts.histogram_fwhm, grid));
        case CostKind::ecc:
          return -ecc(joint_histogram(fl, ml, q, opts.histogram_bins,
                                      opts.histogram_fwhm, grid));
        case CostKind::ncc:
          return ncc(fl, ml, q, grid);
        default:
          throw DomainError("register_pairwise: unsupported cost");
      }
    };

    LevelDiagnostics diag;
    diag.factor = factor;
    diag.cost_before = objective(x);
    PowellResult pr = powell_minimize(objective, x, crit);
    x = pr.x;
    diag.cost_after = pr.f;
    diag.cycles = pr.cycles;
    diag.evaluations = pr.evaluations;
    res.levels.push_back(diag);
    res.final_cost = pr.f;
  }

  res.channels.assign(2, ChannelResult{});
  ChannelResult cr;
  for (int i = 0; i < 6; ++i)
    cr.q[static_cast<size_t>(i)] = x[static_cast<size_t>(i)];
  cr.matrix = exp_se3(cr.q);
  cr.cost = res.final_cost;
  res.channels[1] = cr;
  res.channels[0].cost = res.final_cost;
  return res;
}

enum class ApplyMode { header, reslice };

/// header: premultiplies each moving world by R_c^-1 so the estimated
/// mapping becomes the identity. reslice: resamples each moving volume onto
/// the fixed grid trilinearly; out-of-FOV voxels become 0 with a mask.
inline std::vector<Volume> apply_result(const std::vector<Volume>& vols,
                                        const RegistrationResult& result,
                                        ApplyMode mode) {
  if (vols.size() != result.channels.size())
    throw DomainError("apply_result: volume/result count mismatch");
  std::vector<Volume> out;
  out.reserve(vols.size());
  const Volume& fixed = vols[result.fixed_index];
  for (size_t c = 0; c < vols.size(); ++c) {
    if (c == result.fixed_index) {
      out.push_back(vols[c]);
      continue;
    }
    const ChannelResult& cr = result.channels[c];
    if (mode == ApplyMode::header) {
      Volume v = vols[c];
      v.world = cr.matrix.inverse() * v.world;
      out.push_back(std::move(v));
    } else {
      Volume v = make_volume(fixed.dims, fixed.voxel_size, fixed.world);
      v.missing.assign(v.size(), 0);
      const Affine4 pullback =
          vols[c].world.inverse() * cr.matrix.inverse() * fixed.world;
      for (int k = 0; k < v.dims[2]; ++k) {
        for (int j = 0; j < v.dims[1]; ++j) {
          for (int i = 0; i < v.dims[0]; ++i) {
            const Vec3 p = pullback.apply(
                {static_cast<double>(i), static_cast<double>(j),
                 static_cast<double>(k)});
            const auto s = trilinear_sample(vols[c], p);
            const size_t idx = v.index(i, j, k);
            if (s) {
              v.data[idx] = *s;
            } else {
              v.missing[idx] = 1;
            }
          }
        }
      }
      out.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace njtv
