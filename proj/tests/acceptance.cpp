// Acceptance checks for the registration library: one pass/fail line per
// criterion, nonzero exit if any fail. The simulation criteria (5-7) share
// one 20-trial run and dominate the runtime.

#include <njtv/njtv.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

using namespace njtv;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

double sweep_argmin(const std::vector<std::pair<double, double>>& rows) {
  double best_m = 0, best_v = 1e300;
  for (const auto& [m, v] : rows) {
    if (v < best_v) {
      best_v = v;
      best_m = m;
    }
  }
  return best_m;
}

// ---- criterion 1: integrand sweep minima --------------------------------

Check criterion_sweeps() {
  Check c;
  const auto t0 = Clock::now();
  for (double held : {0.0, 2.0, 8.0, 16.0}) {
    const auto rows = integrand_sweep(2, {held}, 0.0, 20.0, 0.01);
    const double am = sweep_argmin(rows);
    c.require(std::abs(am - held) <= 0.01 + 1e-12,
              "modulated argmin " + std::to_string(am) + " for magnitude " +
                  std::to_string(held));
  }
  const auto un = integrand_sweep(2, {8.0}, 0.0, 20.0, 0.01, false);
  c.require(sweep_argmin(un) == 0.0, "unmodulated argmin not at 0");
  c.require(seconds_since(t0) < 1.0, "took >= 1s");
  return c;
}

// ---- criterion 2: cost identities ---------------------------------------

Check criterion_cost_identities() {
  Check c;
  const auto t0 = Clock::now();

  detail::Rng rng(17);
  for (int t = 0; t < 1000000; ++t) {
    const int n = rng.uniform_int(2, 5);
    std::vector<double> mags(static_cast<size_t>(n), 0.0);
    for (auto& m : mags) m = rng.uniform(0, 50);
    if (njtv_integrand(mags) < -1e-12) {
      c.require(false, "negative integrand on a random tuple");
      break;
    }
  }

  for (int c_total : {2, 3, 5}) {
    Volume base = make_volume({20, 20, 20}, {1.5, 1.5, 1.5});
    detail::Rng vr(static_cast<uint64_t>(c_total));
    for (auto& x : base.data) x = vr.uniform(0, 100);
    detail::gaussian_smooth_inplace(base, 4.0);
    std::vector<Volume> same(size_t(c_total), base);
    std::vector<ChannelScale> lambdas(size_t(c_total), ChannelScale{1.0, ""});
    const auto ch = prepare_channels(same, lambdas);
    GroupAlignment a;
    a.params.assign(size_t(c_total - 1), RigidParams{});
    const auto grid = JitteredGrid::disabled();

    const double jtv = jtv_cost(ch, a, grid);
    const double ctv = ctv_cost(ch, a, grid);
    const double cost = njtv_cost(ch, a, grid);
    c.require(std::abs(cost) <= 1e-6 * std::max(1.0, ctv),
              "identical channels: cost not ~0 at C=" +
                  std::to_string(c_total));
    const double lhs = std::sqrt(double(c_total)) * jtv - ctv;
    c.require(std::abs(lhs - cost) <= 1e-9 * std::max(1.0, std::abs(ctv)),
              "sqrt(C)*JTV - CTV identity violated at C=" +
                  std::to_string(c_total));
  }
  c.require(seconds_since(t0) < 10.0, "took >= 10s");
  return c;
}

// ---- criterion 3: rigid parameterization --------------------------------

Check criterion_se3() {
  Check c;
  const auto t0 = Clock::now();
  detail::Rng rng(7);
  for (int t = 0; t < 10000; ++t) {
    RigidParams q{};
    for (int i = 0; i < 3; ++i) q[size_t(i)] = rng.uniform(-50, 50);
    for (int i = 3; i < 6; ++i) q[size_t(i)] = rng.uniform(-2, 2);
    const Affine4 m = exp_se3(q);
    if (!se3::is_rigid(m, 1e-12)) {
      c.require(false, "exp produced a non-orthonormal rotation block");
      break;
    }
    const RigidParams back = log_se3(m);
    for (int i = 0; i < 6; ++i) {
      if (std::abs(back[size_t(i)] - q[size_t(i)]) >= 1e-9) {
        c.require(false, "round-trip error >= 1e-9");
        break;
      }
    }
    if (!c.ok) break;
  }
  c.require(seconds_since(t0) < 5.0, "took >= 5s");
  return c;
}

// ---- criterion 4: TV invariance under rigid resampling ------------------

Check criterion_tv_invariance() {
  Check c;
  const int n = 64;
  Volume v = make_volume({n, n, n});
  detail::Rng rng(1234);
  for (auto& x : v.data) x = rng.gaussian();
  detail::gaussian_smooth_inplace(v, 6.0);

  const double ang = 15.0 * M_PI / 180.0;
  const double cx = (n - 1) / 2.0;
  Affine4 rot;
  rot(0, 0) = std::cos(ang);
  rot(0, 1) = -std::sin(ang);
  rot(1, 0) = std::sin(ang);
  rot(1, 1) = std::cos(ang);
  rot(0, 3) = cx - rot(0, 0) * cx - rot(0, 1) * cx;
  rot(1, 3) = cx - rot(1, 0) * cx - rot(1, 1) * cx;

  const SplineField enc = spline_encode(v);
  Volume r = make_volume(v.dims, v.voxel_size, v.world);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const auto s = spline_sample(enc, rot.apply({double(i), double(j),
                                                     double(k)}));
        r.at(i, j, k) = s ? *s : 0.0;
      }

  const Volume mv = gradient_magnitude(v, 1.0);
  const Volume mr = gradient_magnitude(r, 1.0);
  const int margin = 14;
  double sv = 0, sr = 0;
  for (int k = margin; k < n - margin; ++k)
    for (int j = margin; j < n - margin; ++j)
      for (int i = margin; i < n - margin; ++i) {
        sv += mv.at(i, j, k);
        sr += mr.at(i, j, k);
      }
  c.require(sv > 0, "degenerate field");
  const double rel = std::abs(sr - sv) / sv;
  char buf[64];
  std::snprintf(buf, sizeof buf, "relative TV change %.4f", rel);
  c.require(rel < 0.02, buf);
  return c;
}

// ---- criteria 5-7: synthetic trials --------------------------------------

struct TrialOutcome {
  std::vector<TrialRecord> records;
  std::vector<ErrorRow> rows;
  DegradationSpec spec;
  double seconds = 0;
};

TrialOutcome run_trials() {
  TrialOutcome out;
  const auto t0 = Clock::now();
  SimulationConfig cfg;  // 96^3, 3 channels, njtv + mi, defaults throughout
  out.spec = cfg.degradation;
  out.records = run_simulation(cfg, 20, 20260826);
  out.rows = error_rows(out.records, cfg.degradation);
  out.seconds = seconds_since(t0);
  return out;
}

Check criterion_recovery(const TrialOutcome& t) {
  Check c;
  // Success per (trial, channel): all three axes below threshold; a failed
  // estimate counts as a miss.
  int njtv_cases = 0, njtv_good = 0, mi_cases = 0, mi_good = 0;
  for (const auto& rec : t.records) {
    for (const auto& est : rec.estimates) {
      for (size_t ch = 1; ch < rec.q_true.size(); ++ch) {
        bool ok_t = est.ok, ok_r = est.ok;
        if (est.ok) {
          const ParamError pe = param_error(est.q[ch], rec.q_true[ch]);
          for (int axis = 0; axis < 3; ++axis) {
            ok_t = ok_t && pe.translation_mm[size_t(axis)] < 1.0;
            ok_r = ok_r && pe.rotation_deg[size_t(axis)] < 1.0;
          }
        }
        if (est.method == "njtv") {
          ++njtv_cases;
          if (ok_t && ok_r) ++njtv_good;
        } else if (est.method == "mi") {
          ++mi_cases;
          if (ok_t) ++mi_good;
        }
      }
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "njtv %d/%d below 1mm and 1deg, mi %d/%d below 1mm",
                njtv_good, njtv_cases, mi_good, mi_cases);
  c.detail = buf;
  c.require(njtv_cases > 0 && mi_cases > 0, "no cases scored");
  c.require(njtv_good >= (njtv_cases * 9 + 9) / 10,
            std::string("njtv success below 90%: ") + buf);
  c.require(10 * mi_good >= 7 * mi_cases,
            std::string("mi translation success below 70%: ") + buf);
  c.require(t.seconds < 1800.0, "simulation took >= 30min");
  return c;
}

Check criterion_inu_robustness(const TrialOutcome& t) {
  Check c;
  auto gmean_ratio = [&](const std::string& method, bool* has_both) {
    std::vector<double> with, without;
    for (const auto& r : t.rows) {
      if (r.method != method) continue;
      (r.inu > 0 ? with : without).push_back(r.trans_err_mm);
    }
    *has_both = !with.empty() && !without.empty();
    if (!*has_both) return 0.0;
    return geometric_stats(with).gmean / geometric_stats(without).gmean;
  };
  bool ok_n = false, ok_m = false;
  const double rn = gmean_ratio("njtv", &ok_n);
  const double rm = gmean_ratio("mi", &ok_m);
  char buf[128];
  std::snprintf(buf, sizeof buf,
                "INU-on/off translation gmean ratio: njtv %.3f, mi %.3f", rn,
                rm);
  c.detail = buf;
  c.require(ok_n && ok_m, "one INU cohort is empty");
  c.require(rn < 2.0, std::string("njtv INU ratio >= 2: ") + buf);
  c.require(rm > rn, std::string("mi not more INU-sensitive than njtv: ") +
                         buf);
  return c;
}

Check criterion_offset_independence(const TrialOutcome& t) {
  Check c;
  std::vector<ErrorRow> njtv_rows;
  for (const auto& r : t.rows)
    if (r.method == "njtv") njtv_rows.push_back(r);
  const LogLinearFit fit = loglinear_fit(njtv_rows);
  char buf[64];
  std::snprintf(buf, sizeof buf, "njtv beta_offset %.4f", fit.beta_offset);
  c.detail = buf;
  c.require(std::abs(fit.beta_offset) < 0.3,
            std::string("|beta_offset| >= 0.3: ") + buf);
  return c;
}

// ---- criterion 8: intensity mixture recovery -----------------------------

Check criterion_mixtures() {
  Check c;
  detail::Rng rng(1001);

  {
    std::vector<double> s;
    s.reserve(60000);
    for (int i = 0; i < 40000; ++i) s.push_back(5.0 * rng.gaussian());
    for (int i = 0; i < 20000; ++i) s.push_back(100.0 + 5.0 * rng.gaussian());
    Volume v = make_volume({int(s.size()), 1, 1});
    v.data = s;
    const GaussianMixture m = fit_gaussian_mixture(build_histogram(v));
    c.require(std::abs(m.background.mu - 0.0) < 1.0 &&
                  std::abs(m.foreground.mu - 100.0) < 1.0,
              "gaussian means off by > 1");
    c.require(std::abs(std::sqrt(m.background.sigma2) - 5.0) < 0.5 &&
                  std::abs(std::sqrt(m.foreground.sigma2) - 5.0) < 0.5,
              "gaussian sigmas off by > 0.5");
    for (size_t i = 1; i < m.ll_trace.size(); ++i)
      c.require(m.ll_trace[i] >=
                    m.ll_trace[i - 1] - 1e-7 * std::abs(m.ll_trace[i - 1]),
                "gaussian EM log-likelihood decreased");
  }

  {
    std::vector<double> s;
    s.reserve(80000);
    auto rician = [&](double nu, double sg) {
      const double a = nu + sg * rng.gaussian();
      const double b = sg * rng.gaussian();
      return std::sqrt(a * a + b * b);
    };
    for (int i = 0; i < 50000; ++i) s.push_back(rician(0.0, 10.0));
    for (int i = 0; i < 30000; ++i) s.push_back(rician(80.0, 10.0));
    Volume v = make_volume({int(s.size()), 1, 1});
    v.data = s;
    const RicianMixture m = fit_rician_mixture(build_histogram(v));
    c.require(m.background.nu < m.background.sigma,
              "rician background is not noise-dominated");
    c.require(std::abs(m.foreground.nu - 80.0) < 3.0,
              "rician foreground nu off by > 3");
    c.require(std::abs(m.foreground.sigma - 10.0) < 2.0,
              "rician foreground sigma off by > 2");
    for (size_t i = 1; i < m.ll_trace.size(); ++i)
      c.require(m.ll_trace[i] >=
                    m.ll_trace[i - 1] - 1e-7 * std::abs(m.ll_trace[i - 1]),
                "rician EM log-likelihood decreased");
  }
  return c;
}

// ---- criterion 9: baseline sanity -----------------------------------------

Check criterion_baselines() {
  Check c;
  Volume v = make_volume({28, 28, 28});
  detail::Rng rng(17);
  for (auto& x : v.data) x = rng.uniform(0, 100);
  detail::gaussian_smooth_inplace(v, 4.0);

  for (int which = 0; which < 4; ++which) {
    double best_t = -99, best_c = 1e300;
    for (int t = -5; t <= 5; ++t) {
      RigidParams q{};
      q[0] = double(t);
      double cost;
      if (which == 3) {
        cost = ncc(v, v, q);
      } else {
        const JointHistogram jh = joint_histogram(v, v, q);
        cost = which == 0 ? -mi(jh) : which == 1 ? -nmi(jh) : -ecc(jh);
      }
      if (cost < best_c) {
        best_c = cost;
        best_t = double(t);
      }
    }
    c.require(best_t == 0.0,
              "cost " + std::to_string(which) + " argmin at " +
                  std::to_string(best_t) + "mm");
  }

  // Permutation invariance: relabeling intensity bins changes nothing.
  JointHistogram jh;
  jh.bins = 3;
  jh.h = {0.30, 0.05, 0.05, 0.02, 0.25, 0.03, 0.08, 0.02, 0.20};
  jh.mass = 1.0;
  JointHistogram pm = jh;
  const int rp[3] = {2, 1, 0}, cp[3] = {0, 2, 1};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) pm.at(i, j) = jh.at(rp[i], cp[j]);
  c.require(std::abs(mi(pm) - mi(jh)) < 1e-12, "MI not permutation invariant");
  c.require(std::abs(nmi(pm) - nmi(jh)) < 1e-12,
            "NMI not permutation invariant");
  c.require(std::abs(ecc(pm) - ecc(jh)) < 1e-12,
            "ECC not permutation invariant");
  return c;
}

// ---- criterion 10: thread-count invariance -------------------------------

Check criterion_determinism() {
  Check c;
  const auto vols = make_phantom({32, 32, 32}, 3, 77);
  std::vector<ChannelScale> lambdas;
  for (const auto& v : vols) lambdas.push_back(estimate_lambda(v));
  const auto ch = prepare_channels(vols, lambdas);
  GroupAlignment a;
  a.params = {RigidParams{1, -2, 0.5, 0.05, 0, -0.02},
              RigidParams{-0.5, 1, 0, 0, 0.03, 0.01}};
  const JitteredGrid grid{5, 1.0};

  std::vector<double> costs;
  RegistrationOptions opts;
  std::vector<RegistrationResult> regs;
  for (int threads : {1, 2, 4}) {
    thread_count() = threads;
    costs.push_back(njtv_cost(ch, a, grid));
    regs.push_back(register_groupwise(vols, opts));
  }
  thread_count() = 1;

  for (size_t i = 1; i < costs.size(); ++i)
    c.require(costs[i] == costs[0], "cost differs across thread counts");
  for (size_t i = 1; i < regs.size(); ++i) {
    c.require(regs[i].final_cost == regs[0].final_cost,
              "registration cost differs across thread counts");
    for (size_t chn = 0; chn < regs[i].channels.size(); ++chn)
      for (int p = 0; p < 6; ++p)
        c.require(regs[i].channels[chn].q[size_t(p)] ==
                      regs[0].channels[chn].q[size_t(p)],
                  "registration parameters differ across thread counts");
  }
  return c;
}

int report(int index, const std::string& name, const Check& c) {
  std::printf("[%s] criterion %d: %s%s%s\n", c.ok ? "PASS" : "FAIL", index,
              name.c_str(),
              (!c.detail.empty() ? " -- " : ""),
              c.detail.c_str());
  std::fflush(stdout);
  return c.ok ? 0 : 1;
}

}  // namespace

int main() {
  int failures = 0;
  failures += report(1, "integrand sweep minima at the held magnitude",
                     criterion_sweeps());
  failures += report(2, "cost identities and nonnegativity",
                     criterion_cost_identities());
  failures += report(3, "rigid exp/log round trips", criterion_se3());
  failures += report(4, "TV invariance under rigid resampling",
                     criterion_tv_invariance());

  const TrialOutcome trials = run_trials();
  failures += report(5, "degraded-trial recovery rates",
                     criterion_recovery(trials));
  failures += report(6, "bias-field robustness", criterion_inu_robustness(trials));
  failures += report(7, "error independent of the initial offset",
                     criterion_offset_independence(trials));

  failures += report(8, "intensity mixture recovery", criterion_mixtures());
  failures += report(9, "baseline cost minima and invariances",
                     criterion_baselines());
  failures += report(10, "thread-count invariance", criterion_determinism());

  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
