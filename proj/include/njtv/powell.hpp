#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "njtv/error.hpp"

namespace njtv {

struct StoppingCriteria {
  std::vector<double> tolerances;  // per-parameter absolute tolerances
  int max_cycles = 64;
  double value_tol = 1e-4;  // relative line-search value tolerance
};

struct BrentResult {
  double x = 0, f = 0;
  int evaluations = 0;
};

/// Golden-section search with parabolic acceleration on a bracketing
/// triple (a, b, c) with f(b) <= f(a), f(b) <= f(c).
inline BrentResult brent_minimize(const std::function<double(double)>& f,
                                  double a, double b, double c,
                                  double fa, double fb, double fc,
                                  double xtol = 1e-8, int max_iter = 100) {
  if (!(std::min(a, c) <= b && b <= std::max(a, c)) || fb > fa || fb > fc)
    throw DomainError("brent_minimize: invalid bracket");
  constexpr double cgold = 0.3819660112501051;
  double lo = std::min(a, c), hi = std::max(a, c);
  double x = b, w = b, v = b;
  double fx = fb, fw = fb, fv = fb;
  double d = 0, e = 0;
  BrentResult res;
  for (int it = 0; it < max_iter; ++it) {
    const double xm = 0.5 * (lo + hi);
    const double tol1 = xtol * std::abs(x) + 1e-12;
    const double tol2 = 2 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (hi - lo)) break;
    bool golden = true;
    if (std::abs(e) > tol1) {
      // Parabolic step through x, w, v.
      const double r = (x - w) * (fx - fv);
      double qd = (x - v) * (fx - fw);
      double p = (x - v) * qd - (x - w) * r;
      qd = 2 * (qd - r);
      if (qd > 0) p = -p;
      qd = std::abs(qd);
      const double etmp = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * qd * etmp) && p > qd * (lo - x) &&
          p < qd * (hi - x)) {
        d = p / qd;
        const double u = x + d;
        if (u - lo < tol2 || hi - u < tol2) d = std::copysign(tol1, xm - x);
        golden = false;
      }
    }
    if (golden) {
      e = (x >= xm) ? lo - x : hi - x;
      d = cgold * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + std::copysign(tol1, d);
    const double fu = f(u);
    ++res.evaluations;
    if (fu <= fx) {
      if (u >= x) lo = x; else hi = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) lo = u; else hi = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  res.x = x;
  res.f = fx;
  return res;
}

inline BrentResult brent_minimize(const std::function<double(double)>& f,
                                  double a, double b, double c,
                                  double xtol = 1e-8, int max_iter = 100) {
  return brent_minimize(f, a, b, c, f(a), f(b), f(c), xtol, max_iter);
}

namespace detail {

struct LineResult {
  double alpha = 0, f = 0;
  int evaluations = 0;
};

/// Minimizes g(alpha) from alpha = 0 by expanding-step bracketing
/// (+-step * {1, 2, 4, ...}, capped) followed by Brent.
inline LineResult line_minimize(const std::function<double(double)>& g,
                                double f0, double step, double xtol) {
  LineResult res;
  res.f = f0;
  double a = 0, fa = f0;
  double b, fb;
  // Pick the downhill direction.
  double fplus = g(step), fminus = g(-step);
  res.evaluations += 2;
  double dir;
  if (fplus < f0 || fminus < f0) {
    dir = fplus <= fminus ? 1.0 : -1.0;
    b = dir * step;
    fb = std::min(fplus, fminus);
  } else {
    // Both sides uphill: (−step, 0, +step) is already a bracket.
    const BrentResult br = brent_minimize(g, -step, 0.0, step, fminus, f0,
                                          fplus, xtol);
    res.alpha = br.x;
    res.f = br.f;
    res.evaluations += br.evaluations;
    return res;
  }
  double c = b, fc = fb;
  double h = dir * step;
  for (int expansion = 0; expansion < 50; ++expansion) {
    h *= 2.0;
    c = b + h;
    fc = g(c);
    ++res.evaluations;
    if (fc >= fb) break;
    a = b; fa = fb;
    b = c; fb = fc;
  }
  if (fc < fb) {
    // Cap hit while still descending; accept the furthest point.
    res.alpha = c;
    res.f = fc;
    return res;
  }
  const BrentResult br = brent_minimize(g, a, b, c, fa, fb, fc, xtol);
  res.alpha = br.x;
  res.f = br.f;
  res.evaluations += br.evaluations;
  return res;
}

}  // namespace detail

struct PowellResult {
  std::vector<double> x;
  double f = 0;
  int cycles = 0;
  int evaluations = 0;
  std::vector<double> cycle_values;  // f at the end of each cycle
};

/// Powell's direction-set method. Directions start as the coordinate axes;
/// after each cycle the direction of largest decrease may be replaced by
/// the net displacement (standard acceptance test). Converges when every
/// parameter moved less than its tolerance over the last cycle.
inline PowellResult powell_minimize(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x0, const StoppingCriteria& crit) {
  const size_t n = x0.size();
  if (crit.tolerances.size() != n)
    throw DomainError("powell_minimize: one tolerance per parameter");
  for (double t : crit.tolerances)
    if (!(t > 0)) throw DomainError("powell_minimize: tolerances must be > 0");

  auto eval = [&](const std::vector<double>& x) {
    const double v = f(x);
    if (!std::isfinite(v))
      throw DomainError("powell_minimize: non-finite objective value");
    return v;
  };

  PowellResult res;
  res.x = std::move(x0);
  res.f = eval(res.x);
  ++res.evaluations;

  std::vector<std::vector<double>> dirs(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i) dirs[i][i] = 1.0;

  for (int cycle = 0; cycle < crit.max_cycles; ++cycle) {
    const std::vector<double> x_start = res.x;
    const double f_start = res.f;
    double biggest_drop = 0;
    size_t biggest_dir = 0;

    for (size_t d = 0; d < n; ++d) {
      const std::vector<double>& dir = dirs[d];
      // Step scale along this direction from the per-parameter tolerances.
      double step = std::numeric_limits<double>::infinity();
      for (size_t i = 0; i < n; ++i)
        if (dir[i] != 0.0)
          step = std::min(step, crit.tolerances[i] / std::abs(dir[i]));
      if (!std::isfinite(step))
        throw DomainError("powell_minimize: zero direction");
      std::vector<double> probe = res.x;
      auto g = [&](double alpha) {
        for (size_t i = 0; i < n; ++i) probe[i] = res.x[i] + alpha * dir[i];
        return eval(probe);
      };
      const double f_before = res.f;
      const auto lr = detail::line_minimize(g, res.f, step, crit.value_tol);
      res.evaluations += lr.evaluations;
      if (lr.f < res.f) {
        for (size_t i = 0; i < n; ++i) res.x[i] += lr.alpha * dir[i];
        res.f = lr.f;
      }
      if (f_before - res.f > biggest_drop) {
        biggest_drop = f_before - res.f;
        biggest_dir = d;
      }
    }

    res.cycles = cycle + 1;
    res.cycle_values.push_back(res.f);

    bool converged = true;
    for (size_t i = 0; i < n; ++i) {
      if (std::abs(res.x[i] - x_start[i]) >= crit.tolerances[i]) {
        converged = false;
        break;
      }
    }
    if (converged) break;

    // Direction replacement with the standard extrapolation test.
    std::vector<double> extrapolated(n);
    std::vector<double> net(n);
    for (size_t i = 0; i < n; ++i) {
      net[i] = res.x[i] - x_start[i];
      extrapolated[i] = res.x[i] + net[i];
    }
    const double f_extr = eval(extrapolated);
    ++res.evaluations;
    if (f_extr < f_start) {
      const double df = f_start - res.f;
      const double t = 2.0 * (f_start - 2.0 * res.f + f_extr) *
                           (f_start - res.f - biggest_drop) *
                           (f_start - res.f - biggest_drop) -
                       biggest_drop * df * df;
      if (t < 0) {
        double step = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < n; ++i)
          if (net[i] != 0.0)
            step = std::min(step, crit.tolerances[i] / std::abs(net[i]));
        if (std::isfinite(step)) {
          std::vector<double> probe = res.x;
          auto g = [&](double alpha) {
            for (size_t i = 0; i < n; ++i)
              probe[i] = res.x[i] + alpha * net[i];
            return eval(probe);
          };
          const auto lr = detail::line_minimize(g, res.f, step,
                                                crit.value_tol);
          res.evaluations += lr.evaluations;
          if (lr.f < res.f) {
            for (size_t i = 0; i < n; ++i) res.x[i] += lr.alpha * net[i];
            res.f = lr.f;
          }
          dirs[biggest_dir] = dirs[n - 1];
          dirs[n - 1] = net;
        }
      }
    }
  }
  return res;
}

}  // namespace njtv
