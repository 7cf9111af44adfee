#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "njtv/volume.hpp"

namespace njtv {

struct Histogram {
  double lo = 0, hi = 0;
  std::vector<double> counts;

  int bins() const { return static_cast<int>(counts.size()); }
  double bin_width() const { return (hi - lo) / counts.size(); }
  double center(int j) const { return lo + (j + 0.5) * bin_width(); }
  double total() const {
    double s = 0;
    for (double c : counts) s += c;
    return s;
  }
};

inline Histogram build_histogram(const Volume& v, int bins = 1024) {
  if (bins < 2) throw DomainError("build_histogram: bins must be >= 2");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (size_t i = 0; i < v.data.size(); ++i) {
    if (v.is_missing(i)) continue;
    lo = std::min(lo, v.data[i]);
    hi = std::max(hi, v.data[i]);
  }
  if (!(hi > lo))
    throw DomainError("build_histogram: degenerate (constant) intensities");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(static_cast<size_t>(bins), 0.0);
  const double scale = bins / (hi - lo);
  for (size_t i = 0; i < v.data.size(); ++i) {
    if (v.is_missing(i)) continue;
    int j = static_cast<int>((v.data[i] - lo) * scale);
    j = std::clamp(j, 0, bins - 1);
    h.counts[static_cast<size_t>(j)] += 1.0;
  }
  return h;
}

struct GaussianClass {
  double mu = 0, sigma2 = 1, weight = 0.5;
};

struct GaussianMixture {
  GaussianClass background, foreground;
  double log_likelihood = 0;
  int iterations = 0;
  // Log-likelihood at the end of every EM iteration, for monotonicity checks.
  std::vector<double> ll_trace;
};

struct RicianClass {
  double nu = 0, sigma = 1, weight = 0.5;
  /// Distribution mean: sigma*sqrt(pi/2)*L_{1/2}(-nu^2/(2 sigma^2)),
  /// or sqrt(nu^2 + sigma^2) at high SNR.
  double mean() const;
};

struct RicianMixture {
  RicianClass background, foreground;
  double log_likelihood = 0;
  int iterations = 0;
  std::vector<double> ll_trace;
};

struct ChannelScale {
  double lambda = 1.0;
  std::string provenance;  // "rician" or "gaussian"
};

namespace detail {

inline double log_bessel_i0(double z) {
  z = std::abs(z);
  if (z < 30.0) {
    // Power series sum_k (z^2/4)^k / (k!)^2.
    const double q = z * z / 4.0;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 200; ++k) {
      term *= q / (static_cast<double>(k) * k);
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return std::log(sum);
  }
  const double iz = 1.0 / z;
  return z - 0.5 * std::log(2.0 * M_PI * z) +
         std::log1p(iz * (0.125 + iz * (9.0 / 128.0 + iz * 75.0 / 1024.0)));
}

inline double log_bessel_i1(double z) {
  z = std::abs(z);
  if (z < 1e-30) return -std::numeric_limits<double>::infinity();
  if (z < 30.0) {
    // (z/2) * sum_k (z^2/4)^k / (k! (k+1)!)
    const double q = z * z / 4.0;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 200; ++k) {
      term *= q / (static_cast<double>(k) * (k + 1));
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return std::log(z / 2.0) + std::log(sum);
  }
  const double iz = 1.0 / z;
  return z - 0.5 * std::log(2.0 * M_PI * z) +
         std::log1p(iz * (-0.375 + iz * (-15.0 / 128.0 - iz * 105.0 / 1024.0)));
}

/// I1(z)/I0(z), stable for large z.
inline double bessel_ratio(double z) {
  if (z > 30.0) {
    const double iz = 1.0 / z;
    return 1.0 - iz * (0.5 + iz * (0.125 + iz * 0.125));
  }
  return std::exp(log_bessel_i1(z) - log_bessel_i0(z));
}

inline double log_rician_pdf(double x, double nu, double sigma2) {
  if (x <= 0) return -std::numeric_limits<double>::infinity();
  return std::log(x / sigma2) - (x * x + nu * nu) / (2.0 * sigma2) +
         log_bessel_i0(x * nu / sigma2);
}

inline double log_gaussian_pdf(double x, double mu, double sigma2) {
  const double d = x - mu;
  return -0.5 * (std::log(2.0 * M_PI * sigma2) + d * d / sigma2);
}

inline double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  if (!std::isfinite(m)) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace detail

inline double RicianClass::mean() const {
  const double snr = nu / sigma;
  if (snr > 3.0) return std::sqrt(nu * nu + sigma * sigma);
  const double s = nu * nu / (2.0 * sigma * sigma);
  // L_{1/2}(-s) = exp(-s/2) ((1+s) I0(s/2) + s I1(s/2))
  const double li0 = detail::log_bessel_i0(s / 2.0);
  const double l12 =
      std::exp(-s / 2.0 + li0) * (1.0 + s) +
      (s > 0 ? std::exp(-s / 2.0 + detail::log_bessel_i1(s / 2.0)) * s : 0.0);
  return sigma * std::sqrt(M_PI / 2.0) * l12;
}

/// 2-class EM on bin centers weighted by counts; initialized by splitting
/// the histogram at its weighted median. Variances are floored at the
/// squared bin width.
inline GaussianMixture fit_gaussian_mixture(const Histogram& h,
                                            int max_iter = 10000,
                                            double tol = 1e-8) {
  const int nb = h.bins();
  const double total = h.total();
  if (total <= 0) throw DomainError("fit_gaussian_mixture: empty histogram");
  const double floor2 = h.bin_width() * h.bin_width();

  // Median split initialization.
  double cum = 0;
  int split = nb / 2;
  for (int j = 0; j < nb; ++j) {
    cum += h.counts[static_cast<size_t>(j)];
    if (cum >= total / 2) {
      split = j;
      break;
    }
  }
  GaussianClass cls[2];
  for (int c = 0; c < 2; ++c) {
    double w = 0, m = 0, m2 = 0;
    for (int j = 0; j < nb; ++j) {
      if ((j <= split) != (c == 0)) continue;
      const double n = h.counts[static_cast<size_t>(j)];
      const double x = h.center(j);
      w += n;
      m += n * x;
      m2 += n * x * x;
    }
    if (w <= 0) {
      cls[c].mu = h.center(c == 0 ? 0 : nb - 1);
      cls[c].sigma2 = floor2;
      cls[c].weight = 1e-6;
    } else {
      cls[c].mu = m / w;
      cls[c].sigma2 = std::max(m2 / w - cls[c].mu * cls[c].mu, floor2);
      cls[c].weight = w / total;
    }
  }

  GaussianMixture out;
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    double w[2] = {0, 0}, m[2] = {0, 0}, m2[2] = {0, 0};
    double ll = 0;
    for (int j = 0; j < nb; ++j) {
      const double n = h.counts[static_cast<size_t>(j)];
      if (n <= 0) continue;
      const double x = h.center(j);
      double lp[2];
      for (int c = 0; c < 2; ++c)
        lp[c] = std::log(cls[c].weight) +
                detail::log_gaussian_pdf(x, cls[c].mu, cls[c].sigma2);
      const double lse = detail::log_sum_exp(lp[0], lp[1]);
      ll += n * lse;
      for (int c = 0; c < 2; ++c) {
        const double r = std::exp(lp[c] - lse);
        w[c] += n * r;
        m[c] += n * r * x;
        m2[c] += n * r * x * x;
      }
    }
    for (int c = 0; c < 2; ++c) {
      if (w[c] <= 0) continue;
      cls[c].mu = m[c] / w[c];
      cls[c].sigma2 = std::max(m2[c] / w[c] - cls[c].mu * cls[c].mu, floor2);
      cls[c].weight = std::clamp(w[c] / total, 1e-12, 1.0);
    }
    out.ll_trace.push_back(ll);
    out.iterations = it + 1;
    out.log_likelihood = ll;
    if (std::isfinite(prev_ll) &&
        std::abs(ll - prev_ll) < tol * (std::abs(prev_ll) + 1e-300))
      break;
    prev_ll = ll;
  }

  // Background = class whose mean is closest to the largest-mass mode.
  int mode = 0;
  for (int j = 1; j < nb; ++j)
    if (h.counts[static_cast<size_t>(j)] >
        h.counts[static_cast<size_t>(mode)])
      mode = j;
  const double mode_x = h.center(mode);
  const bool zero_is_bg =
      std::abs(cls[0].mu - mode_x) <= std::abs(cls[1].mu - mode_x);
  out.background = zero_is_bg ? cls[0] : cls[1];
  out.foreground = zero_is_bg ? cls[1] : cls[0];
  return out;
}

/// 2-class Rician EM: nu via the I1/I0 fixed point, sigma^2 via the
/// complete-data moment update. Requires nonnegative support.
inline RicianMixture fit_rician_mixture(const Histogram& h,
                                        int max_iter = 10000,
                                        double tol = 1e-8) {
  if (h.lo < 0)
    throw DomainError(
        "fit_rician_mixture: negative support, use the Gaussian mixture");
  const int nb = h.bins();
  const double total = h.total();
  if (total <= 0) throw DomainError("fit_rician_mixture: empty histogram");
  const double floor2 = h.bin_width() * h.bin_width();

  double cum = 0;
  int split = nb / 2;
  for (int j = 0; j < nb; ++j) {
    cum += h.counts[static_cast<size_t>(j)];
    if (cum >= total / 2) {
      split = j;
      break;
    }
  }
  RicianClass cls[2];
  for (int c = 0; c < 2; ++c) {
    double w = 0, m = 0, m2 = 0;
    for (int j = 0; j < nb; ++j) {
      if ((j <= split) != (c == 0)) continue;
      const double n = h.counts[static_cast<size_t>(j)];
      const double x = h.center(j);
      w += n;
      m += n * x;
      m2 += n * x * x;
    }
    if (w <= 0) {
      cls[c].nu = 0;
      cls[c].sigma = std::sqrt(floor2);
      cls[c].weight = 1e-6;
      continue;
    }
    const double mean = m / w;
    const double var = std::max(m2 / w - mean * mean, floor2);
    // E[x^2] = nu^2 + 2 sigma^2; seed with nu = mean.
    cls[c].nu = mean;
    cls[c].sigma = std::sqrt(std::max((m2 / w - mean * mean) / 2.0,
                                      floor2));
    cls[c].weight = w / total;
    (void)var;
  }

  RicianMixture out;
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    double w[2] = {0, 0}, sx[2] = {0, 0}, sx2[2] = {0, 0}, sxb[2] = {0, 0};
    double ll = 0;
    for (int j = 0; j < nb; ++j) {
      const double n = h.counts[static_cast<size_t>(j)];
      if (n <= 0) continue;
      const double x = h.center(j);
      double lp[2];
      for (int c = 0; c < 2; ++c)
        lp[c] = std::log(cls[c].weight) +
                detail::log_rician_pdf(x, cls[c].nu,
                                       cls[c].sigma * cls[c].sigma);
      const double lse = detail::log_sum_exp(lp[0], lp[1]);
      if (std::isfinite(lse)) ll += n * lse;
      for (int c = 0; c < 2; ++c) {
        const double r = std::isfinite(lse) ? std::exp(lp[c] - lse) : 0.5;
        const double sigma2 = cls[c].sigma * cls[c].sigma;
        const double bratio = detail::bessel_ratio(x * cls[c].nu / sigma2);
        w[c] += n * r;
        sx[c] += n * r * x;
        sx2[c] += n * r * x * x;
        sxb[c] += n * r * x * bratio;
      }
    }
    for (int c = 0; c < 2; ++c) {
      if (w[c] <= 0) continue;
      const double nu = std::max(sxb[c] / w[c], 0.0);
      const double sigma2 = std::max(
          (sx2[c] + w[c] * nu * nu - 2.0 * nu * sxb[c]) / (2.0 * w[c]),
          floor2 / 2.0);
      cls[c].nu = nu;
      cls[c].sigma = std::sqrt(sigma2);
      cls[c].weight = std::clamp(w[c] / total, 1e-12, 1.0);
    }
    out.ll_trace.push_back(ll);
    out.iterations = it + 1;
    out.log_likelihood = ll;
    if (std::isfinite(prev_ll) &&
        std::abs(ll - prev_ll) < tol * (std::abs(prev_ll) + 1e-300))
      break;
    prev_ll = ll;
  }

  const bool zero_is_bg = cls[0].mean() <= cls[1].mean();
  out.background = zero_is_bg ? cls[0] : cls[1];
  out.foreground = zero_is_bg ? cls[1] : cls[0];
  return out;
}

/// Per-channel scaling: nonnegative images get a Rician fit with scale =
/// foreground mean; signed images get a Gaussian fit with scale =
/// |mu_bg - mu_fg|. lambda is the reciprocal scale so that
/// lambda * ||grad f|| is independent of the data unit.
inline ChannelScale estimate_lambda(const Volume& v, int bins = 1024) {
  const Histogram h = build_histogram(v, bins);
  ChannelScale out;
  if (h.lo >= 0) {
    const RicianMixture m = fit_rician_mixture(h);
    const double s = m.foreground.mean();
    if (!(s > 0) || !std::isfinite(s))
      throw DomainError("estimate_lambda: degenerate Rician foreground");
    out.lambda = 1.0 / s;
    out.provenance = "rician";
  } else {
    const GaussianMixture m = fit_gaussian_mixture(h);
    const double s = std::abs(m.background.mu - m.foreground.mu);
    if (!(s > 0) || !std::isfinite(s))
      throw DomainError("estimate_lambda: coincident Gaussian class means");
    out.lambda = 1.0 / s;
    out.provenance = "gaussian";
  }
  return out;
}

}  // namespace njtv
