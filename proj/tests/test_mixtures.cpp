#include <catch2/catch_amalgamated.hpp>

#include <njtv/mixtures.hpp>
#include <njtv/simulator.hpp>

#include <cmath>

using namespace njtv;

namespace {

Volume volume_from_samples(const std::vector<double>& samples) {
  // Shape is irrelevant for histogram work; pack into an n x 1 x 1 volume.
  Volume v = make_volume({int(samples.size()), 1, 1});
  v.data = samples;
  return v;
}

double rician_draw(detail::Rng& rng, double nu, double sigma) {
  const double a = nu + sigma * rng.gaussian();
  const double b = sigma * rng.gaussian();
  return std::sqrt(a * a + b * b);
}

}  // namespace

TEST_CASE("histogram basics") {
  Volume v = volume_from_samples({0, 1, 2, 3, 4, 4, 4, 4});
  const Histogram h = build_histogram(v, 4);
  REQUIRE(h.lo == 0);
  REQUIRE(h.hi == 4);
  REQUIRE(h.bins() == 4);
  REQUIRE_THAT(h.bin_width(), Catch::Matchers::WithinAbs(1.0, 1e-15));
  // Values land in bins [0,1,2,3] with the max clamped into the last bin.
  REQUIRE(h.counts[0] == 1);
  REQUIRE(h.counts[1] == 1);
  REQUIRE(h.counts[2] == 1);
  REQUIRE(h.counts[3] == 5);
  REQUIRE_THAT(h.total(), Catch::Matchers::WithinAbs(8.0, 1e-15));
  REQUIRE_THAT(h.center(0), Catch::Matchers::WithinAbs(0.5, 1e-15));
}

TEST_CASE("histogram skips missing voxels and rejects degenerate input") {
  Volume v = volume_from_samples({1, 2, 1000});
  v.missing.assign(v.data.size(), 0);
  v.missing[2] = 1;
  const Histogram h = build_histogram(v, 2);
  REQUIRE(h.hi == 2);
  REQUIRE_THAT(h.total(), Catch::Matchers::WithinAbs(2.0, 1e-15));

  Volume flat = volume_from_samples({5, 5, 5, 5});
  REQUIRE_THROWS_AS(build_histogram(flat, 16), DomainError);
  REQUIRE_THROWS_AS(build_histogram(v, 1), DomainError);
}

TEST_CASE("Bessel helpers match reference values") {
  // I0(1) and I1(1) to 15 digits (Abramowitz & Stegun).
  REQUIRE_THAT(std::exp(detail::log_bessel_i0(1.0)),
               Catch::Matchers::WithinAbs(1.26606587775201, 1e-12));
  REQUIRE_THAT(std::exp(detail::log_bessel_i1(1.0)),
               Catch::Matchers::WithinAbs(0.565159103992485, 1e-12));
  // I0(5) = 27.2398718236044, I1(5) = 24.3356421424967.
  REQUIRE_THAT(std::exp(detail::log_bessel_i0(5.0)),
               Catch::Matchers::WithinAbs(27.2398718236044, 1e-10));
  REQUIRE_THAT(std::exp(detail::log_bessel_i1(5.0)),
               Catch::Matchers::WithinAbs(24.3356421424967, 1e-10));
  // Continuity across the series/asymptotic switch at z = 30.
  const double below = detail::log_bessel_i0(29.999);
  const double above = detail::log_bessel_i0(30.001);
  REQUIRE_THAT(above - below, Catch::Matchers::WithinAbs(0.002 * 1.0, 1e-4));
  REQUIRE_THAT(detail::bessel_ratio(1.0),
               Catch::Matchers::WithinAbs(0.565159103992485 / 1.26606587775201,
                                          1e-12));
  REQUIRE(detail::bessel_ratio(1000.0) < 1.0);
  REQUIRE(detail::bessel_ratio(1000.0) > 0.999);
}

TEST_CASE("Rician mean identities") {
  // nu = 0 is a Rayleigh distribution with mean sigma*sqrt(pi/2).
  RicianClass rayleigh{0.0, 2.0, 0.5};
  REQUIRE_THAT(rayleigh.mean(),
               Catch::Matchers::WithinAbs(2.0 * std::sqrt(M_PI / 2.0), 1e-10));
  // High SNR: mean approaches sqrt(nu^2 + sigma^2).
  RicianClass strong{100.0, 5.0, 0.5};
  REQUIRE_THAT(strong.mean(),
               Catch::Matchers::WithinAbs(std::sqrt(100.0 * 100.0 + 25.0),
                                          1e-8));
  // Continuity across the SNR = 3 switch.
  RicianClass a{2.999, 1.0, 0.5}, b{3.001, 1.0, 0.5};
  REQUIRE(std::abs(a.mean() - b.mean()) < 0.01);
}

TEST_CASE("Gaussian mixture recovers planted parameters") {
  detail::Rng rng(1001);
  std::vector<double> samples;
  samples.reserve(60000);
  for (int i = 0; i < 40000; ++i) samples.push_back(0.0 + 5.0 * rng.gaussian());
  for (int i = 0; i < 20000; ++i)
    samples.push_back(100.0 + 5.0 * rng.gaussian());
  const Histogram h = build_histogram(volume_from_samples(samples));
  const GaussianMixture m = fit_gaussian_mixture(h);

  REQUIRE_THAT(m.background.mu, Catch::Matchers::WithinAbs(0.0, 1.0));
  REQUIRE_THAT(m.foreground.mu, Catch::Matchers::WithinAbs(100.0, 1.0));
  REQUIRE_THAT(std::sqrt(m.background.sigma2),
               Catch::Matchers::WithinAbs(5.0, 0.5));
  REQUIRE_THAT(std::sqrt(m.foreground.sigma2),
               Catch::Matchers::WithinAbs(5.0, 0.5));
  REQUIRE_THAT(m.background.weight, Catch::Matchers::WithinAbs(2.0 / 3.0, 0.02));
  REQUIRE_THAT(m.foreground.weight, Catch::Matchers::WithinAbs(1.0 / 3.0, 0.02));

  // EM log-likelihood must be non-decreasing (up to roundoff).
  for (size_t i = 1; i < m.ll_trace.size(); ++i)
    REQUIRE(m.ll_trace[i] >= m.ll_trace[i - 1] - 1e-7 * std::abs(m.ll_trace[i - 1]));
}

TEST_CASE("background class follows the dominant mode, not the order") {
  detail::Rng rng(55);
  std::vector<double> samples;
  // Dominant mode at the HIGH end: background should be the high class.
  for (int i = 0; i < 10000; ++i) samples.push_back(-50.0 + 4.0 * rng.gaussian());
  for (int i = 0; i < 40000; ++i) samples.push_back(30.0 + 4.0 * rng.gaussian());
  const Histogram h = build_histogram(volume_from_samples(samples));
  const GaussianMixture m = fit_gaussian_mixture(h);
  REQUIRE(m.background.mu > m.foreground.mu);
  REQUIRE_THAT(m.background.mu, Catch::Matchers::WithinAbs(30.0, 1.0));
}

TEST_CASE("Rician mixture recovers a Rayleigh background and strong foreground") {
  detail::Rng rng(2024);
  std::vector<double> samples;
  samples.reserve(80000);
  for (int i = 0; i < 50000; ++i) samples.push_back(rician_draw(rng, 0.0, 10.0));
  for (int i = 0; i < 30000; ++i) samples.push_back(rician_draw(rng, 80.0, 10.0));
  const Histogram h = build_histogram(volume_from_samples(samples));
  const RicianMixture m = fit_rician_mixture(h);

  // Background is the noise-dominated class: nu below sigma. Low-SNR Rician
  // densities are nearly unidentifiable in (nu, sigma), so EM may trade a
  // small nu against a slightly lower sigma; only SNR < 1 is meaningful.
  REQUIRE(m.background.nu < m.background.sigma);
  REQUIRE_THAT(m.background.sigma, Catch::Matchers::WithinAbs(10.0, 2.0));
  REQUIRE_THAT(m.foreground.nu, Catch::Matchers::WithinAbs(80.0, 3.0));
  REQUIRE_THAT(m.foreground.sigma, Catch::Matchers::WithinAbs(10.0, 2.0));
  REQUIRE_THAT(m.foreground.mean(),
               Catch::Matchers::WithinAbs(std::sqrt(80.0 * 80.0 + 100.0), 3.0));

  for (size_t i = 1; i < m.ll_trace.size(); ++i)
    REQUIRE(m.ll_trace[i] >= m.ll_trace[i - 1] - 1e-7 * std::abs(m.ll_trace[i - 1]));
}

TEST_CASE("Rician fit rejects signed data") {
  Volume v = volume_from_samples({-1, 0, 1, 2, 3, 4});
  const Histogram h = build_histogram(v, 8);
  REQUIRE_THROWS_AS(fit_rician_mixture(h), DomainError);
}

TEST_CASE("lambda is unit-equivariant") {
  detail::Rng rng(31);
  std::vector<double> base;
  base.reserve(60000);
  for (int i = 0; i < 40000; ++i) base.push_back(rician_draw(rng, 0.0, 8.0));
  for (int i = 0; i < 20000; ++i) base.push_back(rician_draw(rng, 90.0, 8.0));

  const ChannelScale ref = estimate_lambda(volume_from_samples(base));
  REQUIRE(ref.provenance == "rician");
  // Foreground mean ~ sqrt(90^2 + 64) ~ 90.35.
  REQUIRE_THAT(1.0 / ref.lambda,
               Catch::Matchers::WithinAbs(std::sqrt(90.0 * 90.0 + 64.0), 4.0));

  for (double k : {0.5, 10.0, 0.01}) {
    std::vector<double> scaled = base;
    for (auto& x : scaled) x *= k;
    const ChannelScale s = estimate_lambda(volume_from_samples(scaled));
    // lambda must scale as 1/k so lambda*intensity is unit free.
    REQUIRE_THAT(s.lambda * k / ref.lambda,
                 Catch::Matchers::WithinAbs(1.0, 0.10));
  }
}

TEST_CASE("signed data falls back to the Gaussian route") {
  detail::Rng rng(66);
  std::vector<double> samples;
  // CT-like: background near -1000, tissue near 40.
  for (int i = 0; i < 40000; ++i)
    samples.push_back(-1000.0 + 20.0 * rng.gaussian());
  for (int i = 0; i < 20000; ++i) samples.push_back(40.0 + 30.0 * rng.gaussian());
  const ChannelScale s = estimate_lambda(volume_from_samples(samples));
  REQUIRE(s.provenance == "gaussian");
  REQUIRE_THAT(1.0 / s.lambda, Catch::Matchers::WithinAbs(1040.0, 50.0));
}
