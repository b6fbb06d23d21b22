#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "lmflow/arima.hpp"
#include "lmflow/error.hpp"

using namespace lmflow;
using namespace lmflow::arima;

namespace {

std::vector<double> white_noise(int n, std::uint64_t seed, double mean = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = mean + z(rng);
  return x;
}

std::vector<double> ar1(int n, double phi, std::uint64_t seed, double mean = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  double x = z(rng) / std::sqrt(1.0 - phi * phi);
  std::vector<double> out(n);
  for (int t = 0; t < n; ++t) {
    x = phi * x + z(rng);
    out[t] = mean + x;
  }
  return out;
}

// Exact AR log-likelihood written as the conditional (CSS) part plus the
// stationary Gaussian density of the first p observations.
double ar_loglik_oracle(const std::vector<double>& w, const std::vector<double>& phi, double mu,
                        double sigma2) {
  const double log2pi = std::log(2.0 * M_PI);
  const int p = static_cast<int>(phi.size());
  double css = 0.0;
  for (std::size_t t = p; t < w.size(); ++t) {
    double e = w[t] - mu;
    for (int i = 0; i < p; ++i) e -= phi[i] * (w[t - 1 - i] - mu);
    css += e * e;
  }
  const double n_cond = static_cast<double>(w.size() - p);
  double ll = -0.5 * n_cond * (log2pi + std::log(sigma2)) - 0.5 * css / sigma2;
  if (p == 1) {
    const double g0 = sigma2 / (1.0 - phi[0] * phi[0]);
    const double x = w[0] - mu;
    ll += -0.5 * (log2pi + std::log(g0)) - 0.5 * x * x / g0;
  } else if (p == 2) {
    const double p1 = phi[0], p2 = phi[1];
    const double g0 = sigma2 * (1.0 - p2) / ((1.0 + p2) * ((1.0 - p2) * (1.0 - p2) - p1 * p1));
    const double g1 = g0 * p1 / (1.0 - p2);
    const double det = g0 * g0 - g1 * g1;
    const double x0 = w[0] - mu, x1 = w[1] - mu;
    const double quad = (g0 * x0 * x0 - 2.0 * g1 * x0 * x1 + g0 * x1 * x1) / det;
    ll += -log2pi - 0.5 * std::log(det) - 0.5 * quad;
  }
  return ll;
}

}  // namespace

TEST_CASE("spec bounds and length precondition") {
  CHECK_THROWS_AS((ArimaSpec{3, 0, 0, false}.validate()), Error);
  CHECK_THROWS_AS((ArimaSpec{0, 2, 0, false}.validate()), Error);
  std::vector<double> x{1, 2, 3, 4};
  try {
    fit(x, ArimaSpec{1, 1, 0, true});
    FAIL("expected SeriesTooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SeriesTooShort);
  }
}

TEST_CASE("white noise fits") {
  const auto x = white_noise(200, 11);
  const auto f0 = fit(x, ArimaSpec{0, 0, 0, false});
  CHECK(f0.drift_coeff == 0.0);
  CHECK(f0.sigma2 == doctest::Approx(1.0).epsilon(0.2));
  const auto f1 = fit(x, ArimaSpec{0, 0, 0, true});
  CHECK(std::abs(f1.drift_coeff) < 0.2);
  CHECK(f1.drift_coeff == doctest::Approx(std::accumulate(x.begin(), x.end(), 0.0) / 200.0).epsilon(1e-10));
  CHECK(f1.n_obs == 200);
}

TEST_CASE("constant series clamps the innovation variance") {
  std::vector<double> c(12, 0.37);
  const auto f = fit(c, ArimaSpec{0, 0, 0, true});
  CHECK(f.sigma2 == kSigma2Floor);
  CHECK(f.drift_coeff == doctest::Approx(0.37));
  CHECK(!f.warnings.empty());
  const auto fc = forecast(f, c, 4);
  for (double v : fc.mean_path) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
  const auto sel = select(c);
  CHECK(forecast(sel, c, 3).mean_path[2] == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("AR(1) coefficient recovery") {
  const auto x = ar1(500, 0.7, 99);
  const auto f = fit(x, ArimaSpec{1, 0, 0, true});
  REQUIRE(f.ar_coeffs.size() == 1);
  CHECK(std::abs(f.ar_coeffs[0] - 0.7) < 0.1);
  CHECK(std::abs(f.ar_coeffs[0]) < 1.0);
}

TEST_CASE("state-space likelihood equals CSS plus initial-block density for pure AR") {
  const auto x1 = ar1(60, 0.6, 5, 0.3);
  for (double phi : {-0.8, 0.2, 0.6, 0.95}) {
    const double exact = arma_loglik(x1, std::vector<double>{phi}, {}, 0.3, 1.7);
    const double oracle = ar_loglik_oracle(x1, {phi}, 0.3, 1.7);
    CHECK(std::abs(exact - oracle) <= 1e-6 * std::abs(oracle));
  }
  const auto x2 = white_noise(40, 8, -1.0);
  for (auto [a, b] : {std::pair{0.5, 0.2}, std::pair{1.2, -0.5}, std::pair{-0.3, 0.4}}) {
    const double exact = arma_loglik(x2, std::vector<double>{a, b}, {}, -1.0, 0.8);
    const double oracle = ar_loglik_oracle(x2, {a, b}, -1.0, 0.8);
    CHECK(std::abs(exact - oracle) <= 1e-6 * std::abs(oracle));
  }
}

TEST_CASE("fit maximises the exact likelihood it reports") {
  const auto x = ar1(80, 0.5, 17, 2.0);
  const auto f = fit(x, ArimaSpec{1, 0, 0, true});
  const double at_opt = arma_loglik(x, f.ar_coeffs, {}, f.drift_coeff, f.sigma2);
  CHECK(at_opt == doctest::Approx(f.loglik).epsilon(1e-10));
  for (double d : {-0.05, 0.05}) {
    const double nearby = arma_loglik(x, std::vector<double>{f.ar_coeffs[0] + d}, {}, f.drift_coeff, f.sigma2);
    CHECK(nearby <= at_opt + 1e-9);
  }
}

TEST_CASE("one-step residuals are centred") {
  const auto x = ar1(300, 0.6, 123, 1.0);
  const auto f = fit(x, ArimaSpec{1, 0, 0, true});
  double mean = 0.0;
  for (double r : f.residuals) mean += r;
  mean /= f.residuals.size();
  const double se = std::sqrt(f.sigma2 / f.residuals.size());
  CHECK(std::abs(mean) < 2.0 * se);
}

TEST_CASE("forecast closed forms") {
  SUBCASE("random walk forecast is the last value") {
    const std::vector<double> x{0.1, 0.4, 0.2, 0.5, 0.9, 0.73};
    const auto f = fit(x, ArimaSpec{0, 1, 0, false});
    const auto fc = forecast(f, x, 4);
    for (double v : fc.mean_path) CHECK(v == 0.73);
    for (int h = 1; h < 4; ++h) CHECK(fc.variance_path[h] >= fc.variance_path[h - 1]);
    CHECK(fc.variance_path[3] == doctest::Approx(4.0 * f.sigma2));
  }
  SUBCASE("white noise with mean") {
    ArimaFit f;
    f.spec = {0, 0, 0, true};
    f.drift_coeff = 0.42;
    f.sigma2 = 0.3;
    const std::vector<double> x{0.1, 0.9, 0.3};
    const auto fc = forecast(f, x, 3);
    for (int h = 0; h < 3; ++h) {
      CHECK(fc.mean_path[h] == doctest::Approx(0.42).epsilon(1e-15));
      CHECK(fc.variance_path[h] == doctest::Approx(0.3).epsilon(1e-15));
    }
  }
  SUBCASE("AR(1) deviations halve each step") {
    ArimaFit f;
    f.spec = {1, 0, 0, true};
    f.ar_coeffs = {0.5};
    f.drift_coeff = 1.0;
    f.sigma2 = 1.0;
    const std::vector<double> x{0.9, 1.1, 1.2};
    const auto fc = forecast(f, x, 4);
    const double expected[] = {0.1, 0.05, 0.025, 0.0125};
    for (int h = 0; h < 4; ++h) CHECK(fc.mean_path[h] - 1.0 == doctest::Approx(expected[h]).epsilon(1e-12));
    // psi_j = 0.5^j
    CHECK(fc.variance_path[1] == doctest::Approx(1.25));
  }
  SUBCASE("drift model extrapolates linearly") {
    std::vector<double> x;
    for (int t = 0; t < 12; ++t) x.push_back(0.5 * t);
    ArimaFit f;
    f.spec = {0, 1, 0, true};
    f.drift_coeff = 0.5;
    f.sigma2 = 1.0;
    const auto fc = forecast(f, x, 3);
    CHECK(fc.mean_path[2] == doctest::Approx(5.5 + 1.5));
  }
}

TEST_CASE("stationary forecasts approach the mean monotonically") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto x = ar1(60, 0.6, seed, 0.5);
    const auto f = fit(x, ArimaSpec{1, 0, 0, true});
    const auto fc = forecast(f, x, 12);
    double prev = std::abs(x.back() - f.drift_coeff);
    for (double m : fc.mean_path) {
      const double dev = std::abs(m - f.drift_coeff);
      CHECK(dev <= prev + 1e-12);
      prev = dev;
    }
  }
}

TEST_CASE("order selection on white noise picks the (0,0,0) family") {
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto f = select(white_noise(200, 1000 + seed));
    if (f.spec.p == 0 && f.spec.d == 0 && f.spec.q == 0) ++hits;
  }
  MESSAGE("white-noise family selected in " << hits << "/100");
  // The 90% Monte Carlo target is tracked by the acceptance suite; here the
  // white-noise family must at least be the dominant choice.
  CHECK(hits >= 70);
}

TEST_CASE("order selection on a linear trend picks a drift model") {
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto x = white_noise(40, 5000 + seed);
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = 0.5 * t + 0.1 * x[t];
    const auto f = select(x);
    if (f.spec.d == 1 && f.spec.drift) ++hits;
  }
  MESSAGE("drift model selected in " << hits << "/100");
  CHECK(hits >= 90);
}

TEST_CASE("a zero band is plain minimum AICc") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto x = white_noise(60, 300 + seed);
    const auto plain = select(x, 0.0);
    double best = plain.aicc;
    for (int d = 0; d <= 1; ++d)
      for (int p = 0; p <= 2; ++p)
        for (int q = 0; q <= 1; ++q)
          for (bool drift : {false, true}) best = std::min(best, fit(x, ArimaSpec{p, d, q, drift}).aicc);
    CHECK(plain.aicc == best);
    CHECK(select(x).spec.n_params() <= plain.spec.n_params());
  }
}

TEST_CASE("short series restrict the grid without failing") {
  const std::vector<double> x{0.2, 0.5, 0.1, 0.4, 0.3, 0.6};
  const auto f = select(x);
  CHECK(static_cast<int>(x.size()) >= f.spec.min_length());
  CHECK_THROWS_AS(select(std::vector<double>{1, 2, 3, 4, 5}), Error);
}
