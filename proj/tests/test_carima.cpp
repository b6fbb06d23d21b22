#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "lmflow/carima.hpp"
#include "lmflow/error.hpp"
#include "lmflow/flow_io.hpp"
#include "test_util.hpp"

using namespace lmflow;
using namespace lmflow::carima;

namespace {

const QuarterId kStart(2016, 1);

// Series whose matrices are exactly `ms` (destination quarters start+1..) and
// whose shares are the anchor propagated through them. Counts are the
// expected counts of `n` records, so bootstrap replicates scatter around the
// given matrices.
QuarterSeries series_of(const StateSpace& space, const Eigen::RowVectorXd& anchor,
                        const std::vector<Eigen::MatrixXd>& ms, double n = 20000) {
  QuarterSeries s{space, QuarterWindow{kStart, kStart.plus(static_cast<int>(ms.size()))},
                  {}, {}, {}, {}, {}, {}};
  const int k = space.size();
  ShareVector pi(space, anchor, kStart);
  auto put_shares = [&](const ShareVector& v) {
    s.shares.emplace(v.period(), v);
    ShareCounts sc{v.period(), v.values().transpose() * n, static_cast<long>(n), n};
    s.share_counts.emplace(v.period(), sc);
  };
  put_shares(pi);
  for (std::size_t t = 0; t < ms.size(); ++t) {
    const QuarterId q = kStart.plus(static_cast<int>(t) + 1);
    TransitionMatrix m(space, ms[t], q);
    const Eigen::MatrixXd counts = pi.values().transpose().asDiagonal() * ms[t] * n;
    FlowCounts fc{space,
                  q,
                  counts,
                  counts.rowwise().sum(),
                  counts,
                  counts.array().round().cast<int>(),
                  static_cast<long>(n)};
    s.counts.emplace(q, fc);
    pi = propagate(pi, m);
    s.matrices.emplace(q, m);
    put_shares(pi);
  }
  return s;
}

StateSpace three() { return StateSpace({"T", "P", "U"}); }

Eigen::MatrixXd base3() {
  Eigen::MatrixXd m(3, 3);
  m << 0.80, 0.12, 0.08, 0.03, 0.93, 0.04, 0.15, 0.10, 0.75;
  return m;
}

// Small seeded noise around `base`, renormalized.
std::vector<Eigen::MatrixXd> noisy(const Eigen::MatrixXd& base, int n, std::uint64_t seed,
                                   double sd = 0.005) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, sd);
  std::vector<Eigen::MatrixXd> out;
  for (int t = 0; t < n; ++t) {
    Eigen::MatrixXd m = base;
    for (int i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < m.cols(); ++j) m(i, j) = std::max(1e-4, m(i, j) + z(rng));
      m.row(i) /= m.row(i).sum();
    }
    out.push_back(m);
  }
  return out;
}

InterventionSpec spec_at(int pre_matrices, int horizon) {
  return InterventionSpec{QuarterWindow{kStart, kStart.plus(pre_matrices)}, horizon};
}

bootstrap::BootstrapConfig small_boot(int threads = 1) {
  bootstrap::BootstrapConfig cfg;
  cfg.replicates = 100;
  cfg.master_seed = 11;
  cfg.mode = bootstrap::Mode::FixedOrders;
  cfg.threads = threads;
  return cfg;
}

void check_row_stochastic(const MatrixChain& chain) {
  for (const auto& m : chain.matrices()) {
    CHECK(m.entries().minCoeff() >= 0.0);
    for (int i = 0; i < m.size(); ++i) CHECK(std::abs(m.entries().row(i).sum() - 1.0) < 1e-9);
  }
}

}  // namespace

TEST_CASE("scale names round-trip") {
  for (Scale s : {Scale::Logit, Scale::Raw, Scale::Alr}) CHECK(parse_scale(to_string(s)) == s);
  CHECK_THROWS_AS(parse_scale("probit"), Error);
}

TEST_CASE("constant history forecasts the same matrix") {
  const auto s = series_of(three(), Eigen::RowVector3d(0.3, 0.5, 0.2),
                           std::vector<Eigen::MatrixXd>(10, base3()));
  for (Scale scale : {Scale::Logit, Scale::Raw, Scale::Alr}) {
    ForecastOptions opt;
    opt.scale = scale;
    const auto fc = forecast_matrices(s, spec_at(7, 3), opt);
    REQUIRE(fc.chain.size() == 3);
    CHECK(fc.chain[0].period() == kStart.plus(8));
    for (const auto& m : fc.chain.matrices()) {
      CHECK((m.entries() - base3()).cwiseAbs().maxCoeff() < 1e-9);
    }
    CHECK(fc.fallback_rows.empty());
  }
}

TEST_CASE("a linear logit trend is continued monotonically") {
  std::vector<Eigen::MatrixXd> ms;
  for (int t = 0; t < 12; ++t) {
    Eigen::MatrixXd m = base3();
    const double p = 1.0 / (1.0 + std::exp(-(-2.5 + 0.08 * t)));
    m(0, 1) = p;
    m(0, 0) = 1.0 - p - m(0, 2);
    ms.push_back(m);
  }
  const auto s = series_of(three(), Eigen::RowVector3d(0.3, 0.5, 0.2), ms);
  const auto fc = forecast_matrices(s, spec_at(8, 4));
  const auto& cell = fc.cells[0 * 3 + 1];
  REQUIRE(cell.mean.size() == 4);
  CHECK(cell.mean[0] > ms[7](0, 1));
  for (int h = 1; h < 4; ++h) {
    CHECK(cell.mean[h] > cell.mean[h - 1]);
    CHECK(fc.chain[h](0, 1) > fc.chain[h - 1](0, 1));
  }
  // The trend is exact, so the forecast sits on the true continuation.
  CHECK(cell.mean[3] == doctest::Approx(ms[11](0, 1)).epsilon(1e-4));
}

TEST_CASE("forecast chains are row-stochastic under every scale and option") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 6; ++rep) {
    const auto ms = noisy(testing::random_stochastic(3, rng), 12, rep, 0.03);
    const auto s = series_of(three(), Eigen::RowVector3d(0.3, 0.5, 0.2), ms);
    for (Scale scale : {Scale::Logit, Scale::Raw, Scale::Alr}) {
      for (bool seasonal : {false, true}) {
        ForecastOptions opt;
        opt.scale = scale;
        opt.seasonal = seasonal;
        check_row_stochastic(forecast_matrices(s, spec_at(8, 4), opt).chain);
      }
    }
  }
}

TEST_CASE("rows fall back to the last observed row when most cell fits fail") {
  const auto ms = noisy(base3(), 4, 1);
  const auto s = series_of(three(), Eigen::RowVector3d(0.3, 0.5, 0.2), ms);
  // Two matrices are too short for any model.
  const auto fc = forecast_matrices(s, spec_at(2, 2));
  CHECK(fc.fallback_rows == std::vector<int>{0, 1, 2});
  CHECK(!fc.warnings.empty());
  for (const auto& m : fc.chain.matrices()) {
    CHECK((m.entries() - ms[1]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("cell forecasts run identically on one or several threads") {
  const auto s = series_of(three(), Eigen::RowVector3d(0.3, 0.5, 0.2), noisy(base3(), 12, 2));
  ForecastOptions one, many;
  many.threads = 4;
  const auto a = forecast_matrices(s, spec_at(8, 4), one);
  const auto b = forecast_matrices(s, spec_at(8, 4), many);
  for (std::size_t h = 0; h < a.chain.size(); ++h) {
    CHECK(a.chain[h].entries() == b.chain[h].entries());
  }
}

TEST_CASE("fitted path") {
  const StateSpace ab({"A", "B"});
  const auto s = series_of(ab, Eigen::RowVector2d(0.4, 0.6),
                           std::vector<Eigen::MatrixXd>(4, Eigen::MatrixXd::Identity(2, 2)));
  const auto path = fitted_path(s, spec_at(3, 1));
  REQUIRE(path.shares.size() == 1);
  CHECK(path.shares[0].values().isApprox(s.share(kStart.plus(3)).values()));
  CHECK_THROWS_AS(fitted_path(s, spec_at(3, 2)), Error);
}

TEST_CASE("identical fitted and forecast chains give exactly zero effects") {
  std::mt19937_64 rng(9);
  const StateSpace space = testing::numbered_space(4);
  std::vector<TransitionMatrix> ms;
  for (int h = 1; h <= 4; ++h) ms.emplace_back(space, testing::random_stochastic(4, rng), kStart.plus(h));
  const MatrixChain chain(ms);
  const ShareVector anchor(space, testing::random_shares(4, rng), kStart);
  const auto e = compute_effects(anchor, chain, chain);
  CHECK(e.share_diffs.isZero(0.0));
  CHECK(e.cumulative_effects.isZero(0.0));
}

TEST_CASE("horizon-one share difference is the anchor times the matrix gap") {
  std::mt19937_64 rng(10);
  const StateSpace space = testing::numbered_space(5);
  for (int rep = 0; rep < 50; ++rep) {
    const TransitionMatrix fit(space, testing::random_stochastic(5, rng), kStart.next());
    const TransitionMatrix fc(space, testing::random_stochastic(5, rng), kStart.next());
    const ShareVector anchor(space, testing::random_shares(5, rng), kStart);
    const auto e = compute_effects(anchor, MatrixChain({fit}), MatrixChain({fc}));
    const Eigen::RowVectorXd expected = anchor.values() * matrix_difference(fit, fc);
    CHECK((e.share_diffs - expected).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(e.share_diffs.sum()) < 1e-8);
    CHECK(e.cumulative_effects.rowwise().sum().cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("effects scale with population and are thread independent") {
  auto ms = noisy(base3(), 10, 4);
  // A visible post-period change in the T row.
  for (int t = 7; t < 10; ++t) {
    ms[t](0, 1) += 0.05;
    ms[t](0, 0) -= 0.05;
  }
  const auto s = series_of(three(), Eigen::RowVector3d(0.3, 0.5, 0.2), ms);
  const auto spec = spec_at(7, 3);
  const auto a = effects(s, spec, 1e6, small_boot(1));
  const auto b = effects(s, spec, 3e6, small_boot(1));
  const auto c = effects(s, spec, 1e6, small_boot(3));
  for (int i = 0; i < 3; ++i) {
    CHECK(b.count_diffs()(i) == doctest::Approx(3.0 * a.count_diffs()(i)).epsilon(1e-12));
    CHECK(b.count_diff_ci[i].significant() == a.count_diff_ci[i].significant());
    CHECK(a.count_diff_ci[i].significant() == a.share_diff_ci[i].significant());
  }
  CHECK(to_json(a).dump() == to_json(c).dump());
  CHECK(a.point.cumulative_effects(0, 1) > 0.05);
  CHECK(a.cumulative_ci[0 * 3 + 1].significant());
  CHECK(std::abs(a.point.share_diffs.sum()) < 1e-8);
  CHECK(a.count_diff_ci[0].b_effective == 100);
  CHECK_THROWS_AS(effects(s, spec, 0.0, small_boot()), Error);
}

TEST_CASE("every bootstrap mode runs and labels itself in the report") {
  const auto s = series_of(three(), Eigen::RowVector3d(0.3, 0.5, 0.2), noisy(base3(), 10, 5));
  for (auto mode : {bootstrap::Mode::FullPipeline, bootstrap::Mode::FixedOrders,
                    bootstrap::Mode::EstimationOnly}) {
    auto cfg = small_boot();
    cfg.mode = mode;
    const auto r = effects(s, spec_at(7, 3), 1e6, cfg);
    CHECK(to_json(r)["bootstrap"]["mode"] == bootstrap::to_string(mode));
  }
}

TEST_CASE("placebo and shift harnesses") {
  const auto s = series_of(three(), Eigen::RowVector3d(0.3, 0.5, 0.2), noisy(base3(), 12, 6));
  CHECK_THROWS_AS(placebo(s, spec_at(6, 4), kStart.plus(9), 1e6, small_boot()), Error);
  try {
    placebo(s, spec_at(6, 4), kStart.plus(9), 1e6, small_boot());
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PlaceboOverlap);
  }
  const auto p = placebo(s, spec_at(6, 3), kStart.plus(9), 1e6, small_boot());
  CHECK(p.pass == !p.report.any_count_significant());

  CHECK_THROWS_AS(shift_tstar(s, spec_at(7, 3), kStart.plus(9), 1e6, small_boot()), Error);
  const auto same = shift_tstar(s, spec_at(7, 3), kStart.plus(7), 1e6, small_boot());
  CHECK(to_json(same.base).dump() == to_json(same.shifted).dump());
  const auto moved = shift_tstar(s, spec_at(7, 3), kStart.plus(8), 1e6, small_boot());
  CHECK(moved.shift == 1);
  CHECK(moved.shifted.spec.t_star() == kStart.plus(8));
}

TEST_CASE("write_report emits the tables and per-cell series") {
  const auto s = series_of(three(), Eigen::RowVector3d(0.3, 0.5, 0.2), noisy(base3(), 10, 7));
  EffectOptions opt;
  opt.keep_replicates = true;
  const auto r = effects(s, spec_at(7, 3), 1e6, small_boot(), opt);
  const auto dir = std::filesystem::temp_directory_path() / "lmflow_report";
  std::filesystem::remove_all(dir);
  write_report(r, s, dir);
  for (const char* f : {"effects.json", "table2a.csv", "table2b.csv", "table2c.csv",
                        "series_T_P.csv", "replicates_effects.csv"}) {
    CHECK_MESSAGE(std::filesystem::exists(dir / f), f);
  }
  const auto series_csv = io::read_text_file(dir / "series_T_P.csv");
  CHECK(series_csv.rfind("period,observed,forecast,lo95,hi95\n", 0) == 0);
  const auto j = nlohmann::json::parse(io::read_text_file(dir / "effects.json"));
  CHECK(j["population"] == 1e6);
  std::filesystem::remove_all(dir);
}
