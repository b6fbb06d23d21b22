#include <doctest.h>

#include "lmflow/error.hpp"
#include "lmflow/flow_core.hpp"
#include "lmflow/flow_io.hpp"
#include "test_util.hpp"

using namespace lmflow;

namespace {
const QuarterId q1(2018, 1);
const QuarterId q2(2018, 2);

StateSpace two() { return StateSpace({"A", "B"}); }
}  // namespace

TEST_CASE("quarter ids order, step and format") {
  CHECK(QuarterId(2018, 4).next() == QuarterId(2019, 1));
  CHECK(QuarterId(2019, 1).prev() == QuarterId(2018, 4));
  CHECK(QuarterId(2016, 1) < QuarterId(2016, 2));
  CHECK(QuarterId(2018, 3).minus(QuarterId(2016, 1)) == 10);
  CHECK(QuarterId::parse("2018Q3") == QuarterId(2018, 3));
  CHECK(QuarterId(2018, 3).str() == "2018Q3");
  CHECK_THROWS_AS(QuarterId::parse("2018Q5"), Error);
  CHECK_THROWS_AS(QuarterId::parse("2018-3"), Error);
  CHECK_THROWS_AS(QuarterId::parse("18Q3"), Error);
  const auto w = QuarterWindow::parse("2016Q1:2018Q3");
  CHECK(w.size() == 11);
  CHECK(w.contains(QuarterId(2017, 2)));
}

TEST_CASE("state space validation") {
  CHECK(StateSpace::canonical().labels() == std::vector<std::string>{"SE", "TE", "PE", "U", "IN"});
  CHECK_THROWS_AS(StateSpace({"A"}), Error);
  CHECK_THROWS_AS(StateSpace({"A", "A"}), Error);
  CHECK_THROWS_AS(StateSpace({"A", ""}), Error);
  CHECK(StateSpace::canonical().index_of("U") == 3);
}

TEST_CASE("constructors renormalise within tolerance and reject beyond it") {
  Eigen::MatrixXd m(2, 2);
  m << 0.9, 0.1 + 5e-10, 0.2, 0.8;
  TransitionMatrix tm(two(), m, q1);
  CHECK(tm.entries().row(0).sum() == doctest::Approx(1.0).epsilon(1e-15));
  m(0, 1) = 0.2;
  CHECK_THROWS_AS(TransitionMatrix(two(), m, q1), Error);
  m << 1.1, -0.1, 0.5, 0.5;
  CHECK_THROWS_AS(TransitionMatrix(two(), m, q1), Error);
  Eigen::RowVectorXd v(2);
  v << 0.6, 0.5;
  CHECK_THROWS_AS(ShareVector(two(), v, q1), Error);
}

TEST_CASE("propagate") {
  SUBCASE("identity leaves shares unchanged") {
    Eigen::RowVectorXd v(5);
    v << 0.125, 0.080, 0.380, 0.054, 0.361;
    ShareVector pi(StateSpace::canonical(), v, q1);
    auto out = propagate(pi, TransitionMatrix::identity(StateSpace::canonical(), q2));
    for (int i = 0; i < 5; ++i) CHECK(out[i] == doctest::Approx(v(i)).epsilon(1e-15));
    CHECK(out.period() == q2);
  }
  SUBCASE("two-state hand product") {
    Eigen::RowVectorXd v(2);
    v << 0.5, 0.5;
    Eigen::MatrixXd m(2, 2);
    m << 0.9, 0.1, 0.2, 0.8;
    auto out = propagate(ShareVector(two(), v, q1), TransitionMatrix(two(), m, q2));
    CHECK(out[0] == doctest::Approx(0.55).epsilon(1e-14));
    CHECK(out[1] == doctest::Approx(0.45).epsilon(1e-14));
  }
  SUBCASE("errors") {
    Eigen::RowVectorXd v(2);
    v << 0.5, 0.5;
    ShareVector pi(two(), v, q1);
    CHECK_THROWS_WITH_AS(propagate(pi, TransitionMatrix::identity(two(), QuarterId(2018, 3))),
                         doctest::Contains("does not follow"), Error);
    try {
      propagate(pi, TransitionMatrix::identity(StateSpace({"A", "C"}), q2));
      FAIL("expected StateSpaceMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::StateSpaceMismatch);
    }
  }
}

TEST_CASE("chain_product") {
  SUBCASE("identities") {
    std::vector<TransitionMatrix> ms;
    for (int h = 0; h < 4; ++h) ms.push_back(TransitionMatrix::identity(two(), q1.plus(h)));
    auto p = chain_product(MatrixChain(ms));
    CHECK((p.entries() - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.period() == q1.plus(3));
  }
  SUBCASE("absorbing uniform second step") {
    Eigen::MatrixXd a(2, 2), b(2, 2);
    a << 0.9, 0.1, 0.2, 0.8;
    b << 0.5, 0.5, 0.5, 0.5;
    auto p = chain_product(MatrixChain({TransitionMatrix(two(), a, q1), TransitionMatrix(two(), b, q2)}));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(p(i, j) == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("errors") {
    try {
      chain_product(MatrixChain());
      FAIL("expected EmptyChain");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyChain);
    }
    CHECK_THROWS_AS(MatrixChain({TransitionMatrix::identity(two(), q1),
                                 TransitionMatrix::identity(two(), q1.plus(2))}),
                    Error);
  }
}

TEST_CASE("matrix_difference") {
  const auto space = StateSpace::canonical();
  SUBCASE("a - a is zero") {
    std::mt19937_64 rng(1);
    TransitionMatrix a(space, testing::random_stochastic(5, rng), q1);
    CHECK(matrix_difference(a, a).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("published TE row of the cumulative effect table is a valid difference row") {
    // Fitted minus forecasted cumulative TE row.
    Eigen::RowVectorXd diff(5);
    diff << -0.001, -0.066, 0.081, -0.005, -0.009;
    CHECK(std::abs(diff.sum()) < 1e-12);
    Eigen::MatrixXd forecast = Eigen::MatrixXd::Identity(5, 5);
    forecast.row(1) << 0.03, 0.60, 0.20, 0.07, 0.10;
    Eigen::MatrixXd fitted = forecast;
    fitted.row(1) += diff;
    auto d = matrix_difference(TransitionMatrix(space, fitted, q1), TransitionMatrix(space, forecast, q1));
    for (int j = 0; j < 5; ++j) CHECK(d(1, j) == doctest::Approx(diff(j)).epsilon(1e-12));
  }
  SUBCASE("rows of random differences sum to zero") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 200; ++rep) {
      TransitionMatrix a(space, testing::random_stochastic(5, rng), q1);
      TransitionMatrix b(space, testing::random_stochastic(5, rng), q1);
      auto d = matrix_difference(a, b);
      CHECK(d.rowwise().sum().cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("properties: associativity, fold equivalence, sum-to-one") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> kdist(2, 6), ldist(2, 8);
  for (int rep = 0; rep < 300; ++rep) {
    const int k = kdist(rng);
    const int len = ldist(rng);
    const auto space = testing::numbered_space(k);
    std::vector<TransitionMatrix> ms;
    for (int h = 1; h <= len; ++h) ms.emplace_back(space, testing::random_stochastic(k, rng, 0.3), q1.plus(h));
    const int split = len / 2;
    auto whole = chain_product(MatrixChain(ms));
    auto left = chain_product(MatrixChain({ms.begin(), ms.begin() + split}));
    auto right = chain_product(MatrixChain({ms.begin() + split, ms.end()}));
    Eigen::MatrixXd joined = left.entries() * right.entries();
    CHECK((whole.entries() - joined).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((whole.entries().rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);

    ShareVector pi(space, testing::random_shares(k, rng), q1);
    auto direct = propagate(ShareVector(space, pi.values(), whole.period().plus(-1)), whole);
    auto path = propagate_path(pi, MatrixChain(ms));
    CHECK((direct.values() - path.back().values()).cwiseAbs().maxCoeff() < 1e-10);
    for (const auto& s : path) CHECK(std::abs(s.values().sum() - 1.0) < 1e-9);
  }
}

TEST_CASE("matrix and share serialisation") {
  std::mt19937_64 rng(3);
  const auto space = StateSpace::canonical();
  TransitionMatrix m(space, testing::random_stochastic(5, rng), QuarterId(2018, 3));
  auto back = io::matrix_from_csv(io::matrix_to_csv(m), m.period());
  CHECK((back.entries() - m.entries()).cwiseAbs().maxCoeff() == 0.0);
  auto j = io::to_json(m);
  CHECK(j["period"] == "2018Q3");
  CHECK(j["space"].size() == 5);
  auto back_json = io::matrix_from_json(j);
  CHECK((back_json.entries() - m.entries()).cwiseAbs().maxCoeff() == 0.0);

  ShareVector s(space, testing::random_shares(5, rng), QuarterId(2019, 1));
  CHECK(io::matrix_to_csv(m).rfind("from,SE,TE,PE,U,IN\n", 0) == 0);
  auto s2 = io::shares_from_csv(io::shares_to_csv(s));
  CHECK(s2.period() == s.period());
  CHECK((s2.values() - s.values()).cwiseAbs().maxCoeff() < 1e-15);
  auto s3 = io::shares_from_json(io::to_json(s));
  CHECK((s3.values() - s.values()).cwiseAbs().maxCoeff() < 1e-15);
}
