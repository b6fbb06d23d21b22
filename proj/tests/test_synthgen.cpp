#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "lmflow/error.hpp"
#include "lmflow/estimator.hpp"
#include "lmflow/flow_io.hpp"
#include "lmflow/synthgen.hpp"

using namespace lmflow;
using namespace lmflow::synth;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

WorldConfig small_world(long n, std::uint64_t seed = 3) {
  WorldConfig cfg = WorldConfig::defaults();
  cfg.population = n;
  cfg.seed = seed;
  return cfg;
}

ErrorCode parse_error(const std::string& text) {
  try {
    WorldConfig::parse(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a config error for: " << text);
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("rotation offsets and linked share") {
  const Rotation r;
  CHECK(r.offsets() == std::vector<int>{0, 1, 4, 5});
  CHECK(r.linked_share() == doctest::Approx(0.5));
  CHECK(Rotation{4, 0, 0}.linked_share() == doctest::Approx(0.75));
}

TEST_CASE("under the identity nobody ever changes state") {
  WorldConfig cfg = small_world(1);
  cfg.baseline = Eigen::MatrixXd::Identity(5, 5);
  const auto one = generate(cfg);
  REQUIRE(!one.records.empty());
  for (const auto& r : one.records) CHECK(r.state == one.records.front().state);

  cfg.population = 200;
  std::map<std::string, int> state_of;
  for (const auto& r : generate(cfg).records) {
    auto [it, fresh] = state_of.emplace(r.person_id, r.state);
    CHECK(it->second == r.state);
  }
}

TEST_CASE("records respect the assigned rotation waves") {
  const auto world = generate(small_world(2000));
  std::map<std::string, std::vector<QuarterId>> seen;
  for (const auto& r : world.records) seen[r.person_id].push_back(r.period);
  const QuarterId first_cohort = QuarterId(2016, 1).plus(-5);
  const int n_cohorts = QuarterId(2019, 3).minus(first_cohort) + 1;
  for (const auto& [id, qs] : seen) {
    const long p = std::stol(id.substr(1));
    const QuarterId entry = first_cohort.plus(static_cast<int>(p % n_cohorts));
    std::set<QuarterId> allowed;
    for (int off : Rotation{}.offsets()) allowed.insert(entry.plus(off));
    for (const auto& q : qs) CHECK(allowed.count(q) == 1);
  }
}

TEST_CASE("pre-intervention records match the no-intervention twin exactly") {
  WorldConfig base = small_world(3000, 17);
  WorldConfig treated = base;
  treated.t_star = QuarterId(2018, 3);
  treated.shift = Eigen::MatrixXd::Zero(5, 5);
  treated.shift(1, 2) = 0.8;
  base.t_star = treated.t_star;
  const auto a = generate(base);
  const auto b = generate(treated);
  REQUIRE(a.records.size() == b.records.size());
  bool any_post_diff = false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    if (a.records[i].period <= *treated.t_star) {
      CHECK(a.records[i] == b.records[i]);
    } else if (!(a.records[i] == b.records[i])) {
      any_post_diff = true;
    }
  }
  CHECK(any_post_diff);
}

TEST_CASE("generation is deterministic in the seed") {
  CHECK(generate(small_world(500, 8)).records == generate(small_world(500, 8)).records);
  CHECK(!(generate(small_world(500, 8)).records == generate(small_world(500, 9)).records));
}

TEST_CASE("a positive logit shift raises the targeted realized entry") {
  WorldConfig cfg = small_world(1);
  cfg.t_star = QuarterId(2018, 3);
  cfg.shift(1, 2) = 0.5;
  const auto truth = generate(cfg).truth;
  for (const auto& [q, m] : truth.realized) {
    const double base = truth.counterfactual.at(q)(1, 2);
    if (q > *cfg.t_star) {
      CHECK(m(1, 2) > base);
    } else {
      CHECK(m(1, 2) == base);
    }
  }
}

TEST_CASE("true effects: zero shift, geometric example, shares sum to zero") {
  WorldConfig cfg = small_world(1);
  cfg.t_star = QuarterId(2018, 3);
  const auto flat = generate(cfg).truth;
  const auto zero = true_effects(flat, *cfg.t_star, 4);
  CHECK(zero.share_diffs.isZero(0.0));
  CHECK(zero.cumulative_effects.isZero(0.0));

  // Identity baseline; the shift moves 10% of TE to PE each quarter.
  cfg.baseline = Eigen::MatrixXd::Identity(5, 5);
  cfg.shift(1, 2) = logit(1.0 / 9.0) - logit(1e-12);
  const auto truth = generate(cfg).truth;
  CHECK(truth.realized.at(cfg.t_star->next())(1, 2) == doctest::Approx(0.1).epsilon(1e-9));
  const auto e = true_effects(truth, *cfg.t_star, 4);
  CHECK(e.cumulative_effects(1, 2) == doctest::Approx(1.0 - std::pow(0.9, 4)).epsilon(1e-9));
  CHECK(std::abs(e.share_diffs.sum()) < 1e-12);
  CHECK_THROWS_AS(true_effects(truth, *cfg.t_star, 5), Error);
}

TEST_CASE("linked share and female share match the configuration") {
  const auto world = generate(small_world(20000, 5));
  const auto links = link_transitions(world.records);
  const QuarterId q(2018, 1);
  long in_q = 0, linked_q = 0, female = 0;
  for (const auto& r : world.records) {
    if (r.period == q) ++in_q;
    if (r.sex == Sex::Female) ++female;
  }
  for (const auto& l : links) {
    if (l.period == q) ++linked_q;
  }
  CHECK(std::abs(static_cast<double>(linked_q) / in_q - 0.5) < 0.02);
  CHECK(std::abs(static_cast<double>(female) / world.records.size() - 0.5) < 0.02);
  const auto f = apply_filter(world.records, SubgroupFilter::parse("sex=F"));
  CHECK(std::abs(static_cast<double>(f.size()) / world.records.size() - 0.5) < 0.02);
}

TEST_CASE("sample shares approach the truth as the population grows") {
  auto error_at = [](long n) {
    const auto world = generate(small_world(n, 21));
    double worst = 0.0;
    for (QuarterId q(2016, 1); q <= QuarterId(2019, 3); q = q.next()) {
      const auto est = estimate_shares(world.records, world.truth.space, q);
      worst = std::max(worst, (est.values() - world.truth.share(q).values()).cwiseAbs().maxCoeff());
    }
    return worst;
  };
  CHECK(error_at(100000) < error_at(10000));
}

TEST_CASE("heterogeneous worlds carry a female truth and mixed shares") {
  WorldConfig cfg = small_world(1);
  cfg.female_shift(3, 1) = 0.7;
  const auto truth = generate(cfg).truth;
  REQUIRE(truth.female);
  const QuarterId q(2017, 1);
  CHECK(truth.female->realized.at(q)(3, 1) > truth.realized.at(q)(3, 1));
  const Eigen::RowVectorXd mix =
      0.5 * truth.share(q).values() + 0.5 * truth.female->share(q).values();
  CHECK(truth.population_shares[q.minus(truth.start)].values().isApprox(mix));
  CHECK(to_json(truth).contains("groups"));
}

TEST_CASE("world files round-trip through the panel parser") {
  WorldConfig cfg = small_world(300, 4);
  cfg.weights = WeightModel::Lognormal;
  const auto world = generate(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "lmflow_world";
  std::filesystem::remove_all(dir);
  write_world(world, dir);
  CHECK(parse_panel(dir / "panel.csv") == world.records);
  const auto j = nlohmann::json::parse(io::read_text_file(dir / "truth.json"));
  CHECK(j["linked_share"] == 0.5);
  std::filesystem::remove_all(dir);
}

TEST_CASE("config text parses documented keys") {
  const auto cfg = WorldConfig::parse(
      "# three-state world\n"
      "states = T,P,U\n"
      "start = 2016Q1\n"
      "end = 2018Q4\n"
      "population = 5000\n"
      "seed = 99\n"
      "initial = 0.3,0.5,0.2\n"
      "matrix.T = 0.8,0.1,0.1\n"
      "matrix.P = 0.05,0.9,0.05\n"
      "matrix.U = 0.2,0.2,0.6\n"
      "matrix.2017Q2.U = 0.1,0.1,0.8\n"
      "matrix.2017Q2.T = 0.8,0.1,0.1\n"
      "matrix.2017Q2.P = 0.05,0.9,0.05\n"
      "tstar = 2018Q1\n"
      "shift.T.P = 0.4\n"
      "drift.U.U = 0.01\n"
      "rotation = 2-2-2\n"
      "weights = lognormal   # trailing comment\n"
      "weights.sigma = 0.2\n"
      "strata.female = 0.6\n");
  CHECK(cfg.space == StateSpace({"T", "P", "U"}));
  CHECK(cfg.population == 5000);
  CHECK(cfg.seed == 99);
  CHECK(cfg.t_star == QuarterId(2018, 1));
  CHECK(cfg.shift(0, 1) == 0.4);
  CHECK(cfg.logit_drift(2, 2) == 0.01);
  CHECK(cfg.quarter_matrices.at(QuarterId(2017, 2))(2, 2) == 0.8);
  CHECK(cfg.weights == WeightModel::Lognormal);
  CHECK(cfg.strata.female == 0.6);

  CHECK(parse_error("colour = red\n") == ErrorCode::ConfigInvalid);
  CHECK(parse_error("population = -4\n") == ErrorCode::ConfigInvalid);
  CHECK(parse_error("start\n") == ErrorCode::ConfigInvalid);
  CHECK(parse_error("matrix.TE = 0.5,0.5,0,0,0\n") == ErrorCode::ConfigInvalid);
  CHECK(parse_error("states = A,B\nmatrix.A = 1,0\n") == ErrorCode::ConfigInvalid);
  CHECK(parse_error("tstar = 2030Q1\n") == ErrorCode::ConfigInvalid);
  CHECK(parse_error("shift.TE.XX = 1\n") == ErrorCode::ConfigInvalid);
  CHECK(parse_error("rotation = 2-2\n") == ErrorCode::ConfigInvalid);
}
