#include "lmflow/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "lmflow/error.hpp"
#include "lmflow/flow_io.hpp"
#include "lmflow/parallel.hpp"

namespace lmflow::synth {

namespace {

constexpr double kLogitClamp = 1e-12;

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    invalid("key '" + key + "': '" + s + "' is not a number");
  }
}

Eigen::RowVectorXd to_row(const std::string& s, int k, const std::string& key) {
  const auto parts = split(s, ',');
  if (static_cast<int>(parts.size()) != k) {
    invalid("key '" + key + "' needs " + std::to_string(k) + " comma-separated values");
  }
  Eigen::RowVectorXd v(k);
  for (int i = 0; i < k; ++i) v(i) = to_double(parts[i], key);
  return v;
}

Eigen::MatrixXd italy_matrix() {
  Eigen::MatrixXd m(5, 5);
  m << 0.93, 0.01, 0.02, 0.01, 0.03,  //
      0.02, 0.75, 0.07, 0.06, 0.10,   //
      0.005, 0.01, 0.955, 0.01, 0.02,  //
      0.02, 0.10, 0.04, 0.55, 0.29,   //
      0.01, 0.03, 0.02, 0.06, 0.88;
  return m;
}

bool any_nonzero(const Eigen::MatrixXd& m) { return m.size() > 0 && m.cwiseAbs().maxCoeff() > 0.0; }

void check_stochastic(const Eigen::MatrixXd& m, int k, const std::string& what) {
  if (m.rows() != k || m.cols() != k) invalid(what + " must be " + std::to_string(k) + "x" + std::to_string(k));
  for (int i = 0; i < k; ++i) {
    if ((m.row(i).array() < 0.0).any() || std::abs(m.row(i).sum() - 1.0) > kConstructionTol) {
      invalid(what + " row " + std::to_string(i) + " is not a probability vector");
    }
  }
}

int draw_state(const Eigen::RowVectorXd& p, double u) {
  double cum = 0.0;
  int last = 0;
  for (int j = 0; j < p.size(); ++j) {
    if (p(j) <= 0.0) continue;
    last = j;
    cum += p(j);
    if (u < cum) return j;
  }
  return last;
}

// Matrices for start+1..end of one group.
struct GroupChains {
  std::map<QuarterId, TransitionMatrix> realized;
  std::map<QuarterId, TransitionMatrix> counterfactual;
};

GroupChains build_chains(const WorldConfig& cfg, const Eigen::MatrixXd& group_shift) {
  const int k = cfg.space.size();
  GroupChains g;
  for (QuarterId q = cfg.start.next(); q <= cfg.end; q = q.next()) {
    auto it = cfg.quarter_matrices.find(q);
    const Eigen::MatrixXd& base = it != cfg.quarter_matrices.end() ? it->second : cfg.baseline;
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(k, k);
    if (any_nonzero(cfg.logit_drift)) total += cfg.logit_drift * q.minus(cfg.start);
    if (any_nonzero(group_shift)) total += group_shift;
    const Eigen::MatrixXd cf = apply_logit_shift(base, total);
    Eigen::MatrixXd real = cf;
    if (cfg.t_star && q > *cfg.t_star && any_nonzero(cfg.shift)) {
      real = apply_logit_shift(base, total + cfg.shift);
    }
    g.counterfactual.emplace(q, TransitionMatrix(cfg.space, cf, q));
    g.realized.emplace(q, TransitionMatrix(cfg.space, real, q));
  }
  return g;
}

std::vector<ShareVector> share_path(const ShareVector& initial,
                                    const std::map<QuarterId, TransitionMatrix>& ms) {
  std::vector<ShareVector> path{initial};
  for (const auto& [q, m] : ms) path.push_back(propagate(path.back(), m));
  return path;
}

WorldTruth make_truth(const WorldConfig& cfg, GroupChains chains) {
  const ShareVector initial(cfg.space, cfg.initial_shares, cfg.start);
  WorldTruth t;
  t.space = cfg.space;
  t.start = cfg.start;
  t.end = cfg.end;
  t.t_star = cfg.t_star;
  t.realized_shares = share_path(initial, chains.realized);
  t.counterfactual_shares = share_path(initial, chains.counterfactual);
  t.realized = std::move(chains.realized);
  t.counterfactual = std::move(chains.counterfactual);
  t.linked_share = cfg.rotation.linked_share();
  return t;
}

nlohmann::json matrices_json(const std::map<QuarterId, TransitionMatrix>& ms) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [q, m] : ms) j[q.str()] = io::to_json(m)["entries"];
  return j;
}

nlohmann::json shares_json(const std::vector<ShareVector>& path) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& s : path) j[s.period().str()] = io::to_json(s)["entries"];
  return j;
}

nlohmann::json effect_json(const carima::EffectPoint& e, const StateSpace& space) {
  const auto& v = e.share_diffs;
  nlohmann::json cum = nlohmann::json::array();
  for (int i = 0; i < e.cumulative_effects.rows(); ++i) {
    std::vector<double> row(e.cumulative_effects.cols());
    for (int j = 0; j < e.cumulative_effects.cols(); ++j) row[j] = e.cumulative_effects(i, j);
    cum.push_back(row);
  }
  return {{"space", space.labels()},
          {"share_diffs", std::vector<double>(v.data(), v.data() + v.size())},
          {"cumulative_effects", cum}};
}

}  // namespace

std::vector<int> Rotation::offsets() const {
  std::vector<int> out;
  for (int w = 0; w < waves_in; ++w) out.push_back(w);
  for (int w = 0; w < waves_back; ++w) out.push_back(waves_in + waves_out + w);
  return out;
}

double Rotation::linked_share() const {
  const int total = waves_in + waves_back;
  const int linked = std::max(waves_in - 1, 0) + (waves_out == 0 ? waves_back : std::max(waves_back - 1, 0));
  return total > 0 ? static_cast<double>(linked) / total : 0.0;
}

Eigen::MatrixXd apply_logit_shift(const Eigen::MatrixXd& m, const Eigen::MatrixXd& shift) {
  if (!any_nonzero(shift)) return m;
  Eigen::MatrixXd out = m;
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (shift(i, j) == 0.0) continue;
      const double p = std::clamp(m(i, j), kLogitClamp, 1.0 - kLogitClamp);
      const double x = std::log(p / (1.0 - p)) + shift(i, j);
      out(i, j) = 1.0 / (1.0 + std::exp(-x));
    }
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

WorldConfig WorldConfig::defaults() {
  WorldConfig c;
  c.baseline = italy_matrix();
  c.logit_drift = Eigen::MatrixXd::Zero(5, 5);
  c.shift = Eigen::MatrixXd::Zero(5, 5);
  c.female_shift = Eigen::MatrixXd::Zero(5, 5);
  c.initial_shares = Eigen::RowVectorXd(5);
  c.initial_shares << 0.125, 0.08, 0.38, 0.054, 0.361;
  return c;
}

bool WorldConfig::heterogeneous() const { return any_nonzero(female_shift); }

void WorldConfig::validate() const {
  const int k = space.size();
  if (population < 1) invalid("population must be at least 1");
  if (end <= start) invalid("end must come after start");
  check_stochastic(baseline, k, "baseline matrix");
  for (const auto& [q, m] : quarter_matrices) {
    if (!(start < q && q <= end)) invalid("quarter matrix " + q.str() + " lies outside the span");
    check_stochastic(m, k, "matrix for " + q.str());
  }
  for (const Eigen::MatrixXd* m : {&logit_drift, &shift, &female_shift}) {
    if (m->size() > 0 && (m->rows() != k || m->cols() != k)) invalid("shift blocks must be KxK");
    if (m->size() > 0 && !m->allFinite()) invalid("shift blocks must be finite");
  }
  if (initial_shares.size() != k || (initial_shares.array() < 0.0).any() ||
      std::abs(initial_shares.sum() - 1.0) > kConstructionTol) {
    invalid("initial shares must be a probability vector over the states");
  }
  if (t_star && !(start <= *t_star && *t_star < end)) invalid("t_star must lie inside the span");
  if (rotation.waves_in < 1 || rotation.waves_out < 0 || rotation.waves_back < 0) {
    invalid("rotation waves must be non-negative with at least one initial wave");
  }
  if (!(weight_sigma >= 0.0)) invalid("weight sigma must be non-negative");
  for (double p : {strata.female, strata.young, strata.low_education, strata.south}) {
    if (!(p >= 0.0 && p <= 1.0)) invalid("stratifier probabilities must lie in [0,1]");
  }
}

WorldConfig WorldConfig::parse(const std::string& text) {
  WorldConfig c = defaults();
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) invalid("line " + std::to_string(lineno) + ": expected key = value");
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }

  bool have_matrix = false;
  bool have_initial = false;
  for (const auto& [key, value] : entries) {
    if (key == "states") {
      try {
        c.space = StateSpace::parse(value);
      } catch (const Error& e) {
        invalid(std::string("states: ") + e.what());
      }
    }
  }
  const int k = c.space.size();
  if (!(c.space == StateSpace::canonical())) {
    c.baseline = Eigen::MatrixXd();
    c.initial_shares = Eigen::RowVectorXd();
  }
  c.logit_drift = Eigen::MatrixXd::Zero(k, k);
  c.shift = Eigen::MatrixXd::Zero(k, k);
  c.female_shift = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd baseline = Eigen::MatrixXd::Constant(k, k, -1.0);

  auto state = [&](const std::string& label, const std::string& key) {
    auto idx = c.space.find(label);
    if (!idx) invalid("key '" + key + "': unknown state '" + label + "'");
    return *idx;
  };
  auto quarter = [&](const std::string& v, const std::string& key) {
    try {
      return QuarterId::parse(v);
    } catch (const Error&) {
      invalid("key '" + key + "': bad quarter '" + v + "'");
    }
  };

  for (const auto& [key, value] : entries) {
    const auto parts = split(key, '.');
    if (key == "states") continue;
    if (key == "start") {
      c.start = quarter(value, key);
    } else if (key == "end") {
      c.end = quarter(value, key);
    } else if (key == "population") {
      const double n = to_double(value, key);
      if (n < 1 || n != std::floor(n)) invalid("population must be a positive integer");
      c.population = static_cast<long>(n);
    } else if (key == "seed") {
      try {
        c.seed = std::stoull(value);
      } catch (const std::exception&) {
        invalid("seed must be an unsigned integer");
      }
    } else if (key == "initial") {
      c.initial_shares = to_row(value, k, key);
      have_initial = true;
    } else if (key == "tstar") {
      c.t_star = quarter(value, key);
    } else if (key == "rotation") {
      const auto w = split(value, '-');
      if (w.size() != 3) invalid("rotation must look like 2-2-2");
      c.rotation = Rotation{static_cast<int>(to_double(w[0], key)),
                            static_cast<int>(to_double(w[1], key)),
                            static_cast<int>(to_double(w[2], key))};
    } else if (key == "weights") {
      if (value == "constant") {
        c.weights = WeightModel::Constant;
      } else if (value == "lognormal") {
        c.weights = WeightModel::Lognormal;
      } else {
        invalid("weights must be constant or lognormal");
      }
    } else if (key == "weights.sigma") {
      c.weight_sigma = to_double(value, key);
    } else if (key == "strata.female") {
      c.strata.female = to_double(value, key);
    } else if (key == "strata.young") {
      c.strata.young = to_double(value, key);
    } else if (key == "strata.low_edu") {
      c.strata.low_education = to_double(value, key);
    } else if (key == "strata.south") {
      c.strata.south = to_double(value, key);
    } else if (parts.size() == 2 && parts[0] == "matrix") {
      baseline.row(state(parts[1], key)) = to_row(value, k, key);
      have_matrix = true;
    } else if (parts.size() == 3 && parts[0] == "matrix") {
      const QuarterId q = quarter(parts[1], key);
      auto [it, inserted] = c.quarter_matrices.try_emplace(q, Eigen::MatrixXd::Constant(k, k, -1.0));
      it->second.row(state(parts[2], key)) = to_row(value, k, key);
    } else if (parts.size() == 3 &&
               (parts[0] == "drift" || parts[0] == "shift" || parts[0] == "female_shift")) {
      Eigen::MatrixXd& target =
          parts[0] == "drift" ? c.logit_drift : parts[0] == "shift" ? c.shift : c.female_shift;
      target(state(parts[1], key), state(parts[2], key)) = to_double(value, key);
    } else {
      invalid("unknown key '" + key + "'");
    }
  }

  if (have_matrix) {
    if ((baseline.array() < 0.0).any()) invalid("every matrix.<state> row must be given");
    c.baseline = baseline;
  } else if (c.baseline.size() == 0) {
    invalid("matrix.<state> rows are required for a custom state space");
  }
  for (const auto& [q, m] : c.quarter_matrices) {
    if ((m.array() < 0.0).any()) invalid("matrix." + q.str() + " needs every row");
  }
  if (!have_initial && c.initial_shares.size() == 0) {
    invalid("initial shares are required for a custom state space");
  }
  c.validate();
  return c;
}

WorldConfig WorldConfig::load(const std::filesystem::path& path) {
  return parse(io::read_text_file(path));
}

const ShareVector& WorldTruth::share(QuarterId q) const {
  const int i = q.minus(start);
  if (i < 0 || i >= static_cast<int>(realized_shares.size())) {
    throw Error(ErrorCode::HorizonOutOfRange, q.str() + " lies outside the simulated span");
  }
  return realized_shares[i];
}

const ShareVector& WorldTruth::counterfactual_share(QuarterId q) const {
  const int i = q.minus(start);
  if (i < 0 || i >= static_cast<int>(counterfactual_shares.size())) {
    throw Error(ErrorCode::HorizonOutOfRange, q.str() + " lies outside the simulated span");
  }
  return counterfactual_shares[i];
}

World generate(const WorldConfig& cfg) {
  cfg.validate();
  GroupChains men = build_chains(cfg, Eigen::MatrixXd());
  std::optional<GroupChains> women;
  if (cfg.heterogeneous()) women = build_chains(cfg, cfg.female_shift);

  const std::vector<int> offsets = cfg.rotation.offsets();
  const int reach = offsets.back();
  const QuarterId first_cohort = cfg.start.plus(-reach);
  const int n_cohorts = cfg.end.minus(first_cohort) + 1;
  const int span = cfg.end.minus(cfg.start) + 1;
  const int id_width = std::max<int>(7, static_cast<int>(std::to_string(cfg.population).size()));

  std::vector<std::vector<PersonQuarterRecord>> per_person(static_cast<std::size_t>(cfg.population));
  for (std::size_t p = 0; p < per_person.size(); ++p) {
    std::mt19937_64 rng(derive_seed(cfg.seed, p));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    const Sex sex = unit(rng) < cfg.strata.female ? Sex::Female : Sex::Male;
    const bool young = unit(rng) < cfg.strata.young;
    const double age_u = unit(rng);
    const int age0 = young ? 15 + static_cast<int>(age_u * 20) : 35 + static_cast<int>(age_u * 20);
    const Education edu = unit(rng) < cfg.strata.low_education ? Education::Low : Education::High;
    const Region region = unit(rng) < cfg.strata.south ? Region::South : Region::NorthCenter;
    const double z = normal(rng);
    const double weight = cfg.weights == WeightModel::Lognormal
                              ? std::exp(cfg.weight_sigma * z - 0.5 * cfg.weight_sigma * cfg.weight_sigma)
                              : 1.0;
    const auto& chains = (sex == Sex::Female && women) ? women->realized : men.realized;

    std::vector<int> states(span);
    states[0] = draw_state(cfg.initial_shares, unit(rng));
    for (int t = 1; t < span; ++t) {
      const TransitionMatrix& m = chains.at(cfg.start.plus(t));
      states[t] = draw_state(m.entries().row(states[t - 1]), unit(rng));
    }

    std::ostringstream id;
    id << 'P' << std::setw(id_width) << std::setfill('0') << p;
    const QuarterId entry = first_cohort.plus(static_cast<int>(p % n_cohorts));
    for (int off : offsets) {
      const QuarterId q = entry.plus(off);
      if (q < cfg.start || q > cfg.end) continue;
      const int t = q.minus(cfg.start);
      per_person[p].push_back(PersonQuarterRecord{id.str(), q, states[t], weight, sex, age0 + t / 4,
                                                  edu, region});
    }
  }

  World world;
  for (auto& rs : per_person) {
    for (auto& r : rs) world.records.push_back(std::move(r));
  }
  std::stable_sort(world.records.begin(), world.records.end(),
                   [](const auto& a, const auto& b) { return a.period < b.period; });

  if (women) {
    world.truth = make_truth(cfg, std::move(men));
    auto female = std::make_shared<WorldTruth>(make_truth(cfg, std::move(*women)));
    const double f = cfg.strata.female;
    for (std::size_t t = 0; t < world.truth.realized_shares.size(); ++t) {
      Eigen::RowVectorXd mix = (1.0 - f) * world.truth.realized_shares[t].values() +
                               f * female->realized_shares[t].values();
      world.truth.population_shares.emplace_back(cfg.space, mix,
                                                 world.truth.realized_shares[t].period());
    }
    world.truth.female = std::move(female);
  } else {
    world.truth = make_truth(cfg, std::move(men));
    world.truth.population_shares = world.truth.realized_shares;
  }
  return world;
}

carima::EffectPoint true_effects(const WorldTruth& truth, QuarterId t_star, int horizon) {
  if (horizon < 1 || t_star < truth.start || t_star.plus(horizon) > truth.end) {
    throw Error(ErrorCode::HorizonOutOfRange,
                "t_star " + t_star.str() + " with horizon " + std::to_string(horizon) +
                    " leaves the simulated span " + truth.start.str() + ":" + truth.end.str());
  }
  std::vector<TransitionMatrix> real, cf;
  for (int h = 1; h <= horizon; ++h) {
    real.push_back(truth.realized.at(t_star.plus(h)));
    cf.push_back(truth.counterfactual.at(t_star.plus(h)));
  }
  return carima::compute_effects(truth.share(t_star), MatrixChain(std::move(real)),
                                 MatrixChain(std::move(cf)));
}

nlohmann::json to_json(const WorldTruth& truth) {
  nlohmann::json j;
  j["space"] = truth.space.labels();
  j["start"] = truth.start.str();
  j["end"] = truth.end.str();
  j["t_star"] = truth.t_star ? nlohmann::json(truth.t_star->str()) : nlohmann::json(nullptr);
  j["linked_share"] = truth.linked_share;
  j["realized_matrices"] = matrices_json(truth.realized);
  j["counterfactual_matrices"] = matrices_json(truth.counterfactual);
  j["realized_shares"] = shares_json(truth.realized_shares);
  j["counterfactual_shares"] = shares_json(truth.counterfactual_shares);
  j["population_shares"] = shares_json(truth.population_shares);
  if (truth.t_star) {
    nlohmann::json effects = nlohmann::json::object();
    for (int h = 1; truth.t_star->plus(h) <= truth.end; ++h) {
      effects[std::to_string(h)] = effect_json(true_effects(truth, *truth.t_star, h), truth.space);
    }
    j["true_effects_by_horizon"] = effects;
  }
  if (truth.female) {
    j["groups"] = {{"reference", "male"}, {"female", to_json(*truth.female)}};
  }
  return j;
}

void write_world(const World& world, const std::filesystem::path& dir) {
  const std::string panel = panel_to_csv(world.records, world.truth.space);
  const std::string truth = to_json(world.truth).dump(2) + "\n";
  std::filesystem::create_directories(dir);
  io::write_text_file(dir / "panel.csv", panel);
  io::write_text_file(dir / "truth.json", truth);
}

}  // namespace lmflow::synth
