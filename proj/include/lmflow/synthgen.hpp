#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "lmflow/carima.hpp"
#include "lmflow/flow_core.hpp"
#include "lmflow/panel.hpp"

namespace lmflow::synth {

/// Interview pattern: observed for `waves_in` consecutive quarters, absent
/// for `waves_out`, then observed for `waves_back` more.
struct Rotation {
  int waves_in = 2;
  int waves_out = 2;
  int waves_back = 2;

  /// Quarter offsets from the entry quarter at which a person is observed.
  std::vector<int> offsets() const;
  /// Share of a quarter's records that also appear in the previous quarter.
  double linked_share() const;
};

enum class WeightModel { Constant, Lognormal };

/// Independent stratifier probabilities.
struct Marginals {
  double female = 0.5;
  double young = 0.35;  // aged 15..34 at the start of the span, otherwise 35..54
  double low_education = 0.45;
  double south = 0.35;
};

struct WorldConfig {
  StateSpace space = StateSpace::canonical();
  QuarterId start{2016, 1};
  QuarterId end{2019, 3};
  /// Baseline matrix used for every quarter without an explicit entry in
  /// `quarter_matrices` (keyed by destination quarter).
  Eigen::MatrixXd baseline;
  std::map<QuarterId, Eigen::MatrixXd> quarter_matrices;
  /// Logit increment per quarter since `start`, per cell.
  Eigen::MatrixXd logit_drift;
  Eigen::RowVectorXd initial_shares;
  long population = 10000;
  /// Quarters after t_star get `shift` added to the logit of each cell.
  std::optional<QuarterId> t_star;
  Eigen::MatrixXd shift;
  Rotation rotation;
  WeightModel weights = WeightModel::Constant;
  double weight_sigma = 0.3;
  Marginals strata;
  /// Logit shifts applied to women's matrices in every quarter; a nonzero
  /// block makes the world heterogeneous.
  Eigen::MatrixXd female_shift;
  std::uint64_t seed = 1;

  /// Five-state world with Italian-like persistence and 2016Q1:2019Q3 span.
  static WorldConfig defaults();
  /// Plain-text `key = value` lines; see README for the keys.
  static WorldConfig parse(const std::string& text);
  static WorldConfig load(const std::filesystem::path& path);

  bool heterogeneous() const;
  /// Throws ConfigInvalid.
  void validate() const;
};

/// Exact matrices and share paths of a world. Matrices are keyed by their
/// destination quarter (start+1 .. end); share paths cover start .. end.
struct WorldTruth {
  StateSpace space = StateSpace::canonical();
  QuarterId start;
  QuarterId end;
  std::optional<QuarterId> t_star;
  std::map<QuarterId, TransitionMatrix> realized;
  std::map<QuarterId, TransitionMatrix> counterfactual;
  std::vector<ShareVector> realized_shares;
  std::vector<ShareVector> counterfactual_shares;
  double linked_share = 0.5;
  /// Truth of the female subgroup; set only for heterogeneous worlds, in
  /// which case the fields above describe men and the aggregate share paths
  /// are in `population_shares`.
  std::shared_ptr<const WorldTruth> female;
  std::vector<ShareVector> population_shares;

  const ShareVector& share(QuarterId q) const;
  const ShareVector& counterfactual_share(QuarterId q) const;
};

struct World {
  std::vector<PersonQuarterRecord> records;
  WorldTruth truth;
};

/// Simulates every person over the span and emits the quarters their
/// rotation observes. Deterministic in cfg (persons use substreams of
/// cfg.seed, so records before t_star+1 do not depend on the intervention).
World generate(const WorldConfig& cfg);

/// Logit shift of each cell followed by row renormalization.
Eigen::MatrixXd apply_logit_shift(const Eigen::MatrixXd& m, const Eigen::MatrixXd& shift);

/// Fitted-versus-counterfactual effects of the true chains, anchored at the
/// realized shares of t_star. Throws HorizonOutOfRange.
carima::EffectPoint true_effects(const WorldTruth& truth, QuarterId t_star, int horizon);

nlohmann::json to_json(const WorldTruth& truth);

/// Writes panel.csv and truth.json into `dir`.
void write_world(const World& world, const std::filesystem::path& dir);

}  // namespace lmflow::synth
