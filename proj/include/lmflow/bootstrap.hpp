#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lmflow/estimator.hpp"
#include "lmflow/panel.hpp"

namespace lmflow::bootstrap {

using Rng = std::mt19937_64;

/// How much of the evaluation pipeline each replicate repeats:
/// FullPipeline re-estimates the matrices and re-runs forecast model
/// selection and fitting; FixedOrders re-fits the forecast models at the
/// orders selected on the original data; EstimationOnly re-estimates the
/// matrices and shares but keeps the original forecasts.
enum class Mode { FullPipeline, FixedOrders, EstimationOnly };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct BootstrapConfig {
  int replicates = 999;
  std::uint64_t master_seed = 20180714;
  Mode mode = Mode::FullPipeline;
  double ci_level = 0.95;
  int threads = 1;

  /// Throws TooFewReplicates when replicates < 100, InvalidArgument when
  /// ci_level is outside (0,1).
  void validate() const;
};

struct BootstrapResult {
  double point = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double p_value = 1.0;
  int b_effective = 0;

  /// The percentile interval excludes zero.
  bool significant() const noexcept { return ci_lo > 0.0 || ci_hi < 0.0; }
};

/// Draws N = |input| records with replacement, each with probability
/// proportional to its weight; the drawn records carry weight 1.
std::vector<TransitionRecord> resample(std::span<const TransitionRecord> transitions,
                                       std::uint64_t seed);
std::vector<TransitionRecord> resample(std::span<const TransitionRecord> transitions, Rng& rng);
std::vector<PersonQuarterRecord> resample(std::span<const PersonQuarterRecord> records, Rng& rng);

/// Resamples every quarter of the panel separately, preserving quarter sizes.
LinkedPanel resample_panel(const LinkedPanel& panel, std::uint64_t seed);

/// Cell-count form of `resample` for one quarter: the unit-weight counts of
/// n_records draws over cells with probability proportional to the weighted
/// counts. Same distribution as resampling records and re-counting them.
Eigen::MatrixXd resample_counts(const FlowCounts& counts, Rng& rng);
Eigen::VectorXd resample_counts(const ShareCounts& counts, Rng& rng);

/// se = sqrt(sum_b (v_b - mean)^2 / B), percentile CI at cfg.ci_level and the
/// percentile p-value for H0: value = 0. `point` defaults to the replicate
/// mean. Throws TooFewReplicates below 100 finite values.
BootstrapResult se_and_ci(std::span<const double> replicate_values, const BootstrapConfig& cfg,
                          std::optional<double> point = std::nullopt);

using ScalarStatistic = std::function<double(const LinkedPanel&)>;
using VectorStatistic = std::function<std::vector<double>(const LinkedPanel&)>;

/// Evaluates the statistic on cfg.replicates quarter-stratified resamples.
/// Replicates throwing lmflow::Error are dropped; more than 5% dropped throws
/// TooManyFailedReplicates.
BootstrapResult run(const ScalarStatistic& statistic, const LinkedPanel& panel,
                    const BootstrapConfig& cfg);

/// Vector form of run. When `replicates` is given it receives the
/// successful replicate vectors in replicate order.
std::vector<BootstrapResult> run_many(const VectorStatistic& statistic, const LinkedPanel& panel,
                                      const BootstrapConfig& cfg,
                                      std::vector<std::vector<double>>* replicates = nullptr);

/// Aggregates per-replicate statistic vectors (empty slots are failed
/// replicates) into one result per statistic, applying the failure limit.
/// Successful replicates are moved into `replicates` when given.
std::vector<BootstrapResult> summarize(std::vector<std::optional<std::vector<double>>>& slots,
                                       const std::vector<double>& point, const BootstrapConfig& cfg,
                                       std::vector<std::vector<double>>* replicates = nullptr);

/// Maximum tolerated share of failed replicates.
inline constexpr double kMaxFailedShare = 0.05;

/// One row per replicate, one column per named statistic.
void write_replicates_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                          const std::vector<std::vector<double>>& replicates);

}  // namespace lmflow::bootstrap
