#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "lmflow/arima.hpp"
#include "lmflow/bootstrap.hpp"
#include "lmflow/estimator.hpp"
#include "lmflow/flow_core.hpp"

namespace lmflow::carima {

/// Domain in which each matrix entry series is modelled.
enum class Scale { Logit, Raw, Alr };

std::string to_string(Scale scale);
Scale parse_scale(const std::string& text);

/// t_star is the last pre-intervention quarter; the forecast models are
/// estimated on the matrices inside `observation_window` (which ends at
/// t_star) and projected `horizon` quarters ahead.
struct InterventionSpec {
  QuarterWindow observation_window;
  int horizon = 4;

  QuarterId t_star() const noexcept { return observation_window.last; }
  /// Last quarter whose observed matrix enters the fitted side.
  QuarterId horizon_end() const { return t_star().plus(horizon); }
  void validate() const;
};

struct ForecastOptions {
  Scale scale = Scale::Logit;
  /// Remove quarter-of-year means before fitting and add them back to the
  /// forecasts.
  bool seasonal = false;
  int threads = 1;
};

/// Probability bounds applied to forecast entries before rows are renormalized.
inline constexpr double kEntryFloor = 1e-9;
inline constexpr double kEntryCeiling = 1.0 - 1e-9;

/// Diagnostics for one (from, to) entry series.
struct CellForecast {
  int from = 0;
  int to = 0;
  /// Model used; empty when the cell has no series of its own (the
  /// reference cell under ALR) or when its fit failed.
  std::optional<arima::ArimaSpec> spec;
  std::vector<double> observed;  // probability scale, observation window
  std::vector<double> mean;      // probability scale, before renormalization
  std::vector<double> lo95;
  std::vector<double> hi95;
  std::string error;
};

struct MatrixForecast {
  MatrixChain chain;
  std::vector<CellForecast> cells;  // row-major K x K
  std::vector<int> fallback_rows;   // rows replaced by the last observed row
  std::vector<std::string> warnings;
};

/// Forecasts every entry series over the observation window `horizon` steps
/// ahead, clamps entries to [1e-9, 1-1e-9] and renormalizes each row. A row
/// with more than half of its cells failing falls back to the last observed
/// row; other cell failures are rethrown naming the cell.
MatrixForecast forecast_matrices(const QuarterSeries& series, const InterventionSpec& spec,
                                 const ForecastOptions& options = {});

/// Same as forecast_matrices on an explicit list of consecutive matrices
/// ending at t_star. With `fixed_specs` (row-major, one per cell) the models
/// are re-estimated at those orders instead of being selected.
MatrixForecast forecast_chain(const std::vector<TransitionMatrix>& history, int horizon,
                              const ForecastOptions& options,
                              const std::vector<std::optional<arima::ArimaSpec>>* fixed_specs = nullptr);

struct SharePath {
  MatrixChain chain;
  std::vector<ShareVector> shares;  // t_star+1 .. t_star+horizon
};

/// shares(t_star) propagated through the observed matrices of the horizon.
/// Throws MissingQuarter.
SharePath fitted_path(const QuarterSeries& series, const InterventionSpec& spec);

/// shares(t_star) propagated through the forecast chain.
std::vector<ShareVector> counterfactual_path(const QuarterSeries& series,
                                             const InterventionSpec& spec,
                                             const ForecastOptions& options = {});

/// Point effects of one fitted chain against one forecast chain sharing an
/// anchor.
struct EffectPoint {
  std::vector<ShareVector> fitted_path;
  std::vector<ShareVector> forecast_path;
  Eigen::RowVectorXd fitted_shares;    // averaged over the horizon
  Eigen::RowVectorXd forecast_shares;  // averaged over the horizon
  Eigen::RowVectorXd share_diffs;
  TransitionMatrix cumulative_fitted;
  TransitionMatrix cumulative_forecast;
  Eigen::MatrixXd cumulative_effects;
};

EffectPoint compute_effects(const ShareVector& anchor, const MatrixChain& fitted,
                            const MatrixChain& forecast);

struct EffectReport {
  InterventionSpec spec;
  StateSpace space;
  double population = 0.0;
  EffectPoint point;
  /// Directly estimated shares over the horizon, averaged; differs from the
  /// fitted shares only through sampling and the constant-population model.
  Eigen::RowVectorXd observed_shares;
  std::vector<bootstrap::BootstrapResult> share_diff_ci;  // K
  std::vector<bootstrap::BootstrapResult> count_diff_ci;  // K
  std::vector<bootstrap::BootstrapResult> cumulative_ci;  // row-major K x K
  MatrixForecast forecast;
  bootstrap::BootstrapConfig bootstrap;
  ForecastOptions options;
  std::string filter = "all";
  std::vector<std::string> warnings;
  /// Replicate statistic vectors (share diffs then cumulative effects),
  /// kept only when requested.
  std::vector<std::vector<double>> replicates;

  Eigen::RowVectorXd count_diffs() const { return point.share_diffs * population; }
  bool any_count_significant() const;
};

struct EffectOptions {
  ForecastOptions forecast;
  bool keep_replicates = false;
  std::string filter = "all";
};

/// Fitted-versus-forecast effects with bootstrap intervals. Replicates
/// resample every quarter's cell counts and repeat the part of the pipeline
/// named by cfg.mode.
EffectReport effects(const QuarterSeries& series, const InterventionSpec& spec, double population,
                     const bootstrap::BootstrapConfig& cfg, const EffectOptions& options = {});

struct PlaceboReport {
  EffectReport report;
  QuarterId true_t_star;
  bool pass = false;
};

/// Effects at a fake t_star. The placebo horizon must end at or before the
/// true t_star (PlaceboOverlap otherwise). pass iff no count difference is
/// significant.
PlaceboReport placebo(const QuarterSeries& series, const InterventionSpec& placebo_spec,
                      QuarterId true_t_star, double population,
                      const bootstrap::BootstrapConfig& cfg, const EffectOptions& options = {});

struct ShiftReport {
  EffectReport base;
  EffectReport shifted;
  int shift = 0;
};

/// Reruns effects with the observation window ending at new_t_star, which may
/// differ from the original by at most one quarter (ShiftTooLarge otherwise).
ShiftReport shift_tstar(const QuarterSeries& series, const InterventionSpec& spec,
                        QuarterId new_t_star, double population,
                        const bootstrap::BootstrapConfig& cfg, const EffectOptions& options = {});

nlohmann::json to_json(const EffectReport& report);
nlohmann::json to_json(const PlaceboReport& report);
nlohmann::json to_json(const ShiftReport& report);

/// effects.json, table2a.csv, table2b.csv, table2c.csv and one
/// series_<from>_<to>.csv per cell (plus replicates_effects.csv when the
/// report kept its replicates).
void write_report(const EffectReport& report, const QuarterSeries& series,
                  const std::filesystem::path& dir);

}  // namespace lmflow::carima
