#include "lmflow/carima.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

#include "lmflow/error.hpp"
#include "lmflow/flow_io.hpp"
#include "lmflow/parallel.hpp"

namespace lmflow::carima {

namespace {

constexpr double kZ975 = 1.959963984540054;

double logit(double p) {
  p = std::clamp(p, kEntryFloor, kEntryCeiling);
  return std::log(p / (1.0 - p));
}

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string cell_name(const StateSpace& space, int i, int j) {
  return "(" + space.label(i) + "," + space.label(j) + ")";
}

// Quarter-of-year offsets of y (they average to zero over observed quarters).
std::array<double, 4> seasonal_offsets(const std::vector<double>& y,
                                       const std::vector<TransitionMatrix>& history) {
  std::array<double, 4> sum{}, n{};
  double total = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const int s = history[t].period().quarter() - 1;
    sum[s] += y[t];
    n[s] += 1.0;
    total += y[t];
  }
  const double mean = total / static_cast<double>(y.size());
  std::array<double, 4> off{};
  for (int s = 0; s < 4; ++s) off[s] = n[s] > 0.0 ? sum[s] / n[s] - mean : 0.0;
  return off;
}

struct CellOutcome {
  CellForecast cell;
  std::vector<double> transformed_mean;  // model scale, seasonal component restored
  bool has_series = true;
  bool failed = false;
  ErrorCode code = ErrorCode::NonConvergence;
};

CellOutcome forecast_cell(const std::vector<TransitionMatrix>& history, int i, int j, int horizon,
                          const ForecastOptions& options,
                          const std::optional<arima::ArimaSpec>* fixed) {
  CellOutcome out;
  out.cell.from = i;
  out.cell.to = j;
  for (const auto& m : history) out.cell.observed.push_back(m(i, j));
  if (options.scale == Scale::Alr && i == j) {
    out.has_series = false;
    return out;
  }

  std::vector<double> y;
  y.reserve(history.size());
  for (const auto& m : history) {
    switch (options.scale) {
      case Scale::Logit:
        y.push_back(logit(m(i, j)));
        break;
      case Scale::Raw:
        y.push_back(m(i, j));
        break;
      case Scale::Alr:
        y.push_back(std::log(std::clamp(m(i, j), kEntryFloor, 1.0) /
                             std::clamp(m(i, i), kEntryFloor, 1.0)));
        break;
    }
  }
  std::array<double, 4> off{};
  if (options.seasonal) {
    off = seasonal_offsets(y, history);
    for (std::size_t t = 0; t < y.size(); ++t) y[t] -= off[history[t].period().quarter() - 1];
  }

  const QuarterId origin = history.back().period();
  try {
    arima::ArimaFit fit;
    if (fixed) {
      if (!fixed->has_value()) {
        throw Error(ErrorCode::NonConvergence, "no model was fitted for this cell");
      }
      fit = arima::fit(y, **fixed);
    } else {
      fit = arima::select(y);
    }
    const auto fc = arima::forecast(fit, y, horizon, origin);
    out.cell.spec = fit.spec;
    for (int h = 0; h < horizon; ++h) {
      const double seasonal = off[origin.plus(h + 1).quarter() - 1];
      const double mu = fc.mean_path[h] + seasonal;
      const double half = kZ975 * std::sqrt(std::max(fc.variance_path[h], 0.0));
      out.transformed_mean.push_back(mu);
      switch (options.scale) {
        case Scale::Logit:
          out.cell.mean.push_back(expit(mu));
          out.cell.lo95.push_back(expit(mu - half));
          out.cell.hi95.push_back(expit(mu + half));
          break;
        case Scale::Raw:
          out.cell.mean.push_back(mu);
          out.cell.lo95.push_back(mu - half);
          out.cell.hi95.push_back(mu + half);
          break;
        case Scale::Alr:
          out.cell.mean.push_back(std::exp(mu));
          break;
      }
    }
  } catch (const Error& e) {
    out.failed = true;
    out.code = e.code();
    out.cell.spec.reset();
    out.cell.error = e.what();
  }
  return out;
}

std::vector<double> statistic_vector(const EffectPoint& e) {
  std::vector<double> v(e.share_diffs.data(), e.share_diffs.data() + e.share_diffs.size());
  const auto& c = e.cumulative_effects;
  for (int i = 0; i < c.rows(); ++i)
    for (int j = 0; j < c.cols(); ++j) v.push_back(c(i, j));
  return v;
}

const FlowCounts& counts_at(const QuarterSeries& series, QuarterId q) {
  auto it = series.counts.find(q);
  if (it == series.counts.end()) {
    throw Error(ErrorCode::MissingQuarter, "no transition counts for " + q.str());
  }
  return it->second;
}

const ShareCounts& share_counts_at(const QuarterSeries& series, QuarterId q) {
  auto it = series.share_counts.find(q);
  if (it == series.share_counts.end()) {
    throw Error(ErrorCode::MissingQuarter, "no share counts for " + q.str());
  }
  return it->second;
}

std::vector<TransitionMatrix> history_of(const QuarterSeries& series, const InterventionSpec& spec) {
  std::vector<TransitionMatrix> history;
  for (QuarterId q = spec.observation_window.first.next(); q <= spec.t_star(); q = q.next()) {
    history.push_back(series.matrix(q));
  }
  return history;
}

nlohmann::json result_json(const bootstrap::BootstrapResult& r) {
  return {{"point", r.point},   {"se", r.se},           {"ci_lo", r.ci_lo},
          {"ci_hi", r.ci_hi},   {"p_value", r.p_value}, {"significant", r.significant()}};
}

nlohmann::json row_json(const Eigen::RowVectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::string marked(double v, bool significant) {
  return io::format_double(v) + (significant ? "*" : "");
}

}  // namespace

std::string to_string(Scale scale) {
  switch (scale) {
    case Scale::Logit:
      return "logit";
    case Scale::Raw:
      return "raw";
    case Scale::Alr:
      return "alr";
  }
  return "logit";
}

Scale parse_scale(const std::string& text) {
  if (text == "logit") return Scale::Logit;
  if (text == "raw") return Scale::Raw;
  if (text == "alr") return Scale::Alr;
  throw Error(ErrorCode::ConfigInvalid, "scale must be logit, raw or alr, got '" + text + "'");
}

void InterventionSpec::validate() const {
  if (horizon < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be at least 1");
  if (observation_window.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "observation window must span at least two quarters");
  }
}

MatrixForecast forecast_chain(const std::vector<TransitionMatrix>& history, int horizon,
                              const ForecastOptions& options,
                              const std::vector<std::optional<arima::ArimaSpec>>* fixed_specs) {
  if (history.empty()) throw Error(ErrorCode::EmptyChain, "no matrices to forecast from");
  if (horizon < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be at least 1");
  MatrixChain(std::vector<TransitionMatrix>(history));  // checks periods and spaces
  const StateSpace& space = history.front().space();
  const int k = space.size();
  if (fixed_specs && fixed_specs->size() != static_cast<std::size_t>(k * k)) {
    throw Error(ErrorCode::InvalidArgument, "one fixed model per cell is required");
  }

  std::vector<CellOutcome> outcomes(static_cast<std::size_t>(k * k));
  parallel_for(outcomes.size(), options.threads, [&](std::size_t c) {
    const int i = static_cast<int>(c) / k;
    const int j = static_cast<int>(c) % k;
    outcomes[c] = forecast_cell(history, i, j, horizon, options,
                                fixed_specs ? &(*fixed_specs)[c] : nullptr);
  });

  MatrixForecast out{MatrixChain{}, {}, {}, {}};
  const TransitionMatrix& last = history.back();
  std::vector<Eigen::MatrixXd> entries(horizon, Eigen::MatrixXd::Zero(k, k));
  for (int i = 0; i < k; ++i) {
    int with_series = 0, failed = 0;
    const CellOutcome* first_failure = nullptr;
    for (int j = 0; j < k; ++j) {
      const auto& o = outcomes[i * k + j];
      if (!o.has_series) continue;
      ++with_series;
      if (o.failed) {
        ++failed;
        if (!first_failure) first_failure = &o;
      }
    }
    if (2 * failed > with_series) {
      out.fallback_rows.push_back(i);
      out.warnings.push_back("RowFallback(" + space.label(i) + "): " + std::to_string(failed) +
                             " of " + std::to_string(with_series) +
                             " cell models failed, last observed row used");
      for (int h = 0; h < horizon; ++h) entries[h].row(i) = last.entries().row(i);
      continue;
    }
    if (first_failure) {
      throw Error(first_failure->code, "cell " + cell_name(space, i, first_failure->cell.to) +
                                           ": " + first_failure->cell.error);
    }
    for (int h = 0; h < horizon; ++h) {
      for (int j = 0; j < k; ++j) {
        const auto& o = outcomes[i * k + j];
        entries[h](i, j) = o.has_series ? o.cell.mean[h] : 1.0;
      }
      if (options.scale == Scale::Alr) entries[h].row(i) /= entries[h].row(i).sum();
      for (int j = 0; j < k; ++j) {
        entries[h](i, j) = std::clamp(entries[h](i, j), kEntryFloor, kEntryCeiling);
      }
      entries[h].row(i) /= entries[h].row(i).sum();
    }
  }

  std::vector<TransitionMatrix> chain;
  chain.reserve(horizon);
  for (int h = 0; h < horizon; ++h) {
    chain.emplace_back(space, std::move(entries[h]), last.period().plus(h + 1));
  }
  out.chain = MatrixChain(std::move(chain));
  for (auto& o : outcomes) {
    if (o.failed) {
      out.warnings.push_back("CellFailure" + cell_name(space, o.cell.from, o.cell.to) + ": " +
                             o.cell.error);
    }
    out.cells.push_back(std::move(o.cell));
  }
  return out;
}

MatrixForecast forecast_matrices(const QuarterSeries& series, const InterventionSpec& spec,
                                 const ForecastOptions& options) {
  spec.validate();
  return forecast_chain(history_of(series, spec), spec.horizon, options);
}

SharePath fitted_path(const QuarterSeries& series, const InterventionSpec& spec) {
  spec.validate();
  std::vector<TransitionMatrix> ms;
  for (int h = 1; h <= spec.horizon; ++h) ms.push_back(series.matrix(spec.t_star().plus(h)));
  MatrixChain chain(std::move(ms));
  auto shares = propagate_path(series.share(spec.t_star()), chain);
  return SharePath{std::move(chain), std::move(shares)};
}

std::vector<ShareVector> counterfactual_path(const QuarterSeries& series,
                                             const InterventionSpec& spec,
                                             const ForecastOptions& options) {
  const MatrixForecast fc = forecast_matrices(series, spec, options);
  return propagate_path(series.share(spec.t_star()), fc.chain);
}

EffectPoint compute_effects(const ShareVector& anchor, const MatrixChain& fitted,
                            const MatrixChain& forecast) {
  if (fitted.size() != forecast.size()) {
    throw Error(ErrorCode::InvalidArgument, "fitted and forecast chains differ in length");
  }
  auto fitted_shares = propagate_path(anchor, fitted);
  auto forecast_shares = propagate_path(anchor, forecast);
  const int k = anchor.space().size();
  Eigen::RowVectorXd fit_avg = Eigen::RowVectorXd::Zero(k);
  Eigen::RowVectorXd fc_avg = Eigen::RowVectorXd::Zero(k);
  for (std::size_t h = 0; h < fitted_shares.size(); ++h) {
    fit_avg += fitted_shares[h].values();
    fc_avg += forecast_shares[h].values();
  }
  fit_avg /= static_cast<double>(fitted_shares.size());
  fc_avg /= static_cast<double>(forecast_shares.size());
  TransitionMatrix cum_fit = chain_product(fitted);
  TransitionMatrix cum_fc = chain_product(forecast);
  Eigen::MatrixXd cum_eff = matrix_difference(cum_fit, cum_fc);
  Eigen::RowVectorXd diffs = fit_avg - fc_avg;
  return EffectPoint{std::move(fitted_shares), std::move(forecast_shares), std::move(fit_avg),
                     std::move(fc_avg),        std::move(diffs),           std::move(cum_fit),
                     std::move(cum_fc),        std::move(cum_eff)};
}

bool EffectReport::any_count_significant() const {
  return std::any_of(count_diff_ci.begin(), count_diff_ci.end(),
                     [](const auto& r) { return r.significant(); });
}

EffectReport effects(const QuarterSeries& series, const InterventionSpec& spec, double population,
                     const bootstrap::BootstrapConfig& cfg, const EffectOptions& options) {
  spec.validate();
  cfg.validate();
  if (!(population > 0.0) || !std::isfinite(population)) {
    throw Error(ErrorCode::InvalidArgument, "population must be a positive number");
  }
  const StateSpace& space = series.space;
  const int k = space.size();

  MatrixForecast fc = forecast_matrices(series, spec, options.forecast);
  const SharePath fitted = fitted_path(series, spec);
  const ShareVector& anchor = series.share(spec.t_star());
  EffectPoint point = compute_effects(anchor, fitted.chain, fc.chain);

  Eigen::RowVectorXd observed = Eigen::RowVectorXd::Zero(k);
  for (int h = 1; h <= spec.horizon; ++h) observed += series.share(spec.t_star().plus(h)).values();
  observed /= static_cast<double>(spec.horizon);

  std::vector<std::optional<arima::ArimaSpec>> fixed;
  for (const auto& c : fc.cells) fixed.push_back(c.spec);

  // Counts for every quarter a replicate needs, resolved up front.
  std::vector<const FlowCounts*> pre, post;
  for (QuarterId q = spec.observation_window.first.next(); q <= spec.t_star(); q = q.next()) {
    pre.push_back(&counts_at(series, q));
  }
  for (int h = 1; h <= spec.horizon; ++h) post.push_back(&counts_at(series, spec.t_star().plus(h)));
  const ShareCounts& anchor_counts = share_counts_at(series, spec.t_star());

  ForecastOptions inner = options.forecast;
  inner.threads = 1;
  const std::size_t b = static_cast<std::size_t>(cfg.replicates);
  std::vector<std::optional<std::vector<double>>> slots(b);
  parallel_for(b, cfg.threads, [&](std::size_t rep) {
    bootstrap::Rng rng(derive_seed(cfg.master_seed, rep));
    try {
      std::vector<TransitionMatrix> history, horizon_ms;
      for (const FlowCounts* c : pre) {
        history.push_back(matrix_from_counts(bootstrap::resample_counts(*c, rng), space, c->period));
      }
      for (const FlowCounts* c : post) {
        horizon_ms.push_back(
            matrix_from_counts(bootstrap::resample_counts(*c, rng), space, c->period));
      }
      const Eigen::VectorXd totals = bootstrap::resample_counts(anchor_counts, rng);
      const ShareVector rep_anchor(space, totals.transpose() / totals.sum(), spec.t_star());
      MatrixChain rep_fc;
      switch (cfg.mode) {
        case bootstrap::Mode::FullPipeline:
          rep_fc = forecast_chain(history, spec.horizon, inner).chain;
          break;
        case bootstrap::Mode::FixedOrders:
          rep_fc = forecast_chain(history, spec.horizon, inner, &fixed).chain;
          break;
        case bootstrap::Mode::EstimationOnly:
          rep_fc = fc.chain;
          break;
      }
      slots[rep] = statistic_vector(compute_effects(rep_anchor, MatrixChain(std::move(horizon_ms)),
                                                    rep_fc));
    } catch (const Error&) {
      // Dropped replicate; counted by summarize.
    }
  });

  std::vector<std::vector<double>> reps;
  auto results = bootstrap::summarize(slots, statistic_vector(point), cfg, &reps);

  // Counts are shares times a positive constant, so their percentile
  // intervals and flags follow exactly from the share replicates.
  std::vector<bootstrap::BootstrapResult> count_ci;
  std::vector<double> column(reps.size());
  for (int i = 0; i < k; ++i) {
    for (std::size_t r = 0; r < reps.size(); ++r) column[r] = reps[r][i] * population;
    count_ci.push_back(bootstrap::se_and_ci(column, cfg, point.share_diffs(i) * population));
  }
  std::vector<std::string> warnings = series.warnings;
  for (const auto& w : fc.warnings) warnings.push_back(w);

  EffectReport report{spec,
                      space,
                      population,
                      std::move(point),
                      std::move(observed),
                      {results.begin(), results.begin() + k},
                      std::move(count_ci),
                      {results.begin() + k, results.end()},
                      std::move(fc),
                      cfg,
                      options.forecast,
                      options.filter,
                      std::move(warnings),
                      {}};
  if (options.keep_replicates) report.replicates = std::move(reps);
  return report;
}

PlaceboReport placebo(const QuarterSeries& series, const InterventionSpec& placebo_spec,
                      QuarterId true_t_star, double population,
                      const bootstrap::BootstrapConfig& cfg, const EffectOptions& options) {
  placebo_spec.validate();
  if (placebo_spec.horizon_end() > true_t_star) {
    throw Error(ErrorCode::PlaceboOverlap,
                "placebo horizon ends at " + placebo_spec.horizon_end().str() +
                    ", after the true intervention quarter " + true_t_star.str());
  }
  PlaceboReport out{effects(series, placebo_spec, population, cfg, options), true_t_star, false};
  out.pass = !out.report.any_count_significant();
  return out;
}

ShiftReport shift_tstar(const QuarterSeries& series, const InterventionSpec& spec,
                        QuarterId new_t_star, double population,
                        const bootstrap::BootstrapConfig& cfg, const EffectOptions& options) {
  const int shift = new_t_star.minus(spec.t_star());
  if (std::abs(shift) > 1) {
    throw Error(ErrorCode::ShiftTooLarge, "t_star may move by at most one quarter, got " +
                                              std::to_string(shift));
  }
  InterventionSpec moved = spec;
  moved.observation_window.last = new_t_star;
  EffectReport base = effects(series, spec, population, cfg, options);
  EffectReport shifted = shift == 0 ? base : effects(series, moved, population, cfg, options);
  return ShiftReport{std::move(base), std::move(shifted), shift};
}

nlohmann::json to_json(const EffectReport& r) {
  const auto& labels = r.space.labels();
  const int k = r.space.size();
  nlohmann::json j;
  j["space"] = labels;
  j["t_star"] = r.spec.t_star().str();
  j["observation_window"] = r.spec.observation_window.str();
  j["horizon"] = r.spec.horizon;
  j["population"] = r.population;
  j["filter"] = r.filter;
  j["scale"] = to_string(r.options.scale);
  j["seasonal"] = r.options.seasonal;
  j["bootstrap"] = {{"replicates", r.bootstrap.replicates},
                    {"master_seed", r.bootstrap.master_seed},
                    {"mode", bootstrap::to_string(r.bootstrap.mode)},
                    {"ci_level", r.bootstrap.ci_level},
                    {"interval", "percentile"},
                    {"b_effective", r.share_diff_ci.empty() ? 0 : r.share_diff_ci[0].b_effective}};
  j["fitted_shares"] = row_json(r.point.fitted_shares);
  j["forecasted_shares"] = row_json(r.point.forecast_shares);
  j["observed_shares"] = row_json(r.observed_shares);
  j["observed_minus_fitted"] = row_json(r.observed_shares - r.point.fitted_shares);

  nlohmann::json shares = nlohmann::json::array(), counts = nlohmann::json::array();
  for (int i = 0; i < k; ++i) {
    auto s = result_json(r.share_diff_ci[i]);
    s["state"] = labels[i];
    shares.push_back(s);
    auto c = result_json(r.count_diff_ci[i]);
    c["state"] = labels[i];
    counts.push_back(c);
  }
  j["share_diffs"] = shares;
  j["count_diffs"] = counts;
  j["cumulative_fitted"] = io::to_json(r.point.cumulative_fitted);
  j["cumulative_forecasted"] = io::to_json(r.point.cumulative_forecast);
  nlohmann::json cum = nlohmann::json::array();
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      auto c = result_json(r.cumulative_ci[a * k + b]);
      c["from"] = labels[a];
      c["to"] = labels[b];
      cum.push_back(c);
    }
  }
  j["cumulative_effects"] = cum;

  nlohmann::json fitted = nlohmann::json::array(), forecast = nlohmann::json::array();
  for (const auto& s : r.point.fitted_path) fitted.push_back(io::to_json(s));
  for (const auto& s : r.point.forecast_path) forecast.push_back(io::to_json(s));
  j["paths"] = {{"fitted", fitted}, {"forecasted", forecast}};

  nlohmann::json models = nlohmann::json::array();
  for (const auto& c : r.forecast.cells) {
    nlohmann::json m{{"from", labels[c.from]}, {"to", labels[c.to]}};
    m["model"] = c.spec ? nlohmann::json(c.spec->str()) : nlohmann::json(nullptr);
    if (!c.error.empty()) m["error"] = c.error;
    models.push_back(m);
  }
  j["forecast_models"] = models;
  nlohmann::json fallback = nlohmann::json::array();
  for (int i : r.forecast.fallback_rows) fallback.push_back(labels[i]);
  j["fallback_rows"] = fallback;
  j["warnings"] = r.warnings;
  return j;
}

nlohmann::json to_json(const PlaceboReport& r) {
  nlohmann::json j = to_json(r.report);
  j["kind"] = "placebo";
  j["true_t_star"] = r.true_t_star.str();
  j["pass"] = r.pass;
  return j;
}

nlohmann::json to_json(const ShiftReport& r) {
  return {{"kind", "shift"}, {"shift", r.shift}, {"base", to_json(r.base)},
          {"shifted", to_json(r.shifted)}};
}

void write_report(const EffectReport& r, const QuarterSeries& series,
                  const std::filesystem::path& dir) {
  const auto& labels = r.space.labels();
  const int k = r.space.size();
  std::map<std::string, std::string> files;
  files["effects.json"] = to_json(r).dump(2) + "\n";

  auto header = [&](const std::string& first) {
    std::string h = first;
    for (const auto& l : labels) h += "," + l;
    return h + "\n";
  };
  auto row = [&](const std::string& name, const Eigen::RowVectorXd& v) {
    std::string line = name;
    for (int i = 0; i < v.size(); ++i) line += "," + io::format_double(v(i));
    return line + "\n";
  };

  std::string a = header("row");
  a += row("fitted", r.point.fitted_shares);
  a += row("forecasted", r.point.forecast_shares);
  a += "difference";
  for (int i = 0; i < k; ++i) a += "," + marked(r.point.share_diffs(i), r.share_diff_ci[i].significant());
  a += "\n";
  files["table2a.csv"] = a;

  std::string b = header("row");
  b += row("fitted", r.point.fitted_shares * r.population);
  b += row("forecasted", r.point.forecast_shares * r.population);
  b += "difference";
  for (int i = 0; i < k; ++i) b += "," + marked(r.count_diffs()(i), r.count_diff_ci[i].significant());
  b += "\n";
  Eigen::RowVectorXd lo(k), hi(k);
  for (int i = 0; i < k; ++i) {
    lo(i) = r.count_diff_ci[i].ci_lo;
    hi(i) = r.count_diff_ci[i].ci_hi;
  }
  b += row("ci_lo", lo);
  b += row("ci_hi", hi);
  files["table2b.csv"] = b;

  std::string c = header("from");
  for (int i = 0; i < k; ++i) {
    c += labels[i];
    for (int j = 0; j < k; ++j) {
      c += "," + marked(r.point.cumulative_effects(i, j), r.cumulative_ci[i * k + j].significant());
    }
    c += "\n";
  }
  files["table2c.csv"] = c;

  for (const auto& cell : r.forecast.cells) {
    std::string s = "period,observed,forecast,lo95,hi95\n";
    for (QuarterId q = r.spec.observation_window.first.next(); q <= r.spec.horizon_end();
         q = q.next()) {
      s += q.str() + ",";
      if (auto it = series.matrices.find(q); it != series.matrices.end()) {
        s += io::format_double(it->second(cell.from, cell.to));
      }
      const int h = q.minus(r.spec.t_star());
      if (h >= 1) {
        s += "," + io::format_double(r.forecast.chain[h - 1](cell.from, cell.to));
        if (!cell.lo95.empty()) {
          s += "," + io::format_double(cell.lo95[h - 1]) + "," + io::format_double(cell.hi95[h - 1]);
        } else {
          s += ",,";
        }
      } else {
        s += ",,,";
      }
      s += "\n";
    }
    files["series_" + labels[cell.from] + "_" + labels[cell.to] + ".csv"] = s;
  }

  std::filesystem::create_directories(dir);
  if (!r.replicates.empty()) {
    std::vector<std::string> names;
    for (const auto& l : labels) names.push_back("share_diff_" + l);
    for (const auto& f : labels)
      for (const auto& t : labels) names.push_back("cumulative_" + f + "_" + t);
    bootstrap::write_replicates_csv(dir / "replicates_effects.csv", names, r.replicates);
  }
  for (const auto& [name, text] : files) io::write_text_file(dir / name, text);
}

}  // namespace lmflow::carima
