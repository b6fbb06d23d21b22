#include "lmflow/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>

#include "lmflow/error.hpp"
#include "lmflow/flow_io.hpp"
#include "lmflow/parallel.hpp"

namespace lmflow::bootstrap {

namespace {

template <class Record>
std::vector<Record> resample_weighted(std::span<const Record> input, Rng& rng) {
  if (input.empty()) throw Error(ErrorCode::EmptySample, "cannot resample an empty sample");
  std::vector<double> weights;
  weights.reserve(input.size());
  for (const auto& r : input) weights.push_back(r.weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::vector<Record> out;
  out.reserve(input.size());
  for (std::size_t k = 0; k < input.size(); ++k) {
    out.push_back(input[pick(rng)]);
    out.back().weight = 1.0;
  }
  return out;
}

// Sequential-binomial multinomial draw of `n` items over `probs`.
void multinomial(long n, const double* weights, long cells, double* out, Rng& rng) {
  double remaining_mass = 0.0;
  for (long c = 0; c < cells; ++c) remaining_mass += weights[c];
  long remaining = n;
  for (long c = 0; c < cells; ++c) {
    if (remaining == 0 || remaining_mass <= 0.0 || weights[c] <= 0.0) {
      out[c] = 0.0;
      remaining_mass -= std::max(weights[c], 0.0);
      continue;
    }
    const double p = std::min(1.0, weights[c] / remaining_mass);
    const long k = (c == cells - 1 || p >= 1.0) ? remaining
                                                : std::binomial_distribution<long>(remaining, p)(rng);
    out[c] = static_cast<double>(k);
    remaining -= k;
    remaining_mass -= weights[c];
  }
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::FullPipeline:
      return "full_pipeline";
    case Mode::FixedOrders:
      return "fixed_orders";
    case Mode::EstimationOnly:
      return "estimation_only";
  }
  return "full_pipeline";
}

Mode parse_mode(const std::string& text) {
  if (text == "full_pipeline" || text == "full") return Mode::FullPipeline;
  if (text == "fixed_orders") return Mode::FixedOrders;
  if (text == "estimation_only" || text == "estimation") return Mode::EstimationOnly;
  throw Error(ErrorCode::InvalidArgument,
              "bootstrap mode must be full_pipeline, fixed_orders or estimation_only");
}

void BootstrapConfig::validate() const {
  if (replicates < 100) {
    throw Error(ErrorCode::TooFewReplicates, "at least 100 bootstrap replicates are required, got " +
                                                 std::to_string(replicates));
  }
  if (!(ci_level > 0.0 && ci_level < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "ci_level must lie in (0,1)");
  }
}

std::vector<TransitionRecord> resample(std::span<const TransitionRecord> transitions, Rng& rng) {
  return resample_weighted(transitions, rng);
}

std::vector<TransitionRecord> resample(std::span<const TransitionRecord> transitions,
                                       std::uint64_t seed) {
  Rng rng(seed);
  return resample_weighted(transitions, rng);
}

std::vector<PersonQuarterRecord> resample(std::span<const PersonQuarterRecord> records, Rng& rng) {
  return resample_weighted(records, rng);
}

LinkedPanel resample_panel(const LinkedPanel& panel, std::uint64_t seed) {
  Rng rng(seed);
  std::map<QuarterId, std::vector<PersonQuarterRecord>> records;
  for (const auto& r : panel.records) records[r.period].push_back(r);
  std::map<QuarterId, std::vector<TransitionRecord>> moves;
  for (const auto& t : panel.transitions) moves[t.period].push_back(t);

  LinkedPanel out{panel.space, {}, {}};
  out.records.reserve(panel.records.size());
  out.transitions.reserve(panel.transitions.size());
  for (const auto& [q, rs] : records) {
    auto drawn = resample_weighted<PersonQuarterRecord>(rs, rng);
    out.records.insert(out.records.end(), drawn.begin(), drawn.end());
  }
  for (const auto& [q, ts] : moves) {
    auto drawn = resample_weighted<TransitionRecord>(ts, rng);
    out.transitions.insert(out.transitions.end(), drawn.begin(), drawn.end());
  }
  return out;
}

Eigen::MatrixXd resample_counts(const FlowCounts& counts, Rng& rng) {
  if (counts.n_records <= 0) throw Error(ErrorCode::EmptySample, "no transitions to resample");
  // Row-major walk over cells so the draw order is fixed.
  const long k = counts.counts.rows();
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = counts.counts;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(k, k);
  multinomial(counts.n_records, w.data(), k * k, out.data(), rng);
  return out;
}

Eigen::VectorXd resample_counts(const ShareCounts& counts, Rng& rng) {
  if (counts.n_records <= 0) throw Error(ErrorCode::EmptySample, "no records to resample");
  Eigen::VectorXd out(counts.totals.size());
  multinomial(counts.n_records, counts.totals.data(), counts.totals.size(), out.data(), rng);
  return out;
}

BootstrapResult se_and_ci(std::span<const double> replicate_values, const BootstrapConfig& cfg,
                          std::optional<double> point) {
  if (!(cfg.ci_level > 0.0 && cfg.ci_level < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "ci_level must lie in (0,1)");
  }
  std::vector<double> v;
  v.reserve(replicate_values.size());
  for (double x : replicate_values) {
    if (std::isfinite(x)) v.push_back(x);
  }
  if (v.size() < 100) {
    throw Error(ErrorCode::TooFewReplicates,
                "need at least 100 finite replicate values, got " + std::to_string(v.size()));
  }
  const double b = static_cast<double>(v.size());
  // Centring on the first value keeps a constant sample exactly at se 0.
  double shift = 0.0;
  for (double x : v) shift += x - v.front();
  const double mean = v.front() + shift / b;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);

  BootstrapResult r;
  r.point = point.value_or(mean);
  r.se = std::sqrt(ss / b);
  r.b_effective = static_cast<int>(v.size());

  std::sort(v.begin(), v.end());
  const double alpha = 1.0 - cfg.ci_level;
  const long n = static_cast<long>(v.size());
  long lo = static_cast<long>(std::floor((b + 1.0) * alpha / 2.0));
  long hi = static_cast<long>(std::ceil((b + 1.0) * (1.0 - alpha / 2.0)));
  lo = std::clamp(lo, 1L, n);
  hi = std::clamp(hi, 1L, n);
  r.ci_lo = v[lo - 1];
  r.ci_hi = v[hi - 1];

  const auto le0 = std::upper_bound(v.begin(), v.end(), 0.0) - v.begin();
  const auto lt0 = std::lower_bound(v.begin(), v.end(), 0.0) - v.begin();
  const double frac_le = static_cast<double>(le0) / b;
  const double frac_ge = static_cast<double>(n - lt0) / b;
  r.p_value = std::clamp(2.0 * std::min(frac_le, frac_ge), 2.0 / (b + 1.0), 1.0);
  return r;
}

std::vector<BootstrapResult> run_many(const VectorStatistic& statistic, const LinkedPanel& panel,
                                      const BootstrapConfig& cfg,
                                      std::vector<std::vector<double>>* replicates) {
  cfg.validate();
  const std::vector<double> point = statistic(panel);
  const std::size_t b = static_cast<std::size_t>(cfg.replicates);
  std::vector<std::optional<std::vector<double>>> slots(b);
  parallel_for(b, cfg.threads, [&](std::size_t k) {
    const LinkedPanel sample = resample_panel(panel, derive_seed(cfg.master_seed, k));
    try {
      auto values = statistic(sample);
      if (values.size() != point.size()) {
        throw Error(ErrorCode::InvalidArgument, "statistic changed length across replicates");
      }
      slots[k] = std::move(values);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::InvalidArgument) throw;
    }
  });

  return summarize(slots, point, cfg, replicates);
}

std::vector<BootstrapResult> summarize(std::vector<std::optional<std::vector<double>>>& slots,
                                       const std::vector<double>& point, const BootstrapConfig& cfg,
                                       std::vector<std::vector<double>>* replicates) {
  const std::size_t b = slots.size();
  std::vector<std::vector<double>> ok;
  ok.reserve(b);
  for (auto& s : slots) {
    if (s) ok.push_back(std::move(*s));
  }
  const std::size_t failed = b - ok.size();
  if (static_cast<double>(failed) > kMaxFailedShare * static_cast<double>(b)) {
    throw Error(ErrorCode::TooManyFailedReplicates,
                std::to_string(failed) + " of " + std::to_string(b) + " bootstrap replicates failed");
  }

  std::vector<BootstrapResult> results;
  results.reserve(point.size());
  std::vector<double> column(ok.size());
  for (std::size_t j = 0; j < point.size(); ++j) {
    for (std::size_t k = 0; k < ok.size(); ++k) column[k] = ok[k][j];
    results.push_back(se_and_ci(column, cfg, point[j]));
  }
  if (replicates) *replicates = std::move(ok);
  return results;
}

BootstrapResult run(const ScalarStatistic& statistic, const LinkedPanel& panel,
                    const BootstrapConfig& cfg) {
  auto results = run_many(
      [&](const LinkedPanel& p) { return std::vector<double>{statistic(p)}; }, panel, cfg);
  return results.front();
}

void write_replicates_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                          const std::vector<std::vector<double>>& replicates) {
  std::ostringstream os;
  os << "replicate";
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  for (std::size_t k = 0; k < replicates.size(); ++k) {
    os << k;
    for (double v : replicates[k]) os << ',' << io::format_double(v);
    os << '\n';
  }
  io::write_text_file(path, os.str());
}

}  // namespace lmflow::bootstrap
