#include "lmflow/estimator.hpp"

#include <nlohmann/json.hpp>
#include <sstream>

#include "lmflow/error.hpp"
#include "lmflow/flow_io.hpp"

namespace lmflow {

double FlowCounts::effective_size(int i, int j) const {
  const double s = counts(i, j);
  const double s2 = sum_sq(i, j);
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

TransitionMatrix matrix_from_counts(const Eigen::MatrixXd& counts, const StateSpace& space,
                                    QuarterId period, std::vector<std::string>* warnings) {
  const int k = space.size();
  Eigen::MatrixXd m(k, k);
  for (int i = 0; i < k; ++i) {
    const double total = counts.row(i).sum();
    if (total > 0.0) {
      m.row(i) = counts.row(i) / total;
    } else {
      m.row(i).setZero();
      m(i, i) = 1.0;
      if (warnings) {
        warnings->push_back("ZeroRowFallback(" + space.label(i) + ") at " + period.str() +
                            ": no observed transitions out of state, identity row used");
      }
    }
  }
  return TransitionMatrix(space, std::move(m), period);
}

MatrixEstimate estimate_matrix(std::span<const TransitionRecord> transitions,
                               const StateSpace& space, QuarterId period) {
  if (transitions.empty()) {
    throw Error(ErrorCode::EmptyQuarter, "no transitions observed at " + period.str());
  }
  const int k = space.size();
  FlowCounts fc{space,
                period,
                Eigen::MatrixXd::Zero(k, k),
                Eigen::VectorXd::Zero(k),
                Eigen::MatrixXd::Zero(k, k),
                Eigen::MatrixXi::Zero(k, k),
                0};
  for (const auto& t : transitions) {
    if (t.period != period) {
      throw Error(ErrorCode::PeriodMismatch,
                  "transition at " + t.period.str() + " passed for quarter " + period.str());
    }
    if (t.from_state < 0 || t.from_state >= k || t.to_state < 0 || t.to_state >= k) {
      throw Error(ErrorCode::BadStateLabel, "transition state index out of range");
    }
    fc.counts(t.from_state, t.to_state) += t.weight;
    fc.sum_sq(t.from_state, t.to_state) += t.weight * t.weight;
    fc.records(t.from_state, t.to_state) += 1;
  }
  fc.n_records = static_cast<long>(transitions.size());
  fc.row_totals = fc.counts.rowwise().sum();

  std::vector<std::string> warnings;
  TransitionMatrix m = matrix_from_counts(fc.counts, space, period, &warnings);
  return MatrixEstimate{std::move(m), std::move(fc), std::move(warnings)};
}

ShareCounts count_shares(std::span<const PersonQuarterRecord> records, const StateSpace& space,
                         QuarterId period) {
  ShareCounts sc{period, Eigen::VectorXd::Zero(space.size()), 0, 0.0};
  double sum_sq = 0.0;
  for (const auto& r : records) {
    if (r.period != period) continue;
    sc.totals(r.state) += r.weight;
    sum_sq += r.weight * r.weight;
    ++sc.n_records;
  }
  const double total = sc.totals.sum();
  sc.effective_size = sum_sq > 0.0 ? total * total / sum_sq : 0.0;
  return sc;
}

ShareVector estimate_shares(std::span<const PersonQuarterRecord> records,
                            const StateSpace& space, QuarterId period) {
  const ShareCounts sc = count_shares(records, space, period);
  if (sc.n_records == 0) {
    throw Error(ErrorCode::EmptyQuarter, "no person-quarter records at " + period.str());
  }
  Eigen::RowVectorXd v = sc.totals.transpose() / sc.totals.sum();
  return ShareVector(space, std::move(v), period);
}

const TransitionMatrix& QuarterSeries::matrix(QuarterId q) const {
  auto it = matrices.find(q);
  if (it == matrices.end()) throw Error(ErrorCode::MissingQuarter, "no matrix for " + q.str());
  return it->second;
}

const ShareVector& QuarterSeries::share(QuarterId q) const {
  auto it = shares.find(q);
  if (it == shares.end()) throw Error(ErrorCode::MissingQuarter, "no shares for " + q.str());
  return it->second;
}

QuarterSeries build_series(const LinkedPanel& panel, const QuarterWindow& window) {
  QuarterSeries s{panel.space, window, {}, {}, {}, {}, {}, {}};

  std::map<QuarterId, std::vector<PersonQuarterRecord>> by_quarter;
  for (const auto& r : panel.records) {
    if (window.contains(r.period)) by_quarter[r.period].push_back(r);
  }
  std::map<QuarterId, std::vector<TransitionRecord>> moves;
  for (const auto& t : panel.transitions) {
    if (window.contains(t.period) && t.period != window.first) moves[t.period].push_back(t);
  }

  for (QuarterId q = window.first; q <= window.last; q = q.next()) {
    auto it = by_quarter.find(q);
    if (it == by_quarter.end() || it->second.empty()) {
      throw Error(ErrorCode::WindowNotCovered, "no records in quarter " + q.str());
    }
    s.shares.emplace(q, estimate_shares(it->second, s.space, q));
    const ShareCounts sc = count_shares(it->second, s.space, q);
    s.meta[q].n_records = sc.n_records;
    s.meta[q].share_effective_size = sc.effective_size;
    s.share_counts.emplace(q, sc);

    if (q == window.first) continue;
    auto mt = moves.find(q);
    if (mt == moves.end()) {
      throw Error(ErrorCode::EmptyQuarter, "no linked transitions into " + q.str());
    }
    MatrixEstimate est = estimate_matrix(mt->second, s.space, q);
    double w = est.counts.counts.sum();
    double w2 = est.counts.sum_sq.sum();
    s.meta[q].n_transitions = est.counts.n_records;
    s.meta[q].transition_effective_size = w2 > 0.0 ? w * w / w2 : 0.0;
    for (auto& msg : est.warnings) s.warnings.push_back(std::move(msg));
    s.matrices.emplace(q, std::move(est.matrix));
    s.counts.emplace(q, std::move(est.counts));
  }
  return s;
}

QuarterSeries build_series(const std::vector<PersonQuarterRecord>& records,
                           const StateSpace& space, const QuarterWindow& window,
                           const SubgroupFilter& filter, const LinkOptions& options) {
  LinkedPanel panel = prepare_panel(records, space, filter, options);
  if (panel.records.empty() && !records.empty()) {
    throw Error(ErrorCode::EmptyQuarter, "filter '" + filter.name() + "' keeps no records");
  }
  return build_series(panel, window);
}

void export_series(const QuarterSeries& series, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream shares;
  shares << "period";
  for (const auto& l : series.space.labels()) shares << ',' << l;
  shares << '\n';
  for (const auto& [q, sv] : series.shares) {
    shares << q.str();
    for (int i = 0; i < sv.values().size(); ++i) shares << ',' << io::format_double(sv[i]);
    shares << '\n';
  }
  io::write_text_file(dir / "shares.csv", shares.str());

  for (const auto& [q, m] : series.matrices) {
    io::write_text_file(dir / ("matrix_" + q.str() + ".csv"), io::matrix_to_csv(m));
  }

  nlohmann::json meta;
  meta["space"] = series.space.labels();
  meta["window"] = series.window.str();
  nlohmann::json quarters = nlohmann::json::object();
  for (const auto& [q, m] : series.meta) {
    nlohmann::json cells = nlohmann::json::array();
    if (auto it = series.counts.find(q); it != series.counts.end()) {
      for (int i = 0; i < series.space.size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < series.space.size(); ++j) row.push_back(it->second.effective_size(i, j));
        cells.push_back(std::move(row));
      }
    }
    quarters[q.str()] = {{"n_records", m.n_records},
                         {"n_transitions", m.n_transitions},
                         {"share_effective_size", m.share_effective_size},
                         {"transition_effective_size", m.transition_effective_size},
                         {"cell_effective_size", cells}};
  }
  meta["quarters"] = quarters;
  meta["warnings"] = series.warnings;
  io::write_text_file(dir / "meta.json", meta.dump(2) + "\n");
}

}  // namespace lmflow
