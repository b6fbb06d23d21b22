#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lmflow/flow_core.hpp"
#include "lmflow/panel.hpp"

namespace lmflow {

/// Weighted transition counts behind one quarter's matrix estimate.
struct FlowCounts {
  StateSpace space;
  QuarterId period;
  Eigen::MatrixXd counts;        // summed weights, origin row / destination column
  Eigen::VectorXd row_totals;    // sum over destinations of `counts`
  Eigen::MatrixXd sum_sq;        // summed squared weights per cell
  Eigen::MatrixXi records;       // unweighted record count per cell
  long n_records = 0;

  /// Kish effective sample size (sum w)^2 / sum w^2 of cell (i,j).
  double effective_size(int i, int j) const;
};

/// Weighted state totals behind one quarter's share estimate.
struct ShareCounts {
  QuarterId period;
  Eigen::VectorXd totals;
  long n_records = 0;
  double effective_size = 0.0;
};

struct MatrixEstimate {
  TransitionMatrix matrix;
  FlowCounts counts;
  std::vector<std::string> warnings;
};

/// m(i,j) = M(i,j)/M(i) from the transitions observed at `period`. Rows with no
/// observed leavers fall back to the identity row and add a warning.
/// Throws EmptyQuarter when no transitions are given; every record must carry
/// `period`.
MatrixEstimate estimate_matrix(std::span<const TransitionRecord> transitions,
                               const StateSpace& space, QuarterId period);

/// Converts weighted counts to a row-stochastic matrix with the same
/// zero-row fallback as estimate_matrix.
TransitionMatrix matrix_from_counts(const Eigen::MatrixXd& counts, const StateSpace& space,
                                    QuarterId period, std::vector<std::string>* warnings = nullptr);

/// Weighted shares of the records observed at `period` (others are ignored).
ShareVector estimate_shares(std::span<const PersonQuarterRecord> records,
                            const StateSpace& space, QuarterId period);

ShareCounts count_shares(std::span<const PersonQuarterRecord> records, const StateSpace& space,
                         QuarterId period);

struct QuarterMeta {
  long n_records = 0;
  long n_transitions = 0;
  double share_effective_size = 0.0;
  double transition_effective_size = 0.0;
};

/// Per-quarter shares, matrices and the counts they were estimated from.
struct QuarterSeries {
  StateSpace space;
  QuarterWindow window;
  std::map<QuarterId, ShareVector> shares;
  std::map<QuarterId, TransitionMatrix> matrices;
  std::map<QuarterId, FlowCounts> counts;
  std::map<QuarterId, ShareCounts> share_counts;
  std::map<QuarterId, QuarterMeta> meta;
  std::vector<std::string> warnings;

  const TransitionMatrix& matrix(QuarterId q) const;
  const ShareVector& share(QuarterId q) const;
};

/// Shares for every quarter in `window`, matrices for every consecutive pair.
/// Throws WindowNotCovered when a quarter has no records.
QuarterSeries build_series(const LinkedPanel& panel, const QuarterWindow& window);

/// Convenience: filter, link, then build.
QuarterSeries build_series(const std::vector<PersonQuarterRecord>& records,
                           const StateSpace& space, const QuarterWindow& window,
                           const SubgroupFilter& filter, const LinkOptions& options = {});

/// Writes shares.csv, matrix_<period>.csv and meta.json into `dir`.
void export_series(const QuarterSeries& series, const std::filesystem::path& dir);

}  // namespace lmflow
