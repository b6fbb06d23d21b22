#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "lmflow/quarter.hpp"

namespace lmflow {

/// Tolerance applied when validating freshly constructed vectors/matrices.
inline constexpr double kConstructionTol = 1e-9;
/// Looser tolerance for results of floating-point products.
inline constexpr double kArithmeticTol = 1e-8;

/// Ordered, unique labels of the K labour-market states.
class StateSpace {
 public:
  explicit StateSpace(std::vector<std::string> labels);

  /// SE, TE, PE, U, IN.
  static StateSpace canonical();
  /// Parses a comma-separated label list.
  static StateSpace parse(const std::string& csv);

  int size() const noexcept { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(int i) const { return labels_.at(i); }

  std::optional<int> find(const std::string& label) const;
  /// Throws BadStateLabel for unknown labels.
  int index_of(const std::string& label) const;

  bool operator==(const StateSpace&) const = default;

 private:
  std::vector<std::string> labels_;
};

/// Row vector of population shares. Entries in [0,1] summing to one.
class ShareVector {
 public:
  ShareVector(StateSpace space, Eigen::RowVectorXd values, QuarterId period,
              double tol = kConstructionTol);

  const StateSpace& space() const noexcept { return space_; }
  const Eigen::RowVectorXd& values() const noexcept { return values_; }
  double operator[](int i) const { return values_(i); }
  const QuarterId& period() const noexcept { return period_; }

 private:
  StateSpace space_;
  Eigen::RowVectorXd values_;
  QuarterId period_;
};

/// Row-stochastic matrix; entry (i,j) is the probability of moving from
/// origin i (row) to destination j (column). `period` is the destination
/// quarter t of the [t-1, t] transition.
class TransitionMatrix {
 public:
  /// Rows off by less than `tol` are renormalised; anything larger, or a
  /// negative entry beyond `tol`, throws InvalidMatrix.
  TransitionMatrix(StateSpace space, Eigen::MatrixXd entries, QuarterId period,
                   double tol = kConstructionTol);

  static TransitionMatrix identity(const StateSpace& space, QuarterId period);

  const StateSpace& space() const noexcept { return space_; }
  const Eigen::MatrixXd& entries() const noexcept { return entries_; }
  double operator()(int i, int j) const { return entries_(i, j); }
  const QuarterId& period() const noexcept { return period_; }
  int size() const noexcept { return space_.size(); }

 private:
  StateSpace space_;
  Eigen::MatrixXd entries_;
  QuarterId period_;
};

/// Transition matrices over strictly consecutive quarters sharing one space.
class MatrixChain {
 public:
  MatrixChain() = default;
  explicit MatrixChain(std::vector<TransitionMatrix> matrices);

  const std::vector<TransitionMatrix>& matrices() const noexcept { return matrices_; }
  bool empty() const noexcept { return matrices_.empty(); }
  std::size_t size() const noexcept { return matrices_.size(); }
  const TransitionMatrix& operator[](std::size_t i) const { return matrices_.at(i); }

 private:
  std::vector<TransitionMatrix> matrices_;
};

/// pi_t = pi_{t-1} * M_t.
ShareVector propagate(const ShareVector& pi, const TransitionMatrix& m);

/// Ordered product M_{t+1} * ... * M_{t+f}; period of the last factor.
TransitionMatrix chain_product(const MatrixChain& chain);

/// Entrywise a - b.
Eigen::MatrixXd matrix_difference(const TransitionMatrix& a, const TransitionMatrix& b);

/// Share path obtained by folding propagate over the chain, one vector per
/// matrix.
std::vector<ShareVector> propagate_path(const ShareVector& anchor, const MatrixChain& chain);

}  // namespace lmflow
