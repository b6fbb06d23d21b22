#include "lmflow/flow_core.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "lmflow/error.hpp"

namespace lmflow {

StateSpace::StateSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.size() < 2) {
    throw Error(ErrorCode::InvalidStateSpace, "a state space needs at least two states");
  }
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.empty()) throw Error(ErrorCode::InvalidStateSpace, "empty state label");
    if (!seen.insert(l).second) {
      throw Error(ErrorCode::InvalidStateSpace, "duplicate state label '" + l + "'");
    }
  }
}

StateSpace StateSpace::canonical() { return StateSpace({"SE", "TE", "PE", "U", "IN"}); }

StateSpace StateSpace::parse(const std::string& csv) {
  std::vector<std::string> labels;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) labels.push_back(item);
  return StateSpace(std::move(labels));
}

std::optional<int> StateSpace::find(const std::string& label) const {
  for (int i = 0; i < size(); ++i) {
    if (labels_[i] == label) return i;
  }
  return std::nullopt;
}

int StateSpace::index_of(const std::string& label) const {
  if (auto i = find(label)) return *i;
  throw Error(ErrorCode::BadStateLabel, "unknown state label '" + label + "'");
}

ShareVector::ShareVector(StateSpace space, Eigen::RowVectorXd values, QuarterId period,
                         double tol)
    : space_(std::move(space)), values_(std::move(values)), period_(period) {
  if (values_.size() != space_.size()) {
    throw Error(ErrorCode::StateSpaceMismatch, "share vector length differs from K");
  }
  for (int i = 0; i < values_.size(); ++i) {
    const double v = values_(i);
    if (!std::isfinite(v) || v < -tol || v > 1.0 + tol) {
      throw Error(ErrorCode::InvalidShareVector, "share outside [0,1]");
    }
    if (v < 0.0) values_(i) = 0.0;
  }
  const double total = values_.sum();
  if (std::abs(total - 1.0) > tol) {
    std::ostringstream os;
    os << "shares sum to " << total << ", not 1";
    throw Error(ErrorCode::InvalidShareVector, os.str());
  }
  values_ /= total;
}

TransitionMatrix::TransitionMatrix(StateSpace space, Eigen::MatrixXd entries,
                                   QuarterId period, double tol)
    : space_(std::move(space)), entries_(std::move(entries)), period_(period) {
  const int k = space_.size();
  if (entries_.rows() != k || entries_.cols() != k) {
    throw Error(ErrorCode::StateSpaceMismatch, "matrix shape differs from K x K");
  }
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double v = entries_(i, j);
      if (!std::isfinite(v) || v < -tol) {
        throw Error(ErrorCode::InvalidMatrix, "negative or non-finite transition probability");
      }
      if (v < 0.0) entries_(i, j) = 0.0;
    }
    const double total = entries_.row(i).sum();
    if (std::abs(total - 1.0) > tol) {
      std::ostringstream os;
      os << "row " << space_.label(i) << " sums to " << total;
      throw Error(ErrorCode::InvalidMatrix, os.str());
    }
    entries_.row(i) /= total;
  }
}

TransitionMatrix TransitionMatrix::identity(const StateSpace& space, QuarterId period) {
  return TransitionMatrix(space, Eigen::MatrixXd::Identity(space.size(), space.size()), period);
}

MatrixChain::MatrixChain(std::vector<TransitionMatrix> matrices)
    : matrices_(std::move(matrices)) {
  for (std::size_t i = 1; i < matrices_.size(); ++i) {
    if (!(matrices_[i].space() == matrices_[0].space())) {
      throw Error(ErrorCode::StateSpaceMismatch, "chain mixes state spaces");
    }
    if (matrices_[i].period() != matrices_[i - 1].period().next()) {
      throw Error(ErrorCode::PeriodMismatch, "chain periods are not consecutive at " +
                                                 matrices_[i].period().str());
    }
  }
}

ShareVector propagate(const ShareVector& pi, const TransitionMatrix& m) {
  if (!(pi.space() == m.space())) {
    throw Error(ErrorCode::StateSpaceMismatch, "share vector and matrix use different states");
  }
  if (m.period() != pi.period().next()) {
    throw Error(ErrorCode::PeriodMismatch, "matrix " + m.period().str() +
                                               " does not follow shares " + pi.period().str());
  }
  Eigen::RowVectorXd next = pi.values() * m.entries();
  return ShareVector(pi.space(), std::move(next), m.period(), kArithmeticTol);
}

TransitionMatrix chain_product(const MatrixChain& chain) {
  if (chain.empty()) throw Error(ErrorCode::EmptyChain, "cannot multiply an empty chain");
  Eigen::MatrixXd acc = chain[0].entries();
  for (std::size_t i = 1; i < chain.size(); ++i) acc = acc * chain[i].entries();
  const auto& last = chain.matrices().back();
  return TransitionMatrix(last.space(), std::move(acc), last.period(), kArithmeticTol);
}

Eigen::MatrixXd matrix_difference(const TransitionMatrix& a, const TransitionMatrix& b) {
  if (!(a.space() == b.space())) {
    throw Error(ErrorCode::StateSpaceMismatch, "cannot difference matrices over different states");
  }
  return a.entries() - b.entries();
}

std::vector<ShareVector> propagate_path(const ShareVector& anchor, const MatrixChain& chain) {
  std::vector<ShareVector> path;
  path.reserve(chain.size());
  const ShareVector* current = &anchor;
  for (const auto& m : chain.matrices()) {
    path.push_back(propagate(*current, m));
    current = &path.back();
  }
  return path;
}

}  // namespace lmflow
