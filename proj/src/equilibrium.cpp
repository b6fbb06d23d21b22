#include "lmflow/equilibrium.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <queue>
#include <sstream>
#include <vector>

#include "lmflow/error.hpp"
#include "lmflow/flow_io.hpp"

namespace lmflow::equilibrium {

namespace {

constexpr double kGuardTol = 1e-8;
constexpr double kPowerAgreementTol = 1e-10;

using Adjacency = std::vector<std::vector<int>>;

Adjacency positive_graph(const Eigen::MatrixXd& m) {
  const int k = static_cast<int>(m.rows());
  Adjacency adj(k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (m(i, j) > 0.0) adj[i].push_back(j);
  return adj;
}

std::vector<bool> reachable(const Adjacency& adj, int start) {
  std::vector<bool> seen(adj.size(), false);
  std::vector<int> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        stack.push_back(v);
      }
    }
  }
  return seen;
}

// Number of closed communicating classes.
int closed_classes(const Adjacency& adj) {
  const int k = static_cast<int>(adj.size());
  std::vector<std::vector<bool>> reach(k);
  for (int i = 0; i < k; ++i) reach[i] = reachable(adj, i);
  std::vector<bool> assigned(k, false);
  int closed = 0;
  for (int i = 0; i < k; ++i) {
    if (assigned[i]) continue;
    bool is_closed = true;
    for (int j = 0; j < k; ++j) {
      const bool same = reach[i][j] && reach[j][i];
      if (same) assigned[j] = true;
      if (reach[i][j] && !reach[j][i]) is_closed = false;
    }
    if (is_closed) ++closed;
  }
  return closed;
}

// Period of an irreducible chain: gcd of level[u] + 1 - level[v] over edges.
int period(const Adjacency& adj) {
  const int k = static_cast<int>(adj.size());
  std::vector<int> level(k, -1);
  std::queue<int> q;
  level[0] = 0;
  q.push(0);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (level[v] < 0) {
        level[v] = level[u] + 1;
        q.push(v);
      }
    }
  }
  int g = 0;
  for (int u = 0; u < k; ++u)
    for (int v : adj[u]) g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
  return g;
}

double denominator(const Eigen::Matrix3d& m) {
  return (1.0 - m(P, P)) * (1.0 + m(T, U) - m(U, U)) + m(T, P) * (1.0 + m(P, U) - m(U, U)) -
         m(U, P) * (m(P, U) - m(T, U));
}

Eigen::Matrix3d as3(const TransitionMatrix& m) { return m.entries(); }

}  // namespace

ThreeStateChain::ThreeStateChain(TransitionMatrix matrix_, double population_)
    : matrix(std::move(matrix_)), population(population_) {
  if (matrix.size() != 3) {
    throw Error(ErrorCode::InvalidStateSpace, "the equilibrium chain needs exactly three states");
  }
  if (!(population > 0.0)) throw Error(ErrorCode::InvalidArgument, "population must be positive");
}

ShareVector stationary_distribution(const TransitionMatrix& m) {
  const Eigen::MatrixXd& M = m.entries();
  const int k = m.size();
  const Adjacency adj = positive_graph(M);
  const int classes = closed_classes(adj);
  if (classes > 1) {
    throw Error(ErrorCode::NonUniqueStationary,
                "chain has " + std::to_string(classes) + " closed classes; stationary law is not unique");
  }
  const auto fwd = reachable(adj, 0);
  Adjacency rev(k);
  for (int u = 0; u < k; ++u)
    for (int v : adj[u]) rev[v].push_back(u);
  const auto bwd = reachable(rev, 0);
  for (int i = 0; i < k; ++i) {
    if (!fwd[i] || !bwd[i]) {
      throw Error(ErrorCode::NotIrreducible, "state " + m.space().label(i) + " does not communicate");
    }
  }
  if (period(adj) != 1) throw Error(ErrorCode::NotAperiodic, "chain is periodic");

  // (M' - I) pi' = 0 with the last equation replaced by sum(pi) = 1.
  Eigen::MatrixXd A = M.transpose() - Eigen::MatrixXd::Identity(k, k);
  A.row(k - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  b(k - 1) = 1.0;
  Eigen::VectorXd pi = A.colPivHouseholderQr().solve(b);

  Eigen::MatrixXd power = M;
  for (int s = 0; s < 64; ++s) {
    power = power * power;
    power.array().colwise() /= power.rowwise().sum().array();
  }
  const Eigen::RowVectorXd limit = power.colwise().mean();
  const double gap = (limit.transpose() - pi).cwiseAbs().maxCoeff();
  if (!(gap <= kPowerAgreementTol)) {
    std::ostringstream os;
    os << "linear-solve stationary law disagrees with the power limit by " << gap;
    throw Error(ErrorCode::NonConvergence, os.str());
  }
  for (int i = 0; i < k; ++i) pi(i) = std::max(pi(i), 0.0);
  pi /= pi.sum();
  return ShareVector(m.space(), pi.transpose(), m.period());
}

double unemployment_share_formula(const Eigen::Matrix3d& m) {
  const double num = m(T, U) * (1.0 - m(P, P)) + m(T, P) * m(P, U);
  return num / denominator(m);
}

double closed_form_unemployment(const ThreeStateChain& chain) {
  const double closed = unemployment_share_formula(as3(chain.matrix));
  const double numeric = stationary_distribution(chain.matrix)[U];
  if (!(std::abs(closed - numeric) <= kGuardTol)) {
    std::ostringstream os;
    os << "closed form " << closed << " vs stationary " << numeric;
    throw Error(ErrorCode::ClosedFormMismatch, os.str());
  }
  return closed;
}

double derivative_wrt_mTP(const ThreeStateChain& chain) {
  const Eigen::Matrix3d m = as3(chain.matrix);
  stationary_distribution(chain.matrix);
  const double bracket = (1.0 - m(P, P)) * m(U, T) + m(U, P) * m(P, T);
  const double den = denominator(m);
  return (m(P, U) - m(T, U)) * bracket / (den * den);
}

EquilibriumResult analyse(const ThreeStateChain& chain) {
  ShareVector pi = stationary_distribution(chain.matrix);
  const double closed = closed_form_unemployment(chain);
  return EquilibriumResult{std::move(pi), closed, derivative_wrt_mTP(chain),
                           chain.m(P, U) - chain.m(T, U), chain.population};
}

CompositionReport composition_effect_demo(const ThreeStateChain& chain, double delta) {
  Eigen::MatrixXd after = chain.matrix.entries();
  after(T, P) += delta;
  after(T, T) -= delta;
  if (after(T, P) < 0.0 || after(T, P) > 1.0 || after(T, T) < 0.0 || after(T, T) > 1.0) {
    throw Error(ErrorCode::InvalidPerturbation,
                "m(T,P) + delta must keep the temporary row inside [0,1]");
  }
  TransitionMatrix perturbed(chain.matrix.space(), after, chain.matrix.period());
  const double before_u = stationary_distribution(chain.matrix)[U];
  const double after_u = stationary_distribution(perturbed)[U];
  return CompositionReport{delta, before_u, after_u, chain.m(P, U) - chain.m(T, U),
                           std::move(perturbed)};
}

nlohmann::json to_json(const EquilibriumResult& r) {
  return {{"stationary", io::to_json(r.stationary)},
          {"closed_form_piU", r.closed_form_piU},
          {"derivative_piU_wrt_mTP", r.derivative_piU_wrt_mTP},
          {"sign_term", r.sign_term},
          {"equilibrium_counts",
           {r.stationary[T] * r.population, r.stationary[P] * r.population,
            r.stationary[U] * r.population}},
          {"perturbation_convention", "m(T,P) raised, m(T,T) lowered, m(T,U) fixed"}};
}

nlohmann::json to_json(const CompositionReport& r) {
  return {{"delta", r.delta},
          {"piU_before", r.piU_before},
          {"piU_after", r.piU_after},
          {"change", r.piU_after - r.piU_before},
          {"sign_term", r.sign_term},
          {"perturbed", io::to_json(r.perturbed)}};
}

std::string format_table(const EquilibriumResult& r, const ThreeStateChain& chain) {
  std::ostringstream os;
  const auto& labels = chain.matrix.space().labels();
  os << std::fixed << std::setprecision(6);
  os << std::left << std::setw(8) << "from";
  for (const auto& l : labels) os << std::right << std::setw(12) << l;
  os << '\n';
  for (int i = 0; i < 3; ++i) {
    os << std::left << std::setw(8) << labels[i];
    for (int j = 0; j < 3; ++j) os << std::right << std::setw(12) << chain.m(i, j);
    os << '\n';
  }
  os << '\n' << std::left << std::setw(8) << "pi";
  for (int j = 0; j < 3; ++j) os << std::right << std::setw(12) << r.stationary[j];
  os << "\n\n";
  os << std::left << std::setw(32) << "equilibrium share U (closed)" << r.closed_form_piU << '\n';
  os << std::left << std::setw(32) << "d piU / d m(T,P)" << r.derivative_piU_wrt_mTP << '\n';
  os << std::left << std::setw(32) << "m(P,U) - m(T,U)" << r.sign_term << '\n';
  return os.str();
}

}  // namespace lmflow::equilibrium
