#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <string>

#include "lmflow/flow_core.hpp"

namespace lmflow::equilibrium {

/// Three-state chain over (temporary, permanent, unemployed), in that order,
/// for a constant population `population`. Rows are origins.
struct ThreeStateChain {
  explicit ThreeStateChain(TransitionMatrix matrix, double population = 1.0);

  TransitionMatrix matrix;
  double population;

  double m(int from, int to) const { return matrix(from, to); }
};

enum State { T = 0, P = 1, U = 2 };

/// Unique pi with pi * M = pi and sum(pi) = 1, for any K. Solved as a linear
/// system and checked against repeated squaring of M. Throws
/// NonUniqueStationary (several closed classes, e.g. the identity),
/// NotIrreducible or NotAperiodic.
ShareVector stationary_distribution(const TransitionMatrix& m);

/// Equilibrium unemployment share written in terms of m(T,P), m(T,U), m(P,P),
/// m(P,U), m(U,P), m(U,U):
///   [m(T,U)(1-m(P,P)) + m(T,P)m(P,U)] /
///   [(1-m(P,P))(1+m(T,U)-m(U,U)) + m(T,P)(1+m(P,U)-m(U,U)) - m(U,P)(m(P,U)-m(T,U))]
/// No ergodicity check.
double unemployment_share_formula(const Eigen::Matrix3d& m);

/// Closed form, verified against stationary_distribution: throws
/// ClosedFormMismatch if they differ by more than 1e-8.
double closed_form_unemployment(const ThreeStateChain& chain);

/// d pi_U / d m(T,P), holding m(T,U) fixed and compensating on m(T,T):
///   (m(P,U)-m(T,U)) [(1-m(P,P))m(U,T) + m(U,P)m(P,T)] / denominator^2.
double derivative_wrt_mTP(const ThreeStateChain& chain);

struct EquilibriumResult {
  ShareVector stationary;
  double closed_form_piU;
  double derivative_piU_wrt_mTP;
  double sign_term;  // m(P,U) - m(T,U)
  double population;
};

EquilibriumResult analyse(const ThreeStateChain& chain);

struct CompositionReport {
  double delta;
  double piU_before;
  double piU_after;
  double sign_term;
  TransitionMatrix perturbed;
};

/// Raises m(T,P) by delta, lowering m(T,T) by the same amount; every other
/// entry is unchanged. Throws InvalidPerturbation if the T row leaves [0,1].
CompositionReport composition_effect_demo(const ThreeStateChain& chain, double delta);

nlohmann::json to_json(const EquilibriumResult& r);
nlohmann::json to_json(const CompositionReport& r);
/// Aligned plain-text rendering of the equilibrium report.
std::string format_table(const EquilibriumResult& r, const ThreeStateChain& chain);

}  // namespace lmflow::equilibrium
