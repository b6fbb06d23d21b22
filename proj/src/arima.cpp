#include "lmflow/arima.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include "lmflow/error.hpp"

namespace lmflow::arima {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

// State-space form with a fixed two-dimensional state, which covers every
// ARMA(p<=2, q<=1) on the grid:
//   alpha_t = T alpha_{t-1} + R eta_t,  w_t - mu = alpha_t[0].
struct StateModel {
  Eigen::Matrix2d T = Eigen::Matrix2d::Zero();
  Eigen::Vector2d R = Eigen::Vector2d(1.0, 0.0);
  Eigen::Matrix2d P0 = Eigen::Matrix2d::Identity();
};

bool make_state_model(std::span<const double> ar, std::span<const double> ma, StateModel& m) {
  m.T.setZero();
  m.T(0, 1) = 1.0;
  if (!ar.empty()) m.T(0, 0) = ar[0];
  if (ar.size() > 1) m.T(1, 0) = ar[1];
  m.R = Eigen::Vector2d(1.0, ma.empty() ? 0.0 : ma[0]);

  // Stationary covariance P = T P T' + R R'. With T = [[a,1],[b,0]] the
  // symmetric system reduces to one equation in P(0,0).
  const double a = m.T(0, 0);
  const double b = m.T(1, 0);
  const double r00 = 1.0;
  const double r01 = m.R(1);
  const double r11 = m.R(1) * m.R(1);
  if (!(std::abs(1.0 - b) > 1e-12)) return false;
  const double denom = 1.0 - a * a - b * b - 2.0 * a * a * b / (1.0 - b);
  if (!(denom > 0.0)) return false;
  const double p00 = (r00 + r11 + 2.0 * a * r01 / (1.0 - b)) / denom;
  const double p01 = (a * b * p00 + r01) / (1.0 - b);
  const double p11 = b * b * p00 + r11;
  m.P0 << p00, p01, p01, p11;
  return std::isfinite(m.P0.sum()) && m.P0(0, 0) > 0.0;
}

// Innovations of the data and of a constant regressor, with their scaled
// variances F_t (in units of sigma2).
struct Innovations {
  std::vector<double> v_data;
  std::vector<double> v_const;
  std::vector<double> F;
  Eigen::Vector2d next_state = Eigen::Vector2d::Zero();  // a_{n+1|n} for the data
};

void run_filter(const StateModel& m, std::span<const double> w, Innovations& out) {
  const std::size_t n = w.size();
  out.v_data.resize(n);
  out.v_const.resize(n);
  out.F.resize(n);
  const double t00 = m.T(0, 0), t10 = m.T(1, 0);  // T = [[t00, 1], [t10, 0]]
  const double r1 = m.R(1);
  // State means for the data (d) and the constant regressor (c); P symmetric.
  double d0 = 0.0, d1 = 0.0, c0 = 0.0, c1 = 0.0;
  double p00 = m.P0(0, 0), p01 = m.P0(0, 1), p11 = m.P0(1, 1);
  for (std::size_t t = 0; t < n; ++t) {
    const double F = p00;
    const double vd = w[t] - d0;
    const double vc = 1.0 - c0;
    out.v_data[t] = vd;
    out.v_const[t] = vc;
    out.F[t] = F;
    const double g0 = p00 / F, g1 = p01 / F;
    d0 += g0 * vd;
    d1 += g1 * vd;
    c0 += g0 * vc;
    c1 += g1 * vc;
    // Updated covariance P - g P.row(0).
    const double u00 = p00 - g0 * p00;
    const double u01 = p01 - g0 * p01;
    const double u11 = p11 - g1 * p01;
    // Predict: a = T a, P = T P T' + R R'.
    const double nd0 = t00 * d0 + d1, nd1 = t10 * d0;
    const double nc0 = t00 * c0 + c1, nc1 = t10 * c0;
    d0 = nd0;
    d1 = nd1;
    c0 = nc0;
    c1 = nc1;
    p00 = t00 * t00 * u00 + 2.0 * t00 * u01 + u11 + 1.0;
    p01 = t10 * (t00 * u00 + u01) + r1;
    p11 = t10 * t10 * u00 + r1 * r1;
  }
  out.next_state = Eigen::Vector2d(d0, d1);
}

struct Evaluation {
  double loglik = -kInf;
  double mean = 0.0;
  double sigma2 = 0.0;
  bool clamped = false;
};

Evaluation concentrated_loglik(const StateModel& m, std::span<const double> w, bool with_mean,
                               Innovations& scratch) {
  run_filter(m, w, scratch);
  const std::size_t n = w.size();
  double mean = 0.0;
  if (with_mean) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      num += scratch.v_data[t] * scratch.v_const[t] / scratch.F[t];
      den += scratch.v_const[t] * scratch.v_const[t] / scratch.F[t];
    }
    mean = den > 0.0 ? num / den : 0.0;
  }
  double ss = 0.0;
  double logdet = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double v = scratch.v_data[t] - mean * scratch.v_const[t];
    ss += v * v / scratch.F[t];
    logdet += std::log(scratch.F[t]);
  }
  Evaluation e;
  e.mean = mean;
  const double nd = static_cast<double>(n);
  double sigma2 = ss / nd;
  if (!(sigma2 >= kSigma2Floor)) {
    sigma2 = kSigma2Floor;
    e.clamped = true;
  }
  e.sigma2 = sigma2;
  e.loglik = -0.5 * nd * (kLog2Pi + std::log(sigma2)) - 0.5 * logdet - 0.5 * ss / sigma2;
  if (!std::isfinite(e.loglik)) e.loglik = -kInf;
  return e;
}

// Unconstrained -> stationary AR (via partial autocorrelations) and
// invertible MA coefficients.
void transform(const ArimaSpec& spec, std::span<const double> u, std::vector<double>& ar,
               std::vector<double>& ma) {
  ar.assign(spec.p, 0.0);
  ma.assign(spec.q, 0.0);
  if (spec.p == 1) {
    ar[0] = std::tanh(u[0]);
  } else if (spec.p == 2) {
    const double r1 = std::tanh(u[0]);
    const double r2 = std::tanh(u[1]);
    ar[0] = r1 * (1.0 - r2);
    ar[1] = r2;
  }
  if (spec.q == 1) ma[0] = std::tanh(u[spec.p]);
}

struct SimplexResult {
  std::vector<double> x;
  double value = kInf;
  bool converged = false;
};

// Derivative-free Nelder-Mead minimiser.
SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                          std::vector<double> start, double step, double ftol, int max_evals) {
  const std::size_t n = start.size();
  std::vector<std::vector<double>> pts(n + 1, start);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step;
  std::vector<double> vals(n + 1);
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : kInf;
  };
  for (std::size_t i = 0; i <= n; ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  bool converged = false;
  while (evals < max_evals) {
    for (std::size_t i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return vals[a] < vals[b] || (vals[a] == vals[b] && a < b);
    });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n - 1];
    if (std::isfinite(vals[worst]) &&
        std::abs(vals[worst] - vals[best]) <= ftol * (1.0 + std::abs(vals[best]))) {
      converged = true;
      break;
    }
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[i][k] / static_cast<double>(n);
    }
    for (std::size_t k = 0; k < n; ++k) trial[k] = centroid[k] + (centroid[k] - pts[worst][k]);
    const double fr = eval(trial);
    if (fr < vals[best]) {
      for (std::size_t k = 0; k < n; ++k) trial2[k] = centroid[k] + 2.0 * (centroid[k] - pts[worst][k]);
      const double fe = eval(trial2);
      if (fe < fr) {
        pts[worst] = trial2;
        vals[worst] = fe;
      } else {
        pts[worst] = trial;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = trial;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    for (std::size_t k = 0; k < n; ++k) {
      trial2[k] = outside ? centroid[k] + 0.5 * (trial[k] - centroid[k])
                          : centroid[k] + 0.5 * (pts[worst][k] - centroid[k]);
    }
    const double fc = eval(trial2);
    if (fc < std::min(fr, vals[worst])) {
      pts[worst] = trial2;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t k = 0; k < n; ++k) pts[i][k] = pts[best][k] + 0.5 * (pts[i][k] - pts[best][k]);
      vals[i] = eval(pts[i]);
    }
  }
  const auto it = std::min_element(vals.begin(), vals.end());
  return SimplexResult{pts[static_cast<std::size_t>(it - vals.begin())], *it, converged};
}

// Start points tried for every fit, in transformed coordinates.
constexpr std::array<double, 3> kRestartPoints = {0.0, 0.5, -0.5};
constexpr double kLoglikTol = 1e-8;
constexpr int kMaxEvaluations = 4000;

}  // namespace

std::string ArimaSpec::str() const {
  std::ostringstream os;
  os << "(" << p << "," << d << "," << q << ")" << (drift ? "+const" : "");
  return os.str();
}

void ArimaSpec::validate() const {
  if (p < 0 || p > 2 || d < 0 || d > 1 || q < 0 || q > 1) {
    throw Error(ErrorCode::InvalidArgument, "ARIMA order outside p<=2, d<=1, q<=1: " + str());
  }
}

std::vector<double> difference(std::span<const double> series, int d) {
  std::vector<double> out(series.begin(), series.end());
  for (int k = 0; k < d; ++k) {
    if (out.empty()) break;
    for (std::size_t i = 0; i + 1 < out.size(); ++i) out[i] = out[i + 1] - out[i];
    out.pop_back();
  }
  return out;
}

double arma_loglik(std::span<const double> w, std::span<const double> ar,
                   std::span<const double> ma, double mean, double sigma2) {
  if (ar.size() > 2 || ma.size() > 1) {
    throw Error(ErrorCode::InvalidArgument, "arma_loglik supports p<=2, q<=1");
  }
  StateModel m;
  if (!make_state_model(ar, ma, m)) return -kInf;
  Innovations inn;
  run_filter(m, w, inn);
  double ll = 0.0;
  for (std::size_t t = 0; t < w.size(); ++t) {
    const double v = inn.v_data[t] - mean * inn.v_const[t];
    ll += -0.5 * (kLog2Pi + std::log(sigma2 * inn.F[t])) - 0.5 * v * v / (sigma2 * inn.F[t]);
  }
  return ll;
}

ArimaFit fit(std::span<const double> series, const ArimaSpec& spec) {
  spec.validate();
  if (static_cast<int>(series.size()) < spec.min_length()) {
    throw Error(ErrorCode::SeriesTooShort, "ARIMA" + spec.str() + " needs at least " +
                                               std::to_string(spec.min_length()) + " points, got " +
                                               std::to_string(series.size()));
  }
  for (double v : series) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "series contains non-finite values");
  }
  const std::vector<double> w = difference(series, spec.d);
  const int dim = spec.p + spec.q;

  Innovations scratch;
  std::vector<double> ar, ma;
  auto evaluate = [&](std::span<const double> u) -> Evaluation {
    transform(spec, u, ar, ma);
    StateModel m;
    if (!make_state_model(ar, ma, m)) return Evaluation{};
    return concentrated_loglik(m, w, spec.drift, scratch);
  };

  std::vector<double> best_u(dim, 0.0);
  if (dim > 0) {
    auto objective = [&](std::span<const double> u) { return -evaluate(u).loglik; };
    SimplexResult best;
    bool any_converged = false;
    for (double start : kRestartPoints) {
      SimplexResult r = nelder_mead(objective, std::vector<double>(dim, start), 0.5, kLoglikTol,
                                    kMaxEvaluations);
      if (!r.converged || !std::isfinite(r.value)) continue;
      if (!any_converged || r.value < best.value) best = std::move(r);
      any_converged = true;
    }
    if (!any_converged) {
      throw Error(ErrorCode::NonConvergence,
                  "likelihood maximisation for ARIMA" + spec.str() + " did not converge from any start");
    }
    best_u = best.x;
  }

  const Evaluation e = evaluate(best_u);
  if (!std::isfinite(e.loglik)) {
    throw Error(ErrorCode::NonConvergence, "non-finite likelihood for ARIMA" + spec.str());
  }

  ArimaFit out;
  out.spec = spec;
  transform(spec, best_u, out.ar_coeffs, out.ma_coeffs);
  out.drift_coeff = e.mean;
  out.sigma2 = e.sigma2;
  out.loglik = e.loglik;
  out.n_obs = static_cast<int>(w.size());
  const double k = spec.n_params();
  const double n = out.n_obs;
  out.aicc = (n - k - 1.0) > 0.0 ? -2.0 * e.loglik + 2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0)
                                 : kInf;
  out.residuals.resize(w.size());
  for (std::size_t t = 0; t < w.size(); ++t) {
    out.residuals[t] = scratch.v_data[t] - e.mean * scratch.v_const[t];
  }
  if (e.clamped) {
    out.warnings.push_back("degenerate series: innovation variance clamped to 1e-12 for ARIMA" +
                           spec.str());
  }
  return out;
}

ArimaFit select(std::span<const double> series, double parsimony_band) {
  if (series.size() < 6) {
    throw Error(ErrorCode::SeriesTooShort,
                "order selection needs at least 6 points, got " + std::to_string(series.size()));
  }
  std::vector<ArimaFit> fits;
  std::vector<std::string> failures;
  for (int d = 0; d <= 1; ++d) {
    for (int p = 0; p <= 2; ++p) {
      for (int q = 0; q <= 1; ++q) {
        for (bool drift : {false, true}) {
          const ArimaSpec spec{p, d, q, drift};
          if (static_cast<int>(series.size()) < spec.min_length()) continue;
          try {
            ArimaFit f = fit(series, spec);
            if (std::isfinite(f.aicc)) fits.push_back(std::move(f));
          } catch (const Error& e) {
            if (e.code() != ErrorCode::NonConvergence) throw;
            failures.emplace_back(e.what());
          }
        }
      }
    }
  }
  if (fits.empty()) {
    std::string msg = "no ARIMA specification could be fitted";
    if (!failures.empty()) msg += ": " + failures.front();
    throw Error(ErrorCode::AllFitsFailed, msg);
  }
  double best_aicc = kInf;
  for (const auto& f : fits) best_aicc = std::min(best_aicc, f.aicc);
  // Within the band the smallest model wins; exact ties fall back to lower p.
  const auto key = [](const ArimaFit& x) { return std::tuple(x.spec.n_params(), x.aicc, x.spec.p); };
  const ArimaFit* chosen = nullptr;
  for (const auto& f : fits) {
    if (f.aicc > best_aicc + parsimony_band) continue;
    if (!chosen || key(f) < key(*chosen)) chosen = &f;
  }
  return *chosen;
}

std::vector<double> psi_weights(const ArimaFit& fit, int n) {
  // Full AR polynomial phi(B)(1-B)^d, written as 1 - sum phi*_i B^i.
  std::vector<double> phi(fit.ar_coeffs);
  if (fit.spec.d == 1) {
    std::vector<double> full(phi.size() + 1, 0.0);
    full[0] = 1.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
      full[i] += phi[i];
      full[i + 1] -= phi[i];
    }
    phi = std::move(full);
  }
  std::vector<double> psi(static_cast<std::size_t>(std::max(n, 0)), 0.0);
  for (int j = 0; j < n; ++j) {
    double v = j == 0 ? 1.0 : 0.0;
    if (j >= 1 && j <= static_cast<int>(fit.ma_coeffs.size())) v += fit.ma_coeffs[j - 1];
    for (int i = 1; i <= std::min<int>(j, static_cast<int>(phi.size())); ++i) {
      v += phi[i - 1] * psi[j - i];
    }
    psi[j] = v;
  }
  return psi;
}

ForecastResult forecast(const ArimaFit& fit, std::span<const double> series, int horizon,
                        std::optional<QuarterId> origin) {
  if (horizon < 1) throw Error(ErrorCode::InvalidArgument, "forecast horizon must be >= 1");
  if (static_cast<int>(series.size()) < fit.spec.d + 1) {
    throw Error(ErrorCode::SeriesTooShort, "series too short to forecast");
  }
  StateModel m;
  if (!make_state_model(fit.ar_coeffs, fit.ma_coeffs, m)) {
    throw Error(ErrorCode::InvalidArgument, "fit coefficients are not stationary");
  }
  std::vector<double> w = difference(series, fit.spec.d);
  for (double& v : w) v -= fit.drift_coeff;
  Innovations inn;
  run_filter(m, w, inn);

  ForecastResult out;
  out.horizon = horizon;
  out.origin = origin;
  out.mean_path.resize(horizon);
  out.variance_path.resize(horizon);
  Eigen::Vector2d state = inn.next_state;
  double level = series.back();
  for (int h = 0; h < horizon; ++h) {
    const double w_hat = fit.drift_coeff + state(0);
    if (fit.spec.d == 0) {
      out.mean_path[h] = w_hat;
    } else {
      level += w_hat;
      out.mean_path[h] = level;
    }
    state = m.T * state;
  }
  const auto psi = psi_weights(fit, horizon);
  double acc = 0.0;
  for (int h = 0; h < horizon; ++h) {
    acc += psi[h] * psi[h];
    out.variance_path[h] = fit.sigma2 * acc;
  }
  return out;
}

nlohmann::json to_json(const ArimaFit& fit) {
  return {{"spec", fit.spec.str()},
          {"p", fit.spec.p},
          {"d", fit.spec.d},
          {"q", fit.spec.q},
          {"drift", fit.spec.drift},
          {"ar", fit.ar_coeffs},
          {"ma", fit.ma_coeffs},
          {"constant", fit.drift_coeff},
          {"sigma2", fit.sigma2},
          {"loglik", fit.loglik},
          {"aicc", fit.aicc},
          {"n_obs", fit.n_obs},
          {"residuals", fit.residuals},
          {"warnings", fit.warnings}};
}

}  // namespace lmflow::arima
