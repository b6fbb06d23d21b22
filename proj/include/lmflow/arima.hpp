#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lmflow/quarter.hpp"

namespace lmflow::arima {

/// ARIMA(p,d,q) with an optional constant. The constant is the process mean
/// when d = 0 and the drift (mean of first differences) when d = 1.
struct ArimaSpec {
  int p = 0;
  int d = 0;
  int q = 0;
  bool drift = false;

  /// Estimated parameters including the innovation variance.
  int n_params() const noexcept { return p + q + (drift ? 1 : 0) + 1; }
  /// Shortest series fit() accepts.
  int min_length() const noexcept { return p + q + d + 3; }
  std::string str() const;
  /// Throws InvalidArgument outside p<=2, d<=1, q<=1.
  void validate() const;

  bool operator==(const ArimaSpec&) const = default;
};

struct ArimaFit {
  ArimaSpec spec;
  std::vector<double> ar_coeffs;
  std::vector<double> ma_coeffs;
  double drift_coeff = 0.0;
  double sigma2 = 0.0;
  double loglik = 0.0;
  double aicc = 0.0;
  int n_obs = 0;  // length after differencing
  /// One-step innovations of the differenced series, in data units.
  std::vector<double> residuals;
  std::vector<std::string> warnings;
};

struct ForecastResult {
  int horizon = 0;
  std::vector<double> mean_path;
  std::vector<double> variance_path;
  std::optional<QuarterId> origin;
};

inline constexpr double kSigma2Floor = 1e-12;

/// Exact Gaussian maximum likelihood via a Kalman filter on the differenced
/// series; the constant is profiled out by GLS and sigma2 is concentrated.
/// Throws SeriesTooShort or NonConvergence.
ArimaFit fit(std::span<const double> series, const ArimaSpec& spec);

/// AICc units within which candidate models count as tied.
inline constexpr double kParsimonyBand = 2.0;

/// Order selection over p in {0,1,2}, d in {0,1}, q in {0,1}, drift on/off.
/// Every model whose AICc is within `parsimony_band` of the minimum counts as
/// tied; among those the fewest parameters win, then lower AICc, then lower p.
/// A band of 0 gives plain minimum-AICc selection.
ArimaFit select(std::span<const double> series, double parsimony_band = kParsimonyBand);

ForecastResult forecast(const ArimaFit& fit, std::span<const double> series, int horizon,
                        std::optional<QuarterId> origin = std::nullopt);

/// Exact log-likelihood of a stationary ARMA for a (differenced) series at
/// fixed parameters.
double arma_loglik(std::span<const double> w, std::span<const double> ar,
                   std::span<const double> ma, double mean, double sigma2);

/// psi-weights psi_0..psi_{n-1} of the integrated model.
std::vector<double> psi_weights(const ArimaFit& fit, int n);

std::vector<double> difference(std::span<const double> series, int d);

nlohmann::json to_json(const ArimaFit& fit);

}  // namespace lmflow::arima
