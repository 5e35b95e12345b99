#pragma once

#include "vesd/matrix_models.hpp"

#include <optional>
#include <string>

namespace vesd {

/// How the fourth-cumulant term (1/3) sum_k kappa_4(k) v(k)^4 is obtained.
enum class KappaPolicy {
  gaussian_zero,
  /// Pooled estimate over all entries; assumes i.i.d. entries.
  pooled,
  /// Per-row estimates, each row normalized by its own second moment.
  per_row,
  /// max_k max(kappa_hat(k), 0) for every row (conservative bound).
  per_row_max_positive,
  user
};

struct KappaOptions {
  KappaPolicy policy = KappaPolicy::pooled;
  double user_value = 0.0;
};

const char* to_string(KappaPolicy p);
KappaPolicy kappa_policy_from_string(const std::string& s);

struct EstimatorOptions {
  double alpha = 2.0;
  KappaOptions kappa;
  /// Minimum distance of E above lambda_+ (spike) or lambda_1 (general).
  double margin = 0.1;
  /// Estimate gamma^2 from the spread of R_vv over this many column blocks
  /// instead of the formula; 0 disables.
  int split_samples = 0;
};

struct EstimateWithInterval {
  double point = 0.0;
  double halfwidth = 0.0;
  double alpha = 0.0;
  double confidence = 0.0;

  double E = 0.0;
  double resolvent = 0.0;
  double m = 0.0;
  double m_prime = 0.0;
  double kappa_term = 0.0;
  double gamma_sq = 0.0;
  std::string kappa_policy;
  std::string variance_mode;
};

/// Weak-spike strength sigma = 1 + sigma_tilde along a known v, with m2c
/// from the closed form at Sigma = I.
EstimateWithInterval estimate_spike_strength(const SampleEnsemble& ens, const DirectionVector& v,
                                             double E, double d, const EstimatorOptions& opts = {});

/// Population eigenvalue along a known eigenvector v, with m2c and m2c' from
/// the sample.
EstimateWithInterval estimate_population_eigenvalue(const SampleEnsemble& ens,
                                                    const DirectionVector& v, double E,
                                                    const EstimatorOptions& opts = {});

/// sigma with R = -1 / (E (1 + m sigma)), the deterministic value of R_vv(E)
/// along an eigenvector with eigenvalue sigma.
double sigma_from_resolvent(double m, double E, double R);

/// Closed-form Sigma = I values at real E > lambda_+.
double mp_identity_m(double E, double d);
double mp_identity_m_prime(double E, double d);

/// (1/3) sum_k kappa_4(k) v(k)^4 under a policy.
double kappa_term(const SampleEnsemble& ens, const DirectionVector& v, const KappaOptions& k);

enum class Decision { accept, reject };

struct SphericityOptions {
  double omega = 0.05;
  /// Overrides the quantile solved from omega.
  std::optional<double> alpha;
  /// E = lambda_1 + E_margin unless E is fixed.
  double E_margin = 1.0;
  std::optional<double> E;
  KappaOptions kappa{KappaPolicy::per_row_max_positive, 0.0};
};

struct SphericityVerdict {
  double statistic = 0.0;
  double threshold = 0.0;
  Decision decision = Decision::accept;
  double gamma_sq = 0.0;
  double rescale_sigma_sq = 0.0;

  double E = 0.0;
  double alpha = 0.0;
  double m = 0.0;
  double m_prime = 0.0;
  double kappa_max = 0.0;
  double R_uu = 0.0;
  double R_vv = 0.0;
};

SphericityVerdict sphericity_test(const Eigen::MatrixXd& raw_data, const DirectionVector& u,
                                  const DirectionVector& v, const SphericityOptions& opts = {});

/// Same test on an already decomposed ensemble (its Y is the raw data).
SphericityVerdict sphericity_test(const SampleEnsemble& ens, const DirectionVector& u,
                                  const DirectionVector& v, const SphericityOptions& opts = {});

}  // namespace vesd
