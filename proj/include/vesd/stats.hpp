#pragma once

#include <cstddef>
#include <vector>

namespace vesd {

double normal_cdf(double x);

/// alpha with 2(1 - Phi(alpha)) = omega.
double two_sided_quantile(double omega);

/// P(sup |B| > lambda) for the Brownian bridge.
double kolmogorov_survival(double lambda);

struct MomentSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double std_error = 0.0;
  /// Standard error of the sample variance, from the fourth central moment.
  double variance_std_error = 0.0;
};

MomentSummary summarize(const std::vector<double>& samples);

double median(std::vector<double> samples);

struct NormalityResult {
  double statistic = 0.0;  // KS distance D
  double p_value = 0.0;
};

/// KS distance against N(mean, var) fitted by moments; asymptotic p-value
/// from sqrt(n) D. Needs at least 30 samples; constant samples throw
/// DegenerateVariance.
NormalityResult normality_test(const std::vector<double>& samples);

}  // namespace vesd
