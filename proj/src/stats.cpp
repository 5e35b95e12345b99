#include "vesd/stats.hpp"

#include "vesd/errors.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vesd {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double two_sided_quantile(double omega) {
  require(omega > 0.0 && omega < 1.0, ErrorKind::InvalidArgument, "omega must lie in (0, 1)");
  // Newton on erfc(a / sqrt 2) = omega from the Boost inverse.
  double a = std::numbers::sqrt2 * boost::math::erfc_inv(omega);
  for (int it = 0; it < 8; ++it) {
    const double f = std::erfc(a / std::numbers::sqrt2) - omega;
    const double df = -std::sqrt(2.0 / std::numbers::pi) * std::exp(-0.5 * a * a);
    const double step = f / df;
    a -= step;
    if (std::abs(step) <= 1e-15 * std::max(1.0, a)) break;
  }
  return a;
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.0) {
    // Jacobi theta form converges fast for small lambda.
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int k = 1; k < 50; ++k) {
      const double term = std::exp(-(2 * k - 1) * (2 * k - 1) * c);
      cdf += term;
      if (term < 1e-17 * cdf) break;
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double q = 0.0;
  for (int k = 1; k < 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-300 || term < 1e-17 * q) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

MomentSummary summarize(const std::vector<double>& samples) {
  MomentSummary s;
  s.count = samples.size();
  if (s.count == 0) return s;
  const double n = static_cast<double>(s.count);
  double sum = 0.0;
  for (double x : samples) sum += x;
  s.mean = sum / n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : samples) {
    const double d2 = (x - s.mean) * (x - s.mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  if (s.count > 1) {
    s.variance = m2 / (n - 1.0);
    s.std_error = std::sqrt(s.variance / n);
    const double mu2 = m2 / n, mu4 = m4 / n;
    s.variance_std_error = std::sqrt(std::max(0.0, mu4 - mu2 * mu2) / n);
  }
  return s;
}

double median(std::vector<double> samples) {
  require(!samples.empty(), ErrorKind::InvalidArgument, "median of an empty sample");
  const auto mid = samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2);
  std::nth_element(samples.begin(), mid, samples.end());
  if (samples.size() % 2) return *mid;
  const double hi = *mid;
  return 0.5 * (hi + *std::max_element(samples.begin(), mid));
}

NormalityResult normality_test(const std::vector<double>& samples) {
  require(samples.size() >= 30, ErrorKind::InvalidArgument, "normality test needs at least 30 samples");
  const MomentSummary m = summarize(samples);
  if (!(m.variance > 0.0) || m.variance <= 1e-300)
    fail(ErrorKind::DegenerateVariance, "samples have zero variance");
  const double sd = std::sqrt(m.variance);
  std::vector<double> x = samples;
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double D = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = normal_cdf((x[i] - m.mean) / sd);
    D = std::max({D, (static_cast<double>(i) + 1.0) / n - F, F - static_cast<double>(i) / n});
  }
  return {D, kolmogorov_survival(std::sqrt(n) * D)};
}

}  // namespace vesd
