#pragma once

// Independent reference values used by the tests. Nothing here calls the
// library's solvers.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;

inline double lambda_plus(double d) { return (1 + std::sqrt(d)) * (1 + std::sqrt(d)); }
inline double lambda_minus(double d) { return (1 - std::sqrt(d)) * (1 - std::sqrt(d)); }

// Sigma = I Stieltjes transform. The product of principal roots picks the
// physical branch on the closed upper half-plane (pass +0.0 imaginary parts
// for boundary values).
inline cplx mp_m(cplx z, double d) {
  const cplx root = std::sqrt(z - lambda_minus(d)) * std::sqrt(z - lambda_plus(d));
  return (-(z + 1.0 - d) + root) / (2.0 * z);
}

inline cplx mp_m_prime(cplx z, double d) {
  const cplx m = mp_m(z, d);
  return 1.0 / (1.0 / (m * m) - d / ((1.0 + m) * (1.0 + m)));
}

// MP density of Q1 (integrates to 1 for d <= 1).
inline double mp_rho_c(double x, double d) {
  const double lm = lambda_minus(d), lp = lambda_plus(d);
  if (x <= lm || x >= lp) return 0.0;
  return std::sqrt((x - lm) * (lp - x)) / (2 * M_PI * d * x);
}

// Real root of 1/m = -E + d sum_k w_k s_k / (1 + m s_k) for E above the
// spectrum, by bisection on (-1/s_max, 0).
inline double outside_m(double E, const std::vector<double>& s, const std::vector<double>& w, double d) {
  double smax = 0;
  for (double x : s) smax = std::max(smax, x);
  auto f = [&](double m) {
    double acc = 0;
    for (std::size_t k = 0; k < s.size(); ++k) acc += w[k] * s[k] / (1 + m * s[k]);
    return 1 / m + E - d * acc;
  };
  // E - z(m) runs from -inf at 0- up to a positive maximum; the physical
  // root is the first sign change scanning left from zero.
  const int steps = 20000;
  const double h = 1 / (smax * steps);
  double hi = -h, lo = hi;
  for (int k = 2; k < steps; ++k) {
    lo = -k * h;
    if (f(lo) > 0) break;
    hi = lo;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double outside_m_prime(double m, const std::vector<double>& s, const std::vector<double>& w, double d) {
  double acc = 0;
  for (std::size_t k = 0; k < s.size(); ++k) acc += w[k] * s[k] * s[k] / ((1 + m * s[k]) * (1 + m * s[k]));
  return 1 / (1 / (m * m) - d * acc);
}

inline double integrate(const std::function<double(double)>& f, double a, double b) {
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate(f, a, b, 1e-13);
}

inline double bump(double x, double c, double w) {
  const double t = (x - c) / w;
  return std::abs(t) < 1 ? std::exp(-1 / (1 - t * t)) : 0.0;
}

}  // namespace oracle
