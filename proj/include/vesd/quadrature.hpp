#pragma once

#include <functional>
#include <vector>

namespace vesd::quad {

struct Result {
  double value = 0.0;
  double error = 0.0;
};

using Integrand = std::function<double(double)>;

/// Globally adaptive Gauss–Kronrod (7/15) on [a, b]; stops when the summed
/// error estimate is below max(abs_tol, rel_tol * |I|). Throws
/// QuadratureFailure when the interval budget runs out.
Result adaptive(const Integrand& f, double a, double b, double abs_tol, double rel_tol = 0.0,
                int max_intervals = 4000);

/// Same, after substituting x = a + (b - a)(1 - cos t)/2, t in [0, pi].
/// Removes square-root endpoint singularities, which is the behaviour of
/// spectral densities at regular edges.
Result adaptive_cosine(const Integrand& f, double a, double b, double abs_tol,
                       double rel_tol = 0.0, int max_intervals = 4000);

/// A fixed rule: nodes with weights.
struct Rule {
  std::vector<double> x;
  std::vector<double> w;

  std::size_t size() const { return x.size(); }
  double apply(const Integrand& f) const;
  void append(const Rule& other);
};

/// 10-point Gauss–Legendre on each panel between consecutive breakpoints.
Rule composite_gauss(const std::vector<double>& breakpoints);

/// Breakpoints on [a, b] refined geometrically (factor 2) toward every focus
/// point until the panels touching it are no wider than `finest`; panels
/// away from the foci are no wider than `coarsest`.
std::vector<double> graded_breakpoints(double a, double b, const std::vector<double>& foci,
                                       double finest, double coarsest);

/// Composite Gauss rule in t for x = a + (b - a)(1 - cos t)/2, returned as a
/// rule in x (weights include the Jacobian).
Rule cosine_rule(double a, double b, int panels);

}  // namespace vesd::quad
