#pragma once

#include "vesd/mp_law.hpp"
#include "vesd/population.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace vesd {

/// Fourth cumulants kappa_4(i,j) = E|sqrt(N) x_ij|^4 - 3. The kernels only see
/// the row means N^{-1} sum_j kappa_4(i,j).
struct FourthCumulantProfile {
  enum class Mode { constant, per_row };

  Mode mode = Mode::constant;
  double value = 0.0;
  Eigen::VectorXd rows;
  std::optional<Eigen::MatrixXd> entries;

  static FourthCumulantProfile constant(double kappa);
  static FourthCumulantProfile per_row(Eigen::VectorXd kappa);
  static FourthCumulantProfile per_entry(const Eigen::MatrixXd& kappa);

  Eigen::VectorXd row_means(Index n) const;
  bool is_zero() const;
  /// Throws InvalidArgument unless every cumulant is >= -2.
  void validate() const;
};

/// Test functions on R_+.
struct TestFunction {
  enum class Kind { zero, bump, poly_gauss };

  Kind kind = Kind::zero;
  double center = 0.0;
  double width = 1.0;
  /// poly_gauss: f(x) = p(t) exp(-t^2/2), t = (x - center)/width, for x > 0.
  std::vector<double> poly_coeffs;
  double hoelder_a = 1.0;
  double decay_b = 1.0;

  static TestFunction zero();
  /// exp(-1/(1 - t^2)) for |t| < 1, t = (x - center)/width.
  static TestFunction bump(double center, double width);
  static TestFunction poly_gauss(std::vector<double> coeffs, double center, double width);

  double operator()(double x) const;
  /// Interval outside which f vanishes (poly_gauss: 12 widths, below 1e-30).
  std::pair<double, double> support() const;
  bool is_zero() const { return kind == Kind::zero; }
};

/// Real kernel alpha(x1, x2, v1, v2) of the global linear-statistic covariance.
double alpha_kernel(double x1, double x2, const DirectionVector& v1, const DirectionVector& v2,
                    const Population& pop, const FourthCumulantProfile& kappa,
                    const SolverOptions& opts = {});

/// Real kernel beta(x1, x2, v1, v2); not divided by x1 - x2.
double beta_kernel(double x1, double x2, const DirectionVector& v1, const DirectionVector& v2,
                   const Population& pop, const SolverOptions& opts = {});

cplx alpha_hat(cplx z1, cplx z2, const DirectionVector& v1, const DirectionVector& v2,
               const Population& pop, const FourthCumulantProfile& kappa,
               const SolverOptions& opts = {});

/// The difference quotient is replaced by m'(z1) when |z1 - z2| < 1e-10.
cplx beta_hat(cplx z1, cplx z2, const DirectionVector& v1, const DirectionVector& v2,
              const Population& pop, const SolverOptions& opts = {});

enum class CovarianceMode { global, local, outside };

struct ResolventCovarianceQuery {
  CovarianceMode mode = CovarianceMode::global;
  /// global: spectral arguments z_i, z_j.
  cplx z_i, z_j;
  /// local and outside: energy E.
  double E = 0.0;
  /// local: scaled offsets w_i, w_j.
  cplx w_i, w_j;
};

/// Limiting E[Y_i Y_j] for the resolvent process. outside mode requires
/// dist(E, supp rho_2c) >= tau (the spectrum's regularity margin).
cplx resolvent_covariance(const ResolventCovarianceQuery& q, const DirectionVector& v_i,
                          const DirectionVector& v_j, const Population& pop,
                          const FourthCumulantProfile& kappa, const SolverOptions& opts = {});

struct CovarianceResult {
  std::string mode;
  double value = 0.0;
  double error_estimate = 0.0;
};

struct LinearStatQuery {
  CovarianceMode mode = CovarianceMode::global;  // global or local
  double E = 0.0;
  double eta = 1.0;
};

/// Limiting covariance of the linear eigenvector statistics Z(v_i, f_i), Z(v_j, f_j).
CovarianceResult linear_stat_covariance(const LinearStatQuery& q, const TestFunction& f_i,
                                        const TestFunction& f_j, const DirectionVector& v_i,
                                        const DirectionVector& v_j, const Population& pop,
                                        const FourthCumulantProfile& kappa,
                                        const SolverOptions& opts = {});

struct PvOptions {
  /// Base regularization h; 0 selects 1e-3 times the larger box side.
  double h = 0.0;
  /// Minimum number of outer panels.
  int outer_panels = 64;
  /// Extra outer and inner breakpoints (e.g. spectral edges).
  std::vector<double> breakpoints;
};

struct PvResult {
  double value = 0.0;
  double error_estimate = 0.0;
  double rate = 0.0;
  std::array<double, 3> levels{};
};

/// PV of the double integral of g(x1, x2)/(x1 - x2) over [a1,b1] x [a2,b2],
/// from the regularized kernel Re[1/((x1 - x2) + i delta)] at
/// delta in {h, h/2, h/4} and Richardson extrapolation.
PvResult pv_double_integral(const std::function<double(double, double)>& g, double a1, double b1,
                            double a2, double b2, const PvOptions& opts = {});

/// alpha_hat(E,E,v,v) + beta_hat(E,E,v,v) for E outside the spectrum.
double variance_positivity(double E, const DirectionVector& v, const Population& pop,
                           const FourthCumulantProfile& kappa, const SolverOptions& opts = {});

}  // namespace vesd
