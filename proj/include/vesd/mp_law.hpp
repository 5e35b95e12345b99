#pragma once

#include "vesd/population.hpp"

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace vesd {

using cplx = std::complex<double>;

/// z = E + i eta. eta = 0 denotes the boundary value from the upper half-plane.
struct SpectralPoint {
  double E = 0.0;
  double eta = 0.0;

  cplx z() const { return {E, eta}; }
};

struct StieltjesValue {
  cplx m;
  std::optional<cplx> m_prime;
  double residual = 0.0;
};

struct SolverOptions {
  /// Boundary values are only defined for |E| >= omega.
  double omega = 1e-3;
  double tolerance = 1e-12;
  int max_iterations = 10000;
  double damping = 0.5;
  /// Fixed-point iteration hands over to Newton below this defect.
  double newton_switch = 1e-3;
};

/// Solves 1/m = -z + d * sum_k w_k s_k / (1 + m s_k) on the branch with
/// Im m >= 0 and Im(z m) >= 0. Points with eta < 0 return the conjugate of
/// the value at the mirrored point.
StieltjesValue solve_m2c(const SpectralPoint& z, const PopulationSpectrum& pop,
                         const SolverOptions& opts = {});

/// Convenience overload for a complex argument; Im z = 0 means the boundary value.
cplx m2c(cplx z, const PopulationSpectrum& pop, const SolverOptions& opts = {});

/// m' = 1 / (1/m^2 - d * sum_k w_k s_k^2 / (1 + m s_k)^2).
cplx m2c_derivative(const SpectralPoint& z, const PopulationSpectrum& pop,
                    const SolverOptions& opts = {});

/// Same, from an already solved m.
cplx m2c_derivative_at(cplx m, const PopulationSpectrum& pop);

/// pi^{-1} Im m2c(E + i0).
double density_rho2c(double E, const PopulationSpectrum& pop, const SolverOptions& opts = {});

/// Real critical point m* of z(m) = -1/m + d * sum_k w_k s_k / (1 + m s_k)
/// together with its critical value.
struct CriticalPoint {
  double m;
  double value;
};

struct SupportStructure {
  /// a_1 > a_2 > ... > a_{2L}.
  std::vector<double> edges;
  /// m2c at each edge (the critical point producing it).
  std::vector<double> edge_m;
  /// Integral of rho_2c over each bulk [a_{2k}, a_{2k-1}].
  std::vector<double> bulk_masses;
  /// N times bulk_masses.
  std::vector<double> bulk_counts;
  /// gamma_j for j = 1..min(n, N); empty when not requested.
  std::vector<double> classical_locations;
  Index sample_count = 0;

  Index bulk_count() const { return static_cast<Index>(edges.size() / 2); }
  double lambda_plus() const { return edges.front(); }
  double lambda_minus() const { return edges.back(); }
  bool inside(double E) const;
  /// Distance from E to the support; 0 inside.
  double distance(double E) const;
};

/// Edges only (critical values of z(m)), descending, with their critical points.
std::vector<CriticalPoint> support_edges(const PopulationSpectrum& pop);

/// The rightmost edge lambda_+ alone; cheaper than the full scan.
double rightmost_edge(const PopulationSpectrum& pop);

SupportStructure support_structure(const PopulationSpectrum& pop, Index N,
                                   bool classical_locations = true,
                                   const SolverOptions& opts = {});

struct EdgeRegularity {
  double edge = 0.0;
  bool above_tau = false;
  double min_gap = 0.0;
  bool gap_ok = false;
  double min_pole_distance = 0.0;  // min_i |1 + m2c(a_k) sigma_i|
  bool pole_ok = false;
};

struct BulkRegularity {
  double lower = 0.0;
  double upper = 0.0;
  /// Minimum of rho_2c over [lower + tau', upper - tau'].
  double min_density = 0.0;
  bool density_ok = false;
};

struct RegularityReport {
  double tau = 0.0;
  double tau_prime = 0.0;
  std::vector<std::string> assumption_violations;
  std::vector<EdgeRegularity> edges;
  std::vector<BulkRegularity> bulks;

  bool passed() const;
};

/// Report-only check of the edge and bulk regularity conditions plus the
/// model assumptions on (Sigma, d_N). `tau_prime` trims the bulk ends and
/// `density_floor` is the lower bound demanded in the trimmed bulk.
RegularityReport regularity_check(const PopulationSpectrum& pop, double tau,
                                  double tau_prime = 0.05, double density_floor = 1e-3,
                                  const SolverOptions& opts = {});

/// Density of the anisotropic law F_{1c,v} at E.
double anisotropic_density(double E, const DirectionVector& v, const PopulationCovariance& cov,
                           const PopulationSpectrum& pop, const SolverOptions& opts = {});

/// Boundary value m2c(E + i0) by Newton directly on the real axis from
/// `guess`. Returns nothing if Newton fails or lands on a non-physical root;
/// used for sweeps where neighbouring points supply good guesses.
std::optional<cplx> boundary_m2c_from(double E, cplx guess, const PopulationSpectrum& pop,
                                      const SolverOptions& opts = {});

}  // namespace vesd
