#pragma once

#include "vesd/clt_theory.hpp"
#include "vesd/mp_law.hpp"
#include "vesd/population.hpp"
#include "vesd/quadrature.hpp"

#include <vector>

namespace vesd::detail {

/// Atom-grouped weights c_k = sum over atom k of (U^T v1)_i (U^T v2)_i, so
/// that v1^T g(Sigma) v2 = sum_k c_k g(s_k).
class AtomContraction {
 public:
  AtomContraction(const Population& pop, const Eigen::VectorXd& v1, const Eigen::VectorXd& v2);

  /// v1^T Sigma / ((1 + m1 Sigma)(1 + m2 Sigma)) v2.
  cplx resolvent_pair(cplx m1, cplx m2) const;

 private:
  Eigen::ArrayXd s_;
  Eigen::ArrayXd c_;
};

/// Sigma^{1/2} (1 + m Sigma)^{-1} v in the original coordinates.
class RowFactor {
 public:
  RowFactor(const Population& pop, const Eigen::VectorXd& v);

  Eigen::VectorXcd operator()(cplx m) const;

 private:
  bool diagonal_;
  Eigen::ArrayXd sigma_;
  Eigen::ArrayXd v_;
  Eigen::ArrayXd atoms_;
  Eigen::MatrixXd projections_;  // column k = P_k v
};

/// Boundary values m2c(x + i0) over the support, from a Chebyshev
/// interpolant in the cosine variable of each bulk polished by Newton.
class BoundaryTable {
 public:
  BoundaryTable(const PopulationSpectrum& pop, const SolverOptions& opts = {}, int nodes = 64);

  const std::vector<double>& edges() const { return edges_; }
  bool inside(double x) const;
  cplx operator()(double x) const;
  double density(double x) const;

 private:
  struct Bulk {
    double lower, upper;
    std::vector<double> theta;
    std::vector<cplx> m;
    std::vector<double> weights;
  };

  cplx interpolate(const Bulk& b, double x) const;

  const PopulationSpectrum& pop_;
  SolverOptions opts_;
  std::vector<double> edges_;
  std::vector<Bulk> bulks_;
  bool polish_ = true;
};

/// Quadrature rule in x over [lo, hi] intersected with the support, using
/// the cosine variable of each bulk (weights include the Jacobian).
quad::Rule support_rule(const std::vector<double>& edges, double lo, double hi, int panels_per_bulk);

}  // namespace vesd::detail
