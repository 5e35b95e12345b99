#pragma once

#include "vesd/clt_theory.hpp"
#include "vesd/mp_law.hpp"
#include "vesd/population.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace vesd {

/// Sigma in one of the supported parametrizations, with its symmetric square
/// root applied lazily.
class PopulationModel {
 public:
  enum class Kind { identity, spiked, diagonal, general };

  static PopulationModel identity(Index n);
  /// Sigma = I + sum_i strengths[i] v_i v_i^T with orthonormal v_i.
  static PopulationModel spiked(Index n, std::vector<double> strengths,
                                std::vector<DirectionVector> vectors);
  static PopulationModel diagonal(Eigen::VectorXd diag);
  static PopulationModel general(const Eigen::MatrixXd& sigma);

  Kind kind() const { return kind_; }
  Index dimension() const { return n_; }
  const std::vector<double>& spike_strengths() const { return strengths_; }
  const std::vector<DirectionVector>& spike_vectors() const { return vectors_; }

  /// Sigma in its eigenframe.
  const PopulationCovariance& covariance() const { return cov_; }
  Population population(double aspect_ratio, double regularity_margin = 0.01) const;
  Eigen::MatrixXd matrix() const { return cov_.matrix(); }

  /// Sigma^{1/2} X.
  Eigen::MatrixXd apply_sqrt(const Eigen::MatrixXd& X) const;

 private:
  PopulationModel(Kind kind, Index n, PopulationCovariance cov);

  Kind kind_;
  Index n_;
  std::vector<double> strengths_;
  std::vector<DirectionVector> vectors_;
  PopulationCovariance cov_;
  Eigen::MatrixXd sqrt_;  // general kind only
};

/// Law of sqrt(N) x_ij: mean 0, variance 1.
struct EntryDistribution {
  enum class Kind { gaussian, rademacher, custom };

  Kind kind = Kind::gaussian;
  FourthCumulantProfile kappa4 = FourthCumulantProfile::constant(0.0);
  /// custom kind: draws one standardized entry.
  std::function<double(std::mt19937_64&)> sampler;

  static EntryDistribution gaussian();
  static EntryDistribution rademacher();
  static EntryDistribution custom(std::function<double(std::mt19937_64&)> sampler, double kappa4);
};

/// Seed of the RNG stream for one trial; independent of scheduling.
std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial_index);

/// One realization: the data, and the eigendecomposition of
/// Q1 = Sigma^{1/2} X X^T Sigma^{1/2}, eigenvalues descending.
class SampleEnsemble {
 public:
  static SampleEnsemble from_data(Eigen::MatrixXd Y, std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  Index n() const { return Y_.rows(); }
  Index N() const { return Y_.cols(); }
  /// X itself when the ensemble was sampled; empty for raw data.
  const Eigen::MatrixXd& X() const { return X_; }
  /// Sigma^{1/2} X.
  const Eigen::MatrixXd& Y() const { return Y_; }
  const Eigen::VectorXd& eigenvalues() const { return lambda_; }
  const Eigen::MatrixXd& eigenvectors() const { return xi_; }

  /// Xi^T u.
  Eigen::VectorXd projections(const DirectionVector& u) const;
  /// Nonzero eigenvalues of Q2 = Y^T Y plus N - min(n, N) zeros, descending.
  Eigen::VectorXd q2_eigenvalues() const;

 private:
  friend SampleEnsemble sample_ensemble(const PopulationModel&, Index, const EntryDistribution&,
                                        std::uint64_t);
  SampleEnsemble(Eigen::MatrixXd X, Eigen::MatrixXd Y, std::uint64_t seed);

  std::uint64_t seed_ = 0;
  Eigen::MatrixXd X_;
  Eigen::MatrixXd Y_;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd xi_;
};

SampleEnsemble sample_ensemble(const PopulationModel& model, Index N,
                               const EntryDistribution& dist, std::uint64_t seed);

/// Descending eigenvalues and matching eigenvectors of a symmetric matrix
/// (lower triangle referenced).
void symmetric_eigen(const Eigen::MatrixXd& A, Eigen::VectorXd& values, Eigen::MatrixXd& vectors);

/// sum_k <xi_k,u>^2 1{lambda_k <= x}.
double vesd_eval(const SampleEnsemble& ens, const DirectionVector& u, double x);

/// u^T (Q1 - z)^{-1} v from the spectral decomposition.
cplx resolvent_bilinear(const SampleEnsemble& ens, const DirectionVector& u,
                        const DirectionVector& v, cplx z);

/// Same, from precomputed projections p = Xi^T u and q = Xi^T v.
cplx resolvent_from_projections(const Eigen::VectorXd& lambda, const Eigen::VectorXd& p,
                                const Eigen::VectorXd& q, cplx z);

/// sqrt(N eta) v^T (R(z) + z^{-1} (1 + m2c(z) Sigma)^{-1}) v at z = E + w eta.
cplx y_statistic(const SampleEnsemble& ens, const DirectionVector& v, double E, double eta, cplx w,
                 const Population& pop, const SolverOptions& opts = {});

/// eta^{-1/2} Y in the eta -> 0 limit at real E outside the spectrum:
/// sqrt(N) (R_vv(E) + E^{-1} v^T (1 + m2c(E) Sigma)^{-1} v).
double y_statistic_outside(const SampleEnsemble& ens, const DirectionVector& v, double E,
                           const Population& pop, const SolverOptions& opts = {});

/// Deterministic centering of Z: integral of f((x - E)/eta) dF_{1c,v}(x).
double z_centering(const DirectionVector& v, const TestFunction& f, double E, double eta,
                   const Population& pop, const SolverOptions& opts = {});

double z_statistic(const SampleEnsemble& ens, const DirectionVector& v, const TestFunction& f,
                   double E, double eta, const Population& pop, const SolverOptions& opts = {});

/// Same with a precomputed centering (for repeated trials).
double z_statistic_centered(const SampleEnsemble& ens, const DirectionVector& v,
                            const TestFunction& f, double E, double eta, double centering);

/// N^{-1} sum_j (lambda_j(Q2) - z)^{-1}.
cplx m2c_hat(const SampleEnsemble& ens, cplx z);
/// N^{-1} sum_j (lambda_j(Q2) - z)^{-2}.
cplx m2c_hat_derivative(const SampleEnsemble& ens, cplx z);
/// Bulk variant at z = E + i N^{-1/2 + tau}.
cplx m2c_hat_bulk(const SampleEnsemble& ens, double E, double tau);

enum class KappaMode { pooled, per_row };

/// pooled: (N/n) sum_ij Y_ij^4 - 3. per_row: N sum_j W_ij^4 - 3 with
/// W = Y / sigma and sigma^2 = n^{-1} sum_ij Y_ij^2.
FourthCumulantProfile kappa4_hat(const SampleEnsemble& ens, KappaMode mode);

}  // namespace vesd
