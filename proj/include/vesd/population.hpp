#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace vesd {

using Index = Eigen::Index;

/// Eigenvalues of the population covariance together with the aspect ratio
/// d_N = n/N. This is the only input the deterministic laws depend on.
///
/// Eigenvalues are stored in descending order. Exactly tied values are merged
/// into weighted atoms (weight = multiplicity / n); zero eigenvalues carry no
/// atom because they drop out of every spectral sum.
class PopulationSpectrum {
 public:
  PopulationSpectrum(std::vector<double> eigenvalues, double aspect_ratio,
                     double regularity_margin = 0.01);

  static PopulationSpectrum identity(Index n, double aspect_ratio,
                                     double regularity_margin = 0.01);

  Index dimension() const { return eigenvalues_.size(); }
  double aspect_ratio() const { return aspect_ratio_; }
  double regularity_margin() const { return tau_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  double largest() const { return eigenvalues_(0); }

  /// Distinct positive eigenvalues, descending.
  const Eigen::ArrayXd& atoms() const { return atoms_; }
  const Eigen::ArrayXd& weights() const { return weights_; }

  /// Sample count N = n / d_N rounded to the nearest integer.
  Index sample_count() const;

  /// Human-readable list of violated model assumptions at margin tau:
  /// sigma_1 <= 1/tau, pi([0,tau]) <= 1 - tau, tau <= d <= 1/tau and, when
  /// `whole_support` is set, |d - 1| >= tau.
  std::vector<std::string> violations(bool whole_support = true) const;

 private:
  Eigen::VectorXd eigenvalues_;
  double aspect_ratio_;
  double tau_;
  Eigen::ArrayXd atoms_;
  Eigen::ArrayXd weights_;
};

/// Unit vector in R^n, expressed in the same coordinates as Sigma.
class DirectionVector {
 public:
  static constexpr double kUnitTolerance = 1e-12;

  explicit DirectionVector(Eigen::VectorXd coordinates);

  static DirectionVector normalized(const Eigen::VectorXd& v);
  static DirectionVector basis(Index n, Index i);
  /// n^{-1/2}(1, ..., 1).
  static DirectionVector uniform(Index n);

  Index size() const { return v_.size(); }
  const Eigen::VectorXd& coordinates() const { return v_; }
  double operator()(Index i) const { return v_(i); }
  DirectionVector operator-() const { return DirectionVector(Eigen::VectorXd(-v_)); }

 private:
  Eigen::VectorXd v_;
};

/// Sigma in its eigenframe: Sigma = U diag(sigma) U^T. A missing basis means
/// Sigma is diagonal in the working coordinates (U = I).
class PopulationCovariance {
 public:
  explicit PopulationCovariance(Eigen::VectorXd eigenvalues,
                                std::optional<Eigen::MatrixXd> basis = std::nullopt);

  static PopulationCovariance identity(Index n);
  static PopulationCovariance diagonal(const Eigen::VectorXd& diag);
  static PopulationCovariance from_matrix(const Eigen::MatrixXd& sigma);

  Index dimension() const { return sigma_.size(); }
  bool is_diagonal() const { return !basis_.has_value(); }
  const Eigen::VectorXd& eigenvalues() const { return sigma_; }
  const std::optional<Eigen::MatrixXd>& basis() const { return basis_; }

  PopulationSpectrum spectrum(double aspect_ratio, double regularity_margin = 0.01) const;

  /// U^T v.
  Eigen::VectorXd to_eigenbasis(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd matrix() const;

  /// Atom index of each eigen-coordinate, matching spectrum().atoms();
  /// -1 for zero eigenvalues.
  std::vector<Index> atom_index() const;

  /// v1^T g(Sigma) v2 for a scalar function g evaluated per eigenvalue.
  template <typename Scalar, typename Fn>
  Scalar bilinear(const Eigen::VectorXd& v1, const Eigen::VectorXd& v2, Fn&& g) const {
    const Eigen::VectorXd a = to_eigenbasis(v1);
    const Eigen::VectorXd b = v1.data() == v2.data() ? a : to_eigenbasis(v2);
    Scalar acc(0);
    for (Index i = 0; i < sigma_.size(); ++i) acc += g(sigma_(i)) * (a(i) * b(i));
    return acc;
  }

 private:
  Eigen::VectorXd sigma_;
  std::optional<Eigen::MatrixXd> basis_;
};

/// Sigma with its eigenframe together with the derived spectrum; the
/// direction-dependent laws and kernels need both.
struct Population {
  PopulationCovariance covariance;
  PopulationSpectrum spectrum;

  Population(PopulationCovariance cov, double aspect_ratio, double regularity_margin = 0.01)
      : covariance(std::move(cov)), spectrum(covariance.spectrum(aspect_ratio, regularity_margin)) {}

  Index dimension() const { return covariance.dimension(); }
  double aspect_ratio() const { return spectrum.aspect_ratio(); }
};

}  // namespace vesd
