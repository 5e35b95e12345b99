#include "vesd/population.hpp"

#include "vesd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace vesd {

PopulationSpectrum::PopulationSpectrum(std::vector<double> eigenvalues, double aspect_ratio,
                                       double regularity_margin)
    : aspect_ratio_(aspect_ratio), tau_(regularity_margin) {
  require(!eigenvalues.empty(), ErrorKind::InvalidArgument, "population spectrum is empty");
  require(std::isfinite(aspect_ratio) && aspect_ratio > 0, ErrorKind::InvalidArgument,
          "aspect ratio must be positive");
  require(regularity_margin > 0 && regularity_margin < 1, ErrorKind::InvalidArgument,
          "regularity margin must lie in (0,1)");
  for (double s : eigenvalues)
    require(std::isfinite(s) && s >= 0, ErrorKind::InvalidArgument,
            "population eigenvalues must be finite and nonnegative");
  std::sort(eigenvalues.begin(), eigenvalues.end(), std::greater<>());
  require(eigenvalues.front() > 0, ErrorKind::InvalidArgument, "population spectrum is all zero");

  const auto n = static_cast<Index>(eigenvalues.size());
  eigenvalues_ = Eigen::Map<const Eigen::VectorXd>(eigenvalues.data(), n);

  std::vector<double> atoms, weights;
  for (Index i = 0; i < n;) {
    Index j = i;
    while (j < n && eigenvalues_(j) == eigenvalues_(i)) ++j;
    if (eigenvalues_(i) > 0) {
      atoms.push_back(eigenvalues_(i));
      weights.push_back(static_cast<double>(j - i) / static_cast<double>(n));
    }
    i = j;
  }
  atoms_ = Eigen::Map<const Eigen::ArrayXd>(atoms.data(), static_cast<Index>(atoms.size()));
  weights_ = Eigen::Map<const Eigen::ArrayXd>(weights.data(), static_cast<Index>(weights.size()));
}

PopulationSpectrum PopulationSpectrum::identity(Index n, double aspect_ratio,
                                                double regularity_margin) {
  require(n > 0, ErrorKind::InvalidArgument, "dimension must be positive");
  return PopulationSpectrum(std::vector<double>(static_cast<std::size_t>(n), 1.0), aspect_ratio,
                            regularity_margin);
}

Index PopulationSpectrum::sample_count() const {
  return static_cast<Index>(std::llround(static_cast<double>(dimension()) / aspect_ratio_));
}

std::vector<std::string> PopulationSpectrum::violations(bool whole_support) const {
  std::vector<std::string> out;
  auto say = [&](const std::string& what, double lhs, double rhs) {
    std::ostringstream os;
    os << what << " (" << lhs << " vs " << rhs << ")";
    out.push_back(os.str());
  };
  if (largest() > 1.0 / tau_) say("sigma_1 <= 1/tau fails", largest(), 1.0 / tau_);
  const double small =
      static_cast<double>((eigenvalues_.array() <= tau_).count()) / static_cast<double>(dimension());
  if (small > 1.0 - tau_) say("fraction of sigma_i <= tau exceeds 1 - tau", small, 1.0 - tau_);
  if (aspect_ratio_ < tau_) say("d_N >= tau fails", aspect_ratio_, tau_);
  if (aspect_ratio_ > 1.0 / tau_) say("d_N <= 1/tau fails", aspect_ratio_, 1.0 / tau_);
  if (whole_support && std::abs(aspect_ratio_ - 1.0) < tau_)
    say("|d_N - 1| >= tau fails", std::abs(aspect_ratio_ - 1.0), tau_);
  return out;
}

DirectionVector::DirectionVector(Eigen::VectorXd coordinates) : v_(std::move(coordinates)) {
  require(v_.size() > 0, ErrorKind::InvalidArgument, "direction vector is empty");
  require(v_.allFinite(), ErrorKind::InvalidArgument, "direction vector has non-finite entries");
  require(std::abs(v_.norm() - 1.0) <= kUnitTolerance, ErrorKind::InvalidArgument,
          "direction vector is not unit norm");
}

DirectionVector DirectionVector::normalized(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  require(std::isfinite(norm) && norm > 0, ErrorKind::InvalidArgument,
          "cannot normalize a zero vector");
  return DirectionVector(v / norm);
}

DirectionVector DirectionVector::basis(Index n, Index i) {
  require(i >= 0 && i < n, ErrorKind::InvalidArgument, "basis index out of range");
  return DirectionVector(Eigen::VectorXd::Unit(n, i));
}

DirectionVector DirectionVector::uniform(Index n) {
  require(n > 0, ErrorKind::InvalidArgument, "dimension must be positive");
  return normalized(Eigen::VectorXd::Ones(n));
}

PopulationCovariance::PopulationCovariance(Eigen::VectorXd eigenvalues,
                                           std::optional<Eigen::MatrixXd> basis)
    : sigma_(std::move(eigenvalues)), basis_(std::move(basis)) {
  require(sigma_.size() > 0, ErrorKind::InvalidArgument, "covariance is empty");
  require(sigma_.allFinite() && (sigma_.array() >= 0).all(), ErrorKind::InvalidArgument,
          "covariance eigenvalues must be finite and nonnegative");
  if (basis_) {
    require(basis_->rows() == sigma_.size() && basis_->cols() == sigma_.size(),
            ErrorKind::InvalidArgument, "eigenbasis shape does not match eigenvalues");
  }
}

PopulationCovariance PopulationCovariance::identity(Index n) {
  return PopulationCovariance(Eigen::VectorXd::Ones(n));
}

PopulationCovariance PopulationCovariance::diagonal(const Eigen::VectorXd& diag) {
  return PopulationCovariance(diag);
}

PopulationCovariance PopulationCovariance::from_matrix(const Eigen::MatrixXd& sigma) {
  require(sigma.rows() == sigma.cols(), ErrorKind::InvalidArgument, "covariance must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  require(es.info() == Eigen::Success, ErrorKind::EigenFailure,
          "eigendecomposition of the covariance failed");
  // Ties broken by rounding would otherwise become separate atoms.
  Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(0.0);
  const double tol = 1e-12 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
  for (Index i = 0, j; i < lambda.size(); i = j) {
    for (j = i + 1; j < lambda.size() && lambda(j) - lambda(j - 1) <= tol; ++j) {}
    lambda.segment(i, j - i).setConstant(lambda.segment(i, j - i).mean());
  }
  return PopulationCovariance(lambda, es.eigenvectors());
}

PopulationSpectrum PopulationCovariance::spectrum(double aspect_ratio,
                                                  double regularity_margin) const {
  return PopulationSpectrum(std::vector<double>(sigma_.data(), sigma_.data() + sigma_.size()),
                            aspect_ratio, regularity_margin);
}

Eigen::VectorXd PopulationCovariance::to_eigenbasis(const Eigen::VectorXd& v) const {
  require(v.size() == sigma_.size(), ErrorKind::InvalidArgument,
          "vector dimension does not match covariance");
  if (!basis_) return v;
  return basis_->transpose() * v;
}

Eigen::MatrixXd PopulationCovariance::matrix() const {
  if (!basis_) return sigma_.asDiagonal();
  return *basis_ * sigma_.asDiagonal() * basis_->transpose();
}

std::vector<Index> PopulationCovariance::atom_index() const {
  std::vector<double> atoms(sigma_.data(), sigma_.data() + sigma_.size());
  std::sort(atoms.begin(), atoms.end(), std::greater<>());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
  if (!atoms.empty() && atoms.back() == 0.0) atoms.pop_back();
  std::vector<Index> idx(static_cast<std::size_t>(sigma_.size()), -1);
  for (Index i = 0; i < sigma_.size(); ++i) {
    if (sigma_(i) == 0.0) continue;
    auto it = std::lower_bound(atoms.begin(), atoms.end(), sigma_(i), std::greater<>());
    idx[static_cast<std::size_t>(i)] = it - atoms.begin();
  }
  return idx;
}

}  // namespace vesd
