#include "vesd/matrix_models.hpp"

#include "internal.hpp"
#include "vesd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <numbers>
#include <sstream>

#ifdef VESD_HAVE_LAPACKE
#include <dlfcn.h>
#include <lapacke.h>
extern "C" void openblas_set_num_threads(int);
#endif

namespace vesd {

PopulationModel::PopulationModel(Kind kind, Index n, PopulationCovariance cov)
    : kind_(kind), n_(n), cov_(std::move(cov)) {}

PopulationModel PopulationModel::identity(Index n) {
  require(n > 0, ErrorKind::InvalidArgument, "dimension must be positive");
  return PopulationModel(Kind::identity, n, PopulationCovariance::identity(n));
}

PopulationModel PopulationModel::spiked(Index n, std::vector<double> strengths,
                                        std::vector<DirectionVector> vectors) {
  require(n > 0, ErrorKind::InvalidArgument, "dimension must be positive");
  require(strengths.size() == vectors.size(), ErrorKind::InvalidArgument,
          "one spike vector per strength");
  const auto r = static_cast<Index>(vectors.size());
  Eigen::MatrixXd V(n, r);
  for (Index k = 0; k < r; ++k) {
    require(vectors[static_cast<std::size_t>(k)].size() == n, ErrorKind::InvalidArgument,
            "spike vector dimension mismatch");
    require(strengths[static_cast<std::size_t>(k)] > -1.0, ErrorKind::InvalidArgument,
            "spike strengths must exceed -1 for a positive-definite Sigma");
    V.col(k) = vectors[static_cast<std::size_t>(k)].coordinates();
  }
  require((V.transpose() * V - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff() <= 1e-10,
          ErrorKind::InvalidArgument, "spike vectors must be orthonormal");

  // Spikes along coordinate axes keep Sigma diagonal.
  bool axis_aligned = true;
  Eigen::VectorXd diag = Eigen::VectorXd::Ones(n);
  for (Index k = 0; k < r && axis_aligned; ++k) {
    Index i;
    const double top = V.col(k).cwiseAbs().maxCoeff(&i);
    axis_aligned = std::abs(top - 1.0) <= 1e-15 && (V.col(k).cwiseAbs().sum() - top) == 0.0;
    if (axis_aligned) diag(i) = 1.0 + strengths[static_cast<std::size_t>(k)];
  }
  std::optional<PopulationCovariance> cov;
  if (axis_aligned) {
    cov.emplace(diag);
  } else {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(V);
    Eigen::MatrixXd U = qr.householderQ();
    U.leftCols(r) = V;
    Eigen::VectorXd sigma = Eigen::VectorXd::Ones(n);
    for (Index k = 0; k < r; ++k) sigma(k) = 1.0 + strengths[static_cast<std::size_t>(k)];
    cov.emplace(sigma, U);
  }
  PopulationModel m(Kind::spiked, n, std::move(*cov));
  m.strengths_ = std::move(strengths);
  m.vectors_ = std::move(vectors);
  return m;
}

PopulationModel PopulationModel::diagonal(Eigen::VectorXd diag) {
  require(diag.size() > 0 && (diag.array() > 0).all(), ErrorKind::InvalidArgument,
          "diagonal covariance must be positive");
  const Index n = diag.size();
  return PopulationModel(Kind::diagonal, n, PopulationCovariance::diagonal(diag));
}

PopulationModel PopulationModel::general(const Eigen::MatrixXd& sigma) {
  require(sigma.rows() == sigma.cols() && sigma.rows() > 0, ErrorKind::InvalidArgument,
          "covariance must be square");
  require((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, sigma.cwiseAbs().maxCoeff()),
          ErrorKind::InvalidArgument, "covariance must be symmetric");
  PopulationCovariance cov = PopulationCovariance::from_matrix(sigma);
  require((cov.eigenvalues().array() > 0).all(), ErrorKind::InvalidArgument,
          "covariance must be positive definite");
  PopulationModel m(Kind::general, sigma.rows(), cov);
  const Eigen::MatrixXd& U = *m.cov_.basis();
  m.sqrt_ = U * m.cov_.eigenvalues().cwiseSqrt().asDiagonal() * U.transpose();
  return m;
}

Population PopulationModel::population(double aspect_ratio, double regularity_margin) const {
  return Population(cov_, aspect_ratio, regularity_margin);
}

Eigen::MatrixXd PopulationModel::apply_sqrt(const Eigen::MatrixXd& X) const {
  require(X.rows() == n_, ErrorKind::InvalidArgument, "data rows must match the dimension");
  switch (kind_) {
    case Kind::identity:
      return X;
    case Kind::diagonal:
      return cov_.eigenvalues().cwiseSqrt().asDiagonal() * X;
    case Kind::spiked: {
      if (cov_.is_diagonal()) return cov_.eigenvalues().cwiseSqrt().asDiagonal() * X;
      Eigen::MatrixXd Y = X;
      for (std::size_t k = 0; k < vectors_.size(); ++k) {
        const Eigen::VectorXd& v = vectors_[k].coordinates();
        const double c = std::sqrt(1.0 + strengths_[k]) - 1.0;
        Y.noalias() += (c * v) * (v.transpose() * X);
      }
      return Y;
    }
    case Kind::general:
      return sqrt_ * X;
  }
  return X;
}

EntryDistribution EntryDistribution::gaussian() { return {}; }

EntryDistribution EntryDistribution::rademacher() {
  EntryDistribution d;
  d.kind = Kind::rademacher;
  d.kappa4 = FourthCumulantProfile::constant(-2.0);
  return d;
}

EntryDistribution EntryDistribution::custom(std::function<double(std::mt19937_64&)> sampler,
                                            double kappa4) {
  require(static_cast<bool>(sampler), ErrorKind::InvalidArgument, "custom sampler is empty");
  EntryDistribution d;
  d.kind = Kind::custom;
  d.kappa4 = FourthCumulantProfile::constant(kappa4);
  d.sampler = std::move(sampler);
  return d;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial_index) {
  return splitmix64(splitmix64(master_seed) ^ splitmix64(trial_index + 0x632be59bd9b4e019ULL));
}

namespace {

void eigen_fallback(const Eigen::MatrixXd& A, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) fail(ErrorKind::EigenFailure, "symmetric eigensolver did not converge");
  values = es.eigenvalues().reverse();
  vectors = es.eigenvectors().rowwise().reverse();
}

#ifdef VESD_HAVE_LAPACKE
lapack_int dsyevd(Eigen::MatrixXd& a, Eigen::VectorXd& w) {
  const auto n = static_cast<lapack_int>(a.rows());
  w.resize(n);
  return LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, a.data(), n, w.data());
}

bool dsyevd_trustworthy() {
  const Index n = 160;
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> g;
  Eigen::MatrixXd B(n, 2 * n);
  for (Index i = 0; i < B.size(); ++i) B.data()[i] = g(rng);
  const Eigen::MatrixXd A = B * B.transpose();
  Eigen::MatrixXd V = A;
  Eigen::VectorXd w;
  if (dsyevd(V, w) != 0) return false;
  const double resid = (A * V - V * w.asDiagonal()).cwiseAbs().maxCoeff() / w.cwiseAbs().maxCoeff();
  const double orth = (V.transpose() * V - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  return resid < 1e-10 && orth < 1e-10;
}

// Some OpenBLAS builds pick a kernel table for the host CPU whose LAPACK
// results are wrong (seen with the Cooperlake table). Validate once; on
// failure redo the core selection with OPENBLAS_CORETYPE forced, else use Eigen.
bool lapack_usable() {
  static const bool usable = [] {
    openblas_set_num_threads(1);
    if (dsyevd_trustworthy()) return true;
    auto quit = reinterpret_cast<void (*)()>(dlsym(RTLD_DEFAULT, "gotoblas_dynamic_quit"));
    auto init = reinterpret_cast<void (*)()>(dlsym(RTLD_DEFAULT, "gotoblas_dynamic_init"));
    if (quit && init) {
      for (const char* core : {"SkylakeX", "Haswell"}) {
        setenv("OPENBLAS_CORETYPE", core, 1);
        quit();
        init();
        openblas_set_num_threads(1);
        if (dsyevd_trustworthy()) return true;
      }
    }
    std::cerr << "vesd: OpenBLAS eigensolver failed validation, using Eigen\n";
    return false;
  }();
  return usable;
}
#endif

}  // namespace

void symmetric_eigen(const Eigen::MatrixXd& A, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  require(A.rows() == A.cols(), ErrorKind::InvalidArgument, "eigenproblem needs a square matrix");
#ifdef VESD_HAVE_LAPACKE
  if (lapack_usable()) {
    Eigen::MatrixXd a = A;
    Eigen::VectorXd w;
    if (const lapack_int info = dsyevd(a, w); info != 0) {
      std::ostringstream os;
      os << "dsyevd failed with info = " << info;
      fail(ErrorKind::EigenFailure, os.str());
    }
    values = w.reverse();
    vectors = a.rowwise().reverse();
    return;
  }
#endif
  eigen_fallback(A, values, vectors);
}

SampleEnsemble::SampleEnsemble(Eigen::MatrixXd X, Eigen::MatrixXd Y, std::uint64_t seed)
    : seed_(seed), X_(std::move(X)), Y_(std::move(Y)) {
  require(Y_.rows() > 0 && Y_.cols() > 0, ErrorKind::InvalidArgument, "data matrix is empty");
  require(Y_.allFinite(), ErrorKind::InvalidArgument, "data matrix has non-finite entries");
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(Y_.rows(), Y_.rows());
  Q.selfadjointView<Eigen::Lower>().rankUpdate(Y_);
  symmetric_eigen(Q, lambda_, xi_);
  const Index r = std::min(Y_.rows(), Y_.cols());
  lambda_ = lambda_.cwiseMax(0.0);
  if (r < lambda_.size()) lambda_.tail(lambda_.size() - r).setZero();
}

SampleEnsemble SampleEnsemble::from_data(Eigen::MatrixXd Y, std::uint64_t seed) {
  return SampleEnsemble(Eigen::MatrixXd(), std::move(Y), seed);
}

Eigen::VectorXd SampleEnsemble::projections(const DirectionVector& u) const {
  require(u.size() == n(), ErrorKind::InvalidArgument, "vector dimension does not match the data");
  return xi_.transpose() * u.coordinates();
}

Eigen::VectorXd SampleEnsemble::q2_eigenvalues() const {
  const Index r = std::min(n(), N());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(N());
  out.head(r) = lambda_.head(r);
  return out;
}

SampleEnsemble sample_ensemble(const PopulationModel& model, Index N,
                               const EntryDistribution& dist, std::uint64_t seed) {
  const Index n = model.dimension();
  require(N > 0, ErrorKind::InvalidArgument, "sample count must be positive");
  std::mt19937_64 rng(splitmix64(seed));
  Eigen::MatrixXd X(n, N);
  const double scale = 1.0 / std::sqrt(static_cast<double>(N));
  double* p = X.data();
  const Index total = n * N;
  switch (dist.kind) {
    case EntryDistribution::Kind::gaussian: {
      std::normal_distribution<double> g(0.0, 1.0);
      for (Index i = 0; i < total; ++i) p[i] = g(rng) * scale;
      break;
    }
    case EntryDistribution::Kind::rademacher: {
      std::uint64_t bits = 0;
      for (Index i = 0; i < total; ++i) {
        if (i % 64 == 0) bits = rng();
        p[i] = (bits & 1ULL) ? scale : -scale;
        bits >>= 1;
      }
      break;
    }
    case EntryDistribution::Kind::custom:
      for (Index i = 0; i < total; ++i) p[i] = dist.sampler(rng) * scale;
      break;
  }
  Eigen::MatrixXd Y = model.apply_sqrt(X);
  return SampleEnsemble(std::move(X), std::move(Y), seed);
}

double vesd_eval(const SampleEnsemble& ens, const DirectionVector& u, double x) {
  const Eigen::VectorXd p = ens.projections(u);
  const Eigen::VectorXd& lambda = ens.eigenvalues();
  double acc = 0.0;
  for (Index k = 0; k < lambda.size(); ++k)
    if (lambda(k) <= x) acc += p(k) * p(k);
  return std::min(1.0, acc);
}

cplx resolvent_from_projections(const Eigen::VectorXd& lambda, const Eigen::VectorXd& p,
                                const Eigen::VectorXd& q, cplx z) {
  if (z.imag() == 0.0) {
    const double gap = (lambda.array() - z.real()).abs().minCoeff();
    if (gap < 1e-8) {
      std::ostringstream os;
      os << "real z = " << z.real() << " is within " << gap << " of an eigenvalue";
      fail(ErrorKind::NearSingular, os.str());
    }
  }
  cplx acc = 0.0;
  for (Index k = 0; k < lambda.size(); ++k) acc += p(k) * q(k) / (lambda(k) - z);
  return acc;
}

cplx resolvent_bilinear(const SampleEnsemble& ens, const DirectionVector& u,
                        const DirectionVector& v, cplx z) {
  const Eigen::VectorXd p = ens.projections(u);
  const Eigen::VectorXd q = u.coordinates().data() == v.coordinates().data() ? p : ens.projections(v);
  return resolvent_from_projections(ens.eigenvalues(), p, q, z);
}

namespace {

cplx deterministic_equivalent(const DirectionVector& v, cplx z, cplx m, const Population& pop) {
  return pop.covariance.bilinear<cplx>(v.coordinates(), v.coordinates(),
                                       [&](double s) { return 1.0 / (1.0 + m * s); }) / z;
}

}  // namespace

cplx y_statistic(const SampleEnsemble& ens, const DirectionVector& v, double E, double eta, cplx w,
                 const Population& pop, const SolverOptions& opts) {
  require(eta > 0, ErrorKind::InvalidArgument, "eta must be positive");
  const cplx z = E + w * eta;
  const cplx m = m2c(z, pop.spectrum, opts);
  const cplx R = resolvent_bilinear(ens, v, v, z);
  return std::sqrt(static_cast<double>(ens.N()) * eta) * (R + deterministic_equivalent(v, z, m, pop));
}

double y_statistic_outside(const SampleEnsemble& ens, const DirectionVector& v, double E,
                           const Population& pop, const SolverOptions& opts) {
  const cplx z(E, 0.0);
  const cplx m = m2c(z, pop.spectrum, opts);
  const cplx R = resolvent_bilinear(ens, v, v, z);
  return std::sqrt(static_cast<double>(ens.N())) * (R + deterministic_equivalent(v, z, m, pop)).real();
}

double z_centering(const DirectionVector& v, const TestFunction& f, double E, double eta,
                   const Population& pop, const SolverOptions& opts) {
  require(eta > 0, ErrorKind::InvalidArgument, "eta must be positive");
  if (f.is_zero()) return 0.0;
  const detail::BoundaryTable table(pop.spectrum, opts);
  const detail::AtomContraction c(pop, v.coordinates(), v.coordinates());
  const auto [lo, hi] = f.support();
  const quad::Rule rule = detail::support_rule(table.edges(), E + eta * lo, E + eta * hi, 256);
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const double x = rule.x[k];
    const double fx = f((x - E) / eta);
    if (fx == 0.0) continue;
    const cplx m = table(x);
    const double rho = std::max(0.0, m.imag()) / std::numbers::pi;
    acc += rule.w[k] * fx * rho / x * c.resolvent_pair(m, std::conj(m)).real();
  }
  return acc;
}

double z_statistic_centered(const SampleEnsemble& ens, const DirectionVector& v,
                            const TestFunction& f, double E, double eta, double centering) {
  require(eta > 0, ErrorKind::InvalidArgument, "eta must be positive");
  if (f.is_zero()) return 0.0;
  const Eigen::VectorXd p = ens.projections(v);
  const Eigen::VectorXd& lambda = ens.eigenvalues();
  double acc = 0.0;
  for (Index k = 0; k < lambda.size(); ++k) acc += p(k) * p(k) * f((lambda(k) - E) / eta);
  return std::sqrt(static_cast<double>(ens.N()) / eta) * (acc - centering);
}

double z_statistic(const SampleEnsemble& ens, const DirectionVector& v, const TestFunction& f,
                   double E, double eta, const Population& pop, const SolverOptions& opts) {
  return z_statistic_centered(ens, v, f, E, eta, z_centering(v, f, E, eta, pop, opts));
}

namespace {

void check_q2_gap(const SampleEnsemble& ens, cplx z) {
  if (z.imag() != 0.0) return;
  const Eigen::VectorXd mu = ens.q2_eigenvalues();
  const double gap = (mu.array() - z.real()).abs().minCoeff();
  if (gap < 1e-6) {
    std::ostringstream os;
    os << "E = " << z.real() << " is within " << gap << " of the spectrum of Q2";
    fail(ErrorKind::NearSingular, os.str());
  }
}

}  // namespace

cplx m2c_hat(const SampleEnsemble& ens, cplx z) {
  check_q2_gap(ens, z);
  const Eigen::VectorXd mu = ens.q2_eigenvalues();
  cplx acc = 0.0;
  for (Index j = 0; j < mu.size(); ++j) acc += 1.0 / (mu(j) - z);
  return acc / static_cast<double>(ens.N());
}

cplx m2c_hat_derivative(const SampleEnsemble& ens, cplx z) {
  check_q2_gap(ens, z);
  const Eigen::VectorXd mu = ens.q2_eigenvalues();
  cplx acc = 0.0;
  for (Index j = 0; j < mu.size(); ++j) {
    const cplx t = 1.0 / (mu(j) - z);
    acc += t * t;
  }
  return acc / static_cast<double>(ens.N());
}

cplx m2c_hat_bulk(const SampleEnsemble& ens, double E, double tau) {
  const double eta = std::pow(static_cast<double>(ens.N()), -0.5 + tau);
  return m2c_hat(ens, {E, eta});
}

FourthCumulantProfile kappa4_hat(const SampleEnsemble& ens, KappaMode mode) {
  const Eigen::MatrixXd& Y = ens.Y();
  const double n = static_cast<double>(ens.n()), N = static_cast<double>(ens.N());
  if (mode == KappaMode::pooled) {
    return FourthCumulantProfile::constant(N / n * Y.array().pow(4).sum() - 3.0);
  }
  const double sigma_sq = Y.squaredNorm() / n;
  const double inv = sigma_sq > 0 ? 1.0 / std::sqrt(sigma_sq) : 0.0;
  const Eigen::VectorXd fourth = (Y.array() * inv).pow(4).rowwise().sum();
  return FourthCumulantProfile::per_row((N * fourth.array() - 3.0).matrix());
}

}  // namespace vesd
