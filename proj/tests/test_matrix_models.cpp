#include "oracle.hpp"
#include "support.hpp"
#include "vesd/matrix_models.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

using namespace vesd;
using oracle::cplx;

namespace {

Eigen::MatrixXcd explicit_resolvent(const Eigen::MatrixXd& Q, cplx z) {
  const Index n = Q.rows();
  Eigen::MatrixXcd A = Q.cast<cplx>() - z * Eigen::MatrixXcd::Identity(n, n);
  return A.inverse();
}

DirectionVector random_unit(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = g(rng);
  return DirectionVector::normalized(v);
}

}  // namespace

TEST_SUITE("matrix_models") {
  TEST_CASE("trial seeds are stable and distinct") {
    CHECK(trial_seed(1, 0) == trial_seed(1, 0));
    CHECK(trial_seed(1, 0) != trial_seed(1, 1));
    CHECK(trial_seed(1, 5) != trial_seed(2, 5));
  }

  TEST_CASE("sampling is a pure function of the seed") {
    const auto model = PopulationModel::identity(30);
    const auto a = sample_ensemble(model, 60, EntryDistribution::gaussian(), 42);
    const auto b = sample_ensemble(model, 60, EntryDistribution::gaussian(), 42);
    const auto c = sample_ensemble(model, 60, EntryDistribution::gaussian(), 43);
    CHECK(a.Y() == b.Y());
    CHECK(a.eigenvalues() == b.eigenvalues());
    CHECK(a.Y() != c.Y());
  }

  TEST_CASE("entry laws are standardized") {
    const Index n = 200, N = 400;
    const auto model = PopulationModel::identity(n);
    const auto g = sample_ensemble(model, N, EntryDistribution::gaussian(), 1);
    const double var = g.X().array().square().mean() * N;
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
    CHECK(std::abs(g.X().mean()) * std::sqrt(double(N)) < 0.02);
    const auto r = sample_ensemble(model, N, EntryDistribution::rademacher(), 1);
    CHECK((r.X().array().abs() * std::sqrt(double(N)) - 1.0).abs().maxCoeff() < 1e-15);
    CHECK(EntryDistribution::rademacher().kappa4.value == -2.0);
  }

  TEST_CASE("spiked model square root matches the explicit matrix square root") {
    const Index n = 12;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n), b = Eigen::VectorXd::Zero(n);
    a(0) = a(1) = 1 / std::sqrt(2.0);
    b(0) = 1 / std::sqrt(2.0);
    b(1) = -1 / std::sqrt(2.0);
    const auto model = PopulationModel::spiked(n, {0.8, -0.5}, {DirectionVector(a), DirectionVector(b)});
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(n, n) + 0.8 * a * a.transpose() - 0.5 * b * b.transpose();
    CHECK((model.matrix() - S).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(n, 5);
    CHECK((model.apply_sqrt(X) - es.operatorSqrt() * X).cwiseAbs().maxCoeff() < 1e-12);
    const auto diag = PopulationModel::spiked(n, {2.0}, {DirectionVector::basis(n, 3)});
    CHECK(diag.covariance().is_diagonal());
    CHECK(diag.matrix()(3, 3) == doctest::Approx(3.0));
  }

  TEST_CASE("spiked model rejects bad input") {
    const auto e1 = DirectionVector::basis(5, 0);
    const auto u = DirectionVector::normalized(Eigen::VectorXd::Ones(5));
    CHECK(error_kind([&] { PopulationModel::spiked(5, {1.0, 1.0}, {e1, u}); }) == ErrorKind::InvalidArgument);
    CHECK(error_kind([&] { PopulationModel::spiked(5, {-1.0}, {e1}); }) == ErrorKind::InvalidArgument);
  }

  TEST_CASE("decomposition is a descending eigenbasis and Q2 shares the spectrum") {
    const auto model = PopulationModel::diagonal(Eigen::VectorXd::LinSpaced(40, 0.5, 2.0));
    const auto ens = sample_ensemble(model, 100, EntryDistribution::gaussian(), 8);
    const Eigen::MatrixXd Q = ens.Y() * ens.Y().transpose();
    const auto& L = ens.eigenvalues();
    const auto& V = ens.eigenvectors();
    CHECK((Q * V - V * L.asDiagonal()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((V.transpose() * V - Eigen::MatrixXd::Identity(40, 40)).cwiseAbs().maxCoeff() < 1e-12);
    for (Index k = 1; k < L.size(); ++k) CHECK(L(k) <= L(k - 1));
    const Eigen::VectorXd q2 = ens.q2_eigenvalues();
    REQUIRE(q2.size() == 100);
    CHECK((q2.head(40) - L).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(q2.tail(60).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("Ward identity and resolvent against an explicit inverse") {
    const Index n = 50;
    const auto ens = sample_ensemble(PopulationModel::identity(n), 80, EntryDistribution::gaussian(), 3);
    const Eigen::MatrixXd Q = ens.Y() * ens.Y().transpose();
    for (int k = 0; k < 10; ++k) {
      const auto v = random_unit(n, 100 + k);
      const cplx z(0.2 + 0.3 * k, 0.01 + 0.1 * k);
      const Eigen::MatrixXcd R = explicit_resolvent(Q, z);
      const Eigen::VectorXcd Rv = R * v.coordinates().cast<cplx>();
      const cplx Rvv = v.coordinates().cast<cplx>().dot(Rv);
      const cplx lib = resolvent_bilinear(ens, v, v, z);
      CHECK(std::abs(lib - Rvv) < 1e-10 * std::max(1.0, std::abs(Rvv)));
      CHECK(Rv.squaredNorm() == doctest::Approx(lib.imag() / z.imag()).epsilon(1e-10));
    }
  }

  TEST_CASE("vector spectral distribution has unit mass") {
    const auto ens = sample_ensemble(PopulationModel::identity(30), 20, EntryDistribution::gaussian(), 5);
    const auto v = random_unit(30, 9);
    CHECK(vesd_eval(ens, v, -1.0) == 0.0);
    CHECK(vesd_eval(ens, v, 1e6) == doctest::Approx(1.0).epsilon(1e-13));
    double prev = 0;
    for (double x = 0; x < 5; x += 0.25) {
      const double F = vesd_eval(ens, v, x);
      CHECK(F >= prev);
      prev = F;
    }
    CHECK(vesd_eval(ens, v, 0.0) > 0.0);  // rank N < n leaves mass at zero
  }

  TEST_CASE("plug-in Stieltjes estimates match explicit traces") {
    const auto ens = sample_ensemble(PopulationModel::identity(40), 60, EntryDistribution::gaussian(), 6);
    const Eigen::MatrixXd Q2 = ens.Y().transpose() * ens.Y();
    const cplx z(4.0, 0.0);
    const Eigen::MatrixXcd R2 = explicit_resolvent(Q2, z);
    CHECK(std::abs(m2c_hat(ens, z) - R2.trace() / 60.0) < 1e-12);
    CHECK(std::abs(m2c_hat_derivative(ens, z) - (R2 * R2).trace() / 60.0) < 1e-12);
    const double top = ens.eigenvalues()(0);
    CHECK(error_kind([&] { m2c_hat(ens, {top + 1e-9, 0.0}); }) == ErrorKind::NearSingular);
    const cplx bulk = m2c_hat_bulk(ens, 1.0, 0.1);
    CHECK(bulk.imag() > 0);
  }

  TEST_CASE("fourth-cumulant estimates for Rademacher data are exactly -2") {
    const auto ens = sample_ensemble(PopulationModel::identity(20), 50, EntryDistribution::rademacher(), 2);
    CHECK(kappa4_hat(ens, KappaMode::pooled).value == doctest::Approx(-2.0).epsilon(1e-12));
    const auto rows = kappa4_hat(ens, KappaMode::per_row);
    CHECK((rows.rows.array() + 2.0).abs().maxCoeff() < 1e-12);
  }

  TEST_CASE("outside statistic against an explicit inverse and the closed form") {
    const Index n = 60, N = 120;
    const double E = 4.0, d = 0.5;
    const auto ens = sample_ensemble(PopulationModel::identity(n), N, EntryDistribution::gaussian(), 4);
    const Population pop(PopulationCovariance::identity(n), d);
    const auto v = random_unit(n, 77);
    const Eigen::MatrixXd Q = ens.Y() * ens.Y().transpose();
    const cplx Rvv = v.coordinates().cast<cplx>().dot(explicit_resolvent(Q, E) * v.coordinates().cast<cplx>());
    const double m = oracle::mp_m(E, d).real();
    const double expect = std::sqrt(double(N)) * (Rvv.real() + 1 / (E * (1 + m)));
    CHECK(y_statistic_outside(ens, v, E, pop) == doctest::Approx(expect).epsilon(1e-9));
  }

  TEST_CASE("linear statistic centering at Sigma = I is the MP integral") {
    const double d = 0.5;
    const Population pop(PopulationCovariance::identity(50), d);
    const auto v = DirectionVector::basis(50, 1);
    const TestFunction f = TestFunction::bump(1.2, 1.0);
    const double expect = oracle::integrate([&](double x) { return f(x) * oracle::mp_rho_c(x, d); },
                                            oracle::lambda_minus(d), oracle::lambda_plus(d));
    CHECK(z_centering(v, f, 0.0, 1.0, pop) == doctest::Approx(expect).epsilon(1e-9));
    const auto ens = sample_ensemble(PopulationModel::identity(50), 100, EntryDistribution::gaussian(), 12);
    const double c = z_centering(v, f, 0.0, 1.0, pop);
    CHECK(z_statistic(ens, v, f, 0.0, 1.0, pop) == doctest::Approx(z_statistic_centered(ens, v, f, 0.0, 1.0, c)));
    double raw = 0;
    const Eigen::VectorXd p = ens.projections(v);
    for (Index k = 0; k < p.size(); ++k) raw += p(k) * p(k) * f(ens.eigenvalues()(k));
    CHECK(z_statistic_centered(ens, v, f, 0.0, 1.0, c) == doctest::Approx(std::sqrt(100.0) * (raw - c)));
  }

  TEST_CASE("raw data ensembles") {
    Eigen::MatrixXd Y = Eigen::MatrixXd::Random(10, 30);
    const auto ens = SampleEnsemble::from_data(Y);
    CHECK(ens.X().size() == 0);
    CHECK(ens.n() == 10);
    CHECK(ens.N() == 30);
  }
}
