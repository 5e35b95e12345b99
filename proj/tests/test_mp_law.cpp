#include "oracle.hpp"
#include "support.hpp"
#include "vesd/mp_law.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

using namespace vesd;
using oracle::cplx;

namespace {

// Physical root of the cubic for a two-atom Sigma, from companion-matrix roots.
cplx two_atom_m(cplx z, double s1, double w1, double s2, double w2, double d) {
  const double A = s1 * s2, B = s1 + s2;
  // c3 m^3 + c2 m^2 + c1 m + c0 = 0
  const cplx c3 = -z * A;
  const cplx c2 = -z * B + d * A * (w1 + w2) - A;
  const cplx c1 = -z + d * (w1 * s1 + w2 * s2) - B;
  const cplx c0 = -1.0;
  Eigen::Matrix3cd C = Eigen::Matrix3cd::Zero();
  C(0, 0) = -c2 / c3;
  C(0, 1) = -c1 / c3;
  C(0, 2) = -c0 / c3;
  C(1, 0) = 1.0;
  C(2, 1) = 1.0;
  Eigen::ComplexEigenSolver<Eigen::Matrix3cd> es(C);
  cplx best = 0.0;
  for (int k = 0; k < 3; ++k)
    if (es.eigenvalues()(k).imag() > best.imag()) best = es.eigenvalues()(k);
  return best;
}

}  // namespace

TEST_SUITE("mp_law") {
  TEST_CASE("identity law matches the closed form on and off the axis") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0, 1);
    for (double d : {0.3, 0.5, 2.0}) {
      const PopulationSpectrum pop = PopulationSpectrum::identity(200, d);
      const double lm = oracle::lambda_minus(d), lp = oracle::lambda_plus(d);
      for (int k = 0; k < 40; ++k) {
        const cplx z(-1 + 7 * U(rng), std::pow(10.0, -3 + 3 * U(rng)));
        CHECK(std::abs(m2c(z, pop) - oracle::mp_m(z, d)) < 1e-10);
      }
      for (int k = 0; k < 30; ++k) {
        const double E = lm + (lp - lm) * (0.02 + 0.96 * U(rng));
        CHECK(std::abs(solve_m2c({E, 0.0}, pop).m - oracle::mp_m(cplx(E, 0.0), d)) < 1e-10);
      }
      for (int k = 0; k < 30; ++k) {
        const double E = k % 2 ? lp + 0.05 + 4 * U(rng) : lm * (0.2 + 0.6 * U(rng));
        const cplx m = solve_m2c({E, 0.0}, pop).m;
        CHECK(m.imag() == 0.0);
        CHECK(std::abs(m - oracle::mp_m(cplx(E, 0.0), d)) < 1e-10);
      }
    }
  }

  TEST_CASE("identity edges are (1 +- sqrt d)^2") {
    for (double d : {0.3, 0.5, 2.0}) {
      const auto edges = support_edges(PopulationSpectrum::identity(100, d));
      REQUIRE(edges.size() == 2);
      CHECK(std::abs(edges[0].value - oracle::lambda_plus(d)) < 1e-8);
      CHECK(std::abs(edges[1].value - oracle::lambda_minus(d)) < 1e-8);
      CHECK(std::abs(rightmost_edge(PopulationSpectrum::identity(100, d)) - oracle::lambda_plus(d)) < 1e-8);
    }
  }

  TEST_CASE("two-atom law matches the cubic's physical root") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0, 1);
    const PopulationSpectrum pop({4.0, 4.0, 4.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0}, 0.3);
    for (int k = 0; k < 50; ++k) {
      const cplx z(-0.5 + 10 * U(rng), std::pow(10.0, -2 + 2.5 * U(rng)));
      CHECK(std::abs(m2c(z, pop) - two_atom_m(z, 4.0, 0.3, 1.0, 0.7, 0.3)) < 1e-10);
    }
  }

  TEST_CASE("derivative matches a finite difference and the closed form") {
    const PopulationSpectrum pop = PopulationSpectrum::identity(50, 0.5);
    const cplx z(1.3, 0.2), h(1e-5, 0.0);
    const cplx fd = (m2c(z + h, pop) - m2c(z - h, pop)) / (2.0 * h);
    CHECK(std::abs(m2c_derivative({1.3, 0.2}, pop) - fd) < 1e-8);
    CHECK(std::abs(m2c_derivative({4.0, 0.0}, pop) - oracle::mp_m_prime(4.0, 0.5)) < 1e-10);
  }

  TEST_CASE("density and reference values at Sigma = I, d = 0.5") {
    const PopulationSpectrum pop = PopulationSpectrum::identity(100, 0.5);
    CHECK(density_rho2c(1.0, pop) == doctest::Approx(0.5 * oracle::mp_rho_c(1.0, 0.5)).epsilon(1e-10));
    CHECK(std::abs(density_rho2c(1.0, pop) - 0.2105396) < 1e-5);
    const cplx m = solve_m2c({1.0, 0.0}, pop).m;
    CHECK(m.real() == doctest::Approx(-0.75).epsilon(1e-12));
    CHECK(m.imag() == doctest::Approx(std::sqrt(7.0) / 4).epsilon(1e-12));
    CHECK(density_rho2c(3.5, pop) == 0.0);
    const auto cov = PopulationCovariance::identity(100);
    const auto v = DirectionVector::basis(100, 3);
    CHECK(anisotropic_density(1.0, v, cov, pop) == doctest::Approx(oracle::mp_rho_c(1.0, 0.5)).epsilon(1e-10));
  }

  TEST_CASE("support structure of a two-bulk spectrum") {
    std::vector<double> s(200, 1.0);
    std::fill(s.begin(), s.begin() + 100, 8.0);
    const PopulationSpectrum pop(s, 0.05);
    const SupportStructure ss = support_structure(pop, 4000);
    REQUIRE(ss.bulk_count() == 2);
    for (std::size_t k = 1; k < ss.edges.size(); ++k) CHECK(ss.edges[k] < ss.edges[k - 1]);
    // Density vanishes just outside each edge and is positive just inside.
    for (std::size_t k = 0; k < ss.edges.size(); ++k) {
      const double out = k % 2 ? -1e-4 : 1e-4;
      CHECK(density_rho2c(ss.edges[k] + out, pop) == 0.0);
      CHECK(density_rho2c(ss.edges[k] - out, pop) > 0.0);
    }
    // F_2c has an atom 1 - d at zero; each population atom carries its share.
    double total = 0;
    for (double b : ss.bulk_masses) total += b;
    CHECK(total == doctest::Approx(0.05).epsilon(1e-8));
    CHECK(ss.bulk_masses[0] == doctest::Approx(0.025).epsilon(1e-6));
    const double indep = oracle::integrate([&](double x) { return density_rho2c(x, pop); }, ss.edges[3], ss.edges[2]);
    CHECK(indep == doctest::Approx(ss.bulk_masses[1]).epsilon(1e-7));
    CHECK(ss.inside(0.5 * (ss.edges[0] + ss.edges[1])));
    CHECK_FALSE(ss.inside(0.5 * (ss.edges[1] + ss.edges[2])));
    CHECK(ss.distance(ss.edges[0] + 1) == doctest::Approx(1.0));
  }

  TEST_CASE("classical locations are the upper quantiles") {
    const double d = 0.5;
    const PopulationSpectrum pop = PopulationSpectrum::identity(100, d);
    const SupportStructure ss = support_structure(pop, 200);
    REQUIRE(ss.classical_locations.size() == 100);
    double total = 0;
    for (double c : ss.bulk_counts) total += c;
    CHECK(total == doctest::Approx(100.0).epsilon(1e-8));
    for (int j : {1, 10, 50, 99, 100}) {
      const double g = ss.classical_locations[j - 1];
      const double upper = oracle::integrate([&](double x) { return d * oracle::mp_rho_c(x, d); }, g,
                                             oracle::lambda_plus(d));
      CHECK(upper == doctest::Approx((j - 0.5) / 200).epsilon(1e-7));
    }
  }

  TEST_CASE("regularity report flags a bulk touching zero") {
    CHECK(regularity_check(PopulationSpectrum::identity(100, 0.5), 0.01).passed());
    const auto bad = regularity_check(PopulationSpectrum::identity(100, 1.0), 0.01);
    CHECK_FALSE(bad.passed());
    CHECK_FALSE(bad.assumption_violations.empty());
  }

  TEST_CASE("negative eta mirrors the upper half-plane") {
    const PopulationSpectrum pop = PopulationSpectrum::identity(100, 0.5);
    CHECK(std::abs(solve_m2c({1.5, -0.3}, pop).m - std::conj(solve_m2c({1.5, 0.3}, pop).m)) < 1e-14);
  }

  TEST_CASE("boundary Newton from a neighbour") {
    const PopulationSpectrum pop = PopulationSpectrum::identity(100, 0.5);
    const auto m = boundary_m2c_from(1.01, oracle::mp_m(cplx(1.0, 0.0), 0.5), pop);
    REQUIRE(m.has_value());
    CHECK(std::abs(*m - oracle::mp_m(cplx(1.01, 0.0), 0.5)) < 1e-12);
  }
}
