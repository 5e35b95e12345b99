#include "oracle.hpp"
#include "support.hpp"
#include "vesd/estimators.hpp"
#include "vesd/stats.hpp"

#include <doctest.h>

using namespace vesd;

namespace {

SampleEnsemble spiked_sample(Index n, double sigma, std::uint64_t seed, EntryDistribution dist = EntryDistribution::gaussian()) {
  const auto model = PopulationModel::spiked(n, {sigma - 1}, {DirectionVector::basis(n, 0)});
  return sample_ensemble(model, 2 * n, dist, seed);
}

}  // namespace

TEST_SUITE("estimators") {
  TEST_CASE("closed-form Sigma = I quantities") {
    CHECK(mp_identity_m(4.0, 0.5) == doctest::Approx(-0.3048058983988962).epsilon(1e-14));
    CHECK(mp_identity_m_prime(4.0, 0.5) == doctest::Approx(0.10278624024743216).epsilon(1e-13));
  }

  TEST_CASE("inversion is exact on the deterministic resolvent") {
    for (double d : {0.25, 0.5, 0.8}) {
      const double lp = oracle::lambda_plus(d);
      for (double E = lp + 0.2; E < lp + 6; E += 0.7) {
        const double m = oracle::mp_m(E, d).real();
        for (double s = 0.05; s < 1 + std::sqrt(d); s += 0.05) {
          const double R = -1 / (E * (1 + m * s));
          CHECK(sigma_from_resolvent(m, E, R) == doctest::Approx(s).epsilon(1e-12));
        }
      }
    }
    CHECK(std::abs(sigma_from_resolvent(mp_identity_m(4.0, 0.5), 4.0, -0.4605822) - 1.5) < 1e-5);
  }

  TEST_CASE("spike estimate, its interval and alpha linearity") {
    const auto ens = spiked_sample(300, 1.5, 17);
    const auto v = DirectionVector::basis(300, 0);
    const auto a2 = estimate_spike_strength(ens, v, 4.0, 0.5);
    EstimatorOptions o3;
    o3.alpha = 3.0;
    const auto a3 = estimate_spike_strength(ens, v, 4.0, 0.5, o3);
    CHECK(a3.point == a2.point);
    CHECK(a3.halfwidth / a2.halfwidth == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(std::abs(a2.point - 1.5) < 2 * a2.halfwidth);
    CHECK(a2.confidence == doctest::Approx(0.9544997361036416).epsilon(1e-12));
    CHECK(a2.variance_mode == "formula");
    CHECK(error_kind([&] { estimate_spike_strength(ens, v, 3.0, 0.5); }) == ErrorKind::OutsideDomain);
    EstimatorOptions split;
    split.split_samples = 4;
    CHECK(error_kind([&] { estimate_spike_strength(ens, v, 4.0, 0.5, split); }) == ErrorKind::OutsideDomain);
    const auto s = estimate_spike_strength(ens, v, 7.0, 0.5, split);
    CHECK(s.variance_mode == "split-sample");
    CHECK(s.halfwidth > 0);
  }

  TEST_CASE("population eigenvalue estimate") {
    const Index n = 300;
    Eigen::VectorXd diag = Eigen::VectorXd::Ones(n);
    diag.tail(n / 2).setConstant(2.0);
    diag(0) = 0.75;
    const auto ens = sample_ensemble(PopulationModel::diagonal(diag), 2 * n, EntryDistribution::gaussian(), 23);
    const auto est = estimate_population_eigenvalue(ens, DirectionVector::basis(n, 0), 6.0);
    CHECK(std::abs(est.point - 0.75) < 2 * est.halfwidth);
    CHECK(error_kind([&] {
            estimate_population_eigenvalue(ens, DirectionVector::basis(n, 0), ens.eigenvalues()(0) + 0.05);
          }) == ErrorKind::OutsideDomain);
  }

  TEST_CASE("fourth-cumulant policies") {
    const auto ens = spiked_sample(50, 1.0, 4, EntryDistribution::rademacher());
    const auto v = DirectionVector::normalized(Eigen::VectorXd::LinSpaced(50, 1, 2));
    const double v4 = v.coordinates().array().pow(4).sum();
    CHECK(kappa_term(ens, v, {KappaPolicy::gaussian_zero, 0}) == 0.0);
    CHECK(kappa_term(ens, v, {KappaPolicy::user, 1.5}) == doctest::Approx(0.5 * v4));
    CHECK(kappa_term(ens, v, {KappaPolicy::pooled, 0}) == doctest::Approx(-2.0 / 3 * v4));
    CHECK(kappa_term(ens, v, {KappaPolicy::per_row, 0}) == doctest::Approx(-2.0 / 3 * v4));
    CHECK(kappa_term(ens, v, {KappaPolicy::per_row_max_positive, 0}) == 0.0);
    for (auto p : {KappaPolicy::gaussian_zero, KappaPolicy::pooled, KappaPolicy::per_row,
                   KappaPolicy::per_row_max_positive, KappaPolicy::user})
      CHECK(kappa_policy_from_string(to_string(p)) == p);
    CHECK(error_kind([] { kappa_policy_from_string("median"); }) == ErrorKind::InvalidArgument);
  }

  TEST_CASE("sphericity test") {
    const Index n = 200;
    const auto e1 = DirectionVector::basis(n, 0), e2 = DirectionVector::basis(n, 1);
    const auto null = sample_ensemble(PopulationModel::identity(n), 2 * n, EntryDistribution::gaussian(), 31);
    const SphericityVerdict v0 = sphericity_test(null.Y(), e1, e2);
    CHECK(v0.decision == Decision::accept);
    CHECK(v0.alpha == doctest::Approx(two_sided_quantile(0.05)));
    CHECK(v0.E == doctest::Approx(null.eigenvalues()(0) / v0.rescale_sigma_sq + 1.0));
    CHECK(v0.threshold == doctest::Approx(std::sqrt(2.0) * v0.alpha * std::sqrt(v0.gamma_sq)));

    // Global rescaling leaves every step after Step 1 unchanged.
    const SphericityVerdict scaled = sphericity_test(Eigen::MatrixXd(3.7 * null.Y()), e1, e2);
    CHECK(scaled.decision == v0.decision);
    CHECK(scaled.statistic == doctest::Approx(v0.statistic).epsilon(1e-10));
    CHECK(scaled.threshold == doctest::Approx(v0.threshold).epsilon(1e-10));

    const auto alt = sample_ensemble(PopulationModel::spiked(n, {1.0}, {e1}), 2 * n, EntryDistribution::gaussian(), 31);
    SphericityOptions fixed;
    fixed.E = 4.0;
    fixed.alpha = 2.0;
    const SphericityVerdict v1 = sphericity_test(alt, e1, e2, fixed);
    CHECK(v1.decision == Decision::reject);
    CHECK(v1.alpha == 2.0);
    CHECK(v1.statistic >= v1.threshold);

    fixed.E = 1.0;
    CHECK(error_kind([&] { sphericity_test(alt, e1, e2, fixed); }) == ErrorKind::OutsideDomain);
    CHECK(error_kind([&] { sphericity_test(Eigen::MatrixXd::Zero(n, 2 * n), e1, e2); }) == ErrorKind::DegenerateData);
  }
}
