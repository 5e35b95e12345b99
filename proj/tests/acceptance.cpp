// Acceptance criteria 1-10. Each criterion prints exactly one PASS/FAIL line;
// the exit status is nonzero when any selected criterion fails.

#include "oracle.hpp"
#include "vesd/clt_theory.hpp"
#include "vesd/estimators.hpp"
#include "vesd/experiments.hpp"
#include "vesd/mp_law.hpp"
#include "vesd/reproduce.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

using namespace vesd;
using oracle::cplx;

namespace {

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail << " [failed: " << what << "]";
    }
  }
};

struct Context {
  std::uint64_t seed = 1;
  int workers = 0;
};

// Pinned tolerances.
constexpr double kLawTol = 1e-10;
constexpr double kEdgeTol = 1e-8;
constexpr double kKernelTol = 1e-8;
constexpr double kSimpleRelTol = 1e-4;
constexpr double kPositivityFloor = -1e-12;
constexpr double kMeanSe = 3.0;
constexpr double kVarLo = 0.85, kVarHi = 1.15;
constexpr double kNormalityP = 0.01;
constexpr double kLocalLo = 0.8, kLocalHi = 1.2;
constexpr double kCoverage = 0.90;
constexpr double kPlugInScale = 10.0;
constexpr double kHalvingSlack = 1.5;

DirectionVector random_unit(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = g(rng);
  return DirectionVector::normalized(v);
}

void criterion1(Outcome& o, const Context&) {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> U(0, 1);
  double worst = 0, worst_edge = 0;
  int points = 0;
  for (double d : {0.3, 0.5, 2.0}) {
    const PopulationSpectrum pop = PopulationSpectrum::identity(200, d);
    const double lm = oracle::lambda_minus(d), lp = oracle::lambda_plus(d);
    for (int k = 0; k < 100; ++k) {
      cplx z;
      if (k < 40)
        z = cplx(-1 + 7 * U(rng), std::pow(10.0, -3 + 3 * U(rng)));
      else if (k < 70)
        z = cplx(lm + (lp - lm) * (0.01 + 0.98 * U(rng)), 0.0);
      else
        z = cplx(k % 2 ? lp + 0.05 + 4 * U(rng) : lm * (0.1 + 0.8 * U(rng)), 0.0);
      const cplx m = solve_m2c({z.real(), z.imag()}, pop).m;
      worst = std::max(worst, std::abs(m - oracle::mp_m(z, d)));
      ++points;
    }
    const auto edges = support_edges(pop);
    o.require(edges.size() == 2, "two edges");
    if (edges.size() == 2) {
      worst_edge = std::max(worst_edge, std::abs(edges[0].value - lp));
      worst_edge = std::max(worst_edge, std::abs(edges[1].value - lm));
    }
  }
  o.detail << points << " points, max |m - closed form| = " << worst << ", max edge error = " << worst_edge;
  o.require(worst <= kLawTol, "law within 1e-10");
  o.require(worst_edge <= kEdgeTol, "edges within 1e-8");
}

void criterion2(Outcome& o, const Context&) {
  const double d = 0.5;
  const Population pop(PopulationCovariance::identity(60), d);
  const auto kappa0 = FourthCumulantProfile::constant(0.0);
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> U(0, 1);
  const auto v = random_unit(60, rng);

  double worst_a = 0;
  for (int k = 0; k < 20; ++k) {
    const cplx z1(-0.5 + 4 * U(rng), 0.1 + 2 * U(rng));
    const cplx z2(-0.5 + 4 * U(rng), (k % 2 ? -1 : 1) * (0.1 + 2 * U(rng)));
    const cplx m1 = oracle::mp_m(z1, d);
    const cplx m2 = z2.imag() < 0 ? std::conj(oracle::mp_m(std::conj(z2), d)) : oracle::mp_m(z2, d);
    const cplx expect = 2.0 * std::pow(z1 * m1 - z2 * m2, 2) / (d * d * z1 * z2 * (z1 - z2) * (m1 - m2));
    ResolventCovarianceQuery q;
    q.z_i = z1;
    q.z_j = z2;
    worst_a = std::max(worst_a, std::abs(resolvent_covariance(q, v, v, pop, kappa0) - expect));
  }

  double worst_b = 0;
  const double lm = oracle::lambda_minus(d), lp = oracle::lambda_plus(d);
  for (int k = 0; k < 20; ++k) {
    const double x1 = lm + (lp - lm) * (0.02 + 0.96 * U(rng));
    const double x2 = lm + (lp - lm) * (0.02 + 0.96 * U(rng));
    const double expect = -2 / (d * d * d) * oracle::mp_m(cplx(x1, 0.0), d).imag() * oracle::mp_m(cplx(x2, 0.0), d).imag();
    worst_b = std::max(worst_b, std::abs(beta_kernel(x1, x2, v, v, pop) / (x1 - x2) - expect));
  }

  auto simple = [&](const TestFunction& fi, const TestFunction& fj) {
    auto I = [&](const std::function<double(double)>& g) { return oracle::integrate(g, lm, lp); };
    const double both = I([&](double x) { return fi(x) * fj(x) * oracle::mp_rho_c(x, d); });
    const double a = I([&](double x) { return fi(x) * oracle::mp_rho_c(x, d); });
    const double b = I([&](double x) { return fj(x) * oracle::mp_rho_c(x, d); });
    return 2 / d * (both - a * b);
  };
  const TestFunction f1 = TestFunction::bump(1.0, 0.8), f2 = TestFunction::bump(2.5, 0.8);
  double worst_c = 0;
  for (const auto& [fi, fj] : {std::pair{f1, f1}, std::pair{f1, f2}, std::pair{f2, f2}}) {
    const double expect = simple(fi, fj);
    const double got = linear_stat_covariance({}, fi, fj, v, v, pop, kappa0).value;
    worst_c = std::max(worst_c, std::abs(got - expect) / std::abs(expect));
  }
  o.detail << "(a) max abs error " << worst_a << ", (b) max abs error " << worst_b << ", (c) max rel error " << worst_c;
  o.require(worst_a <= kKernelTol, "(a) within 1e-8");
  o.require(worst_b <= kKernelTol, "(b) within 1e-8");
  o.require(worst_c <= kSimpleRelTol, "(c) within 1e-4 relative");
}

void criterion3(Outcome& o, const Context&) {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> U(0, 1);
  double lowest = std::numeric_limits<double>::infinity();
  int draws = 0, inner = 0;
  while (draws < 1000) {
    const Index n = 2 + static_cast<Index>(U(rng) * 40);
    Eigen::VectorXd s(n);
    for (Index i = 0; i < n; ++i) s(i) = 0.2 + 4 * U(rng) * U(rng);
    const double d = U(rng) < 0.5 ? 0.1 + 0.8 * U(rng) : 1.2 + 2 * U(rng);
    const Population pop(PopulationCovariance::diagonal(s), d);
    // S_out: above lambda_+, below lambda_- or inside a gap between bulks.
    std::vector<std::pair<double, double>> gaps;
    const auto edges = support_edges(pop.spectrum);
    gaps.push_back({edges.front().value + 0.05, edges.front().value + 4});
    if (edges.back().value > 0.2) gaps.push_back({0.05, edges.back().value - 0.05});
    for (std::size_t k = 1; k + 1 < edges.size(); k += 2)
      if (edges[k].value - edges[k + 1].value > 0.2) gaps.push_back({edges[k + 1].value + 0.05, edges[k].value - 0.05});
    const auto& [lo, hi] = gaps[static_cast<std::size_t>(U(rng) * gaps.size())];
    const double E = lo + (hi - lo) * U(rng);
    if (E < edges.back().value) ++inner;
    const double kappa = -2 + 8 * U(rng);
    const double value = variance_positivity(E, random_unit(n, rng), pop, FourthCumulantProfile::constant(kappa));
    lowest = std::min(lowest, value);
    ++draws;
  }
  o.detail << draws << " draws (" << inner << " below lambda_-), min alpha_hat + beta_hat = " << lowest;
  o.require(lowest >= kPositivityFloor, "variance >= -1e-12");
}

// Outside-spectrum resolvent CLT at Sigma = I + 0.5 e1 e1^T.
void outside_clt(Outcome& o, const Context& ctx, bool rademacher) {
  const Index n = 500, N = 1000;
  const double E = 4.0, d = 0.5, spike = 1.5;
  CltCheckConfig cfg;
  cfg.model = PopulationModel::spiked(n, {spike - 1}, {DirectionVector::basis(n, 0)});
  cfg.dist = rademacher ? EntryDistribution::rademacher() : EntryDistribution::gaussian();
  cfg.N = N;
  cfg.mode = CovarianceMode::outside;
  cfg.E = E;
  cfg.vectors = {DirectionVector::basis(n, 0), DirectionVector::basis(n, 1)};
  cfg.run.trials = 2000;
  cfg.run.master_seed = ctx.seed;
  cfg.run.workers = ctx.workers;
  const ExperimentReport rep = run_clt_check(cfg);

  // Independent prediction from the scalar equation of this spectrum.
  const std::vector<double> s{spike, 1.0}, w{1.0 / n, (n - 1.0) / n};
  const double m = oracle::outside_m(E, s, w, d), mp = oracle::outside_m_prime(m, s, w, d);
  const double kappa = rademacher ? -2.0 : 0.0;
  const double sig[2] = {spike, 1.0};
  for (int k = 0; k < 2; ++k) {
    const double g = sig[k] / std::pow(1 + m * sig[k], 2);
    const double beta = 2 * mp / (E * E) * g * g;
    const double alpha = kappa / 3 * m * m / (E * E) * g * g;
    const double predicted = beta + alpha;
    const StatisticSummary& st = rep.statistics[k];
    const double ratio = st.empirical.variance / predicted;
    const double pred_err = std::abs(st.predicted_variance - predicted) / predicted;
    o.detail << (k ? "; " : "") << (k ? "e2" : "e1") << ": var " << std::setprecision(5) << st.empirical.variance
             << " vs " << predicted;
    if (rademacher) {
      // Coefficient of kappa m^2 g^2 / E^2 implied by the data (1/3 in the prediction).
      const double c = (st.empirical.variance - beta) / (kappa * m * m / (E * E) * g * g);
      o.detail << " (alpha_hat " << alpha << ", fitted kappa coefficient " << c << ")";
    }
    o.detail << ", ratio " << ratio << ", mean/SE " << st.empirical.mean / st.empirical.std_error << ", KS p "
             << st.normality->p_value;
    o.require(pred_err < 1e-8, "library prediction matches the scalar oracle");
    o.require(std::abs(st.empirical.mean) <= kMeanSe * st.empirical.std_error, "|mean| <= 3 SE");
    o.require(ratio >= kVarLo && ratio <= kVarHi, "variance ratio in [0.85, 1.15]");
    if (rademacher) o.require(std::abs(alpha) > 1e-3, "fourth-moment shift is nonzero");
    else o.require(st.normality && st.normality->p_value > kNormalityP, "KS p > 0.01");
    if (!rademacher && k == 1) {
      // Reference value at Sigma = I.
      const double m0 = oracle::mp_m(E, d).real(), mp0 = oracle::mp_m_prime(E, d).real();
      o.detail << ", Sigma = I reference " << 2 * mp0 / (E * E * std::pow(1 + m0, 4));
    }
  }
}

void criterion4(Outcome& o, const Context& ctx) { outside_clt(o, ctx, false); }
void criterion5(Outcome& o, const Context& ctx) { outside_clt(o, ctx, true); }

void criterion6(Outcome& o, const Context& ctx) {
  const Index n = 1000, N = 2000;
  const double E = 1.0, d = 0.5;
  LinearStatConfig cfg;
  cfg.model = PopulationModel::identity(n);
  cfg.N = N;
  cfg.mode = CovarianceMode::local;
  cfg.E = E;
  cfg.eta = 1 / std::sqrt(static_cast<double>(N));
  cfg.functions = {TestFunction::bump(0.0, 1.0)};
  cfg.vectors = {DirectionVector::basis(n, 0)};
  cfg.run.trials = 1000;
  cfg.run.master_seed = ctx.seed;
  cfg.run.workers = ctx.workers;
  const ExperimentReport rep = run_linear_stat_check(cfg);
  const StatisticSummary& st = rep.statistics.at(0);

  const cplx m = oracle::mp_m(cplx(E, 0.0), d);
  const double f2 = oracle::integrate([](double x) { return std::pow(oracle::bump(x, 0, 1), 2); }, -1, 1);
  const double predicted = 2 * (m.imag() / M_PI) / (E * E) * std::pow(1 / std::norm(1.0 + m), 2) * f2;
  const double ratio = st.empirical.variance / predicted;
  o.detail << "variance " << st.empirical.variance << " vs " << predicted << ", ratio " << ratio;
  o.require(std::abs(st.predicted_variance - predicted) / predicted < 1e-8, "library prediction matches oracle");
  o.require(ratio >= kLocalLo && ratio <= kLocalHi, "variance ratio in [0.8, 1.2]");
}

void criterion7(Outcome& o, const Context& ctx) {
  const Index n = 500;
  CoverageConfig cfg;
  cfg.estimator = EstimatorKind::spike;
  cfg.model = [n](double s) { return figure1_model(n, s); };
  cfg.N = 2 * n;
  cfg.sigmas = {1.1, 1.3, 1.5};
  cfg.v = DirectionVector::basis(n, 0);
  cfg.E = 4.0;
  cfg.estimator_options.alpha = 2.0;
  cfg.run.trials = 500;
  cfg.run.master_seed = ctx.seed;
  cfg.run.workers = ctx.workers;
  const ExperimentReport rep = run_coverage(cfg);
  for (const auto& c : rep.cells) {
    o.detail << "sigma " << c.params.at("sigma") << ": " << c.frequency << "  ";
    o.require(c.frequency >= kCoverage, "coverage >= 0.90");
  }
}

void criterion8(Outcome& o, const Context& ctx) {
  ReproduceOptions opts;
  opts.seed = ctx.seed;
  opts.workers = ctx.workers;
  opts.write_files = false;
  const ReproduceResult r = reproduce("table1", opts);
  for (const auto& b : r.bands) {
    o.detail << b.name << " = " << b.value << " (" << b.band << ")  ";
    o.require(b.passed, b.name);
  }
}

void criterion9(Outcome& o, const Context& ctx) {
  const double d = 0.5, E = 4.0;
  const double exact = oracle::mp_m(E, d).real();
  std::vector<double> med;
  for (Index N : {500, 1000, 2000}) {
    const Index n = static_cast<Index>(d * N);
    std::vector<double> err(50);
    parallel_for(50, resolve_workers(ctx.workers), [&](int t) {
      const auto ens = sample_ensemble(PopulationModel::identity(n), N, EntryDistribution::gaussian(),
                                       trial_seed(ctx.seed + 9, static_cast<std::uint64_t>(N * 1000 + t)));
      err[static_cast<std::size_t>(t)] = std::abs(m2c_hat(ens, {E, 0.0}).real() - exact);
    });
    med.push_back(median(err));
    o.detail << "N=" << N << ": median " << med.back() << " (N*err " << med.back() * N << ")  ";
    o.require(med.back() <= kPlugInScale / N, "median error <= 10/N");
  }
  for (std::size_t k = 1; k < med.size(); ++k) {
    const double ratio = med[k - 1] / med[k];
    o.detail << "ratio " << ratio << "  ";
    o.require(ratio >= 2 / kHalvingSlack && ratio <= 2 * kHalvingSlack, "error halves per doubling");
  }
}

// Randomized property corpus.
void criterion10(Outcome& o, const Context& ctx) {
  std::mt19937_64 rng(ctx.seed + 1010);
  std::uniform_real_distribution<double> U(0, 1);
  int checks = 0, failures = 0;
  auto expect = [&](bool ok) {
    ++checks;
    if (!ok) ++failures;
  };
  for (int rep = 0; rep < 40; ++rep) {
    const Index n = 10 + static_cast<Index>(40 * U(rng));
    const Index N = n + 5 + static_cast<Index>(60 * U(rng));
    Eigen::VectorXd s(n);
    for (Index i = 0; i < n; ++i) s(i) = 0.3 + 2.5 * U(rng);
    const auto model = PopulationModel::diagonal(s);
    const auto dist = rep % 2 ? EntryDistribution::rademacher() : EntryDistribution::gaussian();
    const std::uint64_t seed = rng();
    const auto ens = sample_ensemble(model, N, dist, seed);
    const auto again = sample_ensemble(model, N, dist, seed);
    expect(ens.Y() == again.Y() && ens.eigenvalues() == again.eigenvalues());

    const Eigen::MatrixXd Q = ens.Y() * ens.Y().transpose();
    const auto v = random_unit(n, rng), u = random_unit(n, rng);
    const cplx z(4 * U(rng), 0.01 + U(rng));
    // Ward identity: ||R v||^2 = Im <v, R v> / eta, with R from an explicit inverse.
    const Eigen::MatrixXcd R = (Q.cast<cplx>() - z * Eigen::MatrixXcd::Identity(n, n)).inverse();
    const Eigen::VectorXcd Rv = R * v.coordinates().cast<cplx>();
    const cplx rvv = resolvent_bilinear(ens, v, v, z);
    expect(std::abs(Rv.squaredNorm() - rvv.imag() / z.imag()) <= 1e-9 * Rv.squaredNorm());
    expect(std::abs(v.coordinates().cast<cplx>().dot(Rv) - rvv) <= 1e-9 * std::abs(rvv));
    // Unit mass of the VESD.
    expect(std::abs(vesd_eval(ens, v, ens.eigenvalues()(0) + 1) - 1) <= 1e-12);
    expect(vesd_eval(ens, v, -1e-9) == 0.0);

    const Population pop(PopulationCovariance::diagonal(s), static_cast<double>(n) / N);
    const auto ss = support_structure(pop.spectrum, N, false);
    const double lo = ss.lambda_minus(), hi = ss.lambda_plus();
    const double x1 = lo + (hi - lo) * U(rng), x2 = lo + (hi - lo) * U(rng);
    const auto kappa = FourthCumulantProfile::constant(-2 + 6 * U(rng));
    const double a12 = alpha_kernel(x1, x2, u, v, pop, kappa), a21 = alpha_kernel(x2, x1, v, u, pop, kappa);
    expect(std::abs(a12 - a21) <= 1e-12 * std::max(1.0, std::abs(a12)));
    const double b12 = beta_kernel(x1, x2, u, v, pop), b21 = beta_kernel(x2, x1, v, u, pop);
    expect(std::abs(b12 + b21) <= 1e-12 * std::max(1.0, std::abs(b12)));
    expect(beta_kernel(x1, x1, v, v, pop) == 0.0);
    const cplx w1(x1, 0.2 + U(rng)), w2(x2 + 1, -0.3 - U(rng));
    const cplx ah = alpha_hat(w1, w2, u, v, pop, kappa), bh = beta_hat(w1, w2, u, v, pop);
    expect(std::abs(ah - alpha_hat(w2, w1, v, u, pop, kappa)) <= 1e-12 * std::max(1.0, std::abs(ah)));
    expect(std::abs(bh - beta_hat(w2, w1, v, u, pop)) <= 1e-12 * std::max(1.0, std::abs(bh)));
    expect(std::abs(std::conj(bh) - beta_hat(std::conj(w1), std::conj(w2), u, v, pop)) <= 1e-12 * std::max(1.0, std::abs(bh)));
  }
  // Reports are independent of scheduling.
  SphericityConfig cfg;
  cfg.n = 40;
  cfg.N = 80;
  cfg.cells = {{0.3, 1.0}};
  cfg.strategies = standard_strategies(40);
  cfg.test.E = 4.0;
  cfg.run.trials = 12;
  cfg.run.master_seed = ctx.seed;
  cfg.run.workers = 1;
  const auto one = to_json(run_sphericity_frequencies(cfg), false);
  cfg.run.workers = 4;
  expect(one == to_json(run_sphericity_frequencies(cfg), false));

  o.detail << checks << " checks, " << failures << " failures";
  o.require(failures == 0, "zero failures");
}

struct Criterion {
  const char* title;
  void (*run)(Outcome&, const Context&);
};

const Criterion kCriteria[] = {
    {"closed-form law at Sigma = I", criterion1},
    {"kernel reductions at Sigma = I", criterion2},
    {"variance positivity", criterion3},
    {"outside CLT, Gaussian", criterion4},
    {"fourth-moment sensitivity, Rademacher", criterion5},
    {"local linear statistic variance", criterion6},
    {"spike interval coverage", criterion7},
    {"sphericity table 1 bands", criterion8},
    {"plug-in Stieltjes estimate accuracy", criterion9},
    {"property corpus", criterion10},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> which;
  Context ctx;
  app.add_option("criteria", which, "Criteria to run (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--seed", ctx.seed, "Master seed");
  app.add_option("--workers", ctx.workers, "Worker threads");
  CLI11_PARSE(app, argc, argv);
  if (which.empty())
    for (int k = 1; k <= 10; ++k) which.push_back(k);

  bool all = true;
  for (int k : which) {
    const auto& c = kCriteria[k - 1];
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(o, ctx);
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.passed ? "PASS" : "FAIL") << " criterion " << k << " (" << c.title << "): " << o.detail.str()
              << " [" << std::fixed << std::setprecision(1) << secs << " s]" << std::defaultfloat << std::endl;
    all = all && o.passed;
  }
  return all ? 0 : 1;
}
