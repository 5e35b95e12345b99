#include "vesd/estimators.hpp"

#include "vesd/errors.hpp"
#include "vesd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace vesd {

const char* to_string(KappaPolicy p) {
  switch (p) {
    case KappaPolicy::gaussian_zero: return "gaussian-zero";
    case KappaPolicy::pooled: return "pooled";
    case KappaPolicy::per_row: return "per-row";
    case KappaPolicy::per_row_max_positive: return "per-row-max-positive";
    case KappaPolicy::user: return "user";
  }
  return "?";
}

KappaPolicy kappa_policy_from_string(const std::string& s) {
  for (auto p : {KappaPolicy::gaussian_zero, KappaPolicy::pooled, KappaPolicy::per_row,
                 KappaPolicy::per_row_max_positive, KappaPolicy::user})
    if (s == to_string(p)) return p;
  fail(ErrorKind::InvalidArgument, "unknown kappa policy '" + s + "'");
}

double mp_identity_m(double E, double d) {
  const double lp = (1 + std::sqrt(d)) * (1 + std::sqrt(d));
  const double lm = (1 - std::sqrt(d)) * (1 - std::sqrt(d));
  require(E > lp, ErrorKind::OutsideDomain, "closed form needs E above lambda_+");
  return (-(E + 1 - d) + std::sqrt((E - lm) * (E - lp))) / (2 * E);
}

double mp_identity_m_prime(double E, double d) {
  const double m = mp_identity_m(E, d);
  // z(m) = -1/m + d/(1 + m)
  return 1.0 / (1.0 / (m * m) - d / ((1 + m) * (1 + m)));
}

namespace {

double fourth_power_sum(const DirectionVector& v) { return v.coordinates().array().pow(4).sum(); }

double row_kappa(const Eigen::MatrixXd& Y, Index k) {
  const double s2 = Y.row(k).squaredNorm();
  require(s2 > 0, ErrorKind::DegenerateData, "data row has zero energy");
  return static_cast<double>(Y.cols()) * Y.row(k).array().pow(4).sum() / (s2 * s2) - 3.0;
}

double max_positive(const FourthCumulantProfile& k) {
  return std::max(0.0, k.rows.size() ? k.rows.maxCoeff() : k.value);
}

}  // namespace

double kappa_term(const SampleEnsemble& ens, const DirectionVector& v, const KappaOptions& k) {
  switch (k.policy) {
    case KappaPolicy::gaussian_zero:
      return 0.0;
    case KappaPolicy::pooled:
      return kappa4_hat(ens, KappaMode::pooled).value / 3.0 * fourth_power_sum(v);
    case KappaPolicy::per_row: {
      double acc = 0.0;
      for (Index i = 0; i < v.size(); ++i) {
        const double c = v(i) * v(i);
        if (c != 0.0) acc += row_kappa(ens.Y(), i) * c * c;
      }
      return acc / 3.0;
    }
    case KappaPolicy::per_row_max_positive:
      return max_positive(kappa4_hat(ens, KappaMode::per_row)) / 3.0;
    case KappaPolicy::user:
      return k.user_value / 3.0 * fourth_power_sum(v);
  }
  return 0.0;
}

double sigma_from_resolvent(double m, double E, double R) { return -(1.0 / m) * (1.0 / (E * R) + 1.0); }

namespace {

double real_resolvent(const SampleEnsemble& ens, const DirectionVector& v, double E) {
  const double top = ens.eigenvalues()(0);
  if (!(E > top)) {
    std::ostringstream os;
    os << "E = " << E << " is not above the largest sample eigenvalue " << top;
    fail(ErrorKind::OutsideDomain, os.str());
  }
  const double R = resolvent_bilinear(ens, v, v, {E, 0.0}).real();
  if (std::abs(R) <= 1e-12) fail(ErrorKind::ResolventDegenerate, "R_vv(E) vanishes");
  return R;
}

void finish(EstimateWithInterval& out, const SampleEnsemble& ens, const EstimatorOptions& opts) {
  require(opts.alpha > 0, ErrorKind::InvalidArgument, "alpha must be positive");
  const double m = out.m, E = out.E, s = out.point;
  const double bracket = out.kappa_term + 2.0 * out.m_prime / (m * m);
  const double denom = E * std::pow(std::abs(1.0 + m * s), 2);
  out.gamma_sq = s * s * m * m / (denom * denom) * bracket;
  out.halfwidth = opts.alpha * std::abs(s) * std::sqrt(std::max(0.0, bracket)) /
                  std::sqrt(static_cast<double>(ens.N()));
  out.alpha = opts.alpha;
  out.confidence = 2.0 * normal_cdf(opts.alpha) - 1.0;
}

// Column blocks of the data, each renormalized to its own sample size.
std::vector<SampleEnsemble> split_blocks(const SampleEnsemble& ens, int p) {
  require(p >= 2 && ens.N() / p >= 1, ErrorKind::InvalidArgument, "split_samples must be >= 2 and <= N");
  const Index width = ens.N() / p;
  std::vector<SampleEnsemble> out;
  for (int k = 0; k < p; ++k)
    out.push_back(SampleEnsemble::from_data(
        ens.Y().middleCols(k * width, width) * std::sqrt(static_cast<double>(ens.N()) / width),
        ens.seed()));
  return out;
}

// Conservative interval from the spread of block estimates: the blocks see
// aspect ratio p d, whose variance dominates the full sample's.
void split_interval(EstimateWithInterval& out, const std::vector<double>& blocks,
                    const EstimatorOptions& opts) {
  const MomentSummary s = summarize(blocks);
  out.halfwidth = opts.alpha * std::sqrt(s.variance / static_cast<double>(blocks.size()));
  out.gamma_sq = s.variance;
  out.variance_mode = "split-sample";
}

}  // namespace

EstimateWithInterval estimate_spike_strength(const SampleEnsemble& ens, const DirectionVector& v,
                                             double E, double d, const EstimatorOptions& opts) {
  require(d > 0, ErrorKind::InvalidArgument, "aspect ratio must be positive");
  const double lp = (1 + std::sqrt(d)) * (1 + std::sqrt(d));
  if (!(E > lp + opts.margin)) {
    std::ostringstream os;
    os << "E = " << E << " is within the margin " << opts.margin << " of lambda_+ = " << lp;
    fail(ErrorKind::OutsideDomain, os.str());
  }
  EstimateWithInterval out;
  out.E = E;
  out.resolvent = real_resolvent(ens, v, E);
  out.m = mp_identity_m(E, d);
  out.m_prime = mp_identity_m_prime(E, d);
  out.point = sigma_from_resolvent(out.m, E, out.resolvent);
  out.kappa_term = kappa_term(ens, v, opts.kappa);
  out.kappa_policy = to_string(opts.kappa.policy);
  out.variance_mode = "formula";
  finish(out, ens, opts);
  if (opts.split_samples > 0) {
    const double db = d * opts.split_samples;
    const double lpb = (1 + std::sqrt(db)) * (1 + std::sqrt(db));
    require(E > lpb + opts.margin, ErrorKind::OutsideDomain,
            "split-sample blocks need E above the block lambda_+");
    std::vector<double> est;
    for (const auto& b : split_blocks(ens, opts.split_samples))
      est.push_back(sigma_from_resolvent(mp_identity_m(E, db), E, real_resolvent(b, v, E)));
    split_interval(out, est, opts);
  }
  return out;
}

EstimateWithInterval estimate_population_eigenvalue(const SampleEnsemble& ens,
                                                    const DirectionVector& v, double E,
                                                    const EstimatorOptions& opts) {
  const double top = ens.eigenvalues()(0);
  if (!(E > top + opts.margin)) {
    std::ostringstream os;
    os << "E = " << E << " is within the margin " << opts.margin << " of lambda_1 = " << top;
    fail(ErrorKind::OutsideDomain, os.str());
  }
  EstimateWithInterval out;
  out.E = E;
  out.resolvent = real_resolvent(ens, v, E);
  out.m = m2c_hat(ens, {E, 0.0}).real();
  out.m_prime = m2c_hat_derivative(ens, {E, 0.0}).real();
  out.point = sigma_from_resolvent(out.m, E, out.resolvent);
  out.kappa_term = kappa_term(ens, v, opts.kappa);
  out.kappa_policy = to_string(opts.kappa.policy);
  out.variance_mode = "formula";
  finish(out, ens, opts);
  if (opts.split_samples > 0) {
    std::vector<double> est;
    for (const auto& b : split_blocks(ens, opts.split_samples)) {
      require(E > b.eigenvalues()(0), ErrorKind::OutsideDomain,
              "split-sample blocks need E above their largest eigenvalue");
      est.push_back(sigma_from_resolvent(m2c_hat(b, {E, 0.0}).real(), E, real_resolvent(b, v, E)));
    }
    split_interval(out, est, opts);
  }
  return out;
}

SphericityVerdict sphericity_test(const SampleEnsemble& ens, const DirectionVector& u,
                                  const DirectionVector& v, const SphericityOptions& opts) {
  require(u.size() == ens.n() && v.size() == ens.n(), ErrorKind::InvalidArgument,
          "test vectors must match the data dimension");
  const double n = static_cast<double>(ens.n()), N = static_cast<double>(ens.N());
  SphericityVerdict out;

  // Step 1
  const double sigma_sq = ens.Y().squaredNorm() / n;
  if (!(sigma_sq > 0) || !std::isfinite(sigma_sq)) fail(ErrorKind::DegenerateData, "data has zero energy");
  out.rescale_sigma_sq = sigma_sq;
  const Eigen::VectorXd lambda = ens.eigenvalues() / sigma_sq;
  const Index r = std::min(ens.n(), ens.N());
  if (!(lambda(r - 1) > 1e-12 * lambda(0))) fail(ErrorKind::DegenerateData, "data matrix is rank deficient");

  // Step 2
  out.E = opts.E ? *opts.E : lambda(0) + opts.E_margin;
  if (!(out.E > lambda(0))) {
    std::ostringstream os;
    os << "E = " << out.E << " is not above lambda_1 = " << lambda(0) << " of the rescaled data";
    fail(ErrorKind::OutsideDomain, os.str());
  }
  const double E = out.E;

  // Step 3
  const Eigen::VectorXd mu = ens.q2_eigenvalues() / sigma_sq;
  double m = 0.0, mp = 0.0;
  for (Index j = 0; j < mu.size(); ++j) {
    const double t = 1.0 / (mu(j) - E);
    m += t;
    mp += t * t;
  }
  m /= N;
  mp /= N;
  out.m = m;
  out.m_prime = mp;
  switch (opts.kappa.policy) {
    case KappaPolicy::gaussian_zero: out.kappa_max = 0.0; break;
    case KappaPolicy::user: out.kappa_max = std::max(0.0, opts.kappa.user_value); break;
    case KappaPolicy::pooled: out.kappa_max = max_positive(kappa4_hat(ens, KappaMode::pooled)); break;
    case KappaPolicy::per_row:
    case KappaPolicy::per_row_max_positive:
      out.kappa_max = max_positive(kappa4_hat(ens, KappaMode::per_row));
      break;
  }
  out.gamma_sq = m * m / (E * E * std::pow(1.0 + m, 4)) * (out.kappa_max / 3.0 + 2.0 * mp / (m * m));

  // Step 4
  const Eigen::VectorXd pu = ens.projections(u);
  const Eigen::VectorXd pv = ens.projections(v);
  out.R_uu = resolvent_from_projections(lambda, pu, pu, {E, 0.0}).real();
  out.R_vv = resolvent_from_projections(lambda, pv, pv, {E, 0.0}).real();
  out.statistic = std::sqrt(N) * std::abs(out.R_uu - out.R_vv);
  out.alpha = opts.alpha ? *opts.alpha : two_sided_quantile(opts.omega);
  out.threshold = std::numbers::sqrt2 * out.alpha * std::sqrt(out.gamma_sq);
  out.decision = out.statistic >= out.threshold ? Decision::reject : Decision::accept;
  return out;
}

SphericityVerdict sphericity_test(const Eigen::MatrixXd& raw_data, const DirectionVector& u,
                                  const DirectionVector& v, const SphericityOptions& opts) {
  require(raw_data.size() > 0, ErrorKind::DegenerateData, "empty data matrix");
  require(raw_data.squaredNorm() > 0, ErrorKind::DegenerateData, "data has zero energy");
  return sphericity_test(SampleEnsemble::from_data(raw_data), u, v, opts);
}

}  // namespace vesd
