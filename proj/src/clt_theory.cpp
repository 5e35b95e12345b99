#include "vesd/clt_theory.hpp"

#include "internal.hpp"
#include "vesd/errors.hpp"
#include "vesd/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace vesd {

namespace detail {

AtomContraction::AtomContraction(const Population& pop, const Eigen::VectorXd& v1,
                                 const Eigen::VectorXd& v2)
    : s_(pop.spectrum.atoms()), c_(Eigen::ArrayXd::Zero(pop.spectrum.atoms().size())) {
  const auto& cov = pop.covariance;
  const Eigen::VectorXd a = cov.to_eigenbasis(v1);
  const Eigen::VectorXd b = v1.data() == v2.data() ? a : cov.to_eigenbasis(v2);
  const std::vector<Index> idx = cov.atom_index();
  for (Index i = 0; i < a.size(); ++i) {
    const Index k = idx[static_cast<std::size_t>(i)];
    if (k >= 0) c_(k) += a(i) * b(i);
  }
}

cplx AtomContraction::resolvent_pair(cplx m1, cplx m2) const {
  if (m2 == std::conj(m1)) {
    double re = 0.0;
    for (Index k = 0; k < s_.size(); ++k) re += c_(k) * s_(k) / std::norm(1.0 + m1 * s_(k));
    return re;
  }
  cplx acc = 0.0;
  for (Index k = 0; k < s_.size(); ++k) acc += c_(k) * s_(k) / ((1.0 + m1 * s_(k)) * (1.0 + m2 * s_(k)));
  return acc;
}

RowFactor::RowFactor(const Population& pop, const Eigen::VectorXd& v)
    : diagonal_(pop.covariance.is_diagonal()), sigma_(pop.covariance.eigenvalues().array()),
      v_(v.array()), atoms_(pop.spectrum.atoms()) {
  if (diagonal_) return;
  const Eigen::VectorXd b = pop.covariance.to_eigenbasis(v);
  const Eigen::MatrixXd& U = *pop.covariance.basis();
  const std::vector<Index> idx = pop.covariance.atom_index();
  projections_ = Eigen::MatrixXd::Zero(v.size(), atoms_.size());
  for (Index i = 0; i < b.size(); ++i) {
    const Index k = idx[static_cast<std::size_t>(i)];
    if (k >= 0) projections_.col(k) += b(i) * U.col(i);
  }
}

Eigen::VectorXcd RowFactor::operator()(cplx m) const {
  if (diagonal_) {
    Eigen::VectorXcd out(sigma_.size());
    for (Index i = 0; i < sigma_.size(); ++i) out(i) = std::sqrt(sigma_(i)) * v_(i) / (1.0 + m * sigma_(i));
    return out;
  }
  Eigen::VectorXcd h(atoms_.size());
  for (Index k = 0; k < atoms_.size(); ++k) h(k) = std::sqrt(atoms_(k)) / (1.0 + m * atoms_(k));
  return projections_.cast<cplx>() * h;
}

BoundaryTable::BoundaryTable(const PopulationSpectrum& pop, const SolverOptions& opts, int nodes)
    : pop_(pop), opts_(opts) {
  const std::vector<CriticalPoint> crit = support_edges(pop);
  for (const auto& c : crit) edges_.push_back(c.value);
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < crit.size(); k += 2) {
    Bulk b;
    b.upper = crit[k].value;
    b.lower = crit[k + 1].value;
    const double h = 0.5 * (b.upper - b.lower);
    cplx guess;
    for (int j = 0; j <= nodes; ++j) {
      const double th = 0.5 * std::numbers::pi * (1.0 - std::cos(std::numbers::pi * j / nodes));
      b.theta.push_back(th);
      double w = (j % 2 == 0) ? 1.0 : -1.0;
      if (j == 0 || j == nodes) w *= 0.5;
      b.weights.push_back(w);
      cplx m;
      if (j == 0) {
        m = crit[k + 1].m;
      } else if (j == nodes) {
        m = crit[k].m;
      } else {
        const double x = b.lower + h * (1.0 - std::cos(th));
        std::optional<cplx> polished;
        if (j > 1) polished = boundary_m2c_from(x, guess, pop, opts);
        m = (polished && polished->imag() > 0) ? *polished : solve_m2c({x, 0.0}, pop, opts).m;
      }
      b.m.push_back(m);
      guess = m;
    }
    bulks_.push_back(std::move(b));
  }
  // Check the interpolant at midpoints; skip polishing when it is exact.
  for (const auto& b : bulks_) {
    for (std::size_t j = 0; j + 1 < b.theta.size(); j += 4) {
      const double th = 0.5 * (b.theta[j] + b.theta[j + 1]);
      const double x = b.lower + 0.5 * (b.upper - b.lower) * (1.0 - std::cos(th));
      if (x < opts.omega) continue;
      const cplx exact = solve_m2c({x, 0.0}, pop, opts).m;
      worst = std::max(worst, std::abs(interpolate(b, x) - exact) / std::max(1.0, std::abs(exact)));
    }
  }
  polish_ = worst > 1e-12;
}

bool BoundaryTable::inside(double x) const {
  for (const auto& b : bulks_)
    if (x >= b.lower && x <= b.upper) return true;
  return false;
}

cplx BoundaryTable::interpolate(const Bulk& b, double x) const {
  const double h = 0.5 * (b.upper - b.lower);
  const double c = std::clamp(1.0 - (x - b.lower) / h, -1.0, 1.0);
  const double th = std::acos(c);
  cplx num = 0.0;
  double den = 0.0;
  for (std::size_t j = 0; j < b.theta.size(); ++j) {
    const double diff = th - b.theta[j];
    if (diff == 0.0) return b.m[j];
    const double t = b.weights[j] / diff;
    num += t * b.m[j];
    den += t;
  }
  return num / den;
}

cplx BoundaryTable::operator()(double x) const {
  for (const auto& b : bulks_) {
    if (x < b.lower || x > b.upper) continue;
    const cplx guess = interpolate(b, x);
    if (!polish_) return guess.imag() < 0 ? cplx(guess.real(), 0.0) : guess;
    if (auto m = boundary_m2c_from(x, guess, pop_, opts_)) {
      if (std::abs(*m - guess) < 1e-3 * std::max(1.0, std::abs(guess))) return *m;
    }
    return solve_m2c({x, 0.0}, pop_, opts_).m;
  }
  return solve_m2c({x, 0.0}, pop_, opts_).m;
}

double BoundaryTable::density(double x) const {
  if (!inside(x)) return 0.0;
  return std::max(0.0, (*this)(x).imag()) / std::numbers::pi;
}

quad::Rule support_rule(const std::vector<double>& edges, double lo, double hi, int panels_per_bulk) {
  quad::Rule out;
  for (std::size_t k = 0; k + 1 < edges.size(); k += 2) {
    const double upper = edges[k], lower = edges[k + 1];
    const double a = std::max(lower, lo), b = std::min(upper, hi);
    if (!(b > a)) continue;
    const double h = 0.5 * (upper - lower);
    const double t0 = std::acos(std::clamp(1.0 - (a - lower) / h, -1.0, 1.0));
    const double t1 = std::acos(std::clamp(1.0 - (b - lower) / h, -1.0, 1.0));
    const int panels = std::max(8, static_cast<int>(std::ceil(panels_per_bulk * (t1 - t0) / std::numbers::pi)));
    std::vector<double> bp(static_cast<std::size_t>(panels) + 1);
    for (int i = 0; i <= panels; ++i) bp[static_cast<std::size_t>(i)] = t0 + (t1 - t0) * i / panels;
    quad::Rule r = quad::composite_gauss(bp);
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double th = r.x[i];
      r.w[i] *= h * std::sin(th);
      r.x[i] = lower + h * (1.0 - std::cos(th));
    }
    out.append(r);
  }
  return out;
}

}  // namespace detail

FourthCumulantProfile FourthCumulantProfile::constant(double kappa) {
  FourthCumulantProfile p;
  p.mode = Mode::constant;
  p.value = kappa;
  return p;
}

FourthCumulantProfile FourthCumulantProfile::per_row(Eigen::VectorXd kappa) {
  FourthCumulantProfile p;
  p.mode = Mode::per_row;
  p.rows = std::move(kappa);
  return p;
}

FourthCumulantProfile FourthCumulantProfile::per_entry(const Eigen::MatrixXd& kappa) {
  FourthCumulantProfile p = per_row(kappa.rowwise().mean());
  p.entries = kappa;
  return p;
}

Eigen::VectorXd FourthCumulantProfile::row_means(Index n) const {
  if (mode == Mode::constant) return Eigen::VectorXd::Constant(n, value);
  require(rows.size() == n, ErrorKind::InvalidArgument,
          "per-row cumulant profile does not match the dimension");
  return rows;
}

bool FourthCumulantProfile::is_zero() const {
  if (mode == Mode::constant) return value == 0.0;
  return (rows.array() == 0.0).all();
}

void FourthCumulantProfile::validate() const {
  constexpr double floor = -2.0 - 1e-12;
  bool ok = mode == Mode::constant ? value >= floor : (rows.array() >= floor).all();
  if (entries) ok = ok && (entries->array() >= floor).all();
  require(ok, ErrorKind::InvalidArgument, "fourth cumulants must be >= -2");
}

TestFunction TestFunction::zero() { return {}; }

TestFunction TestFunction::bump(double center, double width) {
  require(width > 0, ErrorKind::InvalidArgument, "bump width must be positive");
  TestFunction f;
  f.kind = Kind::bump;
  f.center = center;
  f.width = width;
  return f;
}

TestFunction TestFunction::poly_gauss(std::vector<double> coeffs, double center, double width) {
  require(width > 0, ErrorKind::InvalidArgument, "window width must be positive");
  TestFunction f;
  f.kind = Kind::poly_gauss;
  f.center = center;
  f.width = width;
  f.poly_coeffs = std::move(coeffs);
  return f;
}

double TestFunction::operator()(double x) const {
  switch (kind) {
    case Kind::zero:
      return 0.0;
    case Kind::bump: {
      const double t = (x - center) / width;
      if (std::abs(t) >= 1.0) return 0.0;
      return std::exp(-1.0 / (1.0 - t * t));
    }
    case Kind::poly_gauss: {
      if (x <= 0.0) return 0.0;
      const double t = (x - center) / width;
      if (std::abs(t) > 12.0) return 0.0;
      double p = 0.0;
      for (auto it = poly_coeffs.rbegin(); it != poly_coeffs.rend(); ++it) p = p * t + *it;
      return p * std::exp(-0.5 * t * t);
    }
  }
  return 0.0;
}

std::pair<double, double> TestFunction::support() const {
  switch (kind) {
    case Kind::zero:
      return {0.0, 0.0};
    case Kind::bump:
      return {center - width, center + width};
    case Kind::poly_gauss:
      return {std::max(0.0, center - 12.0 * width), center + 12.0 * width};
  }
  return {0.0, 0.0};
}

namespace {

void check_dims(const Population& pop, const DirectionVector& v1, const DirectionVector& v2) {
  require(v1.size() == pop.dimension() && v2.size() == pop.dimension(), ErrorKind::InvalidArgument,
          "direction vectors must match the population dimension");
}

// sum_i (r_i / 3) p_i q_i.
cplx cumulant_sum(const Eigen::VectorXd& r, const Eigen::VectorXcd& p, const Eigen::VectorXcd& q) {
  cplx acc = 0.0;
  for (Index i = 0; i < r.size(); ++i) acc += (r(i) / 3.0) * p(i) * q(i);
  return acc;
}

double alpha_from(double x1, double x2, cplx m1, cplx m2, const detail::RowFactor& a1,
                  const detail::RowFactor& a2, const Eigen::VectorXd& r) {
  if (m1.imag() == 0.0 || m2.imag() == 0.0) return 0.0;
  const Eigen::VectorXcd u = a1(m1), w = a2(m2);
  double acc = 0.0;
  for (Index i = 0; i < r.size(); ++i)
    acc += (r(i) / 3.0) * (m1 / x1 * u(i) * u(i)).imag() * (m2 / x2 * w(i) * w(i)).imag();
  return acc;
}

double beta_from(double x1, double x2, cplx m1, cplx m2, const detail::AtomContraction& c) {
  if (m1.imag() == 0.0 || m2.imag() == 0.0) return 0.0;
  const cplx m2b = std::conj(m2);
  const cplx ca = c.resolvent_pair(m1, m2b), cb = c.resolvent_pair(m1, m2);
  return ((m1 - m2b) / (x1 * x2) * ca * ca).real() - ((m1 - m2) / (x1 * x2) * cb * cb).real();
}

cplx beta_hat_from(cplx z1, cplx z2, cplx m1, cplx m2, const detail::AtomContraction& c,
                   const PopulationSpectrum& spec) {
  const cplx quotient = std::abs(z1 - z2) < 1e-10 ? m2c_derivative_at(m1, spec) : (m1 - m2) / (z1 - z2);
  const cplx cc = c.resolvent_pair(m1, m2);
  return 2.0 * quotient / (z1 * z2) * cc * cc;
}

void require_outside(double E, const Population& pop) {
  const double tau = pop.spectrum.regularity_margin();
  SupportStructure s;
  for (const auto& c : support_edges(pop.spectrum)) s.edges.push_back(c.value);
  const double dist = s.distance(E);
  if (!(dist >= tau) || E <= 0) {
    std::ostringstream os;
    os << "E = " << E << " is at distance " << dist << " from the support; need >= " << tau;
    fail(ErrorKind::OutsideDomain, os.str());
  }
}

}  // namespace

double alpha_kernel(double x1, double x2, const DirectionVector& v1, const DirectionVector& v2,
                    const Population& pop, const FourthCumulantProfile& kappa,
                    const SolverOptions& opts) {
  check_dims(pop, v1, v2);
  kappa.validate();
  if (kappa.is_zero()) return 0.0;
  const cplx m1 = solve_m2c({x1, 0.0}, pop.spectrum, opts).m;
  const cplx m2 = solve_m2c({x2, 0.0}, pop.spectrum, opts).m;
  return alpha_from(x1, x2, m1, m2, detail::RowFactor(pop, v1.coordinates()),
                    detail::RowFactor(pop, v2.coordinates()), kappa.row_means(pop.dimension()));
}

double beta_kernel(double x1, double x2, const DirectionVector& v1, const DirectionVector& v2,
                   const Population& pop, const SolverOptions& opts) {
  check_dims(pop, v1, v2);
  const cplx m1 = solve_m2c({x1, 0.0}, pop.spectrum, opts).m;
  const cplx m2 = solve_m2c({x2, 0.0}, pop.spectrum, opts).m;
  return beta_from(x1, x2, m1, m2, detail::AtomContraction(pop, v1.coordinates(), v2.coordinates()));
}

cplx alpha_hat(cplx z1, cplx z2, const DirectionVector& v1, const DirectionVector& v2,
               const Population& pop, const FourthCumulantProfile& kappa, const SolverOptions& opts) {
  check_dims(pop, v1, v2);
  kappa.validate();
  if (kappa.is_zero()) return 0.0;
  const cplx m1 = m2c(z1, pop.spectrum, opts), m2 = m2c(z2, pop.spectrum, opts);
  const detail::RowFactor a1(pop, v1.coordinates()), a2(pop, v2.coordinates());
  const Eigen::VectorXcd u = a1(m1), w = a2(m2);
  return m1 * m2 / (z1 * z2) *
         cumulant_sum(kappa.row_means(pop.dimension()), u.array().square().matrix(),
                      w.array().square().matrix());
}

cplx beta_hat(cplx z1, cplx z2, const DirectionVector& v1, const DirectionVector& v2,
              const Population& pop, const SolverOptions& opts) {
  check_dims(pop, v1, v2);
  const cplx m1 = m2c(z1, pop.spectrum, opts);
  const cplx m2 = std::abs(z1 - z2) < 1e-10 ? m1 : m2c(z2, pop.spectrum, opts);
  return beta_hat_from(z1, z2, m1, m2, detail::AtomContraction(pop, v1.coordinates(), v2.coordinates()),
                       pop.spectrum);
}

cplx resolvent_covariance(const ResolventCovarianceQuery& q, const DirectionVector& v_i,
                          const DirectionVector& v_j, const Population& pop,
                          const FourthCumulantProfile& kappa, const SolverOptions& opts) {
  switch (q.mode) {
    case CovarianceMode::global:
      return alpha_hat(q.z_i, q.z_j, v_i, v_j, pop, kappa, opts) +
             beta_hat(q.z_i, q.z_j, v_i, v_j, pop, opts);
    case CovarianceMode::local: {
      check_dims(pop, v_i, v_j);
      require(q.E > 0, ErrorKind::InvalidArgument, "local mode needs E > 0");
      if (!(q.w_i.imag() * q.w_j.imag() < 0)) return 0.0;
      const cplx m = solve_m2c({q.E, 0.0}, pop.spectrum, opts).m;
      const detail::AtomContraction c(pop, v_i.coordinates(), v_j.coordinates());
      const double b = c.resolvent_pair(m, std::conj(m)).real();
      return cplx(0.0, 4.0) * m.imag() / (q.E * q.E * (q.w_i - q.w_j)) * b * b;
    }
    case CovarianceMode::outside: {
      require_outside(q.E, pop);
      const cplx z(q.E, 0.0);
      return alpha_hat(z, z, v_i, v_j, pop, kappa, opts) + beta_hat(z, z, v_i, v_j, pop, opts);
    }
  }
  return 0.0;
}

PvResult pv_double_integral(const std::function<double(double, double)>& g, double a1, double b1,
                            double a2, double b2, const PvOptions& opts) {
  require(b1 > a1 && b2 > a2, ErrorKind::InvalidArgument, "PV box must have positive sides");
  const double width = std::max(b1 - a1, b2 - a2);
  const double h = opts.h > 0 ? opts.h : 1e-3 * width;
  std::vector<double> outer_foci, inner_foci_base;
  for (double p : opts.breakpoints) {
    if (p > a1 && p < b1) outer_foci.push_back(p);
    if (p > a2 && p < b2) inner_foci_base.push_back(p);
  }
  const quad::Rule outer = quad::composite_gauss(quad::graded_breakpoints(
      a1, b1, outer_foci, (b1 - a1) / 4096.0, (b1 - a1) / std::max(1, opts.outer_panels)));

  std::array<double, 3> sums{}, abs_sums{};
  std::vector<double> foci = inner_foci_base;
  foci.push_back(0.0);
  for (std::size_t i = 0; i < outer.size(); ++i) {
    const double x1 = outer.x[i];
    foci.back() = x1;
    const quad::Rule inner = quad::composite_gauss(
        quad::graded_breakpoints(a2, b2, foci, std::min(h / 16.0, (b2 - a2) / 64.0), (b2 - a2) / 32.0));
    for (std::size_t j = 0; j < inner.size(); ++j) {
      const double u = x1 - inner.x[j];
      const double gv = g(x1, inner.x[j]) * outer.w[i] * inner.w[j];
      if (gv == 0.0) continue;
      for (int l = 0; l < 3; ++l) {
        const double delta = h / static_cast<double>(1 << l);
        const double t = gv * u / (u * u + delta * delta);
        sums[static_cast<std::size_t>(l)] += t;
        abs_sums[static_cast<std::size_t>(l)] += std::abs(t);
      }
    }
  }
  if (!(std::isfinite(sums[0]) && std::isfinite(sums[1]) && std::isfinite(sums[2])))
    fail(ErrorKind::QuadratureFailure, "PV integrand produced non-finite values");

  PvResult out;
  out.levels = sums;
  const double d1 = sums[0] - sums[1], d2 = sums[1] - sums[2];
  const double noise = 1e-12 * abs_sums[2];
  if (std::abs(d1) <= noise && std::abs(d2) <= noise) {
    out.value = sums[2];
    out.error_estimate = std::abs(d2) + noise;
    out.rate = 0.0;
    return out;
  }
  const double ratio = d1 / d2;
  if (ratio > 0 && ratio < 1.0 && std::abs(d2) > 10 * noise) {
    std::ostringstream os;
    os << "PV extrapolation diverges: successive differences " << d1 << ", " << d2;
    fail(ErrorKind::QuadratureFailure, os.str());
  }
  if (!(ratio > 0)) {
    out.rate = 1.0;
    out.value = sums[2] - d2;
    out.error_estimate = std::abs(d1) + std::abs(d2);
    return out;
  }
  const double p = std::clamp(std::log2(ratio), 1.0 / 3.0, 2.0);
  out.rate = p;
  out.value = sums[2] - d2 / (std::pow(2.0, p) - 1.0);
  out.error_estimate = std::abs(out.value - sums[2]);
  return out;
}

CovarianceResult linear_stat_covariance(const LinearStatQuery& q, const TestFunction& f_i,
                                        const TestFunction& f_j, const DirectionVector& v_i,
                                        const DirectionVector& v_j, const Population& pop,
                                        const FourthCumulantProfile& kappa,
                                        const SolverOptions& opts) {
  check_dims(pop, v_i, v_j);
  CovarianceResult out;
  if (q.mode == CovarianceMode::local) {
    out.mode = "local";
    require(q.E > 0, ErrorKind::InvalidArgument, "local mode needs E > 0");
    if (f_i.is_zero() || f_j.is_zero()) return out;
    const cplx m = solve_m2c({q.E, 0.0}, pop.spectrum, opts).m;
    const double rho = std::max(0.0, m.imag()) / std::numbers::pi;
    if (rho == 0.0) return out;
    const auto [lo_i, hi_i] = f_i.support();
    const auto [lo_j, hi_j] = f_j.support();
    const double lo = std::max(lo_i, lo_j), hi = std::min(hi_i, hi_j);
    if (!(hi > lo)) return out;
    const quad::Result ff =
        quad::adaptive([&](double x) { return f_i(x) * f_j(x); }, lo, hi, 1e-14, 1e-12);
    const detail::AtomContraction c(pop, v_i.coordinates(), v_j.coordinates());
    const double b = c.resolvent_pair(m, std::conj(m)).real();
    const double pref = 2.0 * rho / (q.E * q.E) * b * b;
    out.value = pref * ff.value;
    out.error_estimate = std::abs(pref) * ff.error;
    return out;
  }
  require(q.mode == CovarianceMode::global, ErrorKind::InvalidArgument,
          "linear statistic covariance supports global and local modes");
  out.mode = "global";
  kappa.validate();
  if (f_i.is_zero() || f_j.is_zero()) return out;

  const detail::BoundaryTable table(pop.spectrum, opts);
  const std::vector<double>& edges = table.edges();
  const auto [lo_i, hi_i] = f_i.support();
  const auto [lo_j, hi_j] = f_j.support();
  constexpr int kPanels = 256;

  const detail::AtomContraction c(pop, v_i.coordinates(), v_j.coordinates());

  // Diagonal term.
  double diag = 0.0;
  {
    const quad::Rule r = detail::support_rule(edges, std::max(lo_i, lo_j), std::min(hi_i, hi_j), kPanels);
    for (std::size_t k = 0; k < r.size(); ++k) {
      const double x = r.x[k];
      const double fx = f_i(x) * f_j(x);
      if (fx == 0.0) continue;
      const cplx m = table(x);
      const double rho = std::max(0.0, m.imag()) / std::numbers::pi;
      const double b = c.resolvent_pair(m, std::conj(m)).real();
      diag += r.w[k] * fx * rho / (x * x) * b * b;
    }
    diag *= 2.0;
  }

  // alpha term, separable into one-dimensional integrals per row.
  double alpha_term = 0.0;
  if (!kappa.is_zero()) {
    const Eigen::VectorXd r = kappa.row_means(pop.dimension());
    auto row_integrals = [&](const TestFunction& f, const DirectionVector& v, double lo, double hi) {
      const detail::RowFactor a(pop, v.coordinates());
      const quad::Rule rule = detail::support_rule(edges, lo, hi, kPanels);
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(pop.dimension());
      for (std::size_t k = 0; k < rule.size(); ++k) {
        const double x = rule.x[k];
        const double fx = f(x);
        if (fx == 0.0) continue;
        const cplx m = table(x);
        const Eigen::VectorXcd u = a(m);
        acc += rule.w[k] * fx * ((m / x) * u.array().square()).imag().matrix();
      }
      return acc;
    };
    const Eigen::VectorXd I1 = row_integrals(f_i, v_i, lo_i, hi_i);
    const Eigen::VectorXd I2 = row_integrals(f_j, v_j, lo_j, hi_j);
    alpha_term = (r.array() / 3.0 * I1.array() * I2.array()).sum() / (std::numbers::pi * std::numbers::pi);
  }

  // Principal-value beta term over the support hull.
  double pv_term = 0.0, pv_err = 0.0;
  {
    const double lam_minus = edges.back(), lam_plus = edges.front();
    const double a1 = std::max(lo_i, lam_minus), b1 = std::min(hi_i, lam_plus);
    const double a2 = std::max(lo_j, lam_minus), b2 = std::min(hi_j, lam_plus);
    if (b1 > a1 && b2 > a2) {
      PvOptions po;
      po.breakpoints = edges;
      po.outer_panels = 128;
      auto g = [&](double x1, double x2) {
        const double f1 = f_i(x1);
        if (f1 == 0.0) return 0.0;
        const double f2 = f_j(x2);
        if (f2 == 0.0 || !table.inside(x1) || !table.inside(x2)) return 0.0;
        return f1 * f2 * beta_from(x1, x2, table(x1), table(x2), c);
      };
      const PvResult pv = pv_double_integral(g, a1, b1, a2, b2, po);
      pv_term = pv.value / (std::numbers::pi * std::numbers::pi);
      pv_err = pv.error_estimate / (std::numbers::pi * std::numbers::pi);
    }
  }
  out.value = alpha_term + pv_term + diag;
  out.error_estimate = pv_err;
  return out;
}

double variance_positivity(double E, const DirectionVector& v, const Population& pop,
                           const FourthCumulantProfile& kappa, const SolverOptions& opts) {
  const ResolventCovarianceQuery q{CovarianceMode::outside, {}, {}, E, {}, {}};
  const double val = resolvent_covariance(q, v, v, pop, kappa, opts).real();
  if (val < -1e-12) {
    std::ostringstream os;
    os << "asymptotic variance " << val << " at E = " << E << " is negative";
    fail(ErrorKind::PositivityViolation, os.str());
  }
  return std::max(0.0, val);
}

}  // namespace vesd
