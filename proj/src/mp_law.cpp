#include "vesd/mp_law.hpp"

#include "vesd/errors.hpp"
#include "vesd/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace vesd {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Law {
  const Eigen::ArrayXd& s;
  const Eigen::ArrayXd& w;
  double d;
  double scale;

  explicit Law(const PopulationSpectrum& pop)
      : s(pop.atoms()),
        w(pop.weights()),
        d(pop.aspect_ratio()),
        scale(std::max(1.0, pop.largest() * std::pow(1.0 + std::sqrt(pop.aspect_ratio()), 2))) {}

  // S1 = sum w s/(1+ms), S2 = sum w s^2/(1+ms)^2.
  void sums(cplx m, cplx& S1, cplx& S2) const {
    S1 = 0.0;
    S2 = 0.0;
    for (Index k = 0; k < s.size(); ++k) {
      const cplx t = s(k) / (1.0 + m * s(k));
      S1 += w(k) * t;
      S2 += w(k) * t * t;
    }
  }

  cplx S1(cplx m) const {
    cplx acc = 0.0;
    for (Index k = 0; k < s.size(); ++k) acc += w(k) * s(k) / (1.0 + m * s(k));
    return acc;
  }

  double residual(cplx z, cplx m) const { return std::abs(1.0 + z * m - d * m * S1(m)); }

  // Real-axis inverse map z(m) and its derivative.
  double zmap(double m) const {
    double acc = 0.0;
    for (Index k = 0; k < s.size(); ++k) acc += w(k) * s(k) / (1.0 + m * s(k));
    return -1.0 / m + d * acc;
  }
  double zprime(double m) const {
    double acc = 0.0;
    for (Index k = 0; k < s.size(); ++k) {
      const double t = s(k) / (1.0 + m * s(k));
      acc += w(k) * t * t;
    }
    return 1.0 / (m * m) - d * acc;
  }
};

bool finite(cplx c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); }

// Newton on F(m) = 1/m + z - d S1(m), keeping Im m >= 0 when Im z > 0.
// Returns the best residual reached; m holds the corresponding iterate.
double newton(const Law& L, cplx z, cplx& m, const SolverOptions& o, int max_it = 200) {
  const bool upper = z.imag() > 0;
  double best_res = std::numeric_limits<double>::infinity();
  cplx best = m;
  int polish = 0;
  for (int it = 0; it < max_it; ++it) {
    cplx S1, S2;
    L.sums(m, S1, S2);
    const cplx F = 1.0 / m + z - L.d * S1;
    const cplx dF = -1.0 / (m * m) + L.d * S2;
    const double res = std::abs(m * F);
    if (!std::isfinite(res)) break;
    if (res < best_res) {
      best_res = res;
      best = m;
    }
    if (res <= o.tolerance) {
      if (++polish > 2) break;
    }
    cplx step = F / dF;
    if (!finite(step)) break;
    cplx next = m - step;
    int halvings = 0;
    while (halvings < 40 &&
           ((upper && next.imag() < 0) || !finite(next) || L.residual(z, next) > 2.0 * res + 1e-300)) {
      step *= 0.5;
      next = m - step;
      ++halvings;
    }
    if (halvings == 40) break;
    if (std::abs(next - m) <= 4 * kEps * std::abs(m)) {
      m = next;
      const double r = L.residual(z, m);
      if (r < best_res) {
        best_res = r;
        best = m;
      }
      break;
    }
    m = next;
  }
  m = best;
  return best_res;
}

cplx fixed_point_then_newton(const Law& L, cplx z, const SolverOptions& o) {
  cplx m = -1.0 / z;
  for (int it = 0; it < o.max_iterations; ++it) {
    if (L.residual(z, m) < o.newton_switch) break;
    const cplx next = 1.0 / (-z + L.d * L.S1(m));
    m = (1.0 - o.damping) * m + o.damping * next;
    if (!finite(m)) fail(ErrorKind::NonConvergence, "fixed-point iteration diverged");
  }
  const double res = newton(L, z, m, o);
  if (res > o.tolerance) {
    std::ostringstream os;
    os << "solver did not converge at z = " << z << " (residual " << res << ")";
    fail(ErrorKind::NonConvergence, os.str());
  }
  return m;
}

// Continuation in eta from the well-conditioned region down to eta_target.
cplx ladder(const Law& L, double E, double eta_target, const SolverOptions& o) {
  double eta = std::max(eta_target, L.scale);
  cplx m = fixed_point_then_newton(L, {E, eta}, o);
  double ratio = 0.25;
  while (eta > eta_target) {
    const double next = std::max(eta_target, eta * ratio);
    cplx trial = m;
    const double res = newton(L, {E, next}, trial, o, 60);
    if (res <= o.tolerance && trial.imag() >= 0) {
      m = trial;
      eta = next;
      ratio = std::max(0.25, ratio * ratio);
    } else {
      ratio = std::sqrt(ratio);
      if (ratio > 0.999) {
        std::ostringstream os;
        os << "continuation stalled at E = " << E << ", eta = " << eta;
        fail(ErrorKind::NonConvergence, os.str());
      }
    }
  }
  return m;
}

// Accepts a real-axis root as m2c(E + i0): either Im m > 0 (inside the
// support), its conjugate, or a real root on the increasing branch of z(m).
std::optional<cplx> classify_real_root(const Law& L, cplx m) {
  if (std::abs(m.imag()) <= 1e-13 * std::max(1.0, std::abs(m))) {
    const double r = m.real();
    if (L.zprime(r) < -1e-8 / (r * r)) return std::nullopt;
    return cplx(r, 0.0);
  }
  if (m.imag() < 0) return std::conj(m);
  return m;
}

void check_branch(cplx z, cplx m) {
  const double tol = 1e-12 * std::max(1.0, std::abs(m));
  if (m.imag() < -tol || (z * m).imag() < -tol * std::max(1.0, std::abs(z))) {
    std::ostringstream os;
    os << "solution m = " << m << " at z = " << z << " left the upper half-plane";
    fail(ErrorKind::BranchViolation, os.str());
  }
}

double relative_residual(const Law& L, cplx z, cplx m) { return L.residual(z, m); }

}  // namespace

std::optional<cplx> boundary_m2c_from(double E, cplx guess, const PopulationSpectrum& pop,
                                      const SolverOptions& opts) {
  const Law L(pop);
  cplx m = guess;
  const double res = newton(L, {E, 0.0}, m, opts, 60);
  if (res > opts.tolerance) return std::nullopt;
  return classify_real_root(L, m);
}

StieltjesValue solve_m2c(const SpectralPoint& p, const PopulationSpectrum& pop,
                         const SolverOptions& opts) {
  require(std::isfinite(p.E) && std::isfinite(p.eta), ErrorKind::InvalidArgument,
          "spectral point must be finite");
  if (p.eta < 0) {
    StieltjesValue v = solve_m2c({p.E, -p.eta}, pop, opts);
    v.m = std::conj(v.m);
    if (v.m_prime) v.m_prime = std::conj(*v.m_prime);
    return v;
  }
  const Law L(pop);
  StieltjesValue out;
  if (p.eta > 0) {
    const cplx z = p.z();
    cplx m = std::abs(z) >= L.scale && p.eta >= 1e-3 * std::abs(z)
                 ? fixed_point_then_newton(L, z, opts)
                 : ladder(L, p.E, p.eta, opts);
    check_branch(z, m);
    out.m = m;
  } else {
    if (std::abs(p.E) < opts.omega) {
      std::ostringstream os;
      os << "boundary value requested at |E| = " << std::abs(p.E) << " below omega = " << opts.omega;
      fail(ErrorKind::InvalidArgument, os.str());
    }
    const cplx start = ladder(L, p.E, 1e-10 * L.scale, opts);
    std::optional<cplx> m = boundary_m2c_from(p.E, start, pop, opts);
    if (!m) {
      // Retry from a point closer to the axis.
      const cplx closer = ladder(L, p.E, 1e-13 * L.scale, opts);
      m = boundary_m2c_from(p.E, closer, pop, opts);
    }
    if (!m) {
      std::ostringstream os;
      os << "boundary solve failed at E = " << p.E;
      fail(ErrorKind::NonConvergence, os.str());
    }
    if (std::abs(*m - start) > 1e-3 * std::max(1.0, std::abs(*m))) {
      std::ostringstream os;
      os << "boundary value " << *m << " at E = " << p.E << " disagrees with m(E + i0+) = " << start;
      fail(ErrorKind::BranchViolation, os.str());
    }
    out.m = *m;
  }
  out.residual = relative_residual(L, p.z(), out.m);
  const cplx denom = 1.0 / (out.m * out.m) - L.d * [&] {
    cplx S1, S2;
    L.sums(out.m, S1, S2);
    return S2;
  }();
  if (std::abs(denom) > 1e-10 * std::abs(1.0 / (out.m * out.m))) out.m_prime = 1.0 / denom;
  return out;
}

cplx m2c(cplx z, const PopulationSpectrum& pop, const SolverOptions& opts) {
  return solve_m2c({z.real(), z.imag()}, pop, opts).m;
}

cplx m2c_derivative_at(cplx m, const PopulationSpectrum& pop) {
  const Law L(pop);
  cplx S1, S2;
  L.sums(m, S1, S2);
  const cplx inv = 1.0 / (m * m);
  const cplx denom = inv - L.d * S2;
  if (!(std::abs(denom) > 1e-10 * std::abs(inv))) {
    std::ostringstream os;
    os << "implicit-function denominator vanishes at m = " << m;
    fail(ErrorKind::DegenerateDenominator, os.str());
  }
  return 1.0 / denom;
}

cplx m2c_derivative(const SpectralPoint& z, const PopulationSpectrum& pop,
                    const SolverOptions& opts) {
  return m2c_derivative_at(solve_m2c(z, pop, opts).m, pop);
}

double density_rho2c(double E, const PopulationSpectrum& pop, const SolverOptions& opts) {
  require(E >= opts.omega, ErrorKind::InvalidArgument, "density requested below omega");
  const cplx m = solve_m2c({E, 0.0}, pop, opts).m;
  return std::max(0.0, m.imag()) / std::numbers::pi;
}

namespace {

// Sign changes of z'(m) on (lo, hi), refined by bisection.
void scan_interval(const Law& L, double lo, double hi, bool lo_infinite, bool hi_infinite,
                   std::vector<CriticalPoint>& out) {
  std::vector<double> grid;
  constexpr int M = 2000;
  if (lo_infinite) {
    // m = hi - t, t log-spaced.
    const double base = std::max(std::abs(hi), 1.0);
    for (int j = M; j >= 0; --j) grid.push_back(hi - base * std::pow(10.0, -14.0 + 22.0 * j / M));
  } else if (hi_infinite) {
    const double base = std::max(std::abs(lo), 1.0);
    for (int j = 0; j <= M; ++j) grid.push_back(lo + base * std::pow(10.0, -14.0 + 22.0 * j / M));
  } else {
    const double w = hi - lo;
    for (int k = 14; k >= 3; --k) grid.push_back(lo + w * std::pow(10.0, -k));
    for (int j = 1; j < M; ++j) grid.push_back(lo + w * 0.5 * (1.0 - std::cos(std::numbers::pi * j / M)));
    for (int k = 3; k <= 14; ++k) grid.push_back(hi - w * std::pow(10.0, -k));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  grid.erase(std::remove_if(grid.begin(), grid.end(),
                            [&](double m) { return !(m > lo || lo_infinite) || !(m < hi || hi_infinite) || m == 0.0; }),
             grid.end());
  double prev_m = 0.0, prev_v = 0.0;
  bool have_prev = false;
  for (double m : grid) {
    const double v = L.zprime(m);
    if (!std::isfinite(v)) {
      have_prev = false;
      continue;
    }
    if (have_prev && ((prev_v < 0) != (v < 0))) {
      double a = prev_m, b = m, fa = prev_v;
      for (int it = 0; it < 200 && std::abs(b - a) > 1e-12 * std::max(1.0, std::abs(a)) * 1e-2; ++it) {
        const double c = 0.5 * (a + b);
        const double fc = L.zprime(c);
        if ((fc < 0) == (fa < 0)) {
          a = c;
          fa = fc;
        } else {
          b = c;
        }
      }
      const double mc = 0.5 * (a + b);
      out.push_back({mc, L.zmap(mc)});
    }
    prev_m = m;
    prev_v = v;
    have_prev = true;
  }
}

std::vector<double> sorted_poles(const Law& L) {
  std::vector<double> poles;
  for (Index k = 0; k < L.s.size(); ++k) poles.push_back(-1.0 / L.s(k));
  std::sort(poles.begin(), poles.end());
  return poles;
}

}  // namespace

std::vector<CriticalPoint> support_edges(const PopulationSpectrum& pop) {
  const Law L(pop);
  const std::vector<double> poles = sorted_poles(L);
  std::vector<CriticalPoint> crit;
  scan_interval(L, 0.0, poles.front(), true, false, crit);
  for (std::size_t k = 0; k + 1 < poles.size(); ++k) scan_interval(L, poles[k], poles[k + 1], false, false, crit);
  scan_interval(L, poles.back(), 0.0, false, false, crit);
  scan_interval(L, 0.0, 0.0, false, true, crit);

  std::vector<CriticalPoint> edges;
  for (const auto& c : crit)
    if (c.value > 0 && std::isfinite(c.value)) edges.push_back(c);
  std::sort(edges.begin(), edges.end(),
            [](const CriticalPoint& a, const CriticalPoint& b) { return a.value > b.value; });
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    if (edges[k].value - edges[k + 1].value < 1e-8 * L.scale) {
      std::ostringstream os;
      os << "critical values " << edges[k].value << " and " << edges[k + 1].value << " coincide";
      fail(ErrorKind::EdgeDegeneracy, os.str());
    }
  }
  if (edges.empty() || edges.size() % 2 != 0) {
    std::ostringstream os;
    os << "found " << edges.size() << " positive critical values; edges must come in pairs";
    fail(ErrorKind::EdgeDegeneracy, os.str());
  }
  return edges;
}

double rightmost_edge(const PopulationSpectrum& pop) {
  const Law L(pop);
  const std::vector<double> poles = sorted_poles(L);
  std::vector<CriticalPoint> crit;
  scan_interval(L, poles.back(), 0.0, false, false, crit);
  require(!crit.empty(), ErrorKind::NonConvergence, "no critical point in (-1/sigma_1, 0)");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : crit) best = std::max(best, c.value);
  return best;
}

bool SupportStructure::inside(double E) const {
  for (std::size_t k = 0; k + 1 < edges.size(); k += 2)
    if (E >= edges[k + 1] && E <= edges[k]) return true;
  return false;
}

double SupportStructure::distance(double E) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < edges.size(); k += 2) {
    if (E >= edges[k + 1] && E <= edges[k]) return 0.0;
    best = std::min({best, std::abs(E - edges[k]), std::abs(E - edges[k + 1])});
  }
  return best;
}

namespace {

// Density sweep along a bulk in the cosine variable with continuation.
class BulkTable {
 public:
  BulkTable(const PopulationSpectrum& pop, double lower, double upper, int panels,
            const SolverOptions& opts)
      : pop_(pop), lower_(lower), upper_(upper), opts_(opts), panels_(panels) {
    const double h = 0.5 * (upper - lower);
    std::vector<double> bp(static_cast<std::size_t>(panels) + 1);
    for (int i = 0; i <= panels; ++i) bp[static_cast<std::size_t>(i)] = std::numbers::pi * i / panels;
    theta_rule_ = quad::composite_gauss(bp);
    // composite_gauss emits nodes in +-pairs per panel; sort for continuation.
    std::vector<std::size_t> order(theta_rule_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return theta_rule_.x[a] < theta_rule_.x[b]; });
    quad::Rule sorted;
    for (auto i : order) {
      sorted.x.push_back(theta_rule_.x[i]);
      sorted.w.push_back(theta_rule_.w[i]);
    }
    theta_rule_ = sorted;
    ms_.resize(theta_rule_.size());
    panel_mass_.assign(static_cast<std::size_t>(panels), 0.0);
    cplx guess;
    bool have = false;
    for (std::size_t i = 0; i < theta_rule_.size(); ++i) {
      const double th = theta_rule_.x[i];
      const double x = lower + h * (1.0 - std::cos(th));
      ms_[i] = solve_at(x, have ? &guess : nullptr);
      guess = ms_[i];
      have = true;
      const double rho = std::max(0.0, ms_[i].imag()) / std::numbers::pi;
      const auto p = static_cast<std::size_t>(std::min<double>(panels - 1, std::floor(th / (std::numbers::pi / panels))));
      panel_mass_[p] += theta_rule_.w[i] * rho * h * std::sin(th);
    }
  }

  double mass() const {
    double acc = 0.0;
    for (double v : panel_mass_) acc += v;
    return acc;
  }

  // x in the bulk with mass `target` above it (between x and upper edge).
  double quantile_from_top(double target) const {
    const double dth = std::numbers::pi / panels_;
    double above = 0.0;
    int p = panels_ - 1;
    for (; p > 0; --p) {
      if (above + panel_mass_[static_cast<std::size_t>(p)] >= target) break;
      above += panel_mass_[static_cast<std::size_t>(p)];
    }
    const double t0 = p * dth, t1 = (p + 1) * dth;
    const double want = target - above;  // mass in [theta, t1]
    double a = t0, b = t1;
    double th = 0.5 * (a + b);
    for (int it = 0; it < 100; ++it) {
      const double g = partial_mass(th, t1) - want;
      if (g > 0) a = th; else b = th;
      const double deriv = -weight_density(th);
      double next = deriv != 0.0 ? th - g / deriv : 0.5 * (a + b);
      if (!(next > a && next < b)) next = 0.5 * (a + b);
      if (std::abs(next - th) <= 1e-14 || b - a <= 1e-14) {
        th = next;
        break;
      }
      th = next;
    }
    return lower_ + 0.5 * (upper_ - lower_) * (1.0 - std::cos(th));
  }

 private:
  cplx solve_at(double x, const cplx* guess) const {
    if (guess) {
      if (auto m = boundary_m2c_from(x, *guess, pop_, opts_)) {
        if (std::abs(*m - *guess) < 0.1 * std::max(1.0, std::abs(*guess))) return *m;
      }
    }
    return solve_m2c({x, 0.0}, pop_, opts_).m;
  }

  cplx nearest_m(double th) const {
    auto it = std::lower_bound(theta_rule_.x.begin(), theta_rule_.x.end(), th);
    std::size_t i = static_cast<std::size_t>(it - theta_rule_.x.begin());
    if (i >= ms_.size()) i = ms_.size() - 1;
    if (i > 0 && std::abs(theta_rule_.x[i - 1] - th) < std::abs(theta_rule_.x[i] - th)) --i;
    return ms_[i];
  }

  // rho(x(theta)) * dx/dtheta.
  double weight_density(double th) const {
    const double h = 0.5 * (upper_ - lower_);
    const double x = lower_ + h * (1.0 - std::cos(th));
    const cplx g = nearest_m(th);
    const cplx m = solve_at(x, &g);
    return std::max(0.0, m.imag()) / std::numbers::pi * h * std::sin(th);
  }

  double partial_mass(double a, double b) const {
    quad::Rule r = quad::composite_gauss({a, b});
    double acc = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) acc += r.w[i] * weight_density(r.x[i]);
    return acc;
  }

  const PopulationSpectrum& pop_;
  double lower_, upper_;
  SolverOptions opts_;
  int panels_;
  quad::Rule theta_rule_;
  std::vector<cplx> ms_;
  std::vector<double> panel_mass_;
};

}  // namespace

SupportStructure support_structure(const PopulationSpectrum& pop, Index N,
                                   bool classical_locations, const SolverOptions& opts) {
  require(N > 0, ErrorKind::InvalidArgument, "sample count must be positive");
  SupportStructure out;
  out.sample_count = N;
  for (const auto& c : support_edges(pop)) {
    out.edges.push_back(c.value);
    out.edge_m.push_back(c.m);
  }
  std::vector<BulkTable> tables;
  for (std::size_t k = 0; k + 1 < out.edges.size(); k += 2) {
    const double upper = out.edges[k], lower = out.edges[k + 1];
    auto rho = [&](double x) { return density_rho2c(x, pop, opts); };
    const quad::Result r = quad::adaptive_cosine(rho, lower, upper, 1e-9);
    out.bulk_masses.push_back(r.value);
    out.bulk_counts.push_back(static_cast<double>(N) * r.value);
    if (classical_locations) tables.emplace_back(pop, lower, upper, 64, opts);
  }
  if (classical_locations) {
    const Index count = std::min(pop.dimension(), N);
    out.classical_locations.reserve(static_cast<std::size_t>(count));
    double above = 0.0;  // classical count in bulks already passed
    std::size_t bulk = 0;
    for (Index j = 1; j <= count; ++j) {
      const double target = static_cast<double>(j) - 0.5;
      while (bulk + 1 < tables.size() && target > above + N * tables[bulk].mass()) {
        above += N * tables[bulk].mass();
        ++bulk;
      }
      const double local = std::min((target - above) / N, tables[bulk].mass());
      out.classical_locations.push_back(tables[bulk].quantile_from_top(local));
    }
  }
  return out;
}

bool RegularityReport::passed() const {
  if (!assumption_violations.empty()) return false;
  for (const auto& e : edges)
    if (!(e.above_tau && e.gap_ok && e.pole_ok)) return false;
  for (const auto& b : bulks)
    if (!b.density_ok) return false;
  return true;
}

RegularityReport regularity_check(const PopulationSpectrum& pop, double tau, double tau_prime,
                                  double density_floor, const SolverOptions& opts) {
  RegularityReport rep;
  rep.tau = tau;
  rep.tau_prime = tau_prime;
  const PopulationSpectrum at_tau(
      std::vector<double>(pop.eigenvalues().data(), pop.eigenvalues().data() + pop.dimension()),
      pop.aspect_ratio(), tau);
  rep.assumption_violations = at_tau.violations(true);
  std::vector<CriticalPoint> edges;
  try {
    edges = support_edges(pop);
  } catch (const Error& e) {
    rep.assumption_violations.push_back(e.what());
    return rep;
  }
  for (std::size_t k = 0; k < edges.size(); ++k) {
    EdgeRegularity er;
    er.edge = edges[k].value;
    er.above_tau = er.edge >= tau;
    er.min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < edges.size(); ++l)
      if (l != k) er.min_gap = std::min(er.min_gap, std::abs(edges[k].value - edges[l].value));
    er.gap_ok = er.min_gap >= tau;
    er.min_pole_distance = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < pop.atoms().size(); ++i)
      er.min_pole_distance = std::min(er.min_pole_distance, std::abs(1.0 + edges[k].m * pop.atoms()(i)));
    er.pole_ok = er.min_pole_distance >= tau;
    rep.edges.push_back(er);
  }
  for (std::size_t k = 0; k + 1 < edges.size(); k += 2) {
    BulkRegularity br;
    br.upper = edges[k].value;
    br.lower = edges[k + 1].value;
    const double a = br.lower + tau_prime, b = br.upper - tau_prime;
    if (b <= a) {
      br.min_density = 0.0;
      br.density_ok = false;
    } else {
      br.min_density = std::numeric_limits<double>::infinity();
      constexpr int M = 200;
      for (int j = 0; j <= M; ++j) {
        const double x = a + (b - a) * j / M;
        if (x < opts.omega) continue;
        br.min_density = std::min(br.min_density, density_rho2c(x, pop, opts));
      }
      br.density_ok = br.min_density >= density_floor;
    }
    rep.bulks.push_back(br);
  }
  return rep;
}

double anisotropic_density(double E, const DirectionVector& v, const PopulationCovariance& cov,
                           const PopulationSpectrum& pop, const SolverOptions& opts) {
  require(cov.dimension() == v.size(), ErrorKind::InvalidArgument,
          "direction vector dimension does not match covariance");
  require(E >= opts.omega, ErrorKind::InvalidArgument, "density requested below omega");
  const cplx m = solve_m2c({E, 0.0}, pop, opts).m;
  const double rho = std::max(0.0, m.imag()) / std::numbers::pi;
  if (rho == 0.0) return 0.0;
  const double val = cov.bilinear<double>(v.coordinates(), v.coordinates(), [&](double s) {
    return rho * s / (E * std::norm(1.0 + m * s));
  });
  return std::max(0.0, val);
}

}  // namespace vesd
