#include "vesd/quadrature.hpp"

#include "vesd/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <sstream>

namespace vesd::quad {

namespace {

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

// Kronrod 15 and embedded Gauss 7 on [a, b].
Segment gk15(const Integrand& f, double a, double b) {
  using K = boost::math::quadrature::gauss_kronrod<double, 15>;
  using G = boost::math::quadrature::gauss<double, 7>;
  const auto& xk = K::abscissa();
  const auto& wk = K::weights();
  const auto& wg = G::weights();
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double f0 = f(c);
  double kron = wk[0] * f0;
  double gauss = wg[0] * f0;
  for (std::size_t i = 1; i < xk.size(); ++i) {
    const double s = f(c - h * xk[i]) + f(c + h * xk[i]);
    kron += wk[i] * s;
    if (i % 2 == 0) gauss += wg[i / 2] * s;
  }
  return {a, b, kron * h, std::abs((kron - gauss) * h)};
}

}  // namespace

Result adaptive(const Integrand& f, double a, double b, double abs_tol, double rel_tol,
                int max_intervals) {
  if (a == b) return {};
  std::priority_queue<Segment> heap;
  Segment first = gk15(f, a, b);
  double value = first.value, error = first.error;
  heap.push(first);
  int count = 1;
  while (error > std::max(abs_tol, rel_tol * std::abs(value))) {
    if (count >= max_intervals) {
      std::ostringstream os;
      os << "adaptive quadrature on [" << a << ", " << b << "] reached " << count
         << " intervals with error " << error;
      fail(ErrorKind::QuadratureFailure, os.str());
    }
    Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    Segment left = gk15(f, worst.a, mid), right = gk15(f, mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++count;
    if (!std::isfinite(value)) fail(ErrorKind::QuadratureFailure, "non-finite integrand");
  }
  // Recompute the sums to drop accumulated round-off from the updates.
  double v = 0.0, e = 0.0;
  while (!heap.empty()) {
    v += heap.top().value;
    e += heap.top().error;
    heap.pop();
  }
  return {v, e};
}

Result adaptive_cosine(const Integrand& f, double a, double b, double abs_tol, double rel_tol,
                       int max_intervals) {
  const double h = 0.5 * (b - a);
  auto g = [&](double t) { return f(a + h * (1.0 - std::cos(t))) * h * std::sin(t); };
  return adaptive(g, 0.0, std::numbers::pi, abs_tol, rel_tol, max_intervals);
}

double Rule::apply(const Integrand& f) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * f(x[i]);
  return acc;
}

void Rule::append(const Rule& other) {
  x.insert(x.end(), other.x.begin(), other.x.end());
  w.insert(w.end(), other.w.begin(), other.w.end());
}

Rule composite_gauss(const std::vector<double>& breakpoints) {
  using G = boost::math::quadrature::gauss<double, 10>;
  const auto& xg = G::abscissa();
  const auto& wg = G::weights();
  Rule rule;
  if (breakpoints.size() < 2) return rule;
  rule.x.reserve(10 * (breakpoints.size() - 1));
  rule.w.reserve(10 * (breakpoints.size() - 1));
  for (std::size_t p = 0; p + 1 < breakpoints.size(); ++p) {
    const double a = breakpoints[p], b = breakpoints[p + 1];
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    for (std::size_t i = 0; i < xg.size(); ++i) {
      rule.x.push_back(c - h * xg[i]);
      rule.w.push_back(h * wg[i]);
      rule.x.push_back(c + h * xg[i]);
      rule.w.push_back(h * wg[i]);
    }
  }
  return rule;
}

std::vector<double> graded_breakpoints(double a, double b, const std::vector<double>& foci,
                                       double finest, double coarsest) {
  require(b > a && finest > 0 && coarsest >= finest, ErrorKind::InvalidArgument,
          "invalid grading parameters");
  std::vector<double> pts{a, b};
  for (double c : foci) {
    if (c < a || c > b) continue;
    pts.push_back(c);
    for (double s = finest; s < b - a; s *= 2.0) {
      if (c - s > a) pts.push_back(c - s);
      if (c + s < b) pts.push_back(c + s);
    }
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<double> out{pts.front()};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double lo = out.back(), hi = pts[i];
    if (hi - lo < 1e-3 * finest) continue;
    const int k = static_cast<int>(std::ceil((hi - lo) / coarsest));
    for (int j = 1; j < k; ++j) out.push_back(lo + (hi - lo) * j / k);
    out.push_back(hi);
  }
  out.back() = b;
  return out;
}

Rule cosine_rule(double a, double b, int panels) {
  require(panels > 0, ErrorKind::InvalidArgument, "panel count must be positive");
  std::vector<double> bp(static_cast<std::size_t>(panels) + 1);
  for (int i = 0; i <= panels; ++i) bp[static_cast<std::size_t>(i)] = std::numbers::pi * i / panels;
  Rule t = composite_gauss(bp);
  const double h = 0.5 * (b - a);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double th = t.x[i];
    t.w[i] *= h * std::sin(th);
    t.x[i] = a + h * (1.0 - std::cos(th));
  }
  return t;
}

}  // namespace vesd::quad
