#include "vesd/reproduce.hpp"

#include "vesd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vesd {

bool ReproduceResult::passed() const {
  return std::all_of(bands.begin(), bands.end(), [](const BandCheck& b) { return b.passed; });
}

const std::vector<std::string>& reproduction_names() {
  static const std::vector<std::string> names{"table1", "table2", "figure1", "figure2"};
  return names;
}

namespace {

constexpr Index kTableN = 500;

std::string fmt(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

BandCheck at_most(const std::string& name, double value, double bound) {
  return {name, value, "<= " + fmt(bound), value <= bound};
}

BandCheck at_least(const std::string& name, double value, double bound) {
  return {name, value, ">= " + fmt(bound), value >= bound};
}

SphericityConfig table_config(const ReproduceOptions& opts, int default_trials) {
  SphericityConfig cfg;
  cfg.n = kTableN;
  cfg.N = 2 * kTableN;
  cfg.test.E = 4.0;
  cfg.test.alpha = 2.0;
  cfg.test.omega = 0.05;
  cfg.run.master_seed = opts.seed;
  cfg.run.workers = opts.workers;
  cfg.run.trials = opts.trials.value_or(opts.full ? 1000 : default_trials);
  return cfg;
}

ReproduceResult table1(const ReproduceOptions& opts) {
  SphericityConfig cfg = table_config(opts, 200);
  const double x0 = 1.0 / std::sqrt(static_cast<double>(kTableN));
  for (double x : {x0, 0.1, 0.125, 0.15, 0.175, 0.2, 0.225, 0.25, 0.5}) cfg.cells.push_back({x, 1.0});
  cfg.strategies = standard_strategies(kTableN);
  ExperimentReport rep = run_sphericity_frequencies(cfg);
  rep.experiment = "table1";

  ReproduceResult out;
  out.name = "table1";
  for (double x : {x0, 0.2, 0.5})
    out.bands.push_back(at_most("(e1,e) at x=" + fmt(x), rep.cell("e1,e", "x", x).frequency, 0.05));
  out.bands.push_back(at_least("(e1,e2) at x=n^-1/2", rep.cell("e1,e2", "x", x0).frequency, 0.85));
  out.bands.push_back(at_most("(e1,e2) at x=0.5", rep.cell("e1,e2", "x", 0.5).frequency, 0.05));
  out.reports.push_back(std::move(rep));
  return out;
}

ReproduceResult table2(const ReproduceOptions& opts) {
  SphericityConfig cfg = table_config(opts, 200);
  for (double a : {0.025, 0.05, 0.075, 0.1, 0.125, 0.15, 0.25, 0.5, 0.75, 1.0}) cfg.cells.push_back({0.2, a});
  const auto all = standard_strategies(kTableN);
  cfg.strategies = {all[0], all[2]};
  ExperimentReport rep = run_sphericity_frequencies(cfg);
  rep.experiment = "table2";

  ReproduceResult out;
  out.name = "table2";
  const double f01 = rep.cell("e1,e", "a", 0.1).frequency;
  const double f025 = rep.cell("e1,e", "a", 0.25).frequency;
  const double f1 = rep.cell("e1,e", "a", 1.0).frequency;
  out.bands.push_back(at_most("(e1,e) at a=0.25", f025, 0.10));
  out.bands.push_back(at_most("(e1,e) increase a=0.1 -> 0.25", f025 - f01, 0.1));
  out.bands.push_back(at_most("(e1,e) increase a=0.25 -> 1", f1 - f025, 0.1));
  out.bands.push_back(at_most("(e1,e2) at a=1", rep.cell("e1,e2", "a", 1.0).frequency, 0.10));
  out.reports.push_back(std::move(rep));
  return out;
}

void coverage_bands(ReproduceResult& out, const ExperimentReport& rep, const std::string& tag,
                    std::optional<double> min_coverage) {
  for (const auto& c : rep.cells) {
    const double sigma = c.params.at("sigma");
    const std::string where = tag + " sigma=" + fmt(sigma);
    if (min_coverage) out.bands.push_back(at_least(where + " coverage", c.frequency, *min_coverage));
    const auto bias = c.extra.find("bias");
    const auto hw = c.extra.find("mean_halfwidth");
    if (bias == c.extra.end()) {
      out.bands.push_back({where + " estimates", 0.0, "> 0 successful trials", false});
      continue;
    }
    out.bands.push_back(at_most(where + " |bias| / (2 halfwidth)", std::abs(bias->second) / (2.0 * hw->second), 1.0));
  }
}

ReproduceResult figure(const ReproduceOptions& opts, bool second) {
  const Index n = opts.full ? 2000 : 500;
  ReproduceResult out;
  out.name = second ? "figure2" : "figure1";
  for (bool rademacher : {false, true}) {
    CoverageConfig cfg;
    cfg.estimator = second ? EstimatorKind::population : EstimatorKind::spike;
    cfg.model = [n, second](double s) { return second ? figure2_model(n, s) : figure1_model(n, s); };
    cfg.dist = rademacher ? EntryDistribution::rademacher() : EntryDistribution::gaussian();
    cfg.N = 2 * n;
    cfg.sigmas = second ? std::vector<double>{0.5, 0.75, 1.0, 1.25, 1.5} : std::vector<double>{1.1, 1.3, 1.5};
    cfg.v = DirectionVector::basis(n, 0);
    cfg.E = second ? 6.0 : 4.0;
    cfg.estimator_options.alpha = 2.0;
    cfg.estimator_options.kappa.policy = second ? KappaPolicy::per_row : KappaPolicy::pooled;
    cfg.run.master_seed = opts.seed;
    cfg.run.workers = opts.workers;
    cfg.run.trials = opts.trials.value_or(second ? 200 : 500);
    ExperimentReport rep = run_coverage(cfg);
    const std::string tag = rademacher ? "rademacher" : "gaussian";
    rep.experiment = out.name + "_" + tag;
    coverage_bands(out, rep, tag, second ? std::nullopt : std::optional<double>(opts.full ? 0.93 : 0.90));
    out.reports.push_back(std::move(rep));
  }
  return out;
}

}  // namespace

ReproduceResult reproduce(const std::string& name, const ReproduceOptions& opts) {
  ReproduceResult out;
  if (name == "table1") out = table1(opts);
  else if (name == "table2") out = table2(opts);
  else if (name == "figure1") out = figure(opts, false);
  else if (name == "figure2") out = figure(opts, true);
  else fail(ErrorKind::InvalidArgument, "unknown reproduction '" + name + "'");
  if (opts.write_files)
    for (const auto& r : out.reports) {
      const auto paths = write_report(r, opts.out_dir);
      out.files.insert(out.files.end(), paths.begin(), paths.end());
    }
  return out;
}

}  // namespace vesd
