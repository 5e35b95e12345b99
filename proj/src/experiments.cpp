#include "vesd/experiments.hpp"

#include "vesd/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

namespace vesd {

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("VESD_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  workers = std::clamp(resolve_workers(workers), 1, count);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  auto loop = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    loop();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

const StatisticSummary& ExperimentReport::statistic(const std::string& name) const {
  for (const auto& s : statistics)
    if (s.name == name) return s;
  fail(ErrorKind::InvalidArgument, "report has no statistic '" + name + "'");
}

const FrequencyCell& ExperimentReport::cell(const std::string& label, const std::string& key,
                                            double value) const {
  for (const auto& c : cells) {
    const auto it = c.params.find(key);
    if (c.label == label && it != c.params.end() && std::abs(it->second - value) <= 1e-12 * std::max(1.0, std::abs(value)))
      return c;
  }
  std::ostringstream os;
  os << "report has no cell " << label << " with " << key << " = " << value;
  fail(ErrorKind::InvalidArgument, os.str());
}

namespace {

using Clock = std::chrono::steady_clock;

void check_budget(Index n, Index N, const RunSettings& run, bool distributional) {
  const double size = static_cast<double>(n) * static_cast<double>(N);
  if (size > run.budget) {
    std::ostringstream os;
    os << "n * N = " << size << " exceeds the budget " << run.budget;
    fail(ErrorKind::BudgetExceeded, os.str());
  }
  require(run.trials > 0, ErrorKind::InvalidArgument, "trial count must be positive");
  if (distributional)
    require(run.trials >= 30, ErrorKind::InvalidArgument, "distributional checks need at least 30 trials");
}

double aspect(const PopulationModel& model, Index N) {
  return static_cast<double>(model.dimension()) / static_cast<double>(N);
}

nlohmann::json cplx_json(cplx z) { return nlohmann::json::array({z.real(), z.imag()}); }

nlohmann::json number(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

std::string vector_label(const DirectionVector& v) {
  const Eigen::VectorXd& c = v.coordinates();
  Index i;
  if (std::abs(c.cwiseAbs().maxCoeff(&i) - 1.0) <= 1e-12) return "e" + std::to_string(i + 1);
  if ((c.array() - c(0)).abs().maxCoeff() <= 1e-12 && c(0) > 0) return "e";
  return "v";
}

std::string entry_label(const EntryDistribution& d) {
  switch (d.kind) {
    case EntryDistribution::Kind::gaussian: return "gaussian";
    case EntryDistribution::Kind::rademacher: return "rademacher";
    case EntryDistribution::Kind::custom: return "custom";
  }
  return "?";
}

void fill_summary(StatisticSummary& s, const std::vector<double>& samples, bool normality) {
  s.empirical = summarize(samples);
  if (normality && samples.size() >= 30 && s.empirical.variance > 0) s.normality = normality_test(samples);
}

PairSummary pair_summary(const std::string& name, const std::vector<cplx>& a,
                         const std::vector<cplx>& b, cplx predicted, const std::string& source) {
  std::vector<double> re(a.size()), im(a.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    const cplx p = a[t] * b[t];
    re[t] = p.real();
    im[t] = p.imag();
  }
  const MomentSummary sr = summarize(re), si = summarize(im);
  PairSummary out;
  out.name = name;
  out.empirical = {sr.mean, si.mean};
  out.std_error = std::hypot(sr.std_error, si.std_error);
  out.predicted = predicted;
  out.source = source;
  return out;
}

}  // namespace

nlohmann::json to_json(const ExperimentReport& r, bool include_timing) {
  nlohmann::json j;
  j["experiment"] = r.experiment;
  j["master_seed"] = r.master_seed;
  j["trials"] = r.trials;
  if (include_timing) {
    j["workers"] = r.workers;
    j["wall_seconds"] = r.wall_seconds;
  }
  j["config"] = r.config;
  j["statistics"] = nlohmann::json::array();
  for (const auto& s : r.statistics) {
    nlohmann::json e{{"name", s.name},
                     {"count", s.empirical.count},
                     {"mean", s.empirical.mean},
                     {"variance", s.empirical.variance},
                     {"std_error", s.empirical.std_error},
                     {"variance_std_error", s.empirical.variance_std_error},
                     {"predicted_mean", s.predicted_mean},
                     {"predicted_variance", number(s.predicted_variance)},
                     {"source", s.source}};
    if (s.normality) e["normality"] = {{"ks_statistic", s.normality->statistic}, {"p_value", s.normality->p_value}};
    j["statistics"].push_back(e);
  }
  j["pairs"] = nlohmann::json::array();
  for (const auto& p : r.pairs)
    j["pairs"].push_back({{"name", p.name},
                          {"empirical", cplx_json(p.empirical)},
                          {"std_error", p.std_error},
                          {"predicted", cplx_json(p.predicted)},
                          {"source", p.source}});
  j["cells"] = nlohmann::json::array();
  for (const auto& c : r.cells)
    j["cells"].push_back({{"label", c.label},
                          {"params", c.params},
                          {"trials", c.trials},
                          {"count", c.count},
                          {"frequency", c.frequency},
                          {"failures", c.failures},
                          {"extra", c.extra}});
  return j;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

std::vector<std::string> write_report(const ExperimentReport& r, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string stem = (fs::path(dir) / (r.experiment + "_" + std::to_string(r.master_seed))).string();
  std::vector<std::string> paths{stem + ".json", stem + ".csv"};
  {
    std::ofstream os(paths[0]);
    require(static_cast<bool>(os), ErrorKind::InvalidArgument, "cannot write " + paths[0]);
    os << std::setw(2) << to_json(r, false) << '\n';
  }
  auto write_rows = [](const std::string& path, const std::vector<std::string>& cols,
                       const std::vector<std::vector<double>>& rows) {
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorKind::InvalidArgument, "cannot write " + path);
    os << std::setprecision(17);
    for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << csv_field(cols[c]);
    os << '\n';
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c];
      os << '\n';
    }
  };
  if (!r.cells.empty()) {
    std::ofstream os(paths[1]);
    require(static_cast<bool>(os), ErrorKind::InvalidArgument, "cannot write " + paths[1]);
    std::vector<std::string> keys, extras;
    for (const auto& c : r.cells) {
      for (const auto& [k, v] : c.params)
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
      for (const auto& [k, v] : c.extra)
        if (std::find(extras.begin(), extras.end(), k) == extras.end()) extras.push_back(k);
    }
    os << std::setprecision(17) << "label";
    for (const auto& k : keys) os << ',' << csv_field(k);
    os << ",trials,count,frequency,failures";
    for (const auto& k : extras) os << ',' << csv_field(k);
    os << '\n';
    for (const auto& c : r.cells) {
      os << csv_field(c.label);
      for (const auto& k : keys) {
        const auto it = c.params.find(k);
        os << ',';
        if (it != c.params.end()) os << it->second;
      }
      os << ',' << c.trials << ',' << c.count << ',' << c.frequency << ',' << c.failures;
      for (const auto& k : extras) {
        const auto it = c.extra.find(k);
        os << ',';
        if (it != c.extra.end()) os << it->second;
      }
      os << '\n';
    }
    if (!r.raw_rows.empty()) {
      paths.push_back(stem + "_trials.csv");
      write_rows(paths.back(), r.raw_columns, r.raw_rows);
    }
  } else {
    write_rows(paths[1], r.raw_columns, r.raw_rows);
  }
  return paths;
}

ExperimentReport run_clt_check(const CltCheckConfig& cfg) {
  const auto start = Clock::now();
  const Index n = cfg.model.dimension();
  check_budget(n, cfg.N, cfg.run, true);
  require(!cfg.vectors.empty(), ErrorKind::InvalidArgument, "no test vectors");
  require(cfg.mode != CovarianceMode::global, ErrorKind::InvalidArgument,
          "run_clt_check supports the local and outside modes");
  const Population pop = cfg.model.population(aspect(cfg.model, cfg.N), cfg.tau);
  const FourthCumulantProfile& kappa = cfg.dist.kappa4;
  const bool outside = cfg.mode == CovarianceMode::outside;
  const double eta = cfg.eta > 0 ? cfg.eta : 1.0 / std::sqrt(static_cast<double>(cfg.N));

  struct Slot {
    std::string name;
    std::size_t v;
    cplx w;
  };
  std::vector<Slot> slots;
  for (std::size_t k = 0; k < cfg.vectors.size(); ++k) {
    const std::string base = "Y(" + vector_label(cfg.vectors[k]) + (cfg.vectors.size() > 1 ? "#" + std::to_string(k + 1) : "");
    if (outside) {
      slots.push_back({base + ")", k, 0.0});
    } else {
      for (std::size_t l = 0; l < cfg.w.size(); ++l) {
        std::ostringstream os;
        os << base << ",w=" << cfg.w[l].real() << (cfg.w[l].imag() < 0 ? "" : "+") << cfg.w[l].imag() << "i)";
        slots.push_back({os.str(), k, cfg.w[l]});
      }
    }
  }

  const int T = cfg.run.trials;
  std::vector<std::vector<cplx>> values(slots.size(), std::vector<cplx>(static_cast<std::size_t>(T)));
  parallel_for(T, cfg.run.workers, [&](int t) {
    const SampleEnsemble ens = sample_ensemble(cfg.model, cfg.N, cfg.dist,
                                               trial_seed(cfg.run.master_seed, static_cast<std::uint64_t>(t)));
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const DirectionVector& v = cfg.vectors[slots[s].v];
      values[s][static_cast<std::size_t>(t)] =
          outside ? cplx(y_statistic_outside(ens, v, cfg.E, pop))
                  : y_statistic(ens, v, cfg.E, eta, slots[s].w, pop);
    }
  });

  auto predicted = [&](const Slot& a, const Slot& b, bool conj_b) {
    ResolventCovarianceQuery q;
    q.mode = cfg.mode;
    q.E = cfg.E;
    q.w_i = a.w;
    q.w_j = conj_b ? std::conj(b.w) : b.w;
    return resolvent_covariance(q, cfg.vectors[a.v], cfg.vectors[b.v], pop, kappa);
  };

  ExperimentReport r;
  r.experiment = "clt_check";
  r.master_seed = cfg.run.master_seed;
  r.trials = T;
  r.workers = resolve_workers(cfg.run.workers);
  r.config = {{"mode", outside ? "outside" : "local"}, {"n", n}, {"N", cfg.N},
              {"E", cfg.E}, {"eta", outside ? 0.0 : eta}, {"entries", entry_label(cfg.dist)}};
  for (const auto& slot : slots) {
    const auto& vals = values[&slot - slots.data()];
    std::vector<double> re(vals.size()), im(vals.size());
    for (std::size_t t = 0; t < vals.size(); ++t) {
      re[t] = vals[t].real();
      im[t] = vals[t].imag();
    }
    const cplx c_conj = predicted(slot, slot, true);
    StatisticSummary s;
    s.source = "resolvent_covariance";
    if (outside) {
      s.name = slot.name;
      s.predicted_variance = c_conj.real();
      fill_summary(s, re, true);
      r.statistics.push_back(s);
      continue;
    }
    const cplx c_plain = predicted(slot, slot, false);
    s.name = "Re " + slot.name;
    s.predicted_variance = 0.5 * (c_conj + c_plain).real();
    fill_summary(s, re, true);
    r.statistics.push_back(s);
    s.name = "Im " + slot.name;
    s.predicted_variance = 0.5 * (c_conj - c_plain).real();
    fill_summary(s, im, true);
    r.statistics.push_back(s);
  }
  for (std::size_t a = 0; a < slots.size(); ++a)
    for (std::size_t b = a; b < slots.size(); ++b)
      r.pairs.push_back(pair_summary("E[" + slots[a].name + " " + slots[b].name + "]", values[a], values[b],
                                     predicted(slots[a], slots[b], false), "resolvent_covariance"));

  r.raw_columns = {"trial"};
  for (const auto& slot : slots) {
    r.raw_columns.push_back("re " + slot.name);
    if (!outside) r.raw_columns.push_back("im " + slot.name);
  }
  for (int t = 0; t < T; ++t) {
    std::vector<double> row{static_cast<double>(t)};
    for (std::size_t s = 0; s < slots.size(); ++s) {
      row.push_back(values[s][static_cast<std::size_t>(t)].real());
      if (!outside) row.push_back(values[s][static_cast<std::size_t>(t)].imag());
    }
    r.raw_rows.push_back(std::move(row));
  }
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

ExperimentReport run_linear_stat_check(const LinearStatConfig& cfg) {
  const auto start = Clock::now();
  const Index n = cfg.model.dimension();
  check_budget(n, cfg.N, cfg.run, true);
  require(!cfg.vectors.empty() && !cfg.functions.empty(), ErrorKind::InvalidArgument,
          "need test vectors and test functions");
  const Population pop = cfg.model.population(aspect(cfg.model, cfg.N), cfg.tau);
  const bool local = cfg.mode == CovarianceMode::local;
  require(local || cfg.mode == CovarianceMode::global, ErrorKind::InvalidArgument,
          "linear statistics support the global and local modes");
  const double E = local ? cfg.E : 0.0;
  const double eta = local ? (cfg.eta > 0 ? cfg.eta : 1.0 / std::sqrt(static_cast<double>(cfg.N))) : 1.0;

  struct Slot {
    std::string name;
    std::size_t f, v;
    double centering;
  };
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < cfg.functions.size(); ++i)
    for (std::size_t k = 0; k < cfg.vectors.size(); ++k)
      slots.push_back({"Z(f" + std::to_string(i + 1) + "," + vector_label(cfg.vectors[k]) + ")", i, k,
                       z_centering(cfg.vectors[k], cfg.functions[i], E, eta, pop)});

  const int T = cfg.run.trials;
  std::vector<std::vector<double>> values(slots.size(), std::vector<double>(static_cast<std::size_t>(T)));
  parallel_for(T, cfg.run.workers, [&](int t) {
    const SampleEnsemble ens = sample_ensemble(cfg.model, cfg.N, cfg.dist,
                                               trial_seed(cfg.run.master_seed, static_cast<std::uint64_t>(t)));
    for (std::size_t s = 0; s < slots.size(); ++s)
      values[s][static_cast<std::size_t>(t)] = z_statistic_centered(
          ens, cfg.vectors[slots[s].v], cfg.functions[slots[s].f], E, eta, slots[s].centering);
  });

  const LinearStatQuery q{cfg.mode, E, eta};
  auto predicted = [&](const Slot& a, const Slot& b) {
    return linear_stat_covariance(q, cfg.functions[a.f], cfg.functions[b.f], cfg.vectors[a.v],
                                  cfg.vectors[b.v], pop, cfg.dist.kappa4)
        .value;
  };

  ExperimentReport r;
  r.experiment = "linear_stat_check";
  r.master_seed = cfg.run.master_seed;
  r.trials = T;
  r.workers = resolve_workers(cfg.run.workers);
  r.config = {{"mode", local ? "local" : "global"}, {"n", n}, {"N", cfg.N},
              {"E", E}, {"eta", eta}, {"entries", entry_label(cfg.dist)}};
  for (std::size_t s = 0; s < slots.size(); ++s) {
    StatisticSummary st;
    st.name = slots[s].name;
    st.source = "linear_stat_covariance";
    st.predicted_variance = predicted(slots[s], slots[s]);
    const bool degenerate = std::all_of(values[s].begin(), values[s].end(), [](double x) { return x == 0.0; });
    fill_summary(st, values[s], !degenerate);
    r.statistics.push_back(st);
  }
  for (std::size_t a = 0; a < slots.size(); ++a)
    for (std::size_t b = a + 1; b < slots.size(); ++b) {
      std::vector<cplx> va(values[a].begin(), values[a].end()), vb(values[b].begin(), values[b].end());
      r.pairs.push_back(pair_summary("E[" + slots[a].name + " " + slots[b].name + "]", va, vb,
                                     predicted(slots[a], slots[b]), "linear_stat_covariance"));
    }
  r.raw_columns = {"trial"};
  for (const auto& s : slots) r.raw_columns.push_back(s.name);
  for (int t = 0; t < T; ++t) {
    std::vector<double> row{static_cast<double>(t)};
    for (const auto& v : values) row.push_back(v[static_cast<std::size_t>(t)]);
    r.raw_rows.push_back(std::move(row));
  }
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

PopulationModel figure1_model(Index n, double sigma) {
  Eigen::VectorXd diag = Eigen::VectorXd::Ones(n);
  diag(0) = sigma;
  return PopulationModel::diagonal(diag);
}

PopulationModel figure2_model(Index n, double sigma) {
  require(n >= 4 && n % 2 == 0, ErrorKind::InvalidArgument, "dimension must be even and at least 4");
  Eigen::VectorXd diag(n);
  diag.head(n / 2).setOnes();
  diag.tail(n / 2).setConstant(2.0);
  diag(0) = sigma;
  return PopulationModel::diagonal(diag);
}

ExperimentReport run_coverage(const CoverageConfig& cfg) {
  const auto start = Clock::now();
  require(static_cast<bool>(cfg.model), ErrorKind::InvalidArgument, "coverage needs a model");
  require(!cfg.sigmas.empty(), ErrorKind::InvalidArgument, "empty sigma grid");
  const int T = cfg.run.trials;
  const auto cells = static_cast<int>(cfg.sigmas.size());
  std::vector<PopulationModel> models;
  for (double s : cfg.sigmas) models.push_back(cfg.model(s));
  for (const auto& m : models) check_budget(m.dimension(), cfg.N, cfg.run, false);

  struct Outcome {
    bool ok = false;
    double point = 0.0, halfwidth = 0.0;
  };
  std::vector<Outcome> out(static_cast<std::size_t>(cells * T));
  parallel_for(cells * T, cfg.run.workers, [&](int idx) {
    const int c = idx / T;
    const SampleEnsemble ens = sample_ensemble(models[static_cast<std::size_t>(c)], cfg.N, cfg.dist,
                                               trial_seed(cfg.run.master_seed, static_cast<std::uint64_t>(idx)));
    Outcome& o = out[static_cast<std::size_t>(idx)];
    try {
      const EstimateWithInterval e =
          cfg.estimator == EstimatorKind::spike
              ? estimate_spike_strength(ens, cfg.v, cfg.E, aspect(models[0], cfg.N), cfg.estimator_options)
              : estimate_population_eigenvalue(ens, cfg.v, cfg.E, cfg.estimator_options);
      o = {true, e.point, e.halfwidth};
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::OutsideDomain && e.kind() != ErrorKind::ResolventDegenerate) throw;
    }
  });

  ExperimentReport r;
  r.experiment = cfg.estimator == EstimatorKind::spike ? "coverage_spike" : "coverage_population";
  r.master_seed = cfg.run.master_seed;
  r.trials = T;
  r.workers = resolve_workers(cfg.run.workers);
  r.config = {{"n", models[0].dimension()}, {"N", cfg.N}, {"E", cfg.E},
              {"alpha", cfg.estimator_options.alpha},
              {"kappa_policy", to_string(cfg.estimator_options.kappa.policy)},
              {"entries", entry_label(cfg.dist)}, {"vector", vector_label(cfg.v)}};
  r.raw_columns = {"sigma", "trial", "ok", "point", "halfwidth", "covered"};
  for (int c = 0; c < cells; ++c) {
    const double sigma = cfg.sigmas[static_cast<std::size_t>(c)];
    FrequencyCell cell;
    cell.label = "coverage";
    cell.params["sigma"] = sigma;
    cell.trials = T;
    std::vector<double> points, widths;
    for (int t = 0; t < T; ++t) {
      const Outcome& o = out[static_cast<std::size_t>(c * T + t)];
      const bool covered = o.ok && std::abs(o.point - sigma) <= o.halfwidth;
      if (!o.ok) ++cell.failures;
      if (covered) ++cell.count;
      if (o.ok) {
        points.push_back(o.point);
        widths.push_back(o.halfwidth);
      }
      r.raw_rows.push_back({sigma, static_cast<double>(t), o.ok ? 1.0 : 0.0, o.point, o.halfwidth, covered ? 1.0 : 0.0});
    }
    cell.frequency = static_cast<double>(cell.count) / T;
    if (!points.empty()) {
      const MomentSummary sp = summarize(points), sw = summarize(widths);
      cell.extra["mean_point"] = sp.mean;
      cell.extra["sd_point"] = std::sqrt(sp.variance);
      cell.extra["mean_halfwidth"] = sw.mean;
      cell.extra["bias"] = sp.mean - sigma;
    }
    r.cells.push_back(cell);
  }
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

DirectionVector signal_vector(Index n, double x) {
  require(n >= 2 && std::abs(x) <= 1.0, ErrorKind::InvalidArgument, "need n >= 2 and |x| <= 1");
  Eigen::VectorXd v = Eigen::VectorXd::Constant(n, std::sqrt((1.0 - x * x) / static_cast<double>(n - 1)));
  v(0) = x;
  return DirectionVector::normalized(v);
}

std::vector<TestVectorPair> standard_strategies(Index n) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n), m = Eigen::VectorXd::Zero(n);
  p(0) = p(1) = m(0) = 1.0;
  m(1) = -1.0;
  return {{"e1,e2", DirectionVector::basis(n, 0), DirectionVector::basis(n, 1)},
          {"(e1+e2)/sqrt2,(e1-e2)/sqrt2", DirectionVector::normalized(p), DirectionVector::normalized(m)},
          {"e1,e", DirectionVector::basis(n, 0), DirectionVector::uniform(n)}};
}

ExperimentReport run_sphericity_frequencies(const SphericityConfig& cfg) {
  const auto start = Clock::now();
  check_budget(cfg.n, cfg.N, cfg.run, false);
  require(!cfg.cells.empty() && !cfg.strategies.empty(), ErrorKind::InvalidArgument,
          "need cells and test-vector strategies");
  const int T = cfg.run.trials;
  const auto C = static_cast<int>(cfg.cells.size());
  const auto S = cfg.strategies.size();
  std::vector<PopulationModel> models;
  for (const auto& c : cfg.cells)
    models.push_back(c.a == 0.0 ? PopulationModel::identity(cfg.n)
                                : PopulationModel::spiked(cfg.n, {c.a}, {signal_vector(cfg.n, c.x)}));

  // 0 accept, 1 reject, -1 failed
  std::vector<std::vector<int>> decision(static_cast<std::size_t>(C * T), std::vector<int>(S, -1));
  std::vector<std::vector<std::array<double, 2>>> stat(static_cast<std::size_t>(C * T),
                                                       std::vector<std::array<double, 2>>(S));
  parallel_for(C * T, cfg.run.workers, [&](int idx) {
    const SampleEnsemble ens = sample_ensemble(models[static_cast<std::size_t>(idx / T)], cfg.N, cfg.dist,
                                               trial_seed(cfg.run.master_seed, static_cast<std::uint64_t>(idx)));
    for (std::size_t s = 0; s < S; ++s) {
      try {
        const SphericityVerdict v = sphericity_test(ens, cfg.strategies[s].u, cfg.strategies[s].v, cfg.test);
        decision[static_cast<std::size_t>(idx)][s] = v.decision == Decision::reject ? 1 : 0;
        stat[static_cast<std::size_t>(idx)][s] = {v.statistic, v.threshold};
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::OutsideDomain) throw;
      }
    }
  });

  ExperimentReport r;
  r.experiment = "sphericity_frequencies";
  r.master_seed = cfg.run.master_seed;
  r.trials = T;
  r.workers = resolve_workers(cfg.run.workers);
  r.config = {{"n", cfg.n}, {"N", cfg.N}, {"omega", cfg.test.omega}, {"entries", entry_label(cfg.dist)}};
  if (cfg.test.E) r.config["E"] = *cfg.test.E; else r.config["E_margin"] = cfg.test.E_margin;
  if (cfg.test.alpha) r.config["alpha"] = *cfg.test.alpha;
  r.raw_columns = {"x", "a", "strategy", "trial", "statistic", "threshold", "decision"};
  for (int c = 0; c < C; ++c) {
    const auto& cell_in = cfg.cells[static_cast<std::size_t>(c)];
    for (std::size_t s = 0; s < S; ++s) {
      FrequencyCell cell;
      cell.label = cfg.strategies[s].label;
      cell.params = {{"x", cell_in.x}, {"a", cell_in.a}};
      cell.trials = T;
      const int wrong = cell_in.a == 0.0 ? 1 : 0;
      for (int t = 0; t < T; ++t) {
        const auto idx = static_cast<std::size_t>(c * T + t);
        const int d = decision[idx][s];
        if (d < 0) ++cell.failures;
        if (d == wrong) ++cell.count;
        r.raw_rows.push_back({cell_in.x, cell_in.a, static_cast<double>(s), static_cast<double>(t),
                              stat[idx][s][0], stat[idx][s][1], static_cast<double>(d)});
      }
      cell.frequency = static_cast<double>(cell.count) / T;
      r.cells.push_back(cell);
    }
  }
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

ExperimentReport rigidity_diagnostic(const RigidityConfig& cfg) {
  const auto start = Clock::now();
  require(static_cast<bool>(cfg.model), ErrorKind::InvalidArgument, "rigidity needs a model");
  require(cfg.trim >= 0 && cfg.trim < 0.5, ErrorKind::InvalidArgument, "trim must lie in [0, 0.5)");
  const int T = cfg.run.trials;
  ExperimentReport r;
  r.experiment = "rigidity";
  r.master_seed = cfg.run.master_seed;
  r.trials = T;
  r.workers = resolve_workers(cfg.run.workers);
  r.config = {{"d", cfg.d}, {"trim", cfg.trim}, {"entries", entry_label(cfg.dist)}};
  r.raw_columns = {"N", "trial", "median", "max", "edge"};
  double previous = 0.0;
  for (std::size_t k = 0; k < cfg.sizes.size(); ++k) {
    const Index N = cfg.sizes[k];
    const auto n = static_cast<Index>(std::llround(cfg.d * static_cast<double>(N)));
    check_budget(n, N, cfg.run, false);
    const PopulationModel model = cfg.model(n);
    const Population pop = model.population(static_cast<double>(n) / static_cast<double>(N));
    const SupportStructure sup = support_structure(pop.spectrum, N, true);
    const std::vector<double>& gamma = sup.classical_locations;
    const auto r_count = static_cast<Index>(gamma.size());
    const auto lo = static_cast<Index>(std::ceil(cfg.trim * static_cast<double>(r_count)));
    const auto hi = std::max(lo + 1, static_cast<Index>(std::floor((1.0 - cfg.trim) * static_cast<double>(r_count))));

    std::vector<std::array<double, 3>> dev(static_cast<std::size_t>(T));
    parallel_for(T, cfg.run.workers, [&](int t) {
      const SampleEnsemble ens = sample_ensemble(
          model, N, cfg.dist, trial_seed(cfg.run.master_seed, k * 1000003ULL + static_cast<std::uint64_t>(t)));
      std::vector<double> devs;
      for (Index j = lo; j < hi; ++j)
        devs.push_back(std::abs(ens.eigenvalues()(j) - gamma[static_cast<std::size_t>(j)]));
      dev[static_cast<std::size_t>(t)] = {median(devs), *std::max_element(devs.begin(), devs.end()),
                                          std::abs(ens.eigenvalues()(0) - gamma[0])};
    });
    FrequencyCell cell;
    cell.label = "rigidity";
    cell.params["N"] = static_cast<double>(N);
    cell.trials = T;
    double med = 0.0, mx = 0.0, edge = 0.0;
    for (int t = 0; t < T; ++t) {
      const auto& d = dev[static_cast<std::size_t>(t)];
      med += d[0] / T;
      mx += d[1] / T;
      edge += d[2] / T;
      r.raw_rows.push_back({static_cast<double>(N), static_cast<double>(t), d[0], d[1], d[2]});
    }
    cell.extra = {{"median", med}, {"max", mx}, {"edge", edge}, {"n", static_cast<double>(n)}};
    if (k > 0) cell.extra["shrink_factor"] = previous / med;
    previous = med;
    r.cells.push_back(cell);
  }
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

}  // namespace vesd
