#include "vesd/clt_theory.hpp"
#include "vesd/errors.hpp"
#include "vesd/estimators.hpp"
#include "vesd/io.hpp"
#include "vesd/matrix_models.hpp"
#include "vesd/mp_law.hpp"
#include "vesd/reproduce.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>

namespace {

using namespace vesd;

enum Exit { ok = 0, parse_error = 2, solver_failure = 3, near_spectrum = 4, band_failed = 5 };

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::ParseError:
    case ErrorKind::InvalidArgument:
      return parse_error;
    case ErrorKind::OutsideDomain:
    case ErrorKind::NearSingular:
    case ErrorKind::ResolventDegenerate:
      return near_spectrum;
    default:
      return solver_failure;
  }
}

struct PopulationFlags {
  bool identity = false;
  Index n = 1000;
  double d = 0.5;
  std::string spectrum;
  std::vector<double> diag;
  double tau = 0.01;

  void add(CLI::App* app) {
    app->add_flag("--identity", identity, "Sigma = I");
    app->add_option("--n", n, "Dimension for --identity")->check(CLI::PositiveNumber);
    app->add_option("--d", d, "Aspect ratio n/N (overridden by a spectrum file header)")->check(CLI::PositiveNumber);
    app->add_option("--spectrum", spectrum, "Spectrum file: 'd_N=<real>' then one eigenvalue per line");
    app->add_option("--diag", diag, "Comma-separated population eigenvalues")->delimiter(',');
    app->add_option("--tau", tau, "Regularity margin");
  }

  Population build() const {
    const int chosen = int(identity) + int(!spectrum.empty()) + int(!diag.empty());
    require(chosen == 1, ErrorKind::ParseError, "give exactly one of --identity, --spectrum, --diag");
    if (identity) return Population(PopulationCovariance::identity(n), d, tau);
    if (!diag.empty())
      return Population(PopulationCovariance::diagonal(Eigen::Map<const Eigen::VectorXd>(diag.data(), static_cast<Index>(diag.size()))), d, tau);
    auto [eigs, dn] = read_spectrum(spectrum);
    return Population(PopulationCovariance::diagonal(Eigen::Map<Eigen::VectorXd>(eigs.data(), static_cast<Index>(eigs.size()))), dn, tau);
  }
};

// Output goes to a file only once it is complete.
void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(out);
  if (!os) fail(ErrorKind::ParseError, "cannot write " + out);
  os << text;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

nlohmann::json cjson(cplx z) { return nlohmann::json::array({z.real(), z.imag()}); }

cplx parse_complex(const std::string& s) {
  std::stringstream ss(s);
  std::string re, im;
  std::getline(ss, re, ',');
  std::getline(ss, im);
  try {
    return {std::stod(re), im.empty() ? 0.0 : std::stod(im)};
  } catch (const std::exception&) {
    fail(ErrorKind::ParseError, "cannot parse complex number '" + s + "' (expected re,im)");
  }
}

std::vector<double> parse_grid(const std::string& s) {
  std::stringstream ss(s);
  std::string a, h, b;
  std::getline(ss, a, ':');
  std::getline(ss, h, ':');
  std::getline(ss, b);
  double lo, step, hi;
  try {
    lo = std::stod(a);
    step = std::stod(h);
    hi = std::stod(b);
  } catch (const std::exception&) {
    fail(ErrorKind::ParseError, "grid must be start:step:stop, got '" + s + "'");
  }
  require(step > 0 && hi >= lo, ErrorKind::ParseError, "grid needs step > 0 and stop >= start");
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
  require(count <= 10000000, ErrorKind::ParseError, "grid too large");
  std::vector<double> out;
  for (long k = 0; k < count; ++k) out.push_back(lo + static_cast<double>(k) * step);
  return out;
}

void require_readable(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) fail(ErrorKind::ParseError, "no such file: " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anisotropic sample covariance spectral laws, CLT kernels, estimators and experiments"};
  app.set_config("--config", "", "TOML/INI file with option defaults (flags take precedence)");
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // mp-law
  auto* mp = app.add_subcommand("mp-law", "Deformed Marchenko-Pastur law: m2c, rho2c, edges, classical locations");
  PopulationFlags mp_pop;
  mp_pop.add(mp);
  std::string mp_grid, mp_out, mp_format = "csv";
  double mp_eta = 0.0;
  bool mp_edges = false, mp_classical = false;
  mp->add_option("--grid", mp_grid, "Energies start:step:stop");
  mp->add_option("--eta", mp_eta, "Imaginary part of the spectral argument (0: boundary value)");
  mp->add_flag("--edges-only", mp_edges, "Print the support edges only");
  mp->add_flag("--classical", mp_classical, "Include classical locations (JSON)");
  mp->add_option("--format", mp_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  mp->add_option("--out", mp_out, "Output file (default stdout)");

  // clt-kernel
  auto* ck = app.add_subcommand("clt-kernel", "CLT kernels and limiting covariances");
  PopulationFlags ck_pop;
  ck_pop.add(ck);
  std::string ck_kind = "beta-hat", ck_z1 = "4,0", ck_z2 = "4,0", ck_w1 = "0,1", ck_w2 = "0,-1", ck_v1 = "e1", ck_v2 = "e1", ck_out;
  double ck_x1 = 1.0, ck_x2 = 1.5, ck_E = 4.0, ck_kappa = 0.0;
  ck->add_option("--kind", ck_kind, "alpha, beta, alpha-hat, beta-hat, cov-global, cov-local, cov-outside, variance")
      ->check(CLI::IsMember({"alpha", "beta", "alpha-hat", "beta-hat", "cov-global", "cov-local", "cov-outside", "variance"}));
  ck->add_option("--x1", ck_x1, "Real argument x1 (alpha, beta)");
  ck->add_option("--x2", ck_x2, "Real argument x2 (alpha, beta)");
  ck->add_option("--z1", ck_z1, "Complex argument re,im");
  ck->add_option("--z2", ck_z2, "Complex argument re,im");
  ck->add_option("--E", ck_E, "Energy (cov-local, cov-outside, variance)");
  ck->add_option("--w1", ck_w1, "Local offset re,im");
  ck->add_option("--w2", ck_w2, "Local offset re,im");
  ck->add_option("--v1", ck_v1, "Test vector: eK, e, vx:<x> or file");
  ck->add_option("--v2", ck_v2, "Test vector: eK, e, vx:<x> or file");
  ck->add_option("--kappa", ck_kappa, "Constant fourth cumulant");
  ck->add_option("--out", ck_out, "Output file (default stdout)");

  // estimate
  auto* est = app.add_subcommand("estimate", "Estimate a spike strength or population eigenvalue with a confidence interval");
  std::string est_data, est_vector = "e1", est_method = "spike", est_kappa, est_out;
  double est_E = 4.0, est_alpha = 2.0, est_margin = 0.1, est_kappa_value = 0.0;
  std::optional<double> est_d;
  int est_split = 0;
  est->add_option("--data", est_data, "Data matrix file (binary VESDMAT1 or CSV), rows = features")->required();
  est->add_option("--vector", est_vector, "Known eigenvector: eK, e, vx:<x> or file");
  est->add_option("--E", est_E, "Energy above the spectrum");
  est->add_option("--alpha", est_alpha, "Number of standard normal quantiles")->check(CLI::PositiveNumber);
  est->add_option("--method", est_method, "spike (closed-form m2c) or population (plug-in m2c)")
      ->check(CLI::IsMember({"spike", "population"}));
  est->add_option("--d", est_d, "Aspect ratio for the spike method (default n/N)");
  est->add_option("--kappa", est_kappa, "gaussian-zero, pooled, per-row, per-row-max-positive or user");
  est->add_option("--kappa-value", est_kappa_value, "Fourth cumulant for --kappa user");
  est->add_option("--margin", est_margin, "Required gap between E and the spectrum");
  est->add_option("--split", est_split, "Split-sample variance with this many column blocks");
  est->add_option("--out", est_out, "Output file (default stdout)");

  // sphericity
  auto* sph = app.add_subcommand("sphericity", "Sphericity test from two test vectors");
  std::string sph_data, sph_u = "e1", sph_v = "e", sph_kappa = "per-row-max-positive", sph_out;
  double sph_margin = 1.0, sph_omega = 0.05, sph_kappa_value = 0.0;
  std::optional<double> sph_E, sph_alpha;
  sph->add_option("--data", sph_data, "Data matrix file, rows = features")->required();
  sph->add_option("--u", sph_u, "First test vector");
  sph->add_option("--v", sph_v, "Second test vector");
  sph->add_option("--E", sph_E, "Fixed energy (default lambda_1 + --E-margin)");
  sph->add_option("--E-margin", sph_margin, "Gap above lambda_1 when E is not fixed");
  sph->add_option("--omega", sph_omega, "Allowed type I error");
  sph->add_option("--alpha", sph_alpha, "Quantile override (e.g. 2)");
  sph->add_option("--kappa", sph_kappa, "Fourth-cumulant policy");
  sph->add_option("--kappa-value", sph_kappa_value, "Fourth-cumulant bound for --kappa user");
  sph->add_option("--out", sph_out, "Output file (default stdout)");

  // reproduce
  auto* rep = app.add_subcommand("reproduce", "Reproduce a table or figure; exit 5 if an acceptance band fails");
  std::string rep_name, rep_dir = ".";
  ReproduceOptions rep_opts;
  std::optional<int> rep_trials;
  rep->add_option("name", rep_name, "table1, table2, figure1 or figure2")->required()->check(CLI::IsMember(reproduction_names()));
  rep->add_flag("--full", rep_opts.full, "Paper-scale trial counts and dimensions");
  rep->add_option("--seed", rep_opts.seed, "Master seed");
  rep->add_option("--trials", rep_trials, "Trials per cell")->check(CLI::PositiveNumber);
  rep->add_option("--out-dir", rep_dir, "Directory for report files");
  rep->add_option("--workers", rep_opts.workers, "Worker threads (default VESD_WORKERS or all cores)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Write a synthetic data matrix Sigma^{1/2} X");
  std::string sim_model = "identity", sim_vector = "e1", sim_dist = "gaussian", sim_out, sim_format = "binary";
  Index sim_n = 500, sim_N = 1000;
  double sim_strength = 0.5, sim_sigma = 1.0;
  std::uint64_t sim_seed = 1;
  sim->add_option("--model", sim_model, "identity, spiked, figure1 or figure2")
      ->check(CLI::IsMember({"identity", "spiked", "figure1", "figure2"}));
  sim->add_option("--n", sim_n, "Dimension")->check(CLI::PositiveNumber);
  sim->add_option("--N", sim_N, "Sample count")->check(CLI::PositiveNumber);
  sim->add_option("--spike-strength", sim_strength, "sigma_tilde for the spiked model");
  sim->add_option("--spike-vector", sim_vector, "Spike direction");
  sim->add_option("--sigma", sim_sigma, "Swept eigenvalue for the figure models");
  sim->add_option("--dist", sim_dist, "gaussian or rademacher")->check(CLI::IsMember({"gaussian", "rademacher"}));
  sim->add_option("--seed", sim_seed, "Seed");
  sim->add_option("--out", sim_out, "Output matrix file")->required();
  sim->add_option("--format", sim_format, "binary or csv")->check(CLI::IsMember({"binary", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return parse_error;
  }

  try {
    if (*mp) {
      const Population pop = mp_pop.build();
      const PopulationSpectrum& spec = pop.spectrum;
      std::ostringstream os;
      os << std::setprecision(17);
      if (mp_edges) {
        const SupportStructure s = support_structure(spec, spec.sample_count(), false);
        if (mp_format == "json") {
          os << dump({{"edges", s.edges}});
        } else {
          os << "k,edge\n";
          for (std::size_t k = 0; k < s.edges.size(); ++k) os << k + 1 << ',' << s.edges[k] << '\n';
        }
      } else if (!mp_grid.empty()) {
        const std::vector<double> grid = parse_grid(mp_grid);
        nlohmann::json rows = nlohmann::json::array();
        if (mp_format == "csv") os << "E,eta,re_m,im_m,rho\n";
        for (double E : grid) {
          const StieltjesValue v = solve_m2c({E, mp_eta}, spec);
          const double rho = mp_eta == 0.0 ? density_rho2c(E, spec) : v.m.imag() / std::numbers::pi;
          if (mp_format == "csv")
            os << E << ',' << mp_eta << ',' << v.m.real() << ',' << v.m.imag() << ',' << rho << '\n';
          else
            rows.push_back({{"E", E}, {"eta", mp_eta}, {"m", cjson(v.m)}, {"rho", rho}});
        }
        if (mp_format == "json") os << dump({{"grid", rows}});
      } else {
        const SupportStructure s = support_structure(spec, spec.sample_count(), mp_classical);
        nlohmann::json j = to_json(s);
        if (!mp_classical) j.erase("gamma");
        os << dump(j);
      }
      emit(os.str(), mp_out);
      return ok;
    }

    if (*ck) {
      const Population pop = ck_pop.build();
      const Index n = pop.dimension();
      const DirectionVector v1 = parse_direction(ck_v1, n), v2 = parse_direction(ck_v2, n);
      const FourthCumulantProfile kappa = FourthCumulantProfile::constant(ck_kappa);
      nlohmann::json j{{"kind", ck_kind}};
      if (ck_kind == "alpha") {
        j["value"] = alpha_kernel(ck_x1, ck_x2, v1, v2, pop, kappa);
      } else if (ck_kind == "beta") {
        j["value"] = beta_kernel(ck_x1, ck_x2, v1, v2, pop);
      } else if (ck_kind == "alpha-hat") {
        j["value"] = cjson(alpha_hat(parse_complex(ck_z1), parse_complex(ck_z2), v1, v2, pop, kappa));
      } else if (ck_kind == "beta-hat") {
        j["value"] = cjson(beta_hat(parse_complex(ck_z1), parse_complex(ck_z2), v1, v2, pop));
      } else if (ck_kind == "variance") {
        j["value"] = variance_positivity(ck_E, v1, pop, kappa);
      } else {
        ResolventCovarianceQuery q;
        q.mode = ck_kind == "cov-global" ? CovarianceMode::global
                 : ck_kind == "cov-local" ? CovarianceMode::local
                                          : CovarianceMode::outside;
        q.z_i = parse_complex(ck_z1);
        q.z_j = parse_complex(ck_z2);
        q.E = ck_E;
        q.w_i = parse_complex(ck_w1);
        q.w_j = parse_complex(ck_w2);
        j["value"] = cjson(resolvent_covariance(q, v1, v2, pop, kappa));
      }
      emit(dump(j), ck_out);
      return ok;
    }

    if (*est) {
      require_readable(est_data);
      const Eigen::MatrixXd Y = read_matrix(est_data);
      const DirectionVector v = parse_direction(est_vector, Y.rows());
      const SampleEnsemble ens = SampleEnsemble::from_data(Y);
      EstimatorOptions o;
      o.alpha = est_alpha;
      o.margin = est_margin;
      o.split_samples = est_split;
      o.kappa.policy = est_kappa.empty() ? (est_method == "spike" ? KappaPolicy::pooled : KappaPolicy::per_row)
                                         : kappa_policy_from_string(est_kappa);
      o.kappa.user_value = est_kappa_value;
      const EstimateWithInterval e =
          est_method == "spike"
              ? estimate_spike_strength(ens, v, est_E, est_d.value_or(static_cast<double>(Y.rows()) / static_cast<double>(Y.cols())), o)
              : estimate_population_eigenvalue(ens, v, est_E, o);
      nlohmann::json j = to_json(e);
      j["method"] = est_method;
      emit(dump(j), est_out);
      return ok;
    }

    if (*sph) {
      require_readable(sph_data);
      const Eigen::MatrixXd Y = read_matrix(sph_data);
      SphericityOptions o;
      o.omega = sph_omega;
      o.alpha = sph_alpha;
      o.E = sph_E;
      o.E_margin = sph_margin;
      o.kappa.policy = kappa_policy_from_string(sph_kappa);
      o.kappa.user_value = sph_kappa_value;
      const SphericityVerdict v =
          sphericity_test(Y, parse_direction(sph_u, Y.rows()), parse_direction(sph_v, Y.rows()), o);
      emit(dump(to_json(v)), sph_out);
      return ok;
    }

    if (*rep) {
      rep_opts.trials = rep_trials;
      rep_opts.out_dir = rep_dir;
      const ReproduceResult r = reproduce(rep_name, rep_opts);
      for (const auto& report : r.reports)
        std::cout << report.experiment << ": " << report.trials << " trials, " << std::fixed
                  << std::setprecision(1) << report.wall_seconds << " s\n";
      std::cout << std::defaultfloat << std::setprecision(6);
      for (const auto& b : r.bands)
        std::cout << (b.passed ? "PASS " : "FAIL ") << b.name << ": " << b.value << " (" << b.band << ")\n";
      for (const auto& f : r.files) std::cout << "wrote " << f << '\n';
      return r.passed() ? ok : band_failed;
    }

    if (*sim) {
      const EntryDistribution dist = sim_dist == "gaussian" ? EntryDistribution::gaussian() : EntryDistribution::rademacher();
      const PopulationModel model =
          sim_model == "identity" ? PopulationModel::identity(sim_n)
          : sim_model == "spiked" ? PopulationModel::spiked(sim_n, {sim_strength}, {parse_direction(sim_vector, sim_n)})
          : sim_model == "figure1" ? figure1_model(sim_n, sim_sigma)
                                   : figure2_model(sim_n, sim_sigma);
      const SampleEnsemble ens = sample_ensemble(model, sim_N, dist, sim_seed);
      write_matrix(sim_out, ens.Y(), sim_format == "csv" ? MatrixFormat::csv : MatrixFormat::binary);
      return ok;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return solver_failure;
  }
  return ok;
}
