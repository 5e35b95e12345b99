#pragma once

#include "vesd/clt_theory.hpp"
#include "vesd/estimators.hpp"
#include "vesd/matrix_models.hpp"
#include "vesd/stats.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vesd {

/// Worker count: the request if positive, else VESD_WORKERS, else the
/// hardware concurrency.
int resolve_workers(int requested = 0);

/// Runs fn(0..count-1) over a pool. Results must be written by index; the
/// first exception by index is rethrown after all workers finish.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

struct RunSettings {
  std::uint64_t master_seed = 1;
  int trials = 200;
  int workers = 0;
  /// Largest admissible n * N.
  double budget = 1.6e7;
};

struct StatisticSummary {
  std::string name;
  MomentSummary empirical;
  double predicted_mean = 0.0;
  double predicted_variance = std::numeric_limits<double>::quiet_NaN();
  /// Operation the prediction came from.
  std::string source;
  std::optional<NormalityResult> normality;
};

/// Empirical versus predicted E[Y_i Y_j] (no conjugation).
struct PairSummary {
  std::string name;
  cplx empirical;
  double std_error = 0.0;
  cplx predicted;
  std::string source;
};

struct FrequencyCell {
  std::string label;
  std::map<std::string, double> params;
  int trials = 0;
  int count = 0;
  double frequency = 0.0;
  int failures = 0;
  std::map<std::string, double> extra;
};

struct ExperimentReport {
  std::string experiment;
  std::uint64_t master_seed = 0;
  int trials = 0;
  int workers = 1;
  double wall_seconds = 0.0;
  nlohmann::json config;
  std::vector<StatisticSummary> statistics;
  std::vector<PairSummary> pairs;
  std::vector<FrequencyCell> cells;
  /// One row per trial (or per cell-trial) of raw statistics.
  std::vector<std::string> raw_columns;
  std::vector<std::vector<double>> raw_rows;

  const StatisticSummary& statistic(const std::string& name) const;
  const FrequencyCell& cell(const std::string& label, const std::string& key, double value) const;
};

/// Timing and worker count are left out when include_timing is false, so
/// that files from equal configurations are identical.
nlohmann::json to_json(const ExperimentReport& r, bool include_timing = true);
/// Writes <dir>/<experiment>_<seed>.json and .csv (without timing); returns
/// the paths.
std::vector<std::string> write_report(const ExperimentReport& r, const std::string& dir);

struct CltCheckConfig {
  PopulationModel model = PopulationModel::identity(1);
  EntryDistribution dist;
  Index N = 1;
  /// outside: real E beyond the support; local: E in the bulk.
  CovarianceMode mode = CovarianceMode::outside;
  double E = 0.0;
  /// local: eta (0 selects N^{-1/2}) and offsets w.
  double eta = 0.0;
  std::vector<cplx> w{cplx(0.0, 1.0)};
  std::vector<DirectionVector> vectors;
  double tau = 0.01;
  RunSettings run;
};

/// Y statistics across trials: moments, E[Y_i Y_j] against
/// resolvent_covariance, and KS normality of each standardized part.
ExperimentReport run_clt_check(const CltCheckConfig& cfg);

struct LinearStatConfig {
  PopulationModel model = PopulationModel::identity(1);
  EntryDistribution dist;
  Index N = 1;
  CovarianceMode mode = CovarianceMode::global;
  /// local: E and eta (0 selects N^{-1/2}); global uses E = 0, eta = 1.
  double E = 0.0;
  double eta = 0.0;
  std::vector<TestFunction> functions;
  std::vector<DirectionVector> vectors;
  double tau = 0.01;
  RunSettings run;
};

/// Z statistics for every (function, vector) pair against linear_stat_covariance.
ExperimentReport run_linear_stat_check(const LinearStatConfig& cfg);

enum class EstimatorKind { spike, population };

struct CoverageConfig {
  EstimatorKind estimator = EstimatorKind::spike;
  /// Sigma as a function of the swept sigma.
  std::function<PopulationModel(double)> model;
  EntryDistribution dist;
  Index N = 1;
  std::vector<double> sigmas;
  DirectionVector v = DirectionVector::basis(1, 0);
  double E = 4.0;
  EstimatorOptions estimator_options;
  RunSettings run;
};

/// Sigma = diag(sigma, 1, ..., 1).
PopulationModel figure1_model(Index n, double sigma);
/// Sigma = diag(sigma, 1 x (n/2 - 1), 2 x (n/2)).
PopulationModel figure2_model(Index n, double sigma);

/// Per sigma: mean estimate, mean halfwidth and the fraction of trials with
/// |sigma_hat - sigma| <= halfwidth.
ExperimentReport run_coverage(const CoverageConfig& cfg);

struct TestVectorPair {
  std::string label;
  DirectionVector u;
  DirectionVector v;
};

struct SphericityCell {
  double x = 0.0;
  double a = 0.0;
};

struct SphericityConfig {
  Index n = 500;
  Index N = 1000;
  EntryDistribution dist;
  std::vector<SphericityCell> cells;
  std::vector<TestVectorPair> strategies;
  SphericityOptions test;
  RunSettings run;
};

/// v_x = (x, sqrt((1 - x^2)/(n - 1)), ...).
DirectionVector signal_vector(Index n, double x);
/// (e1, e2), ((e1 + e2)/sqrt2, (e1 - e2)/sqrt2), (e1, e).
std::vector<TestVectorPair> standard_strategies(Index n);

/// Misestimation frequency per (cell, strategy): acceptance when a > 0,
/// rejection when a = 0. Every strategy is tested on the same samples.
ExperimentReport run_sphericity_frequencies(const SphericityConfig& cfg);

struct RigidityConfig {
  /// Sigma for dimension n.
  std::function<PopulationModel(Index)> model;
  double d = 0.5;
  std::vector<Index> sizes{250, 500, 1000};
  EntryDistribution dist;
  /// Fraction of indices trimmed at each end of the bulk.
  double trim = 0.05;
  RunSettings run;
};

/// max and median |lambda_j - gamma_j| over bulk indices for each N, plus
/// the edge deviation |lambda_1 - gamma_1|, averaged over trials.
ExperimentReport rigidity_diagnostic(const RigidityConfig& cfg);

}  // namespace vesd
