#pragma once

#include "vesd/experiments.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vesd {

struct ReproduceOptions {
  std::uint64_t seed = 1;
  /// Paper-scale runs: 10^3 trials per table cell, n = 2000 for the figures.
  bool full = false;
  std::optional<int> trials;
  std::string out_dir = ".";
  int workers = 0;
  bool write_files = true;
};

struct BandCheck {
  std::string name;
  double value = 0.0;
  std::string band;
  bool passed = false;
};

struct ReproduceResult {
  std::string name;
  std::vector<ExperimentReport> reports;
  std::vector<BandCheck> bands;
  std::vector<std::string> files;

  bool passed() const;
};

/// name: table1, table2, figure1 or figure2.
ReproduceResult reproduce(const std::string& name, const ReproduceOptions& opts = {});

const std::vector<std::string>& reproduction_names();

}  // namespace vesd
