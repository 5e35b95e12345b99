#pragma once

#include "vesd/clt_theory.hpp"
#include "vesd/estimators.hpp"
#include "vesd/mp_law.hpp"

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace vesd {

enum class MatrixFormat { binary, csv };

/// Binary layout (little endian): "VESDMAT1", u64 n, u64 N, u32 dtype = 1
/// (f64), u32 reserved, then n * N doubles row-major. Anything without the
/// magic is read as CSV with one matrix row per line.
void write_matrix(const std::string& path, const Eigen::MatrixXd& M, MatrixFormat format = MatrixFormat::binary);
Eigen::MatrixXd read_matrix(const std::string& path);

/// "d_N=<real>" on the first line, then one eigenvalue per line; '#' starts
/// a comment.
std::pair<std::vector<double>, double> read_spectrum(const std::string& path);
void write_spectrum(const std::string& path, const std::vector<double>& eigenvalues, double d);

/// "eK" (1-based basis vector), "e" (uniform), "vx:<x>" (signal vector with
/// first coordinate x), or a file of n reals (normalized on read).
DirectionVector parse_direction(const std::string& spec, Index n);

nlohmann::json to_json(const SupportStructure& s);
nlohmann::json to_json(const EstimateWithInterval& e);
nlohmann::json to_json(const SphericityVerdict& v);
nlohmann::json to_json(const TestFunction& f);
TestFunction test_function_from_json(const nlohmann::json& j);

}  // namespace vesd
