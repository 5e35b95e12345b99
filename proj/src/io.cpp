#include "vesd/io.hpp"

#include "vesd/errors.hpp"
#include "vesd/experiments.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vesd {

namespace {

constexpr char kMagic[8] = {'V', 'E', 'S', 'D', 'M', 'A', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "matrix files assume a little-endian host");

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double parse_real(const std::string& tok, const std::string& where) {
  try {
    std::size_t used = 0;
    const double x = std::stod(tok, &used);
    if (trim(tok.substr(used)).empty()) return x;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::ParseError, where + ": cannot parse '" + tok + "' as a number");
}

}  // namespace

void write_matrix(const std::string& path, const Eigen::MatrixXd& M, MatrixFormat format) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::InvalidArgument, "cannot write " + path);
  if (format == MatrixFormat::csv) {
    os.precision(17);
    for (Index i = 0; i < M.rows(); ++i) {
      for (Index j = 0; j < M.cols(); ++j) os << (j ? "," : "") << M(i, j);
      os << '\n';
    }
    return;
  }
  const std::uint64_t n = static_cast<std::uint64_t>(M.rows()), N = static_cast<std::uint64_t>(M.cols());
  const std::uint32_t dtype = 1, reserved = 0;
  os.write(kMagic, 8);
  os.write(reinterpret_cast<const char*>(&n), 8);
  os.write(reinterpret_cast<const char*>(&N), 8);
  os.write(reinterpret_cast<const char*>(&dtype), 4);
  os.write(reinterpret_cast<const char*>(&reserved), 4);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = M;
  os.write(reinterpret_cast<const char*>(R.data()), static_cast<std::streamsize>(R.size() * sizeof(double)));
}

Eigen::MatrixXd read_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::ParseError, "cannot open matrix file " + path);
  char magic[8] = {};
  is.read(magic, 8);
  if (is.gcount() == 8 && std::memcmp(magic, kMagic, 8) == 0) {
    std::uint64_t n = 0, N = 0;
    std::uint32_t dtype = 0, reserved = 0;
    is.read(reinterpret_cast<char*>(&n), 8);
    is.read(reinterpret_cast<char*>(&N), 8);
    is.read(reinterpret_cast<char*>(&dtype), 4);
    is.read(reinterpret_cast<char*>(&reserved), 4);
    if (!is || dtype != 1 || n == 0 || N == 0 || n > (1ULL << 31) || N > (1ULL << 31))
      fail(ErrorKind::ParseError, path + ": bad matrix header");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R(static_cast<Index>(n), static_cast<Index>(N));
    is.read(reinterpret_cast<char*>(R.data()), static_cast<std::streamsize>(R.size() * sizeof(double)));
    if (is.gcount() != static_cast<std::streamsize>(R.size() * sizeof(double)))
      fail(ErrorKind::ParseError, path + ": truncated matrix payload");
    return R;
  }
  is.clear();
  is.seekg(0);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) row.push_back(parse_real(trim(tok), path + ":" + std::to_string(lineno)));
    if (!rows.empty() && row.size() != rows.front().size())
      fail(ErrorKind::ParseError, path + ":" + std::to_string(lineno) + ": ragged CSV row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorKind::ParseError, path + ": no matrix data");
  Eigen::MatrixXd M(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) M(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return M;
}

std::pair<std::vector<double>, double> read_spectrum(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::ParseError, "cannot open spectrum file " + path);
  std::string line;
  std::size_t lineno = 0;
  std::optional<double> d;
  std::vector<double> eigs;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    if (!d) {
      if (line.rfind("d_N=", 0) != 0) fail(ErrorKind::ParseError, where + ": expected 'd_N=<real>' header");
      d = parse_real(trim(line.substr(4)), where);
      continue;
    }
    eigs.push_back(parse_real(line, where));
  }
  if (!d) fail(ErrorKind::ParseError, path + ": missing d_N header");
  if (eigs.empty()) fail(ErrorKind::ParseError, path + ": no eigenvalues");
  return {eigs, *d};
}

void write_spectrum(const std::string& path, const std::vector<double>& eigenvalues, double d) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::InvalidArgument, "cannot write " + path);
  os.precision(17);
  os << "d_N=" << d << '\n';
  for (double s : eigenvalues) os << s << '\n';
}

DirectionVector parse_direction(const std::string& spec, Index n) {
  if (spec == "e") return DirectionVector::uniform(n);
  if (spec.size() > 1 && spec[0] == 'e' && spec.find_first_not_of("0123456789", 1) == std::string::npos) {
    const long k = std::stol(spec.substr(1));
    if (k < 1 || k > n) fail(ErrorKind::ParseError, "basis index out of range in '" + spec + "'");
    return DirectionVector::basis(n, k - 1);
  }
  if (spec.rfind("vx:", 0) == 0) return signal_vector(n, parse_real(spec.substr(3), "vector"));
  std::ifstream is(spec);
  if (!is) fail(ErrorKind::ParseError, "unknown vector '" + spec + "' (not eK, e, vx:<x> or a file)");
  std::vector<double> c;
  std::string tok;
  while (is >> tok) {
    if (tok.back() == ',') tok.pop_back();
    if (!tok.empty()) c.push_back(parse_real(tok, spec));
  }
  if (static_cast<Index>(c.size()) != n)
    fail(ErrorKind::ParseError, spec + ": expected " + std::to_string(n) + " coordinates");
  return DirectionVector::normalized(Eigen::Map<Eigen::VectorXd>(c.data(), n));
}

nlohmann::json to_json(const SupportStructure& s) {
  return {{"edges", s.edges},
          {"edge_m", s.edge_m},
          {"lambda_plus", s.lambda_plus()},
          {"lambda_minus", s.lambda_minus()},
          {"bulk_masses", s.bulk_masses},
          {"bulk_counts", s.bulk_counts},
          {"sample_count", s.sample_count},
          {"gamma", s.classical_locations}};
}

nlohmann::json to_json(const EstimateWithInterval& e) {
  return {{"point", e.point},          {"halfwidth", e.halfwidth}, {"alpha", e.alpha},
          {"confidence", e.confidence}, {"E", e.E},                {"R_vv", e.resolvent},
          {"m2c", e.m},                 {"m2c_prime", e.m_prime},  {"kappa_term", e.kappa_term},
          {"gamma_sq", e.gamma_sq},     {"kappa_policy", e.kappa_policy},
          {"variance_mode", e.variance_mode}};
}

nlohmann::json to_json(const SphericityVerdict& v) {
  return {{"statistic", v.statistic},
          {"threshold", v.threshold},
          {"decision", v.decision == Decision::reject ? "reject" : "accept"},
          {"gamma_sq", v.gamma_sq},
          {"rescale_sigma_sq", v.rescale_sigma_sq},
          {"E", v.E},
          {"alpha", v.alpha},
          {"m2c_hat", v.m},
          {"m2c_hat_prime", v.m_prime},
          {"kappa_max", v.kappa_max},
          {"R_uu", v.R_uu},
          {"R_vv", v.R_vv}};
}

nlohmann::json to_json(const TestFunction& f) {
  switch (f.kind) {
    case TestFunction::Kind::zero: return {{"kind", "zero"}};
    case TestFunction::Kind::bump: return {{"kind", "bump"}, {"center", f.center}, {"width", f.width}};
    case TestFunction::Kind::poly_gauss:
      return {{"kind", "poly_gauss"}, {"coeffs", f.poly_coeffs}, {"center", f.center}, {"width", f.width}};
  }
  return {};
}

TestFunction test_function_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind");
    if (kind == "zero") return TestFunction::zero();
    if (kind == "bump") return TestFunction::bump(j.at("center"), j.at("width"));
    if (kind == "poly_gauss")
      return TestFunction::poly_gauss(j.at("coeffs").get<std::vector<double>>(), j.at("center"), j.at("width"));
    fail(ErrorKind::ParseError, "unknown test function kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("bad test function: ") + e.what());
  }
}

}  // namespace vesd
