#include "stapsdr/scenario.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "stapsdr/linalg.hpp"

namespace stapsdr {

using nlohmann::json;

namespace {

void default_warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

cxd parse_complex(const json& j, const std::string& what) {
  if (j.is_number()) return cxd(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2) return cxd(j[0].get<double>(), j[1].get<double>());
  throw std::invalid_argument("expected number or [re, im] pair for " + what);
}

json dump_complex(const cxd& z) { return json::array({z.real(), z.imag()}); }

/// Correlation matrices come either as inline dense arrays of [re, im] pairs
/// or as a generator spec {kind: "exp_toeplitz", rate, scale, size}.
MatC parse_correlation(const json& j, int expected_size, const std::string& what) {
  if (j.is_object()) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind != "exp_toeplitz")
      throw std::invalid_argument("unknown correlation generator kind '" + kind + "'");
    int size = j.at("size").get<int>();
    if (size != expected_size)
      throw std::invalid_argument(what + ": generator size " + std::to_string(size) +
                                  " does not match required " + std::to_string(expected_size));
    return exp_toeplitz(j.at("rate").get<double>(), j.at("scale").get<double>(), size);
  }
  if (!j.is_array())
    throw std::invalid_argument(what + ": expected dense array or generator spec");
  const int n = static_cast<int>(j.size());
  if (n != expected_size)
    throw std::invalid_argument(what + ": matrix is " + std::to_string(n) + "x?, need " +
                                std::to_string(expected_size));
  MatC out(n, n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(j[i].size()) != n)
      throw std::invalid_argument(what + ": row " + std::to_string(i) + " has wrong length");
    for (int k = 0; k < n; ++k) out(i, k) = parse_complex(j[i][k], what);
  }
  return out;
}

json dump_matrix(const MatC& A) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < A.cols(); ++k) row.push_back(dump_complex(A(i, k)));
    rows.push_back(row);
  }
  return rows;
}

Vec3 parse_vec3(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3)
    throw std::invalid_argument(what + ": expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

void check_psd_input(MatC& A, const std::string& what, void (*warn_fn)(const std::string&)) {
  double asym = 0.0;
  A = symmetrize(A, &asym);
  if (asym > 1e-10)
    warn_fn(what + " asymmetry " + std::to_string(asym) + " exceeds 1e-10; symmetrized");
  VecR ev = hermitian_eigenvalues(A);
  double scale = std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  if (ev.minCoeff() < -1e-10 * scale)
    throw std::invalid_argument(what + " is not PSD (min eigenvalue " +
                                std::to_string(ev.minCoeff()) + ")");
}

}  // namespace

MatC exp_toeplitz(double rate, double scale, int size) {
  if (size < 1) throw std::invalid_argument("exp_toeplitz: size must be >= 1");
  MatC out(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) out(i, j) = scale * std::exp(rate * std::abs(i - j));
  return out;
}

void ScenarioConfig::validate(void (*warn_fn)(const std::string&)) {
  if (!warn_fn) warn_fn = default_warn;
  if (N < 1 || M < 1 || L < 1) throw std::invalid_argument("N, M, L must be >= 1");
  if (P_o <= 0.0) throw std::invalid_argument("P_o must be positive");
  if (kappa == cxd(0.0, 0.0)) throw std::invalid_argument("kappa must be nonzero");
  if (f_o <= 0.0) throw std::invalid_argument("f_o must be positive");
  for (const auto& p : clutter_patches)
    if (p.rbar_q < 0.0) throw std::invalid_argument("rbar_q must be nonnegative");
  if (noise_correlation.rows() == 0) noise_correlation = MatC::Identity(nml(), nml());
  if (noise_correlation.rows() != nml() || noise_correlation.cols() != nml())
    throw std::invalid_argument("noise_correlation must be NML x NML");
  check_psd_input(noise_correlation, "noise_correlation", warn_fn);
  const int nl = N * L;
  for (size_t k = 0; k < interferers.size(); ++k) {
    auto& intf = interferers[k];
    if (intf.correlation.rows() != nl || intf.correlation.cols() != nl)
      throw std::invalid_argument("interferer " + std::to_string(k) +
                                  " correlation must be NL x NL");
    check_psd_input(intf.correlation, "interferer " + std::to_string(k) + " correlation",
                    warn_fn);
  }
}

ScenarioConfig scenario_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  ScenarioConfig cfg;
  cfg.N = j.at("N").get<int>();
  cfg.M = j.at("M").get<int>();
  cfg.L = j.at("L").get<int>();
  cfg.f_o = j.at("f_o").get<double>();
  cfg.bandwidth = j.value("bandwidth", cfg.bandwidth);
  cfg.d = j.at("d").get<double>();
  cfg.T_p = j.at("T_p").get<double>();
  cfg.platform_velocity = parse_vec3(j.at("platform_velocity"), "platform_velocity");
  const json& jt = j.at("target");
  cfg.target.theta_t = jt.at("theta_t").get<double>();
  cfg.target.phi_t = jt.at("phi_t").get<double>();
  cfg.target.velocity = parse_vec3(jt.at("velocity"), "target.velocity");
  cfg.target.rho_t = parse_complex(jt.value("rho_t", json::array({1.0, 0.0})), "rho_t");
  cfg.interferers.clear();
  if (j.contains("interferers")) {
    for (const auto& ji : j["interferers"]) {
      InterfererSpec intf;
      intf.theta_k = ji.at("theta_k").get<double>();
      intf.phi_k = ji.at("phi_k").get<double>();
      intf.correlation =
          parse_correlation(ji.at("correlation"), cfg.N * cfg.L, "interferer correlation");
      cfg.interferers.push_back(std::move(intf));
    }
  }
  cfg.clutter_patches.clear();
  if (j.contains("clutter_patches")) {
    for (const auto& jq : j["clutter_patches"]) {
      ClutterPatchSpec p;
      p.theta_q = jq.at("theta_q").get<double>();
      p.phi_q = jq.at("phi_q").get<double>();
      p.rbar_q = jq.at("rbar_q").get<double>();
      cfg.clutter_patches.push_back(p);
    }
  }
  if (j.contains("noise_correlation"))
    cfg.noise_correlation =
        parse_correlation(j["noise_correlation"], cfg.nml(), "noise_correlation");
  cfg.kappa = parse_complex(j.at("kappa"), "kappa");
  cfg.P_o = j.at("P_o").get<double>();
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str());
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
  json j;
  j["N"] = cfg.N;
  j["M"] = cfg.M;
  j["L"] = cfg.L;
  j["f_o"] = cfg.f_o;
  j["bandwidth"] = cfg.bandwidth;
  j["d"] = cfg.d;
  j["T_p"] = cfg.T_p;
  j["platform_velocity"] = {cfg.platform_velocity(0), cfg.platform_velocity(1),
                            cfg.platform_velocity(2)};
  j["target"] = {{"theta_t", cfg.target.theta_t},
                 {"phi_t", cfg.target.phi_t},
                 {"velocity", {cfg.target.velocity(0), cfg.target.velocity(1),
                               cfg.target.velocity(2)}},
                 {"rho_t", dump_complex(cfg.target.rho_t)}};
  j["interferers"] = json::array();
  for (const auto& intf : cfg.interferers)
    j["interferers"].push_back({{"theta_k", intf.theta_k},
                                {"phi_k", intf.phi_k},
                                {"correlation", dump_matrix(intf.correlation)}});
  j["clutter_patches"] = json::array();
  for (const auto& p : cfg.clutter_patches)
    j["clutter_patches"].push_back(
        {{"theta_q", p.theta_q}, {"phi_q", p.phi_q}, {"rbar_q", p.rbar_q}});
  j["noise_correlation"] = dump_matrix(cfg.noise_correlation);
  j["kappa"] = dump_complex(cfg.kappa);
  j["P_o"] = cfg.P_o;
  return j.dump(2);
}

void save_scenario(const ScenarioConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file: " + path);
  out << scenario_to_json(cfg) << "\n";
}

}  // namespace stapsdr
