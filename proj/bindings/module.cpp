#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stapsdr/extract.hpp"
#include "stapsdr/hessian.hpp"
#include "stapsdr/kkt.hpp"
#include "stapsdr/linalg.hpp"
#include "stapsdr/runner.hpp"
#include "stapsdr/scenario.hpp"

namespace py = pybind11;
using namespace stapsdr;

namespace {

SolveOptions make_options(double tol, int max_iters, const std::string& method,
                          bool warm_start) {
  SolveOptions opts;
  opts.tol = tol;
  opts.max_iters = max_iters;
  opts.warm_start_slater = warm_start;
  if (method == "barrier")
    opts.method = SolveMethod::barrier;
  else if (method == "splitting")
    opts.method = SolveMethod::splitting;
  else
    throw std::invalid_argument("method must be 'barrier' or 'splitting'");
  return opts;
}

py::dict kkt_to_dict(const KktReport& rep) {
  py::dict d;
  d["stationarity_residual"] = rep.stationarity_residual;
  d["sigma1_matches_Rni"] = rep.sigma1_matches_Rni;
  d["sigma3_matches_lambdaI"] = rep.sigma3_matches_lambdaI;
  d["cs_residuals"] = std::vector<double>(rep.cs_residuals.begin(), rep.cs_residuals.end());
  d["lambda_feasible"] = rep.lambda_feasible;
  d["power_slack"] = rep.power_slack;
  d["capon_residual"] = rep.capon_residual;
  d["psd_min_eig_B"] = rep.psd_min_eig_B;
  d["psd_min_eig_Sigma"] = rep.psd_min_eig_Sigma;
  d["lambda_from_B1"] = rep.lambda_from_B1;
  d["lambda_from_B2Sigma2"] = rep.lambda_from_B2Sigma2;
  d["mu_kappa_gap"] = rep.mu_kappa_gap;
  d["scalar_slackness"] = rep.scalar_slackness;
  d["verdict"] = rep.verdict;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "joint waveform-beamformer SDR design core";

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def_readonly("N", &ScenarioConfig::N)
      .def_readonly("M", &ScenarioConfig::M)
      .def_readonly("L", &ScenarioConfig::L)
      .def_readonly("f_o", &ScenarioConfig::f_o)
      .def_readonly("d", &ScenarioConfig::d)
      .def_readonly("T_p", &ScenarioConfig::T_p)
      .def_readonly("kappa", &ScenarioConfig::kappa)
      .def_readonly("P_o", &ScenarioConfig::P_o)
      .def_property_readonly("nml", &ScenarioConfig::nml)
      .def_property_readonly("joint_dim", &ScenarioConfig::joint_dim)
      .def_static("from_json", &scenario_from_json, py::arg("text"))
      .def_static("from_file", &load_scenario, py::arg("path"))
      .def("to_json", &scenario_to_json);

  py::class_<SdrProblem>(m, "SdrProblem")
      .def_property_readonly("T", [](const SdrProblem& p) { return p.T; })
      .def_property_readonly("R_ni", [](const SdrProblem& p) { return p.R_ni; })
      .def_property_readonly("factors", [](const SdrProblem& p) { return p.factors; })
      .def_readonly("kappa", &SdrProblem::kappa)
      .def_readonly("P_o", &SdrProblem::P_o)
      .def_property_readonly("joint_dim", &SdrProblem::joint_dim)
      .def("objective", [](const SdrProblem& p, const MatC& B) { return p.objective(B); })
      .def("capon_value", [](const SdrProblem& p, const MatC& B) { return p.capon_value(B); })
      .def("clutter_channels", [](const SdrProblem& p) {
        std::vector<std::pair<MatC, double>> out;
        for (const auto& cc : p.cov.clutter) out.emplace_back(cc.channel.mat, cc.rbar);
        return out;
      });

  py::class_<SdrSolution>(m, "SdrSolution")
      .def_property_readonly("B", [](const SdrSolution& s) { return s.B; })
      .def_readonly("lam", &SdrSolution::lambda)
      .def_readonly("mu", &SdrSolution::mu)
      .def_readonly("objective", &SdrSolution::objective)
      .def_readonly("objective_alt", &SdrSolution::objective_alt)
      .def_readonly("iterations", &SdrSolution::iterations)
      .def_property_readonly("status",
                             [](const SdrSolution& s) { return std::string(to_string(s.status)); })
      .def_property_readonly("residuals", [](const SdrSolution& s) {
        py::dict d;
        d["capon"] = s.residuals.capon;
        d["power"] = s.residuals.power;
        d["psd_violation"] = s.residuals.psd_violation;
        d["stationarity"] = s.residuals.stationarity;
        d["slackness"] = s.residuals.slackness;
        return d;
      });

  m.def("doppler_shift", &doppler_shift, py::arg("velocity"), py::arg("theta"), py::arg("phi"),
        py::arg("f_o"));
  m.def(
      "steering",
      [](double theta, double phi, double f_d, const ScenarioConfig& cfg) {
        SteeringVectors sv = steering(theta, phi, f_d, cfg);
        return py::make_tuple(sv.v, sv.a);
      },
      py::arg("theta"), py::arg("phi"), py::arg("f_d"), py::arg("cfg"));
  m.def("target_channel",
        [](const ScenarioConfig& cfg) { return target_channel(cfg).mat; });
  m.def("covariances", [](const ScenarioConfig& cfg) {
    CovarianceSet cov = build_covariance_set(cfg);
    py::dict d;
    d["R_n"] = cov.R_n;
    d["R_i"] = cov.R_i;
    d["R_ni"] = cov.R_ni;
    return d;
  });
  m.def(
      "clutter_covariance",
      [](const ScenarioConfig& cfg, const VecC& s) {
        return build_covariance_set(cfg).clutter_covariance(s);
      },
      py::arg("cfg"), py::arg("s"));

  m.def("assemble", py::overload_cast<const ScenarioConfig&>(&assemble), py::arg("cfg"));
  m.def("slater_margin", [](const SdrProblem& prob) {
    SlaterReport rep = slater_margin(prob);
    py::dict d;
    d["satisfied"] = rep.satisfied;
    d["margin"] = rep.margin;
    if (rep.satisfied) d["witness"] = rep.witness;
    return d;
  });
  m.def(
      "solve",
      [](const SdrProblem& prob, double tol, int max_iters, const std::string& method,
         bool warm_start) { return solve(prob, make_options(tol, max_iters, method, warm_start)); },
      py::arg("prob"), py::arg("tol") = 1e-7, py::arg("max_iters") = 50000,
      py::arg("method") = "barrier", py::arg("warm_start_slater") = false);

  m.def(
      "check_kkt",
      [](const SdrSolution& sol, const SdrProblem& prob, double tol) {
        return kkt_to_dict(check_kkt(sol, prob, tol));
      },
      py::arg("sol"), py::arg("prob"), py::arg("tol") = 1e-5);
  m.def(
      "structural_lemmas",
      [](const SdrSolution& sol, const SdrProblem& prob, double tol) {
        StructuralReport rep = structural_lemmas(sol, prob, tol);
        py::dict d;
        d["rank_Rni"] = rep.rank_Rni;
        d["Rni_full_rank"] = rep.Rni_full_rank;
        d["lambda"] = rep.lambda;
        d["power_bound_active"] = rep.power_bound_active;
        d["power_gap_rel"] = rep.power_gap_rel;
        d["rank_B1"] = rep.rank_B1;
        d["rank_B2"] = rep.rank_B2;
        d["rank_B3"] = rep.rank_B3;
        d["rank_B"] = rep.rank_B;
        d["ranks_equal"] = rep.ranks_equal;
        d["rank_lemma_holds"] = rep.rank_lemma_holds;
        d["verdict"] = rep.verdict;
        return d;
      },
      py::arg("sol"), py::arg("prob"), py::arg("tol") = 1e-5);
  m.def(
      "waterfilling_audit",
      [](const SdrSolution& sol, const SdrProblem& prob, double tol) {
        WaterfillingAudit audit = waterfilling_audit(sol, prob, tol);
        py::dict d;
        d["Q_eff"] = audit.Q_eff;
        d["nu"] = audit.nu;
        d["alignment"] = audit.alignment;
        d["balance_residuals"] = audit.balance_residuals;
        d["max_balance_residual"] = audit.max_balance_residual;
        d["mu_from_waterfilling"] = audit.mu_from_waterfilling;
        d["mu_match_rel"] = audit.mu_match_rel;
        d["degenerate"] = audit.degenerate;
        return d;
      },
      py::arg("sol"), py::arg("prob"), py::arg("tol") = 1e-8);
  m.def(
      "candidate_power_bounded",
      [](const SdrProblem& prob, double tol) {
        PowerBoundedCandidate cand = candidate_power_bounded(prob, tol);
        py::dict d;
        d["B"] = cand.B;
        d["status"] = std::string(to_string(cand.subproblem_status));
        d["tr_B1_Rni"] = cand.tr_B1_Rni;
        d["admissibility_inequality"] = cand.admissibility_inequality;
        d["kkt"] = kkt_to_dict(cand.kkt);
        return d;
      },
      py::arg("prob"), py::arg("tol") = 1e-5);
  m.def(
      "nonpower_flowchart",
      [](const SdrProblem& prob, double tol) {
        FlowchartDiagnosis diag = nonpower_flowchart(prob, tol);
        py::dict d;
        d["verdict"] = std::string(to_string(diag.verdict));
        d["rank_Rni"] = diag.rank_Rni;
        d["detail"] = diag.detail;
        return d;
      },
      py::arg("prob"), py::arg("tol") = 1e-8);

  m.def(
      "extract",
      [](const SdrSolution& sol, const SdrProblem& prob, int b_count) {
        RankBExtract ex = extract(sol, prob, b_count);
        py::dict d;
        d["B_used"] = ex.B_used;
        d["w"] = ex.w;
        d["s"] = ex.s;
        d["original_cost"] = ex.original_cost;
        d["raw_cost"] = ex.raw_cost;
        d["capon_gap"] = ex.capon_gap;
        d["power_used"] = ex.power_used;
        d["singular_values"] = ex.singular_values;
        return d;
      },
      py::arg("sol"), py::arg("prob"), py::arg("B") = 1);
  m.def(
      "original_cost",
      [](const VecC& w, const VecC& s, const SdrProblem& prob) {
        return original_cost(w, s, prob.cov);
      },
      py::arg("w"), py::arg("s"), py::arg("prob"));
  m.def("subspace_cosine", &subspace_cosine, py::arg("X"), py::arg("Y"));
  m.def(
      "adapted_pattern",
      [](const VecC& w, const VecC& s, const ScenarioConfig& cfg, double phi, int doppler_bins,
         int azimuth_bins) {
        PatternGridSpec grid;
        grid.doppler_bins = doppler_bins;
        grid.azimuth_bins = azimuth_bins;
        AdaptedPatternGrid pat = adapted_pattern(w, s, grid, phi, cfg);
        py::dict d;
        d["doppler_axis"] = pat.doppler_axis;
        d["azimuth_axis"] = pat.azimuth_axis;
        d["values"] = pat.values;
        d["peak_doppler_idx"] = pat.peak_doppler_idx;
        d["peak_azimuth_idx"] = pat.peak_azimuth_idx;
        return d;
      },
      py::arg("w"), py::arg("s"), py::arg("cfg"), py::arg("phi"), py::arg("doppler_bins") = 64,
      py::arg("azimuth_bins") = 181);
  m.def(
      "alternating_minimization",
      [](const SdrProblem& prob, double tol, int max_rounds) {
        AmOptions opts;
        opts.tol = tol;
        opts.max_rounds = max_rounds;
        AmResult res = alternating_minimization(prob.cov, prob.T, prob.kappa, prob.P_o, opts);
        py::dict d;
        d["w"] = res.w;
        d["s"] = res.s;
        d["cost_trace"] = res.cost_trace;
        d["stalled"] = res.stalled;
        return d;
      },
      py::arg("prob"), py::arg("tol") = 1e-10, py::arg("max_rounds") = 500);

  m.def(
      "objective_hessian",
      [](const VecC& w, const VecC& s, const SdrProblem& prob, double tol) {
        HessianBlock blk = objective_hessian(w, s, prob.cov);
        IndefinitenessCertificate cert = certify(blk, tol);
        py::dict d;
        d["full_block"] = blk.full_block;
        d["corner"] = blk.corner;
        d["verdict"] = std::string(to_string(cert.verdict));
        d["positive_count"] = cert.positive_count;
        d["negative_count"] = cert.negative_count;
        d["zero_count"] = cert.zero_count;
        d["min_eig"] = cert.min_eig;
        d["max_eig"] = cert.max_eig;
        d["nulling_detected"] = cert.nulling_detected;
        return d;
      },
      py::arg("w"), py::arg("s"), py::arg("prob"), py::arg("tol") = 1e-8);
}
