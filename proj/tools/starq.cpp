#include <chrono>
#include <cstdint>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "starq/benchmark.hpp"
#include "starq/calib.hpp"
#include "starq/circuit.hpp"
#include "starq/device.hpp"
#include "starq/hamiltonian.hpp"
#include "starq/noise.hpp"
#include "starq/parallel.hpp"
#include "starq/simulator.hpp"
#include "starq/transpiler.hpp"

#ifndef STARQ_VERSION
#define STARQ_VERSION "dev"
#endif

using namespace starq;
using json = nlohmann::ordered_json;

namespace {

struct Output {
  std::string tag;  // file stem
  json summary = json::object();
  std::vector<std::pair<std::string, std::string>> files;  // name suffix, body

  void add(const std::string& ext, const std::string& body) { files.emplace_back(ext, body); }
};

// Flags shared by every command.
struct Common {
  std::string device = "preset:paper-qpu";
  std::uint64_t seed = 1;
  int trajectories = 0;  // 0: command default
  long shots = -1;       // -1: command default
  std::string out = "out";
  std::string format = "json";
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

std::vector<double> delays(int n, double step) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = i * step;
  return v;
}

json calib_summary(const CalibResult& r) { return json::parse(calib_json(r)); }

Output calib_output(const std::string& name, const CalibResult& r) {
  Output o;
  o.tag = "calib-" + name;
  o.summary = calib_summary(r);
  std::ostringstream csv;
  write_calib_csv(csv, r);
  o.add(".csv", csv.str());
  return o;
}

json counts_json(const GateCounts& g) {
  return {{"PRX", g.prx}, {"VZ", g.vz}, {"CZ", g.cz}, {"MOVE", g.move}, {"MEASURE", g.measure}};
}

json rb_json(const DecayFit& f) {
  json j{{"A", f.A}, {"B", f.B}, {"A_err", f.A_err}, {"B_err", f.B_err}, {"reference_k", f.reference_k}};
  json p = json::object(), fid = json::object();
  for (auto& [k, v] : f.p) p[std::to_string(k)] = {{"p", v}, {"err", f.p_err.at(k)}};
  for (auto& [k, v] : f.fidelity) fid[std::to_string(k)] = {{"F", v}, {"err", f.fidelity_err.at(k)}};
  j["p"] = p;
  j["fidelity"] = fid;
  return j;
}

json quad_json(const QuadraticFidelityFit& q) {
  return {{"alpha", q.alpha}, {"alpha_err", q.alpha_err}, {"beta", q.beta},
          {"beta_err", q.beta_err}, {"gamma", q.gamma},   {"gamma_err", q.gamma_err}};
}

json mqc_terms(const MqcTerms& t) { return {{"P", t.P}, {"C", t.C}, {"I_N", t.I_N}, {"F", t.F}, {"S", t.S}}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"starq: resonator-centric QPU simulator and benchmark harness"};
  app.require_subcommand(1);
  app.fallthrough();
  Common cm;
  app.add_option("--device", cm.device, "preset:<name> or device JSON path")->capture_default_str();
  app.add_option("--seed", cm.seed, "master seed")->capture_default_str();
  app.add_option("--trajectories", cm.trajectories, "trajectories (command default when omitted)");
  app.add_option("--shots", cm.shots, "shots (command default when omitted)");
  app.add_option("--out", cm.out, "output directory")->capture_default_str();
  app.add_option("--format", cm.format, "stdout rendering")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

  std::function<Output(const Device&)> action;
  auto traj = [&](int def) { return cm.trajectories > 0 ? cm.trajectories : def; };
  auto shots = [&](long def) { return cm.shots >= 0 ? cm.shots : def; };

  // ---------------------------------------------------------------- simulate
  auto* sim = app.add_subcommand("simulate", "run a circuit file (logical circuits are lowered first)");
  std::string sim_in;
  bool sim_noise = false, sim_thermal = false, sim_readout = false;
  double sim_d1 = 0, sim_d2 = 0;
  int sim_nmax = 2;
  sim->add_option("--in", sim_in, "circuit file")->required();
  sim->add_flag("--noise", sim_noise, "decoherence from the device");
  sim->add_flag("--thermal", sim_thermal, "thermal occupation in the decoherence");
  sim->add_flag("--readout", sim_readout, "assignment errors on sampled counts");
  sim->add_option("--depol-1q", sim_d1, "random Pauli probability after each PRX");
  sim->add_option("--depol-2q", sim_d2, "random Pauli probability after each MOVE/CZ");
  sim->add_option("--n-max", sim_nmax, "resonator truncation")->capture_default_str();
  sim->callback([&] {
    action = [&](const Device& d) {
      Circuit c = load_circuit(sim_in);
      if (!c.is_native()) c = resolve_phases(lower_cz(c), d);
      auto diag = validate(c);
      if (!diag.empty()) throw ValidationError("circuit rule " + diag[0].rule + ": " + diag[0].message);
      ExecOptions eo;
      eo.n_max = sim_nmax;
      eo.noise.decoherence = sim_noise;
      eo.noise.thermal = sim_thermal;
      eo.noise.readout = sim_readout;
      eo.noise.depol_1q = sim_d1;
      eo.noise.depol_2q = sim_d2;
      Simulator s(d, c, eo);
      auto r = run_ensemble(s, traj(256), shots(1024), cm.seed);
      int nb = static_cast<int>(s.measured().size());
      Output o;
      o.tag = "simulate";
      std::ostringstream csv;
      csv << "bitstring,probability,count\n";
      char buf[32];
      for (long i = 0; i < r.probabilities.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.12g", r.probabilities(i));
        csv << bitstring(i, nb) << ',' << buf << ',' << (r.counts.empty() ? 0 : r.counts[i]) << '\n';
      }
      o.add(".csv", csv.str());
      o.summary = {{"qubits", s.measured()},
                   {"trajectories", r.trajectories},
                   {"overflow_max", r.overflow_max},
                   {"guard_violations", r.guard_violations},
                   {"duration_ns", s.timing().total_ns},
                   {"counts", counts_json(count_gates(c))}};
      return o;
    };
  });

  // ---------------------------------------------------------------- transpile
  auto* tp = app.add_subcommand("transpile", "lower logical CZs and resolve phases");
  std::string tp_in, tp_holder;
  tp->add_option("--in", tp_in, "circuit file")->required();
  tp->add_option("--holder", tp_holder, "force the resonator holder");
  tp->callback([&] {
    action = [&](const Device& d) {
      Circuit c = load_circuit(tp_in);
      LowerOptions lo;
      if (!tp_holder.empty()) lo.preferred_holder = tp_holder;
      Circuit n = resolve_phases(lower_cz(c, lo), d);
      Output o;
      o.tag = "transpile";
      o.add(".qc", write_circuit(n));
      json diags = json::array();
      for (const auto& g : validate(n)) diags.push_back({{"index", g.index}, {"rule", g.rule}, {"message", g.message}});
      Schedule s = schedule(n, d);
      o.summary = {{"counts", counts_json(count_gates(n))},
                   {"diagnostics", diags},
                   {"duration_ns", s.total_ns},
                   {"gate_end_ns", s.gate_end_ns}};
      return o;
    };
  });

  // ---------------------------------------------------------------- calib
  auto* cal = app.add_subcommand("calib", "calibration experiments on the exact trio or the gate model");
  std::string exp_name, cq = "q1", cq2;
  int c_nwq = 41, c_nwc = 21, c_nmoves = 8, c_steps = 2, c_ndel = 0, c_trace = -1, c_ndv = 21;
  double c_step = 0, c_det = 0, c_dv0 = 0.26, c_dv1 = 0.30, c_phi = 0, c_phip = 0;
  double c_gamma1 = 0, c_gamma2 = 0, c_zeta2 = 0, c_vzq = 0, c_vzr = 0;
  bool c_thermal = false;
  cal->add_option("experiment", exp_name, "experiment")
      ->required()
      ->check(CLI::IsMember({"chevron-move", "chevron-cz", "move-fine", "move-vz", "cz-phase", "cr-t1", "cr-ramsey",
                             "jc-ladder", "populated-ramsey"}));
  cal->add_option("--qubit", cq, "qubit under calibration (probe)")->capture_default_str();
  cal->add_option("--other", cq2, "MOVE qubit (cz-phase) or load qubit (populated-ramsey)");
  cal->add_option("--n-wq", c_nwq, "chevron qubit grid points")->capture_default_str();
  cal->add_option("--n-wc", c_nwc, "chevron coupler grid points")->capture_default_str();
  cal->add_option("--n-moves", c_nmoves, "MOVEs in the fine calibration")->capture_default_str();
  cal->add_option("--steps", c_steps, "JC ladder steps")->capture_default_str();
  cal->add_option("--n-delays", c_ndel, "delay points");
  cal->add_option("--step-ns", c_step, "delay spacing");
  cal->add_option("--detuning", c_det, "resonator detuning seen by the probe, GHz (0: device)");
  cal->add_option("--dv-start", c_dv0, "virtual detuning start, GHz")->capture_default_str();
  cal->add_option("--dv-stop", c_dv1, "virtual detuning stop, GHz")->capture_default_str();
  cal->add_option("--dv-n", c_ndv, "virtual detuning points")->capture_default_str();
  cal->add_option("--decay-trace", c_trace, "cr-ramsey: fit T2* on this virtual detuning index");
  cal->add_option("--phi", c_phi, "populated-ramsey: Z after the first probe MOVE");
  cal->add_option("--phi-prime", c_phip, "populated-ramsey: Z after the second probe MOVE");
  cal->add_option("--gamma1", c_gamma1, "injected MOVE phase gamma_1");
  cal->add_option("--gamma2", c_gamma2, "injected MOVE phase gamma_2");
  cal->add_option("--zeta2", c_zeta2, "injected MOVE phase zeta_2");
  cal->add_option("--vz-qubit", c_vzq, "cz-phase: injected qubit residual");
  cal->add_option("--vz-resonator", c_vzr, "cz-phase: injected resonator residual");
  cal->add_flag("--thermal", c_thermal, "thermal occupation in resonator experiments");
  cal->callback([&] {
    action = [&](const Device& d) {
      JCPhases inj;
      inj.gamma = {c_gamma1, c_gamma2};
      inj.zeta = {0.0, c_zeta2};
      ResonatorOptions ro;
      ro.trajectories = traj(400);
      ro.seed = cm.seed;
      ro.thermal = c_thermal;
      if (c_det != 0) ro.detuning_GHz = c_det;
      if (exp_name == "chevron-move" || exp_name == "chevron-cz") {
        GateKind k = exp_name == "chevron-move" ? GateKind::Move : GateKind::Cz;
        auto g = default_chevron_grid(d, cq, k, c_nwq, c_nwc);
        return calib_output(exp_name, chevron(k, d, cq, g.wq, g.wc, g.t_ns));
      }
      if (exp_name == "move-fine") {
        MoveFineOptions mo;
        mo.n_moves = c_nmoves;
        return calib_output(exp_name, move_fine_cal(d, cq, mo));
      }
      if (exp_name == "move-vz") {
        MoveVzOptions mo;
        mo.move = inj;
        return calib_output(exp_name, move_vz_cal(d, cq, mo));
      }
      if (exp_name == "cz-phase") {
        CzPhaseOptions co;
        co.cz.vz_qubit = c_vzq;
        co.cz.vz_resonator = c_vzr;
        return calib_output(exp_name, cz_phase_cal(d, cq, cq2.empty() ? (cq == "q1" ? "q2" : "q1") : cq2, co));
      }
      if (exp_name == "cr-t1")
        return calib_output(exp_name, cr_t1(d, cq, delays(c_ndel ? c_ndel : 40, c_step ? c_step : 400.0), ro));
      if (exp_name == "cr-ramsey") {
        std::optional<int> tr;
        if (c_trace >= 0) tr = c_trace;
        return calib_output(exp_name, cr_ramsey(d, cq, delays(c_ndel ? c_ndel : 128, c_step ? c_step : 2.0),
                                                linspace(c_dv0, c_dv1, c_ndv), ro, tr));
      }
      if (exp_name == "jc-ladder") {
        LadderOptions lo;
        lo.move = inj;
        return calib_output(exp_name, jc_ladder(d, cq, c_steps, lo));
      }
      PopulatedRamseyOptions po;
      po.phi = c_phi;
      po.phi_prime = c_phip;
      po.probe_move = inj;
      po.detuning_GHz = c_det != 0 ? c_det : 0.281;
      std::string load = cq2.empty() ? (cq == "q3" ? "q2" : "q3") : cq2;
      return calib_output(exp_name,
                          populated_ramsey(d, load, cq, delays(c_ndel ? c_ndel : 80, c_step ? c_step : 0.5), po));
    };
  });

  // ---------------------------------------------------------------- bench
  auto* bench = app.add_subcommand("bench", "benchmark suites");
  std::string b_kind, b_q = "q1", b_q2 = "q2", b_mq = "q3";
  std::vector<int> b_m{1, 4, 8, 16, 32, 64, 100}, b_k{1, 2, 3, 4}, b_q_n;
  std::vector<double> b_lambdas{1, 2, 3};
  int b_nseq = 60, b_n = 6, b_graphs = 60;
  double b_depol = 0, b_eps = 0, b_target = 0.2;
  bool b_noise = false, b_thermal = false, b_mitigate = false, b_noiseless = false, b_virtual = false;
  bench->add_option("kind", b_kind, "suite")
      ->required()
      ->check(CLI::IsMember({"rb", "irb-move", "irb-cz", "ghz", "qscore", "zne"}));
  bench->add_option("--qubit", b_q, "RB / MOVE qubit")->capture_default_str();
  bench->add_option("--cz-qubit", b_q2, "irb-cz CZ qubit")->capture_default_str();
  bench->add_option("--move-qubit", b_mq, "GHZ MOVE qubit")->capture_default_str();
  bench->add_option("--m", b_m, "Clifford counts")->delimiter(',');
  bench->add_option("--k", b_k, "interleave counts (k or l)")->delimiter(',');
  bench->add_option("--n-seq", b_nseq, "sequences per point")->capture_default_str();
  bench->add_option("--depol", b_depol, "rb: depolarizing probability after every Clifford");
  bench->add_option("--eps", b_eps, "irb-move: relative exchange-angle error");
  bench->add_flag("--noise", b_noise, "decoherence from the device (rb, irb)");
  bench->add_flag("--thermal", b_thermal, "thermal occupation");
  bench->add_option("--n", b_n, "qubits (ghz, qscore)")->capture_default_str();
  bench->add_flag("--mitigate", b_mitigate, "ghz: readout mitigation");
  bench->add_flag("--noiseless", b_noiseless, "ghz: drop the default device noise and readout error");
  bench->add_option("--graphs", b_graphs, "qscore graphs")->capture_default_str();
  bench->add_flag("--virtual-node", b_virtual, "qscore: fix the last vertex");
  bench->add_option("--lambdas", b_lambdas, "zne noise scales")->delimiter(',');
  bench->add_option("--target", b_target, "zne: raw lambda=1 shortfall")->capture_default_str();
  bench->callback([&] {
    action = [&](const Device& d) {
      Output o;
      o.tag = "bench-" + b_kind;
      RbOptions ro;
      ro.m_list = b_m;
      ro.n_seq = b_nseq;
      ro.seed = cm.seed;
      ro.shots = shots(256);
      ro.trajectories = traj(32);
      ro.exec.noise.decoherence = b_noise;
      ro.exec.noise.thermal = b_thermal;
      std::ostringstream csv;
      if (b_kind == "rb") {
        ro.clifford_depol = b_depol;
        auto data = rb_experiment(d, {b_q}, ro);
        auto f = fit_decay(data);
        o.summary = rb_json(f);
        o.summary["p"] = f.p.at(0);
        o.summary["p_err"] = f.p_err.at(0);
        o.summary["F_clifford"] = 1 - (1 - f.p.at(0)) / 2;
        write_rb_csv(csv, data);
      } else if (b_kind == "irb-move" || b_kind == "irb-cz") {
        IrbResult r;
        if (b_kind == "irb-move") {
          if (b_eps != 0) ro.exec.gates.move[b_q].theta = kPi * (1 + b_eps);
          r = irb_move(d, b_q, b_k, ro);
        } else {
          std::vector<int> l = b_k;
          if (std::find(l.begin(), l.end(), 0) == l.end()) l.insert(l.begin(), 0);
          r = irb_move_lcz(d, b_q, b_q2, l, ro);
        }
        o.summary = {{"F", r.F}, {"F_err", r.F_err}, {"decay", rb_json(r.decay)}, {"quadratic", quad_json(r.quadratic)}};
        if (b_kind == "irb-cz") {
          o.summary["gamma_m"] = r.gamma_m;
          o.summary["gamma_m_err"] = r.gamma_m_err;
        }
        write_rb_csv(csv, r.data);
      } else if (b_kind == "ghz") {
        MqcOptions mo;
        mo.trajectories = traj(4096);
        mo.shots = shots(1024);
        mo.seed = cm.seed;
        mo.mitigate = b_mitigate;
        if (!b_noiseless) {
          mo.exec.noise.decoherence = true;
          mo.exec.noise.thermal = true;
          mo.exec.noise.readout = true;
        }
        auto r = mqc_ghz_fidelity(d, b_n, b_mq, mo);
        o.summary = {{"N", r.N}, {"F", r.F}, {"raw", mqc_terms(r.raw)}};
        if (b_mitigate) o.summary["mitigated"] = mqc_terms(r.mitigated);
        write_mqc_csv(csv, r);
      } else if (b_kind == "qscore") {
        QscoreOptions qo;
        qo.n_graphs = b_graphs;
        qo.seed = cm.seed;
        qo.virtual_node = b_virtual;
        qo.trajectories = traj(64);
        qo.shots = shots(0);
        auto r = qscore(d, b_n, qo);
        o.summary = {{"n", r.n}, {"beta", r.beta}, {"sem", r.sem}, {"pass", r.pass}, {"graphs", r.graphs.size()}};
        write_qscore_csv(csv, r);
      } else {
        TfimZneOptions zo;
        zo.lambdas = b_lambdas;
        zo.trajectories = traj(1500);
        zo.seed = cm.seed;
        zo.target_shortfall = b_target;
        auto r = tfim_zne(d, zo);
        o.summary = {{"exact", r.exact},
                     {"ansatz", r.ansatz.energy},
                     {"depol_2q", r.depol_2q},
                     {"depol_1q", r.depol_1q},
                     {"lambdas", r.lambdas},
                     {"energy", r.energy},
                     {"sem", r.sem},
                     {"zne", r.zne.value},
                     {"zne_fallback", r.zne.fallback},
                     {"counts", counts_json(r.counts)}};
        write_zne_csv(csv, r);
      }
      o.add(".csv", csv.str());
      return o;
    };
  });

  // ---------------------------------------------------------------- analyze
  auto* an = app.add_subcommand("analyze", "closed-form analyses");
  std::string a_kind, a_q = "q1", a_mq = "q3";
  double a_wq = 0, a_wc = 0;
  int a_grid = 101, a_n = 6;
  bool a_reference = false, a_thermal = false;
  an->add_option("kind", a_kind, "analysis")->required()->check(CLI::IsMember({"sw", "zz", "limits"}));
  an->add_option("--qubit", a_q, "qubit (circuit label)")->capture_default_str();
  an->add_option("--wq", a_wq, "qubit frequency, GHz (0: device)");
  an->add_option("--wc", a_wc, "coupler frequency, GHz (0: device)");
  an->add_option("--grid", a_grid, "zz: points per axis")->capture_default_str();
  an->add_flag("--reference", a_reference, "zz: reference parameter set instead of the device trio");
  an->add_flag("--thermal", a_thermal, "limits: thermal occupation");
  an->add_option("--move-qubit", a_mq, "limits: GHZ MOVE qubit")->capture_default_str();
  an->add_option("--n", a_n, "limits: GHZ size")->capture_default_str();
  an->callback([&] {
    action = [&](const Device& d) {
      Output o;
      o.tag = "analyze-" + a_kind;
      std::string id = device_id(d, a_q);
      std::optional<double> wq, wc;
      if (a_wq != 0) wq = a_wq;
      if (a_wc != 0) wc = a_wc;
      if (a_kind == "sw") {
        auto e = effective_params(d, id, wq, wc);
        json gates = json::object();
        for (GateKind k : {GateKind::Move, GateKind::Cz}) {
          auto op = gate_operating_point(d, id, k);
          auto x = exact_crossing(d, id, op.omega_c, k);
          gates[k == GateKind::Move ? "move" : "cz"] = {{"omega_q", op.omega_q},     {"omega_c", op.omega_c},
                                                         {"g_sw", x.g_sw},            {"g_exact", x.g_exact},
                                                         {"crossing_omega_q", x.omega_q}, {"rel_error", x.rel_error}};
        }
        o.summary = {{"qubit", a_q},        {"omega_q_dressed", e.wq_t}, {"omega_r_dressed", e.wr_t},
                     {"g_move", e.g_move},  {"g_cz", e.g_cz},           {"g_ladder", e.g_ladder},
                     {"g_cz_ladder", e.g_cz_ladder}, {"delta", e.delta_t}, {"warnings", e.warnings},
                     {"operating_points", gates}};
      } else if (a_kind == "zz") {
        std::vector<ZZPoint> pts;
        double wr;
        if (a_reference) {
          wr = 4.3;
          pts = zz_landscape([](double q, double c) { return reference_trio(q, c); }, wr, 3.0, 8.0, a_grid, -1.0,
                             1.0, a_grid);
        } else {
          wr = d.component(d.resonator_id()).frequency_GHz;
          pts = zz_landscape([&](double q, double c) { return trio_params(d, id, q, c); }, wr, 3.0, 8.0, a_grid,
                             -1.0, 1.0, a_grid);
        }
        double mx = 0;
        int pos = 0, neg = 0;
        for (const auto& p : pts) {
          if (std::isnan(p.zeta_MHz)) continue;
          mx = std::max(mx, std::abs(p.zeta_MHz));
          (p.zeta_MHz > 0 ? pos : neg)++;
        }
        o.summary = {{"max_abs_zeta_MHz", mx}, {"zero_contour", pos > 0 && neg > 0}, {"points", pts.size()}};
        o.add(".csv", landscape_csv(pts));
      } else {
        auto L = device_limits(d, a_thermal);
        GhzBudgetOptions go;
        auto b = ghz_budget(d, device_id(d, a_mq), a_n, go);
        go.mode = IdleMode::Measured;
        auto bm = ghz_budget(d, device_id(d, a_mq), a_n, go);
        go.mode = IdleMode::Modeled;
        go.gamma1_r = 0.0;
        auto b0 = ghz_budget(d, device_id(d, a_mq), a_n, go);
        auto e = ghz_exponential_model(d, device_id(d, a_mq), a_n);
        o.summary = {{"mean_F_mm", L.mean_F_mm},
                     {"mean_F_cz", L.mean_F_cz},
                     {"F_s", L.F_s},
                     {"F_mm", L.F_mm},
                     {"F_cz", L.F_cz},
                     {"ghz", {{"F", b.F_ghz}, {"F_readout", b.F_ghz_readout}, {"measured_mode", bm.F_ghz},
                              {"measured_mode_readout", bm.F_ghz_readout},
                              {"gamma1_r_zero", b0.F_ghz_readout}}},
                     {"exponential_model", {{"ratio", e.ratio}, {"threshold", e.threshold},
                                            {"resonator_dominated", e.resonator_dominated}}}};
      }
      return o;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    auto t0 = std::chrono::steady_clock::now();
    Device d = resolve_device(cm.device);
    d.validate();
    Output o = action(d);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::filesystem::create_directories(cm.out);
    json outputs = json::array();
    auto put = [&](const std::string& name, const std::string& body) {
      std::ofstream f(std::filesystem::path(cm.out) / name, std::ios::binary);
      if (!f) throw ValidationError("cannot write " + name);
      f << body;
      outputs.push_back(name);
    };
    for (const auto& [ext, body] : o.files) put(o.tag + ext, body);
    put(o.tag + ".json", o.summary.dump(2) + "\n");

    std::string config = app.config_to_str(true, false) + device_to_json(d);
    json manifest{{"command", std::vector<std::string>(argv, argv + argc)},
                  {"device", cm.device},
                  {"seed", cm.seed},
                  {"version", STARQ_VERSION},
                  {"threads", worker_count()},
                  {"wall_clock_s", wall},
                  {"outputs", outputs},
                  {"config_hash", hex(fnv1a(config))}};
    std::ofstream mf(std::filesystem::path(cm.out) / (o.tag + ".manifest.json"));
    mf << manifest.dump(2) << "\n";

    std::string csv;
    for (const auto& [ext, body] : o.files)
      if (ext == ".csv") csv = body;
    if (cm.format == "csv" && !csv.empty())
      std::cout << csv;
    else
      std::cout << o.summary.dump(2) << "\n";
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
