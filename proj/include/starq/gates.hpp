#pragma once

#include <map>
#include <string>
#include <vector>

#include "starq/common.hpp"
#include "starq/hilbert.hpp"

namespace starq {

// Per-manifold phases of the general JC gate. Index n-1 holds manifold n;
// missing entries are zero.
struct JCPhases {
  double theta = kPi;  // exchange angle
  std::vector<double> gamma, zeta, chi;

  double gamma_n(int n) const { return n >= 1 && n <= static_cast<int>(gamma.size()) ? gamma[n - 1] : 0.0; }
  double zeta_n(int n) const { return n >= 1 && n <= static_cast<int>(zeta.size()) ? zeta[n - 1] : 0.0; }
  double chi_n(int n) const { return n >= 1 && n <= static_cast<int>(chi.size()) ? chi[n - 1] : 0.0; }
};

// JC amplitudes of manifold n: c+ , c-, s+, s-.
struct JCAmplitudes {
  cplx c_plus, c_minus, s_plus, s_minus;
};
JCAmplitudes jc_amplitudes(const JCPhases& p, int n);

// General JC gate on qubit (3 levels) x resonator (n_max + 1 levels), qubit
// index major. The qubit |f> level and the unpartnered |e, n_max> are left
// unchanged.
Operator jc_gate(const JCPhases& phases, int n_max);

// MOVE: the JC gate at the exchange angle stored in `phases` (pi by default).
Operator move_gate(int n_max, const JCPhases& phases = {});

struct GuardResult {
  bool ok = true;
  double probability = 0.0;  // weight in {|e, n>=1>} and {|f, .>}
};

// Checks that the (qubit, resonator) marginal has no |e,n>=1> or |f> weight.
GuardResult move_guard(const Layout& layout, const State& psi, int qubit, int resonator, double tolerance = 1e-9);

// Dressed parameters for the five-level CZ model, ordinary GHz.
struct FiveLevelModel {
  double omega_q = 0.0;  // dressed qubit frequency
  double omega_r = 0.0;  // dressed resonator frequency
  double alpha_q = 0.0;
  double g_cz = 0.0;
  double g_move = 0.0;
  bool include_move_coupling = false;
  double t_ns = 0.0;
};

// Basis order {|gg0>, |eg0>, |gg1>, |eg1>, |fg0>}; coupler index dropped.
Eigen::Matrix<double, 5, 5> five_level_hamiltonian(const FiveLevelModel& m);

// exp(-i 2 pi H t) transformed to the frame rotating with the uncoupled
// dressed energies.
Eigen::Matrix<cplx, 5, 5> five_level_propagator(const FiveLevelModel& m);

struct CzSpec {
  double conditional_phase = kPi;  // e^{+i phi} on |e,1>
  double vz_qubit = 0.0;           // residual single-component phases
  double vz_resonator = 0.0;
  bool five_level = false;
  FiveLevelModel model;
};

// CZ on qubit (3 levels) x resonator (n_max + 1 levels).
Operator cz_gate(const CzSpec& spec, int n_max);

// SU(2) rotation by `angle` about the equatorial axis at `axis` (radians from
// x) on {g, e}; identity on f.
Operator rot(double axis, double angle);

// Phase e^{i k angle} on level k of a subsystem with `dim` levels.
Eigen::VectorXcd vz_diagonal(int dim, double angle);

struct FrameLedger {
  std::map<std::string, double> phase;      // accumulated VZ, unwrapped
  std::map<std::string, double> frame_GHz;  // current rotating-frame frequency
  double time_ns = 0.0;

  void add_vz(const std::string& component, double angle) { phase[component] += angle; }
};

// 2 pi (f_a - f_b) dt, accumulated into the ledger entry of `a` (the moved
// state). Frequencies come from the ledger frames.
double resolve_frame_phase(FrameLedger& ledger, const std::string& a, const std::string& b, double dt_ns);

}  // namespace starq
