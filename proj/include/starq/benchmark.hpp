#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "starq/circuit.hpp"
#include "starq/device.hpp"
#include "starq/fit.hpp"
#include "starq/simulator.hpp"
#include "starq/transpiler.hpp"

namespace starq {

// ---------------------------------------------------------------- RB

struct RbPoint {
  int k = 0;  // interleave count, 0 for the reference curve
  int m = 0;  // Clifford count
  double mean = 0.0, sem = 0.0;
  std::vector<double> survival;  // per sequence, ground-state frequency
};

struct RbData {
  int dim = 2;  // 2 (1q) or 4 (2q)
  std::vector<RbPoint> points;
};

struct RbOptions {
  std::vector<int> m_list{1, 4, 8, 16, 32, 64, 100};
  int n_seq = 60;
  long shots = 256;
  int trajectories = 32;  // per sequence, only when the noise is stochastic
  std::uint64_t seed = 1;
  double clifford_depol = 0.0;  // DEPOL probability after every Clifford
  ExecOptions exec;
  PhaseCorrections corrections;
};

// Native fragment inserted after every Clifford, with the Clifford it
// implements in the absence of errors (index into the 1q or 2q group).
struct Interleave {
  Circuit gate;
  int ideal = 0;
};

// One decay curve on 1 or 2 qubits (circuit labels). Two-qubit Cliffords use
// logical CZs lowered with the first qubit as resonator holder. Points are
// labeled with `k`.
RbData rb_experiment(const Device& d, const std::vector<std::string>& qubits, const RbOptions& opt,
                     const std::optional<Interleave>& interleave = {}, int k = 0);

struct DecayFit {
  double A = 0, B = 0, A_err = 0, B_err = 0;
  std::map<int, double> p, p_err;
  // F_k = 1 - (1 - p_k / p_ref)(d - 1)/d for every k other than the reference.
  std::map<int, double> fidelity, fidelity_err;
  int reference_k = 0;
  int dim = 2;
  FitResult fit;
};

// Shared A, B across curves; p_k per curve. Reference is the smallest k.
DecayFit fit_decay(const RbData& data);

struct QuadraticFidelityFit {
  double alpha = 0, beta = 0, gamma = 1;
  double alpha_err = 0, beta_err = 0, gamma_err = 0;
  bool gamma_fixed = true;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // (alpha, beta, gamma)

  double at(double k) const { return gamma - alpha * k * k - beta * k; }
  double at_err(double k) const;
};

// f(k) = gamma - alpha k^2 - beta k; gamma fixed when given.
QuadraticFidelityFit fit_quadratic(const std::vector<double>& k, const std::vector<double>& f,
                                   std::optional<double> gamma_fixed = 1.0);

struct IrbResult {
  RbData data;
  DecayFit decay;
  QuadraticFidelityFit quadratic;
  double F = 1, F_err = 0;            // F_mm or F_cz
  double gamma_m = 1, gamma_m_err = 0;  // MOVE-lCZ-MOVE only
};

// Double-MOVE iRB: interleaves MOVE^(2k) VZ(k pi); F_mm = f_m(1).
IrbResult irb_move(const Device& d, const std::string& qubit, const std::vector<int>& k_list, const RbOptions& opt);

// MOVE(a) CZ(b, CR)^l MOVE(a) VZ(a, pi) with 2q reference; F_cz = f_cz(1) / gamma_m.
IrbResult irb_move_lcz(const Device& d, const std::string& move_qubit, const std::string& cz_qubit,
                       const std::vector<int>& l_list, const RbOptions& opt);

// ---------------------------------------------------------------- readout

struct AssignmentMatrix {
  std::vector<Eigen::Matrix2d> per_qubit;  // A(j, i) = P(read j | prepared i)

  Eigen::MatrixXd full() const;  // first qubit most significant
  void check() const;            // stochastic columns; throws otherwise
};

struct Mitigated {
  Eigen::VectorXd quasi;    // may contain small negatives
  Eigen::VectorXd clipped;  // negatives zeroed, renormalized
  double negative_mass = 0;
};

// Throws NumericalError when any per-qubit matrix is singular.
Mitigated mitigate_counts(const std::vector<long>& counts, const AssignmentMatrix& a);
Mitigated mitigate_distribution(const Eigen::VectorXd& p, const AssignmentMatrix& a);

// ---------------------------------------------------------------- GHZ / MQC

struct MqcOptions {
  // Trajectories shared among the 2N+3 settings.
  int trajectories = 4096;
  long shots = 1024;  // per setting
  bool mitigate = false;
  std::uint64_t seed = 1;
  ExecOptions exec;
  PhaseCorrections corrections;
};

struct MqcTerms {
  double P = 0, C = 0, I_N = 0, F = 0;
  std::vector<double> S;
};

struct MqcResult {
  int N = 0;
  std::vector<double> phi;
  MqcTerms raw, mitigated;
  double F = 0;  // mitigated when requested, raw otherwise
};

// N-th Fourier amplitude |(1/M) sum_j S_j e^{i N phi_j}|.
double fourier_amplitude(const std::vector<double>& S, const std::vector<double>& phi, int N);

// MQC fidelity of the state prepared by the native circuit `prep` on `qubits`.
MqcResult mqc_fidelity(const Device& d, const Circuit& prep, const std::vector<std::string>& qubits,
                       const MqcOptions& opt);
MqcResult mqc_ghz_fidelity(const Device& d, int N, const std::string& move_qubit, const MqcOptions& opt);

// ---------------------------------------------------------------- Q-score

struct Graph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;
};

Graph erdos_renyi(int n, double p, Rng& rng);
// Cut value of every assignment of the first `n_free` vertices (vertex i is
// bit n_free-1-i of the index); with `virtual_node`, the last vertex is
// fixed to 0 and n_free = n - 1.
Eigen::VectorXd cut_values(const Graph& g, bool virtual_node = false);
int max_cut(const Graph& g);

struct QaoaAngles {
  double gamma = 0, beta = 0;
  double expected = 0;  // noiseless <C>
};

// Grid over gamma in [0, 2 pi), beta in [0, pi), then one finer grid around
// the best point.
QaoaAngles qaoa_p1_angles(const Graph& g, int grid = 121, bool virtual_node = false);
double qaoa_p1_expectation(const Eigen::VectorXd& cuts, int n_qubits, double gamma, double beta);
// Logical circuit with measurement on q1..q_m.
Circuit qaoa_p1_circuit(const Graph& g, double gamma, double beta, bool virtual_node = false);

struct QscoreOptions {
  int n_graphs = 60;
  std::uint64_t seed = 1;
  bool virtual_node = false;
  int grid = 121;
  int trajectories = 64;
  long shots = 0;  // 0: exact expectation from the outcome distribution
  ExecOptions exec;
};

struct QscoreGraph {
  int index = 0;
  int resampled = 0;  // degenerate draws skipped before this graph
  int edges = 0;
  int c_opt = 0;
  double gamma = 0, beta = 0;
  double ideal = 0;     // noiseless <C>
  double measured = 0;  // simulated <C>
  double ratio = 0;     // (measured - |E|/2) / (c_opt - |E|/2)
};

struct QscoreResult {
  int n = 0;
  double beta = 0, sem = 0;
  bool pass = false;  // beta > 0.2
  std::vector<QscoreGraph> graphs;
};

QscoreResult qscore(const Device& d, int n, const QscoreOptions& opt);

// ---------------------------------------------------------------- TFIM / ZNE

// exp(-i theta/2 Z_a Z_b) as Ry_b(pi/2), CZ, Rx_b(theta), CZ, Ry_b(-pi/2).
void append_zz(Circuit& c, const std::string& a, const std::string& b, double theta);

double tfim_ground_energy(int n, double g);
Eigen::MatrixXd tfim_hamiltonian(int n, double g);

struct TfimAnsatz {
  int n = 6;
  double g = 1.0;
  std::vector<double> gamma, beta;
  double energy = 0;  // noiseless
};

Eigen::VectorXcd tfim_qaoa_state(const TfimAnsatz& a);
double tfim_state_energy(const Eigen::VectorXcd& psi, int n, double g);
// Nelder-Mead with seeded restarts.
TfimAnsatz tfim_optimize(int n, double g, int p, std::uint64_t seed, int restarts = 8);
// Logical circuit without measurement: |+> layers of ZZ and X rotations.
Circuit tfim_qaoa_circuit(const TfimAnsatz& a);

// Energy from Z-basis and X-basis distributions (or counts) over the ring.
double tfim_energy(const Eigen::VectorXd& pz, const Eigen::VectorXd& px, int n, double g);
double tfim_energy(const std::vector<long>& counts_z, const std::vector<long>& counts_x, int n, double g);

struct ZneResult {
  double value = 0;
  bool fallback = false;  // linear extrapolation used
  std::vector<double> params;  // v_inf, a, b (or intercept, slope)
  std::string message;
};

// v(lambda) = v_inf + a b^lambda, reported at lambda = 0.
ZneResult zne(const std::vector<double>& lambdas, const std::vector<double>& values);

struct TfimZneOptions {
  int n = 6;
  double g = 1.0;
  int p = 3;
  std::vector<double> lambdas{1, 2, 3};
  int trajectories = 400;
  std::uint64_t seed = 1;
  double target_shortfall = 0.2;  // raw lambda = 1 energy relative deficit
  std::optional<double> depol_2q;  // skip tuning when given
  double depol_ratio = 0.1;        // depol_1q / depol_2q
};

struct TfimZneResult {
  TfimAnsatz ansatz;
  double exact = 0;
  double depol_2q = 0, depol_1q = 0;
  std::vector<double> lambdas, energy, sem;
  GateCounts counts;  // native, lambda = 1
  ZneResult zne;
};

TfimZneResult tfim_zne(const Device& d, const TfimZneOptions& opt);

// ---------------------------------------------------------------- CSV

void write_rb_csv(std::ostream& os, const RbData& data);
void write_qscore_csv(std::ostream& os, const QscoreResult& r);
void write_zne_csv(std::ostream& os, const TfimZneResult& r);
void write_mqc_csv(std::ostream& os, const MqcResult& r);

}  // namespace starq
