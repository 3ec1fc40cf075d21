#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "starq/circuit.hpp"
#include "starq/device.hpp"
#include "starq/gates.hpp"
#include "starq/hilbert.hpp"
#include "starq/transpiler.hpp"

namespace starq {

enum class Policy { Throw, Record };

// Gate unitaries used for native instructions, keyed by circuit qubit label.
struct GateModel {
  std::map<std::string, JCPhases> move;
  std::map<std::string, CzSpec> cz;
  // Resonator accumulates e^{-i n 2 pi (f_CR - f_ref) dt} between MOVEs, where
  // f_ref is the frequency of the qubit that last moved.
  bool frame_tracking = true;
  // Throw acts only in deterministic runs. In stochastic runs a jump (decay,
  // thermal photon, random Pauli) can legitimately reach these states, so the
  // trajectory records them instead.
  Policy guard = Policy::Throw;
  Policy overflow = Policy::Throw;
};

struct NoiseModel {
  bool decoherence = false;
  bool thermal = false;
  std::optional<double> gamma1_r;  // overrides the resonator decay rate (1/us)
  // Probability of a uniformly random Pauli (identity included) on the
  // targets after each PRX / each MOVE or CZ.
  double depol_1q = 0.0;
  double depol_2q = 0.0;
  bool readout = false;

  bool stochastic() const { return decoherence || depol_1q > 0 || depol_2q > 0; }
};

struct ExecOptions {
  int n_max = 2;
  GateModel gates;
  NoiseModel noise;
  double overflow_tolerance = 1e-6;
  // Subsystem qubits; defaults to the circuit's qubits. The resonator is
  // included when the circuit uses it or `with_resonator` is set.
  std::vector<std::string> qubits;
  bool with_resonator = false;
};

struct Trajectory {
  State psi;
  double overflow = 0.0;        // probability pushed past the truncation
  double guard_max = 0.0;       // largest guard violation seen
  int guard_violations = 0;
};

class Simulator {
 public:
  Simulator(const Device& d, const Circuit& c, ExecOptions opt = {});

  const Layout& layout() const { return layout_; }
  const Schedule& timing() const { return sched_; }
  const std::vector<std::string>& measured() const { return measured_; }
  int subsystem(const std::string& label) const { return layout_.index_of(label); }

  const ExecOptions& options() const { return opt_; }
  // True when trajectories differ: stochastic noise or DEPOL instructions.
  bool stochastic() const;

  State ground() const;
  // Amplitudes of the qubits restricted to {g, e} with the resonator empty,
  // qubits in layout order (first most significant).
  Eigen::VectorXcd computational(const State& psi) const;
  State from_computational(const Eigen::VectorXcd& amp) const;
  Trajectory run(Rng& rng) const;
  Trajectory run(const State& init, Rng& rng) const;

  // P(bits) over the measured qubits (first qubit most significant), any
  // excitation reads as 1. Without MEASURE every circuit qubit counts.
  Eigen::VectorXd outcome_probabilities(const State& psi) const;
  std::vector<Eigen::Matrix2d> assignment() const;

 private:
  struct Step {
    std::vector<int> targets;
    Operator op;             // dense local unitary (PRX, CZ, MOVE)
    Eigen::VectorXcd diag;   // VZ
    bool diagonal = false;
    double f_qubit = 0.0;    // MOVE target frequency
    double theta = kPi;      // MOVE exchange angle
    LocalIndex idx;
    std::vector<long> guard_idx;  // MOVE: |e, n>=1> and |f, .> indices
    std::vector<long> top_idx;    // MOVE: |e, n_max> indices
  };

  void noise_until(State& psi, std::vector<double>& clock, int k, double t, Rng& rng) const;
  void depolarize(State& psi, const std::vector<int>& targets, double p, Rng& rng) const;

  Device device_;
  Circuit circuit_;
  ExecOptions opt_;
  Layout layout_;
  Schedule sched_;
  std::vector<Step> steps_;
  std::vector<Rates> rates_;  // per subsystem
  std::vector<std::string> measured_;
  std::vector<int> measured_idx_;
  int res_ = -1;
  double f_res_ = 0.0;
  LocalIndex res_idx_;
};

struct EnsembleResult {
  Eigen::VectorXd probabilities;  // trajectory average, before readout error
  std::vector<long> counts;       // sampled with readout error when enabled
  double overflow_max = 0.0;
  long guard_violations = 0;
  int trajectories = 0;
};

// Runs `trajectories` trajectories (one when the model is deterministic) with
// per-trajectory generators task_rng(seed, i), averages in index order and
// samples `shots` outcomes.
EnsembleResult run_ensemble(const Simulator& sim, int trajectories, long shots, std::uint64_t seed,
                            const std::optional<State>& init = {});

// Applies per-qubit 2x2 matrices to a distribution over bitstrings (first
// qubit most significant).
Eigen::VectorXd apply_tensor(const Eigen::VectorXd& p, const std::vector<Eigen::Matrix2d>& mats);

std::vector<long> sample_counts(const Eigen::VectorXd& p, long shots, Rng& rng);

std::string bitstring(long index, int n);

// Vector sum in pairwise index order.
Eigen::VectorXd ordered_sum(const std::vector<Eigen::VectorXd>& v);

// Ideal statevector of a logical circuit on 2-level qubits (CZ between qubits
// allowed, no resonator). Used as reference semantics.
Eigen::VectorXcd reference_state(const Circuit& logical, int n_qubits, const Eigen::VectorXcd& init);

}  // namespace starq
