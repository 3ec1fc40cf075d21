#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "starq/common.hpp"
#include "starq/device.hpp"
#include "starq/hilbert.hpp"

namespace starq {

// Rates in 1/us, durations in ns.
struct NoiseChannel {
  int subsystem = 0;
  Rates rates;
};

// Jump operators sqrt(g1 (1+n)) a, sqrt(g1 n) a^dag, sqrt(2 g_phi) n on one
// subsystem. Because every L^dag L is diagonal, the no-jump evolution is an
// exact per-level damping and waiting times are sampled by inverting the norm
// decay.
void trajectory_step(const Layout& layout, State& psi, int subsystem, const Rates& r, double dt_ns, Rng& rng);
void trajectory_step(const Layout& layout, State& psi, const std::vector<NoiseChannel>& channels, double dt_ns,
                     Rng& rng);

// Rates with thermal occupation removed unless `thermal`.
Rates component_rates(const ComponentParams& c, bool thermal);

double limit_sqg(double gamma1, double gamma_phi, double n_q, double tau_ns);
double limit_move(double g1q, double g1r, double gpq, double gpr, double nq, double nr, double tau_ns);
double limit_cz(double g1q, double g1r, double gpq, double gpr, double nq, double nr, double tau_ns);

struct MoveLimit {
  double F_m = 1.0;
  double F_mm = 1.0;
};
MoveLimit limit_move(const Device& d, const std::string& qubit, bool thermal = false);
double limit_cz(const Device& d, const std::string& qubit, bool thermal = false);

struct DeviceLimits {
  std::map<std::string, double> F_s, F_mm, F_cz;
  double mean_F_mm = 0, mean_F_cz = 0;
};
DeviceLimits device_limits(const Device& d, bool thermal = false);

enum class IdleMode { Modeled, Measured };

struct GhzBudgetOptions {
  bool thermal = true;
  IdleMode mode = IdleMode::Modeled;
  std::optional<double> gamma1_r;  // override of the resonator decay rate
};

struct CoherenceBudget {
  std::string move_qubit;
  std::vector<std::string> cz_qubits;
  std::map<std::string, double> F_s, F_cz;
  double F_m = 1, F_mm = 1;
  double F1 = 1, F2 = 1, F3 = 1, F4 = 1, F5 = 1;
  double F_ghz = 1;
  double readout = 1;
  double F_ghz_readout = 1;
};

// Product model of the GHZ preparation: Y90 on all, MOVE, CZ cascade on the
// other N-1 qubits, MOVE, Y90 + X on the CZ qubits. Idles are SQG limits at
// the duration of the operation being waited on.
CoherenceBudget ghz_budget(const Device& d, const std::string& move_qubit, int N, const GhzBudgetOptions& opt = {});

// The CZ qubits used for an N-qubit GHZ state with the given MOVE qubit.
std::vector<std::string> ghz_cz_qubits(const Device& d, const std::string& move_qubit, int N);

enum class RatioSet { AllQubits, CzQubits };

struct ExponentialModel {
  double qubit_term = 1, resonator_term = 1;
  double ratio = 0;      // gamma1_r / mean gamma1_q
  double threshold = 0;  // 10N/9 + 5/3
  bool resonator_dominated = false;
  double tau_ns = 0;
};

ExponentialModel ghz_exponential_model(const Device& d, const std::string& move_qubit, int N,
                                       RatioSet set = RatioSet::AllQubits);

}  // namespace starq
