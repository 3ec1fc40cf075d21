#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "starq/device.hpp"
#include "starq/gates.hpp"
#include "starq/hamiltonian.hpp"

namespace starq {

struct Axis {
  std::string name, unit;
  std::vector<double> values;
};

// Output of one calibration experiment. Rows of `data` enumerate the axes
// grid with the last axis fastest; one column per entry of `columns`.
struct CalibResult {
  std::string experiment;
  std::vector<Axis> axes;
  std::vector<std::string> columns;
  Eigen::MatrixXd data;
  std::map<std::string, double> optimum;
  bool extrapolated = false;  // optimum on the window edge or outside it
  std::map<std::string, double> diagnostics;
  std::vector<std::string> notes;

  long rows() const;
  double at(const std::string& key) const;  // optimum entry; throws when absent
};

void write_calib_csv(std::ostream& os, const CalibResult& r);
std::string calib_json(const CalibResult& r);  // everything except the data grid

// ---------------------------------------------------------------- trio chevrons

struct ChevronGrid {
  std::vector<double> wq, wc;
  double t_ns = 0;
  OperatingPoint guess;
};

// Grid centered on the closed-form operating point: +-`span_g` effective
// couplings in w_q, +-`wc_span` GHz in w_c. The pulse length is the MOVE
// duration, or half the CZ duration (complete swap into |f g 0>).
ChevronGrid default_chevron_grid(const Device& d, const std::string& qubit, GateKind kind, int n_wq = 41,
                                 int n_wc = 21, double span_g = 6.0, double wc_span = 0.15);

// Sudden square pulse of length t on the exact trio, from the idle dressed
// state |e g 0> (MOVE) or |e g 1> (CZ), read out in the idle dressed basis.
// Columns: P_e (MOVE) or P_r0, the probability that the resonator photon is
// gone (CZ). Optimum: minimum P_e, or maximum P_r0 (largest swap into |f g 0>).
// `qubit` is a circuit label.
CalibResult chevron(GateKind kind, const Device& d, const std::string& qubit, const std::vector<double>& wq,
                    const std::vector<double>& wc, double t_ns);

// ---------------------------------------------------------------- MOVE

struct MoveFineOptions {
  int n_moves = 8;
  std::vector<double> phi;       // default: 16 points over [0, 2 pi)
  std::vector<double> detuning;  // qubit offsets from the closed-form resonance, GHz
  std::optional<double> wc;      // coupler during the MOVE; default operating point
  std::optional<double> t_ns;    // MOVE length; default from the device
  int fit_points = 5;            // points around the maximum used in the quadratic fit
};

// X_pi; [MOVE; Z_phi]^(N-1); MOVE on the exact trio in the idle frame.
// Columns: P_e, P_e_mean (phi average). Optimum keys: detuning, omega_q,
// fringe (largest peak-to-peak over phi on the grid). Throws NumericalError
// when the peak is not inside the window.
CalibResult move_fine_cal(const Device& d, const std::string& qubit, const MoveFineOptions& opt = {});

struct MoveVzOptions {
  std::vector<int> n_list{2, 4, 6, 8};
  std::vector<double> phi;  // default: 24 points over [0, 2 pi)
  JCPhases move;            // injected MOVE phases
};

// X_pi/2; MOVE^N; VZ(N pi / 2); VZ(phi); X_-pi/2 with the gate model.
// Columns: P_g. Optimum keys: phi_N<N> (return-maximizing phi per N) and
// vz_pair, the phase per MOVE pair averaged over N (apply as VZ(q, vz_pair)).
CalibResult move_vz_cal(const Device& d, const std::string& qubit, const MoveVzOptions& opt = {});

// ---------------------------------------------------------------- CZ

struct CzPhaseOptions {
  CzSpec cz;                 // gate under test
  int resonator_repeats = 4; // CZs in the resonator Ramsey
  std::vector<double> phi;   // default: 24 points over [0, 2 pi)
};

// Ramsey on the CZ qubit with and without a photon loaded by `move_q`, and a
// Ramsey of the resonator itself through `move_q`. Optimum keys:
// conditional_phase, vz_qubit and vz_resonator (residual phases in CzSpec
// semantics; the corrections are their negatives), frame_phase (the
// subtracted detuning term).
CalibResult cz_phase_cal(const Device& d, const std::string& cz_q, const std::string& move_q,
                         const CzPhaseOptions& opt = {});

// ---------------------------------------------------------------- resonator

struct ResonatorOptions {
  int trajectories = 400;
  std::uint64_t seed = 1;
  bool thermal = false;
  // Resonator detuning seen by the probe; default f_CR - f_q from the device.
  std::optional<double> detuning_GHz;
};

// X_pi; MOVE; wait; MOVE. Columns: P_e. Optimum keys: T1_us, A, B.
CalibResult cr_t1(const Device& d, const std::string& probe, const std::vector<double>& delays_ns,
                  const ResonatorOptions& opt = {});

// X_pi/2; MOVE; wait tau; MOVE; VZ(2 pi dv tau); X_pi/2 for every virtual
// detuning dv (GHz). Columns: P_e. Optimum keys: f_osc (dominant frequency
// per trace, see diagnostics), detuning_GHz (sawtooth zero crossing nearest
// the window center), f_CR_GHz; with `decay_trace`, T2_star_us and f_fit from
// a damped-cosine fit of that trace.
CalibResult cr_ramsey(const Device& d, const std::string& probe, const std::vector<double>& delays_ns,
                      const std::vector<double>& virtual_GHz, const ResonatorOptions& opt = {},
                      std::optional<int> decay_trace = {});

// Least-absolute-deviation fit of f(dv) = |dv - delta| folded into [0, fs/2]; returns
// the crossing delta nearest `center`.
double sawtooth_crossing(const std::vector<double>& dv, const std::vector<double>& f_obs, double fs,
                         double center);

// ---------------------------------------------------------------- JC ladder

struct LadderOptions {
  std::optional<int> n_max;          // default: device resonator_n_max
  std::optional<std::string> spectator;  // default: another qubit
  JCPhases move;
};

// (X_pi; MOVE)^n with the MOVE guard bypassed. Columns: P over (qubit level,
// photon number). Optimum keys: P_ee = P(g, n) (fully climbed branch),
// P_eg = P(e, n - 1), spectator_e. Throws NumericalError on truncation
// overflow, i.e. when n_steps > n_max.
CalibResult jc_ladder(const Device& d, const std::string& qubit, int n_steps, const LadderOptions& opt = {});

// Amplitudes after (X_pi; MOVE)^n from |g, 0>, indexed [level * (n + 1) + photons],
// evaluated by multiplying 2x2 manifold blocks.
Eigen::VectorXcd jc_ladder_amplitudes(const JCPhases& phases, int n_steps);

// ---------------------------------------------------------------- populated Ramsey

struct PopulatedRamseyOptions {
  double phi = 0, phi_prime = 0;  // physical Z after the first and second probe MOVE
  JCPhases probe_move;            // injected phases of the probe MOVE
  std::optional<double> detuning_GHz;  // default f_CR - f_probe
};

// X_pi(load); MOVE(load); X_pi/2(probe); MOVE(probe); Z_phi; wait t; MOVE(probe);
// Z_phi'; X_pi/2(probe). Fits P_e = 1/2[1 - c2^2 cos(Dt + f) + s2^2 cos(2Dt + f')]
// linearly in the quadratures. Columns: P_e, fit. Optimum keys: phi_fit,
// phi_prime_fit, gamma2, zeta2 (mod pi), phi_corr = 2 zeta2,
// phi_prime_corr = 2 gamma2 + 2 zeta2. Throws ValidationError when the
// sampling cannot resolve 2D and NumericalError when the span is below one
// period of D.
CalibResult populated_ramsey(const Device& d, const std::string& load, const std::string& probe,
                             const std::vector<double>& delays_ns, const PopulatedRamseyOptions& opt = {});

// Closed form for a photon-number mixture with populations p_n and ideal JC
// gates (D t in radians):
// 1/2 sum_n p_n {1 + c_n^2 c_{n+1}^2 - (c_{n+1}^2 s_n^2 + c_n^2 s_{n+1}^2) cos Dt + s_n^2 s_{n+1}^2 cos 2Dt}.
double populated_ramsey_mixture(const std::vector<double>& photon_populations, double delta_t);

// P_e of the ideal-gate sequence without the load step, starting from the
// resonator state `resonator` (amplitudes over photon number).
double populated_ramsey_state(const Eigen::VectorXcd& resonator, double delta_t, const JCPhases& phases = {},
                              double phi = 0, double phi_prime = 0);

}  // namespace starq
