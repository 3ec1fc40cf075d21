#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "starq/common.hpp"
#include "starq/device.hpp"
#include "starq/gates.hpp"

namespace starq {

// Qubit-coupler-resonator trio, ordinary GHz.
struct TrioParams {
  double wq = 0, wc = 0, wr = 0;
  double aq = 0, ac = 0;
  double gqc = 0, grc = 0, gqr = 0;
};

struct CouplingBetas {
  double qc = 0.0219, rc = 0.02264, qr = 0.00197;
};

TrioParams trio_from_betas(double wq, double wc, double wr, double aq, double ac, const CouplingBetas& b);

// Reference parameter set used for the ZZ landscape (resonator at 4.3 GHz).
TrioParams reference_trio(double wq, double wc);

TrioParams trio_params(const Device& d, const std::string& qubit, std::optional<double> wq = {},
                       std::optional<double> wc = {});

struct EffectiveCouplings {
  double wq_t = 0, wr_t = 0;  // dressed frequencies
  double g_move = 0;          // g_{0e,1g}
  double g_cz = 0;            // g_{1e,0f}
  std::vector<double> g_ladder;     // g_{(n-1)e,ng}, index n-1
  std::vector<double> g_cz_ladder;  // g_{ne,(n-1)f}, index n-1
  double alpha_q = 0;
  double delta_t = 0;  // wr_t - wq_t
  double omega_t = 0;  // generalized Rabi sqrt((delta_t - alpha)^2 + 4 g_cz^2)
  double Dqc = 0, Drc = 0, Sqc = 0, Src = 0;
  double ratio_qc = 0, ratio_rc = 0;  // g/|Delta|
  std::vector<std::string> warnings;
};

// Second-order Schrieffer-Wolff closed forms. Throws NumericalError naming
// the vanishing denominator.
EffectiveCouplings effective_params(const TrioParams& p, int n_max = 4);
EffectiveCouplings effective_params(const Device& d, const std::string& qubit, std::optional<double> wq = {},
                                    std::optional<double> wc = {});

// Dense trio Hamiltonian over (qubit, coupler, resonator), row-major with the
// resonator fastest; counter-rotating terms kept.
Eigen::MatrixXd trio_hamiltonian(const TrioParams& p, int n_levels = 3, int nr_levels = 4);

struct StateLabel {
  int eigen = -1;
  double overlap = 0.0;
  bool degenerate = false;  // overlap below 0.5
};

struct TrioSpectrum {
  Eigen::VectorXd energies;
  Eigen::MatrixXd vectors;
  int nq = 3, nc = 3, nr = 4;
  // Bare-state label for every eigenvector (index into the bare basis).
  std::vector<int> eigen_label;
  std::vector<bool> eigen_degenerate;

  int basis_index(int q, int c, int r) const { return (q * nc + c) * nr + r; }
  StateLabel label(int q, int c, int r) const;
  // Energy of the eigenstate labeled |q c r>; throws on ambiguity.
  double energy(int q, int c, int r) const;
};

TrioSpectrum trio_spectrum(const TrioParams& p, int n_levels = 3, int nr_levels = 4);
TrioSpectrum trio_spectrum(const Device& d, const std::string& qubit, std::optional<double> wq,
                           std::optional<double> wc, int n_levels = 3);

struct ZZResult {
  double zeta_MHz = 0;
  double e_eg1 = 0, e_gg0 = 0, e_gg1 = 0, e_eg0 = 0;  // GHz

  static double combine(double eg1, double gg0, double gg1, double eg0) { return (eg1 + gg0 - gg1 - eg0) * 1e3; }
};

ZZResult zz_coupling(const TrioParams& p);
// Delta = w_r - w_q.
ZZResult zz_coupling(const Device& d, const std::string& qubit, double wc, double delta);

struct ZZPoint {
  double omega_c, delta, zeta_MHz;  // NaN when labels are ambiguous
};

// Grid over (w_c, Delta) with the trio built by `make(w_q, w_c)`.
std::vector<ZZPoint> zz_landscape(const std::function<TrioParams(double, double)>& make, double wr, double wc_lo,
                                  double wc_hi, int n_c, double d_lo, double d_hi, int n_d);
std::string landscape_csv(const std::vector<ZZPoint>& pts);

struct IdlingPoint {
  double omega_c = 0;
  double zeta_MHz = 0;
  bool degenerate = false;  // zeta vanishes over the whole range
};

// Root of zeta(w_c) at fixed w_q by bisection to 1 kHz; throws
// NumericalError when there is no sign change in [lo, hi].
IdlingPoint idling_point(const std::function<TrioParams(double)>& make_wc, double lo, double hi, int scan = 200);
IdlingPoint idling_point(const Device& d, const std::string& qubit, double lo = 5.0, double hi = 8.0);

// w_c in [lo, hi] minimizing |zeta|.
IdlingPoint min_zz_point(const std::function<TrioParams(double)>& make_wc, double lo, double hi, int scan = 200);

enum class GateKind { Move, Cz };

struct Crossing {
  double omega_q = 0;   // bare qubit frequency at the minimum gap
  double g_exact = 0;   // half the minimum splitting
  double g_sw = 0;      // |closed-form coupling| at omega_q
  double rel_error = 0;
};

// Scans w_q around the dressed resonance for the minimum splitting between
// the two eigenstates with the largest weight in the crossing pair.
Crossing exact_crossing(const std::function<TrioParams(double)>& make_wq, GateKind kind, double window = 0.03);
Crossing exact_crossing(const Device& d, const std::string& qubit, double wc, GateKind kind);

// w_q on the dressed resonance (MOVE: w~q = w~r, CZ: w~q + alpha = w~r).
double sw_resonance(const std::function<TrioParams(double)>& make_wq, GateKind kind, double guess);

struct OperatingPoint {
  double omega_q = 0, omega_c = 0;
  EffectiveCouplings eff;
};

// Coupler frequency between the resonator and the idle point where the
// closed-form coupling gives a full MOVE (1/(4 tau)) or a full CZ cycle
// (1/(2 tau)), with the qubit on the dressed resonance.
OperatingPoint gate_operating_point(const Device& d, const std::string& qubit, GateKind kind,
                                    std::optional<double> duration_ns = {});

// Five-level model at the dressed parameters.
FiveLevelModel five_level_model(const EffectiveCouplings& eff, double t_ns, bool include_move = false);

// Closed forms; t in ns, rates from ordinary GHz.
double cz_population(double t_ns, const EffectiveCouplings& eff);
double cz_conditional_phase(double t_ns, const EffectiveCouplings& eff);

struct SpectatorCoupling {
  std::string qubit;
  double g_MHz = 0;
  double zeta_kHz = 0;
  bool active = false;
};

enum class SpectatorMethod {
  // Each spectator trio plus the active trio, no excitation cap.
  Cluster,
  // All components, total excitation number capped at max_excitations.
  // With counter-rotating terms the cap drops the Bloch-Siegert shifts of
  // the highest manifold, which biases zeta by MHz.
  ExcitationRestricted,
};

struct SpectatorOptions {
  std::optional<double> active_wq;  // default: CZ dressed resonance
  SpectatorMethod method = SpectatorMethod::Cluster;
  int max_excitations = 2;
  bool rotating_wave = false;
  long max_dim = 4096;
};

// Transverse coupling and ZZ between the resonator and every qubit while the
// active coupler sits at wc_active; spectators stay at their idle point.
std::vector<SpectatorCoupling> spectator_couplings(const Device& d, const std::string& active_qubit,
                                                   double wc_active, const SpectatorOptions& opt = {});

}  // namespace starq
