#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "starq/common.hpp"
#include "starq/hilbert.hpp"

namespace starq {

// Ordinary frequencies in GHz, coherence times in us, durations in ns,
// temperatures in mK.
struct ComponentParams {
  std::string id;
  Kind kind = Kind::Qubit;
  double frequency_GHz = 0.0;
  double anharmonicity_GHz = 0.0;
  std::optional<double> T1_us;
  std::optional<double> T2_star_us;
  std::optional<double> T2_echo_us;
  double temperature_mK = 0.0;
  // Measured benchmark values, used only by the measured-fidelity budget.
  std::optional<double> F_sq_individual;
  std::optional<double> F_sq_simultaneous;
  std::optional<double> F_double_move;
  std::optional<double> F_cz;
};

enum class CouplingRole { QubitCoupler, CouplerResonator, QubitResonator };

struct CouplingParams {
  std::string a, b;
  CouplingRole role = CouplingRole::QubitCoupler;
  std::optional<double> beta;   // g / omega
  std::optional<double> g_GHz;  // absolute, takes precedence over beta
};

struct GateDurations {
  double single_ns = 40.0;
  double move_ns = 80.0;
  double cz_ns = 80.0;
  double readout_ns = 800.0;
};

struct ReadoutSpec {
  std::optional<double> fidelity;
  // A(j, i) = P(measured j | prepared i)
  Eigen::Matrix2d assignment = Eigen::Matrix2d::Identity();
};

// Rates in 1/us.
struct Rates {
  double gamma1 = 0.0;
  double gamma_phi = 0.0;
  double n_th = 0.0;
};

struct Device {
  std::vector<ComponentParams> components;
  std::vector<CouplingParams> couplings;
  std::map<std::string, GateDurations> durations;
  std::map<std::string, ReadoutSpec> readout;
  int resonator_n_max = 4;

  const ComponentParams& component(const std::string& id) const;
  ComponentParams& component(const std::string& id);
  bool has_component(const std::string& id) const;
  std::vector<std::string> qubit_ids() const;
  std::string resonator_id() const;
  std::string coupler_of(const std::string& qubit) const;
  const GateDurations& duration(const std::string& qubit) const;
  Eigen::Matrix2d assignment(const std::string& qubit) const;

  // Absolute coupling (GHz) between two components, resolving beta via
  // g = beta * sqrt(f_a f_b) at the given (or configured) frequencies.
  double coupling(const std::string& a, const std::string& b, std::optional<double> f_a = {},
                  std::optional<double> f_b = {}) const;
  const CouplingParams* find_coupling(const std::string& a, const std::string& b) const;

  // Throws ValidationError on any schema or physical-invariant violation.
  void validate() const;
};

bool operator==(const ComponentParams& a, const ComponentParams& b);
bool operator==(const CouplingParams& a, const CouplingParams& b);
bool operator==(const GateDurations& a, const GateDurations& b);
bool operator==(const Device& a, const Device& b);

// Bose-Einstein occupation at ordinary frequency f (GHz) and temperature T (mK).
double bose_einstein(double f_GHz, double T_mK);

Rates derived_rates(const ComponentParams& c);

// Symmetric assignment matrix with off-diagonals 1 - F.
Eigen::Matrix2d assignment_from_fidelity(double F);

Device parse_device(const std::string& json_text);
std::string device_to_json(const Device& d);
Device load_device(const std::string& path);
void save_device(const Device& d, const std::string& path);

// "preset:<name>" or a file path.
Device resolve_device(const std::string& ref);
Device preset_device(const std::string& name);

}  // namespace starq
