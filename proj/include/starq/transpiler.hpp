#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "starq/circuit.hpp"
#include "starq/device.hpp"

namespace starq {

struct LowerOptions {
  // Force the resonator holder for every CZ that involves this qubit.
  std::optional<std::string> preferred_holder;
};

// Rewrites qubit-qubit CZs as MOVE(a); CZ(b, CR)...; MOVE(a); VZ(a, pi). The
// closing VZ undoes the Z left by a MOVE pair. Consecutive CZs sharing a holder
// reuse one MOVE pair; gates on the holder, barriers and measurements end the
// chain. The holder is the qubit with the longer upcoming chain (lowest index
// on ties).
Circuit lower_cz(const Circuit& logical, const LowerOptions& opt = {});

struct Diagnostic {
  std::size_t index = 0;
  std::string rule;  // "i".."iv", "logical-cz", "unbalanced"
  std::string message;
};

// Abstract interpretation over the resonator occupancy.
std::vector<Diagnostic> validate(const Circuit& native);

struct TimeSlot {
  double start_ns = 0, end_ns = 0;
};

struct Schedule {
  std::vector<TimeSlot> slots;  // one per instruction
  double total_ns = 0;          // including readout
  double gate_end_ns = 0;       // last non-measurement end
};

// As-soon-as-possible on per-component timelines; ops touching CR serialize
// through it, barriers synchronize every component.
Schedule schedule(const Circuit& c, const Device& d);

// Fixed per-gate corrections, keyed by circuit qubit label.
struct PhaseCorrections {
  std::map<std::string, double> move_pair;     // VZ on the qubit after each MOVE pair
  std::map<std::string, double> cz_qubit;      // VZ on the CZ qubit after each CZ
  std::map<std::string, double> cz_resonator;  // resonator phase per CZ, paid on MOVE-out
};

// Removes earlier frame VZs, then inserts fixed corrections and the
// time-dependent phase 2 pi (f_CR - f_q) t accumulated between each MOVE pair.
Circuit resolve_phases(const Circuit& native, const Device& d, const PhaseCorrections& corr = {});

// Detuning phase of a resonator-held state over `gap_ns` (radians, unwrapped).
double move_frame_phase(const Device& d, const std::string& qubit_label, double gap_ns);

// Y90 on all; CZ(l, k) for the first N-1 other qubits; barrier; Y90 + X on the
// CZ qubits. `move_qubit` is a circuit label.
Circuit ghz_logical(int N, const std::string& move_qubit);
std::vector<std::string> ghz_qubits(int N, const std::string& move_qubit);  // MOVE qubit first
Circuit ghz_circuit(int N, const std::string& move_qubit);                  // lowered

// Gate-by-gate inverse. MOVE becomes VZ(pi) MOVE VZ(pi); CZ is self-inverse;
// DEPOL is repeated.
Circuit inverse(const Circuit& c);

// Unitary folding to noise scale `lambda`: (U U^-1)^k U, then a partial fold
// U_h^-1 U_h over the last gates for the fractional remainder. Trailing
// measurements are kept at the end. Frame VZs are re-resolved when a device is
// given.
Circuit fold(const Circuit& c, double lambda, const Device* d = nullptr, const PhaseCorrections& corr = {});

}  // namespace starq
