#pragma once

#include <map>
#include <string>
#include <vector>

#include "starq/common.hpp"
#include "starq/device.hpp"

namespace starq {

enum class Op { Prx, Vz, Cz, Move, Barrier, Measure, Depol };

// Components are circuit labels: "q<i>" (1-based) or "CR".
struct Instruction {
  Op op = Op::Barrier;
  std::vector<std::string> targets;
  double angle = 0.0;  // PRX rotation angle, VZ angle, DEPOL probability
  double phase = 0.0;  // PRX axis phase
  bool frame = false;  // VZ inserted by phase resolution

  bool operator==(const Instruction& o) const {
    return op == o.op && targets == o.targets && angle == o.angle && phase == o.phase;
  }
};

struct Circuit {
  std::vector<Instruction> ins;

  Circuit& prx(const std::string& q, double angle, double phase);
  Circuit& rx(const std::string& q, double angle) { return prx(q, angle, 0.0); }
  Circuit& ry(const std::string& q, double angle) { return prx(q, angle, kPi / 2); }
  Circuit& vz(const std::string& c, double angle, bool frame = false);
  Circuit& cz(const std::string& a, const std::string& b);
  Circuit& move(const std::string& q);
  Circuit& barrier();
  Circuit& measure(const std::vector<std::string>& qs);
  Circuit& depol(const std::vector<std::string>& cs, double p);
  Circuit& append(const Circuit& other);

  // Qubit labels touched by the circuit, ordered by index.
  std::vector<std::string> qubits() const;
  bool uses_resonator() const;
  bool is_native() const;  // no qubit-qubit CZ
  std::vector<std::string> measured() const;
};

const char* op_name(Op op);

inline const std::string kResonatorLabel = "CR";
std::string qubit_label(int index);  // 1-based
bool is_qubit_label(const std::string& s);
int qubit_index(const std::string& label);  // 1-based; throws

// Device component id for a circuit label: q<i> -> i-th qubit, CR -> resonator.
std::string device_id(const Device& d, const std::string& label);

Circuit parse_circuit(const std::string& text);
std::string write_circuit(const Circuit& c);
Circuit load_circuit(const std::string& path);
void save_circuit(const Circuit& c, const std::string& path);

struct GateCounts {
  int prx = 0, vz = 0, cz = 0, move = 0, measure = 0, depol = 0;
};
GateCounts count_gates(const Circuit& c);

}  // namespace starq
