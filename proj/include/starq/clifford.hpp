#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "starq/circuit.hpp"
#include "starq/common.hpp"

namespace starq {

// A PRX pulse: rotation `angle` about the equatorial axis `phase`.
struct Pulse {
  double angle = 0.0, phase = 0.0;
};

struct Clifford1 {
  Eigen::Matrix2cd u;
  std::vector<Pulse> pulses;  // time order
};

// The 24 single-qubit Cliffords over {+-X90, +-Y90, X180, Y180}, shortest
// decompositions; element 0 is the identity.
const std::vector<Clifford1>& clifford_1q();
int clifford_1q_find(const Eigen::Matrix2cd& u);  // -1 when absent
int clifford_1q_inverse(int i);
// Element equal to "first, then second".
int clifford_1q_then(int first, int second);

// Operation of a two-qubit decomposition: a pair of single-qubit Cliffords or
// a CZ between the two qubits.
struct Clifford2Op {
  bool cz = false;
  int c0 = 0, c1 = 0;  // 1q Clifford indices on the first and second qubit
};

struct Clifford2 {
  Eigen::Matrix4cd u;  // basis index 2 q0 + q1
  std::vector<Clifford2Op> ops;
  int cz_count = 0;
};

class Clifford2Group {
 public:
  static const Clifford2Group& instance();

  std::size_t size() const { return elems_.size(); }
  const Clifford2& operator[](std::size_t i) const { return elems_[i]; }
  int find(const Eigen::Matrix4cd& u) const;  // -1 when absent
  int inverse(int i) const;
  int then(int first, int second) const;
  // Elements per number of CZs in the decomposition.
  std::array<int, 4> class_counts() const;

 private:
  Clifford2Group();
  std::vector<Clifford2> elems_;
  std::unordered_multimap<std::uint64_t, int> index_;
};

// Phase-insensitive equality of unitaries.
bool equal_up_to_phase(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b, double tol = 1e-8);

void append_clifford_1q(Circuit& c, int element, const std::string& q);
// Emits single-qubit pulses and logical CZ(q0, q1).
void append_clifford_2q(Circuit& c, int element, const std::string& q0, const std::string& q1);

}  // namespace starq
