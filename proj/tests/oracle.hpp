#pragma once

// Minimal two-level statevector used as an independent reference for logical
// circuits: qubit q<i> is bit n-i of the index (q1 most significant).

#include <random>
#include <string>

#include "starq/circuit.hpp"

namespace oracle {

using starq::cplx;
using starq::kI;

inline void apply_1q(Eigen::VectorXcd& v, int n, int q, const Eigen::Matrix2cd& u) {
  long bit = 1L << (n - q);
  for (long i = 0; i < v.size(); ++i) {
    if (i & bit) continue;
    cplx a = v(i), b = v(i | bit);
    v(i) = u(0, 0) * a + u(0, 1) * b;
    v(i | bit) = u(1, 0) * a + u(1, 1) * b;
  }
}

inline Eigen::Matrix2cd prx(double angle, double phase) {
  Eigen::Matrix2cd u;
  double c = std::cos(angle / 2), s = std::sin(angle / 2);
  u << c, -kI * std::exp(-kI * phase) * s, -kI * std::exp(kI * phase) * s, c;
  return u;
}

// Logical circuits only: PRX, VZ, qubit-qubit CZ; barriers and measurements skipped.
inline Eigen::VectorXcd run(const starq::Circuit& c, int n, Eigen::VectorXcd v) {
  using starq::Op;
  for (const auto& in : c.ins) {
    if (in.op == Op::Prx) {
      apply_1q(v, n, starq::qubit_index(in.targets[0]), prx(in.angle, in.phase));
    } else if (in.op == Op::Vz) {
      Eigen::Matrix2cd u = Eigen::Matrix2cd::Zero();
      u(0, 0) = 1;
      u(1, 1) = std::exp(kI * in.angle);
      apply_1q(v, n, starq::qubit_index(in.targets[0]), u);
    } else if (in.op == Op::Cz) {
      long a = 1L << (n - starq::qubit_index(in.targets[0])), b = 1L << (n - starq::qubit_index(in.targets[1]));
      for (long i = 0; i < v.size(); ++i)
        if ((i & a) && (i & b)) v(i) = -v(i);
    }
  }
  return v;
}

inline Eigen::VectorXcd random_state(int n, std::mt19937_64& g) {
  std::normal_distribution<double> d;
  Eigen::VectorXcd v(1L << n);
  for (long i = 0; i < v.size(); ++i) v(i) = cplx(d(g), d(g));
  return v.normalized();
}

// Random logical circuit over q1..q<n> with every qubit touched.
inline starq::Circuit random_circuit(int n, int depth, std::mt19937_64& g) {
  std::uniform_int_distribution<int> pick(1, n), kind(0, 3);
  std::uniform_real_distribution<double> ang(-3.2, 3.2);
  starq::Circuit c;
  for (int q = 1; q <= n; ++q) c.prx(starq::qubit_label(q), ang(g), ang(g));
  for (int k = 0; k < depth; ++k) {
    int t = kind(g), a = pick(g);
    if (t <= 1) {
      int b = a;
      while (b == a) b = pick(g);
      c.cz(starq::qubit_label(a), starq::qubit_label(b));
    } else if (t == 2) {
      c.prx(starq::qubit_label(a), ang(g), ang(g));
    } else {
      c.vz(starq::qubit_label(a), ang(g));
    }
  }
  return c;
}

}  // namespace oracle
