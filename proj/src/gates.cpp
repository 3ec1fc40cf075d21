#include "starq/gates.hpp"

#include <Eigen/Eigenvalues>

namespace starq {

JCAmplitudes jc_amplitudes(const JCPhases& p, int n) {
  double x = std::sqrt(static_cast<double>(n)) * p.theta / 2.0;
  double c = std::cos(x), s = std::sin(x);
  double g = p.gamma_n(n), z = p.zeta_n(n), h = p.chi_n(n);
  return {std::polar(c, -(g + z)), std::polar(c, -(g - z)), std::polar(s, -(g + h)), std::polar(s, -(g - h))};
}

Operator jc_gate(const JCPhases& phases, int n_max) {
  if (n_max < 1) throw ValidationError("jc_gate: n_max must be >= 1");
  const int dr = n_max + 1;
  auto idx = [dr](int q, int n) { return q * dr + n; };
  Operator u = Operator::Identity(3 * dr, 3 * dr);
  for (int n = 1; n <= n_max; ++n) {
    JCAmplitudes a = jc_amplitudes(phases, n);
    int e = idx(1, n - 1), g = idx(0, n);
    u(e, e) = a.c_plus;
    u(g, e) = -kI * a.s_minus;
    u(e, g) = -kI * a.s_plus;
    u(g, g) = a.c_minus;
  }
  return u;
}

Operator move_gate(int n_max, const JCPhases& phases) { return jc_gate(phases, n_max); }

GuardResult move_guard(const Layout& layout, const State& psi, int qubit, int resonator, double tolerance) {
  GuardResult r;
  for (long i = 0; i < psi.size(); ++i) {
    int q = layout.digit(i, qubit);
    int n = layout.digit(i, resonator);
    if (q == 2 || (q == 1 && n >= 1)) r.probability += std::norm(psi(i));
  }
  r.ok = r.probability <= tolerance;
  return r;
}

Eigen::Matrix<double, 5, 5> five_level_hamiltonian(const FiveLevelModel& m) {
  Eigen::Matrix<double, 5, 5> h = Eigen::Matrix<double, 5, 5>::Zero();
  h(1, 1) = m.omega_q;
  h(2, 2) = m.omega_r;
  h(3, 3) = m.omega_q + m.omega_r;
  h(4, 4) = 2.0 * m.omega_q + m.alpha_q;
  h(3, 4) = h(4, 3) = m.g_cz;
  if (m.include_move_coupling) h(1, 2) = h(2, 1) = m.g_move;
  return h;
}

Eigen::Matrix<cplx, 5, 5> five_level_propagator(const FiveLevelModel& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 5, 5>> es(five_level_hamiltonian(m));
  const double w = kTwoPi * m.t_ns;
  Eigen::Matrix<cplx, 5, 5> u = Eigen::Matrix<cplx, 5, 5>::Zero();
  for (int k = 0; k < 5; ++k) {
    cplx ph = std::exp(-kI * w * es.eigenvalues()(k));
    u += ph * (es.eigenvectors().col(k) * es.eigenvectors().col(k).transpose()).cast<cplx>();
  }
  const double frame[5] = {0.0, m.omega_q, m.omega_r, m.omega_q + m.omega_r, 2.0 * m.omega_q};
  for (int r = 0; r < 5; ++r) u.row(r) *= std::exp(kI * w * frame[r]);
  return u;
}

Operator cz_gate(const CzSpec& spec, int n_max) {
  if (n_max < 1) throw ValidationError("cz_gate: n_max must be >= 1");
  const int dr = n_max + 1;
  auto idx = [dr](int q, int n) { return q * dr + n; };
  Operator u = Operator::Identity(3 * dr, 3 * dr);
  if (spec.five_level) {
    if (!(spec.model.t_ns >= 0)) throw ValidationError("cz_gate: five-level duration missing");
    auto p = five_level_propagator(spec.model);
    const int map[5] = {idx(0, 0), idx(1, 0), idx(0, 1), idx(1, 1), idx(2, 0)};
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 5; ++c) u(map[r], map[c]) = p(r, c);
  } else {
    u(idx(1, 1), idx(1, 1)) = std::exp(kI * spec.conditional_phase);
  }
  if (spec.vz_qubit != 0.0 || spec.vz_resonator != 0.0) {
    for (int q = 0; q < 3; ++q)
      for (int n = 0; n < dr; ++n) u.row(idx(q, n)) *= std::exp(kI * (spec.vz_qubit * q + spec.vz_resonator * n));
  }
  return u;
}

Operator rot(double axis, double angle) {
  Operator u = Operator::Identity(3, 3);
  double c = std::cos(angle / 2.0), s = std::sin(angle / 2.0);
  u(0, 0) = c;
  u(1, 1) = c;
  u(0, 1) = -kI * std::exp(-kI * axis) * s;
  u(1, 0) = -kI * std::exp(kI * axis) * s;
  return u;
}

Eigen::VectorXcd vz_diagonal(int dim, double angle) {
  Eigen::VectorXcd d(dim);
  for (int k = 0; k < dim; ++k) d(k) = std::exp(kI * (angle * k));
  return d;
}

double resolve_frame_phase(FrameLedger& ledger, const std::string& a, const std::string& b, double dt_ns) {
  if (dt_ns < 0) throw ValidationError("resolve_frame_phase: negative interval");
  double fa = ledger.frame_GHz.count(a) ? ledger.frame_GHz.at(a) : 0.0;
  double fb = ledger.frame_GHz.count(b) ? ledger.frame_GHz.at(b) : 0.0;
  double phi = kTwoPi * (fa - fb) * dt_ns;
  ledger.phase[a] += phi;
  return phi;
}

}  // namespace starq
