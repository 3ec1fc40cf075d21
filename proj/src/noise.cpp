#include "starq/noise.hpp"

#include <algorithm>
#include <cmath>

namespace starq {

namespace {

struct LevelRates {
  std::vector<double> decay, excite, dephase, total;
};

LevelRates level_rates(int dim, const Rates& r) {
  LevelRates lr;
  for (int m = 0; m < dim; ++m) {
    double dec = r.gamma1 * (1.0 + r.n_th) * m;
    double exc = m + 1 < dim ? r.gamma1 * r.n_th * (m + 1) : 0.0;
    double dph = 2.0 * r.gamma_phi * m * m;
    lr.decay.push_back(dec);
    lr.excite.push_back(exc);
    lr.dephase.push_back(dph);
    lr.total.push_back(dec + exc + dph);
  }
  return lr;
}

std::vector<double> level_weights(const Layout& layout, const State& psi, int k) {
  std::vector<double> w(layout.levels(k), 0.0);
  for (long i = 0; i < psi.size(); ++i) w[layout.digit(i, k)] += std::norm(psi(i));
  return w;
}

void damp(const Layout& layout, State& psi, int k, const std::vector<double>& total, double t_us) {
  Eigen::VectorXcd d(layout.levels(k));
  for (int m = 0; m < d.size(); ++m) d(m) = std::exp(-0.5 * total[m] * t_us);
  int t[1] = {k};
  apply_diagonal(layout, d, t, psi);
  psi.normalize();
}

}  // namespace

void trajectory_step(const Layout& layout, State& psi, int k, const Rates& r, double dt_ns, Rng& rng) {
  if (!(dt_ns >= 0)) throw ValidationError("trajectory_step: negative duration");
  if (dt_ns == 0.0) return;
  if (r.gamma1 == 0.0 && r.gamma_phi == 0.0) return;
  const int dim = layout.levels(k);
  LevelRates lr = level_rates(dim, r);
  double left = dt_ns * 1e-3;
  int targets[1] = {k};
  for (int guard = 0; guard < 100000 && left > 0.0; ++guard) {
    std::vector<double> w = level_weights(layout, psi, k);
    auto norm_at = [&](double t) {
      double s = 0;
      for (int m = 0; m < dim; ++m) s += w[m] * std::exp(-lr.total[m] * t);
      return s;
    };
    double u = uniform01(rng);
    if (norm_at(left) >= u) {
      damp(layout, psi, k, lr.total, left);
      return;
    }
    double a = 0.0, b = left;
    for (int it = 0; it < 60; ++it) {
      double m = 0.5 * (a + b);
      if (norm_at(m) > u)
        a = m;
      else
        b = m;
    }
    double tj = 0.5 * (a + b);
    damp(layout, psi, k, lr.total, tj);
    left -= tj;
    w = level_weights(layout, psi, k);
    double pd = 0, pe = 0, pp = 0;
    for (int m = 0; m < dim; ++m) {
      pd += w[m] * lr.decay[m];
      pe += w[m] * lr.excite[m];
      pp += w[m] * lr.dephase[m];
    }
    double x = uniform01(rng) * (pd + pe + pp);
    if (pd + pe + pp <= 0.0) continue;
    Operator L;
    if (x < pd) {
      L = annihilation(dim);
    } else if (x < pd + pe) {
      L = annihilation(dim).adjoint();
    } else {
      L = number_op(dim);
    }
    apply_jump(layout, L, targets, psi);
  }
}

void trajectory_step(const Layout& layout, State& psi, const std::vector<NoiseChannel>& channels, double dt_ns,
                     Rng& rng) {
  for (const auto& c : channels) trajectory_step(layout, psi, c.subsystem, c.rates, dt_ns, rng);
}

Rates component_rates(const ComponentParams& c, bool thermal) {
  Rates r = derived_rates(c);
  if (!thermal) r.n_th = 0.0;
  return r;
}

double limit_sqg(double gamma1, double gamma_phi, double n_q, double tau_ns) {
  double t = tau_ns * 1e-3;
  return 1.0 - t / 3.0 * (gamma1 + gamma_phi) - 2.0 / 3.0 * n_q * gamma1 * t;
}

double limit_move(double g1q, double g1r, double gpq, double gpr, double nq, double nr, double tau_ns) {
  double t = tau_ns * 1e-3;
  return 1.0 - t / 6.0 * (g1q + g1r + gpq + gpr) - t / 3.0 * (g1q * nq + g1r * nr);
}

double limit_cz(double g1q, double g1r, double gpq, double gpr, double nq, double nr, double tau_ns) {
  double t = tau_ns * 1e-3;
  return 1.0 - t * (g1q / 2.0 + 3.0 * g1r / 10.0 + 61.0 * gpq / 80.0 + 29.0 * gpr / 80.0) -
         t * (9.0 * g1q * nq / 5.0 + 7.0 * g1r * nr / 5.0);
}

MoveLimit limit_move(const Device& d, const std::string& qubit, bool thermal) {
  Rates q = component_rates(d.component(qubit), thermal);
  Rates r = component_rates(d.component(d.resonator_id()), thermal);
  MoveLimit m;
  m.F_m = limit_move(q.gamma1, r.gamma1, q.gamma_phi, r.gamma_phi, q.n_th, r.n_th, d.duration(qubit).move_ns);
  m.F_mm = m.F_m * m.F_m;
  return m;
}

double limit_cz(const Device& d, const std::string& qubit, bool thermal) {
  Rates q = component_rates(d.component(qubit), thermal);
  Rates r = component_rates(d.component(d.resonator_id()), thermal);
  return limit_cz(q.gamma1, r.gamma1, q.gamma_phi, r.gamma_phi, q.n_th, r.n_th, d.duration(qubit).cz_ns);
}

DeviceLimits device_limits(const Device& d, bool thermal) {
  DeviceLimits out;
  auto qs = d.qubit_ids();
  for (const auto& q : qs) {
    Rates r = component_rates(d.component(q), thermal);
    out.F_s[q] = limit_sqg(r.gamma1, r.gamma_phi, r.n_th, d.duration(q).single_ns);
    out.F_mm[q] = limit_move(d, q, thermal).F_mm;
    out.F_cz[q] = limit_cz(d, q, thermal);
    out.mean_F_mm += out.F_mm[q] / qs.size();
    out.mean_F_cz += out.F_cz[q] / qs.size();
  }
  return out;
}

std::vector<std::string> ghz_cz_qubits(const Device& d, const std::string& move_qubit, int N) {
  auto qs = d.qubit_ids();
  if (N < 2 || N > static_cast<int>(qs.size())) throw ValidationError("ghz: N must lie in [2, qubit count]");
  if (std::find(qs.begin(), qs.end(), move_qubit) == qs.end())
    throw ValidationError("ghz: unknown MOVE qubit '" + move_qubit + "'");
  std::vector<std::string> out;
  for (const auto& q : qs)
    if (q != move_qubit && static_cast<int>(out.size()) < N - 1) out.push_back(q);
  return out;
}

CoherenceBudget ghz_budget(const Device& d, const std::string& move_qubit, int N, const GhzBudgetOptions& opt) {
  CoherenceBudget b;
  b.move_qubit = move_qubit;
  b.cz_qubits = ghz_cz_qubits(d, move_qubit, N);
  const bool measured = opt.mode == IdleMode::Measured;
  Rates rr = component_rates(d.component(d.resonator_id()), opt.thermal);
  if (opt.gamma1_r) rr.gamma1 = *opt.gamma1_r;

  auto rates = [&](const std::string& q) { return component_rates(d.component(q), opt.thermal); };
  // Idle of qubit q for the duration of an operation taking tau.
  auto idle = [&](const std::string& q, double tau) {
    Rates r = rates(q);
    return limit_sqg(r.gamma1, r.gamma_phi, r.n_th, tau);
  };
  auto measured_value = [&](const std::optional<double>& v, const std::string& what, const std::string& q) {
    if (!v) throw ValidationError("ghz_budget: measured mode needs " + what + " for " + q);
    return *v;
  };
  auto sqg = [&](const std::string& q) {
    if (measured) return measured_value(d.component(q).F_sq_simultaneous, "F_sq_simultaneous", q);
    return idle(q, d.duration(q).single_ns);
  };

  const std::string& l = move_qubit;
  Rates rl = rates(l);
  const double tm = d.duration(l).move_ns;
  b.F_m = limit_move(rl.gamma1, rr.gamma1, rl.gamma_phi, rr.gamma_phi, rl.n_th, rr.n_th, tm);
  b.F_mm = measured ? measured_value(d.component(l).F_double_move, "F_double_move", l) : b.F_m * b.F_m;
  for (const auto& q : b.cz_qubits) {
    Rates r = rates(q);
    b.F_cz[q] = measured ? measured_value(d.component(q).F_cz, "F_cz", q)
                         : limit_cz(r.gamma1, rr.gamma1, r.gamma_phi, rr.gamma_phi, r.n_th, rr.n_th,
                                    d.duration(q).cz_ns);
  }
  b.F_s[l] = sqg(l);
  for (const auto& q : b.cz_qubits) b.F_s[q] = sqg(q);

  b.F1 = b.F_s[l];
  for (const auto& q : b.cz_qubits) b.F1 *= b.F_s[q];
  double move_idles = 1.0;
  for (const auto& q : b.cz_qubits) move_idles *= idle(q, tm);
  double move_pair = b.F_mm;  // F_m^2 or the measured double MOVE
  b.F2 = std::sqrt(move_pair) * move_idles;
  b.F4 = b.F2;
  b.F3 = 1.0;
  for (const auto& k : b.cz_qubits) {
    b.F3 *= b.F_cz[k];
    for (const auto& j : b.cz_qubits)
      if (j != k) b.F3 *= idle(k, d.duration(j).cz_ns);
  }
  b.F5 = 1.0;
  for (const auto& q : b.cz_qubits) b.F5 *= b.F_s[q] * b.F_s[q];
  double tl = d.duration(l).single_ns;
  b.F5 *= idle(l, tl) * idle(l, tl);
  b.F_ghz = b.F1 * b.F2 * b.F3 * b.F4 * b.F5;

  auto fro = [&](const std::string& q) {
    auto it = d.readout.find(q);
    return it != d.readout.end() && it->second.fidelity ? *it->second.fidelity : 1.0;
  };
  b.readout = fro(l);
  for (const auto& q : b.cz_qubits) b.readout *= fro(q);
  b.F_ghz_readout = b.F_ghz * b.readout;
  return b;
}

ExponentialModel ghz_exponential_model(const Device& d, const std::string& move_qubit, int N, RatioSet set) {
  auto cz = ghz_cz_qubits(d, move_qubit, N);
  ExponentialModel m;
  double g1r = component_rates(d.component(d.resonator_id()), false).gamma1;
  double tau = 0, g1q_cz = 0;
  for (const auto& q : cz) {
    tau += d.duration(q).cz_ns / cz.size();
    g1q_cz += component_rates(d.component(q), false).gamma1 / cz.size();
  }
  double g1q_mean = g1q_cz;
  if (set == RatioSet::AllQubits) {
    auto qs = d.qubit_ids();
    g1q_mean = 0;
    for (const auto& q : qs) g1q_mean += component_rates(d.component(q), false).gamma1 / qs.size();
  }
  double t = tau * 1e-3;
  m.tau_ns = tau;
  m.qubit_term = std::exp(-t * (N / 3.0 + 0.5) * (N - 1) * g1q_cz);
  m.resonator_term = std::exp(-(N - 1) * 3.0 * t / 10.0 * g1r);
  m.ratio = g1r / g1q_mean;
  m.threshold = 10.0 * N / 9.0 + 5.0 / 3.0;
  m.resonator_dominated = m.ratio > m.threshold;
  return m;
}

}  // namespace starq
