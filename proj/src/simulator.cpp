#include "starq/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "starq/noise.hpp"
#include "starq/parallel.hpp"

namespace starq {

namespace {

// Pauli on levels {0, 1} of a subsystem with `dim` levels.
Operator pauli(int which, int dim) {
  Operator p = Operator::Identity(dim, dim);
  if (which == 1) {
    p(0, 0) = p(1, 1) = 0;
    p(0, 1) = p(1, 0) = 1;
  } else if (which == 2) {
    p(0, 0) = p(1, 1) = 0;
    p(0, 1) = -kI;
    p(1, 0) = kI;
  } else if (which == 3) {
    p(1, 1) = -1;
  }
  return p;
}

}  // namespace

Simulator::Simulator(const Device& d, const Circuit& c, ExecOptions opt)
    : device_(d), circuit_(c), opt_(std::move(opt)) {
  if (opt_.n_max < 1) throw ValidationError("simulator: n_max must be >= 1");
  std::vector<std::string> qs = opt_.qubits.empty() ? c.qubits() : opt_.qubits;
  for (const auto& q : c.qubits())
    if (std::find(qs.begin(), qs.end(), q) == qs.end())
      throw ValidationError("simulator: circuit qubit " + q + " missing from the layout");
  std::vector<Subsystem> subs;
  for (const auto& q : qs) {
    device_id(device_, q);  // existence check
    subs.push_back({q, Kind::Qubit, 3});
  }
  if (c.uses_resonator() || opt_.with_resonator) subs.push_back({kResonatorLabel, Kind::Resonator, opt_.n_max + 1});
  layout_ = Layout(subs);
  if (layout_.contains(kResonatorLabel)) {
    res_ = layout_.index_of(kResonatorLabel);
    f_res_ = device_.component(device_.resonator_id()).frequency_GHz;
    int r[1] = {res_};
    res_idx_ = local_index(layout_, r);
  }

  sched_ = schedule(c, device_);
  for (int k = 0; k < layout_.size(); ++k) {
    const auto& id = layout_[k].id;
    Rates r = component_rates(device_.component(device_id(device_, id)), opt_.noise.thermal);
    if (k == res_ && opt_.noise.gamma1_r) r.gamma1 = *opt_.noise.gamma1_r;
    rates_.push_back(r);
  }

  for (const auto& in : c.ins) {
    Step s;
    for (const auto& t : in.targets)
      if (in.op != Op::Measure) s.targets.push_back(layout_.index_of(t));
    switch (in.op) {
      case Op::Prx:
        s.op = rot(in.phase, in.angle);
        break;
      case Op::Vz:
        s.diagonal = true;
        s.diag = vz_diagonal(layout_.levels(s.targets[0]), in.angle);
        break;
      case Op::Cz: {
        if (in.targets[1] != kResonatorLabel) throw ValidationError("simulator: qubit-qubit CZ needs lowering");
        auto it = opt_.gates.cz.find(in.targets[0]);
        s.op = cz_gate(it == opt_.gates.cz.end() ? CzSpec{} : it->second, opt_.n_max);
        break;
      }
      case Op::Move: {
        auto it = opt_.gates.move.find(in.targets[0]);
        JCPhases ph = it == opt_.gates.move.end() ? JCPhases{} : it->second;
        s.op = move_gate(opt_.n_max, ph);
        s.theta = ph.theta;
        s.f_qubit = device_.component(device_id(device_, in.targets[0])).frequency_GHz;
        s.targets.push_back(res_);
        const int q = s.targets[0];
        for (long idx = 0; idx < layout_.dim(); ++idx) {
          int lq = layout_.digit(idx, q), n = layout_.digit(idx, res_);
          if (lq == 2 || (lq == 1 && n >= 1)) s.guard_idx.push_back(idx);
          if (lq == 1 && n == opt_.n_max) s.top_idx.push_back(idx);
        }
        break;
      }
      default:
        break;
    }
    if (!s.targets.empty() && in.op != Op::Depol) s.idx = local_index(layout_, s.targets);
    steps_.push_back(std::move(s));
  }

  measured_ = c.measured();
  if (measured_.empty()) measured_ = qs;
  for (const auto& q : measured_) measured_idx_.push_back(layout_.index_of(q));
}

bool Simulator::stochastic() const {
  if (opt_.noise.stochastic()) return true;
  for (const auto& in : circuit_.ins)
    if (in.op == Op::Depol && in.angle > 0) return true;
  return false;
}

State Simulator::ground() const {
  State psi = State::Zero(layout_.dim());
  psi(0) = 1.0;
  return psi;
}

Eigen::VectorXcd Simulator::computational(const State& psi) const {
  std::vector<int> qk;
  for (int k = 0; k < layout_.size(); ++k)
    if (k != res_) qk.push_back(k);
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(1L << qk.size());
  std::vector<int> occ(layout_.size(), 0);
  for (long key = 0; key < out.size(); ++key) {
    for (std::size_t j = 0; j < qk.size(); ++j) occ[qk[j]] = (key >> (qk.size() - 1 - j)) & 1;
    out(key) = psi(layout_.index(occ));
  }
  return out;
}

State Simulator::from_computational(const Eigen::VectorXcd& amp) const {
  std::vector<int> qk;
  for (int k = 0; k < layout_.size(); ++k)
    if (k != res_) qk.push_back(k);
  if (amp.size() != (1L << qk.size())) throw ValidationError("from_computational: size mismatch");
  State psi = State::Zero(layout_.dim());
  std::vector<int> occ(layout_.size(), 0);
  for (long key = 0; key < amp.size(); ++key) {
    for (std::size_t j = 0; j < qk.size(); ++j) occ[qk[j]] = (key >> (qk.size() - 1 - j)) & 1;
    psi(layout_.index(occ)) = amp(key);
  }
  return psi;
}

void Simulator::noise_until(State& psi, std::vector<double>& clock, int k, double t, Rng& rng) const {
  if (t > clock[k]) {
    trajectory_step(layout_, psi, k, rates_[k], t - clock[k], rng);
    clock[k] = t;
  }
}

void Simulator::depolarize(State& psi, const std::vector<int>& targets, double p, Rng& rng) const {
  if (p <= 0.0 || uniform01(rng) >= p) return;
  for (int k : targets) {
    int which = static_cast<int>(rng() % 4);
    if (which == 0) continue;
    int t[1] = {k};
    apply(layout_, pauli(which, layout_.levels(k)), t, psi);
  }
}

Trajectory Simulator::run(Rng& rng) const { return run(ground(), rng); }

Trajectory Simulator::run(const State& init, Rng& rng) const {
  if (init.size() != layout_.dim()) throw ValidationError("simulator: initial state has the wrong dimension");
  Trajectory tr;
  tr.psi = init;
  State& psi = tr.psi;
  const bool decohere = opt_.noise.decoherence;
  std::vector<double> clock(layout_.size(), 0.0);
  double f_ref = f_res_, t_frame = 0.0;

  auto flush_frame = [&](double t) {
    if (res_ < 0 || !opt_.gates.frame_tracking) return;
    double dt = t - t_frame;
    if (dt > 0 && f_res_ != f_ref) {
      apply_diagonal(res_idx_, vz_diagonal(layout_.levels(res_), -kTwoPi * (f_res_ - f_ref) * dt), psi);
    }
    t_frame = t;
  };

  for (std::size_t i = 0; i < steps_.size(); ++i) {
    const Instruction& in = circuit_.ins[i];
    const Step& s = steps_[i];
    const TimeSlot& slot = sched_.slots[i];
    switch (in.op) {
      case Op::Vz:
        apply_diagonal(s.idx, s.diag, psi);
        break;
      case Op::Depol:
        depolarize(psi, s.targets, in.angle, rng);
        break;
      case Op::Barrier:
      case Op::Measure:
        break;
      case Op::Prx:
      case Op::Cz:
      case Op::Move: {
        const double mid = 0.5 * (slot.start_ns + slot.end_ns);
        if (decohere)
          for (int k : s.targets) noise_until(psi, clock, k, mid, rng);
        if (in.op == Op::Move) {
          flush_frame(slot.start_ns);
          GuardResult g;
          for (long idx : s.guard_idx) g.probability += std::norm(psi(idx));
          g.ok = g.probability <= 1e-9;
          if (!g.ok) {
            // A jump can legitimately break the guard, so noisy runs only record it.
            if (opt_.gates.guard == Policy::Throw && !stochastic())
              throw ValidationError("MOVE guard violated at instruction " + std::to_string(i) +
                                    " (probability " + std::to_string(g.probability) + ")");
            ++tr.guard_violations;
            tr.guard_max = std::max(tr.guard_max, g.probability);
          }
          const int nm = opt_.n_max;
          double top = 0;
          for (long idx : s.top_idx) top += std::norm(psi(idx));
          double sn = std::sin(std::sqrt(nm + 1.0) * s.theta / 2.0);
          tr.overflow += top * sn * sn;
          if (tr.overflow > opt_.overflow_tolerance && opt_.gates.overflow == Policy::Throw && !stochastic())
            throw NumericalError("resonator truncation overflow at instruction " + std::to_string(i) +
                                 " (lost probability " + std::to_string(tr.overflow) + ", n_max " +
                                 std::to_string(nm) + ")");
          apply(s.idx, s.op, psi);
          f_ref = s.f_qubit;
          t_frame = slot.end_ns;
        } else {
          apply(s.idx, s.op, psi);
        }
        if (decohere)
          for (int k : s.targets) noise_until(psi, clock, k, slot.end_ns, rng);
        depolarize(psi, s.targets, in.op == Op::Prx ? opt_.noise.depol_1q : opt_.noise.depol_2q, rng);
        break;
      }
    }
  }
  if (decohere)
    for (int k = 0; k < layout_.size(); ++k) noise_until(psi, clock, k, sched_.gate_end_ns, rng);
  flush_frame(sched_.gate_end_ns);
  return tr;
}

Eigen::VectorXd Simulator::outcome_probabilities(const State& psi) const {
  const int m = static_cast<int>(measured_idx_.size());
  Eigen::VectorXd p = Eigen::VectorXd::Zero(1L << m);
  for (long i = 0; i < psi.size(); ++i) {
    double w = std::norm(psi(i));
    if (w == 0.0) continue;
    long key = 0;
    for (int j = 0; j < m; ++j) key = (key << 1) | (layout_.digit(i, measured_idx_[j]) > 0 ? 1 : 0);
    p(key) += w;
  }
  return p;
}

std::vector<Eigen::Matrix2d> Simulator::assignment() const {
  std::vector<Eigen::Matrix2d> out;
  for (const auto& q : measured_) out.push_back(device_.assignment(device_id(device_, q)));
  return out;
}

Eigen::VectorXd ordered_sum(const std::vector<Eigen::VectorXd>& v) {
  if (v.empty()) return {};
  std::vector<Eigen::VectorXd> level = v;
  while (level.size() > 1) {
    std::vector<Eigen::VectorXd> next;
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) next.push_back(level[i] + level[i + 1]);
    if (level.size() % 2) next.push_back(level.back());
    level.swap(next);
  }
  return level[0];
}

EnsembleResult run_ensemble(const Simulator& sim, int trajectories, long shots, std::uint64_t seed,
                            const std::optional<State>& init) {
  if (trajectories < 1) throw ValidationError("run_ensemble: need at least one trajectory");
  struct One {
    Eigen::VectorXd p;
    double overflow = 0;
    int guard = 0;
  };
  const int T = sim.stochastic() ? trajectories : 1;
  auto runs = parallel_map<One>(static_cast<std::size_t>(T), [&](std::size_t i) {
    Rng rng = task_rng(seed, i);
    Trajectory t = init ? sim.run(*init, rng) : sim.run(rng);
    return One{sim.outcome_probabilities(t.psi), t.overflow, t.guard_violations};
  });
  EnsembleResult r;
  r.trajectories = T;
  std::vector<Eigen::VectorXd> ps;
  for (const auto& o : runs) {
    ps.push_back(o.p);
    r.overflow_max = std::max(r.overflow_max, o.overflow);
    r.guard_violations += o.guard;
  }
  r.probabilities = ordered_sum(ps) / static_cast<double>(T);
  if (shots > 0) {
    Eigen::VectorXd p = sim.options().noise.readout ? apply_tensor(r.probabilities, sim.assignment())
                                                    : r.probabilities;
    Rng rng = task_rng(splitmix64(seed), static_cast<std::uint64_t>(T));
    r.counts = sample_counts(p, shots, rng);
  }
  return r;
}

Eigen::VectorXd apply_tensor(const Eigen::VectorXd& p, const std::vector<Eigen::Matrix2d>& mats) {
  const int m = static_cast<int>(mats.size());
  if (p.size() != (1L << m)) throw ValidationError("apply_tensor: size mismatch");
  Eigen::VectorXd out = p;
  for (int k = 0; k < m; ++k) {
    const long bit = 1L << (m - 1 - k);
    const Eigen::Matrix2d& A = mats[k];
    for (long i = 0; i < out.size(); ++i) {
      if (i & bit) continue;
      double a = out(i), b = out(i | bit);
      out(i) = A(0, 0) * a + A(0, 1) * b;
      out(i | bit) = A(1, 0) * a + A(1, 1) * b;
    }
  }
  return out;
}

std::vector<long> sample_counts(const Eigen::VectorXd& p, long shots, Rng& rng) {
  std::vector<double> cdf(p.size());
  double acc = 0;
  for (long i = 0; i < p.size(); ++i) {
    acc += std::max(0.0, p(i));
    cdf[i] = acc;
  }
  if (!(acc > 0)) throw NumericalError("sample_counts: distribution has no weight");
  std::vector<long> counts(p.size(), 0);
  for (long s = 0; s < shots; ++s) {
    double u = uniform01(rng) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    long idx = std::min<long>(it - cdf.begin(), p.size() - 1);
    ++counts[idx];
  }
  return counts;
}

std::string bitstring(long index, int n) {
  std::string s(n, '0');
  for (int j = 0; j < n; ++j)
    if ((index >> (n - 1 - j)) & 1) s[j] = '1';
  return s;
}

Eigen::VectorXcd reference_state(const Circuit& logical, int n_qubits, const Eigen::VectorXcd& init) {
  if (init.size() != (1L << n_qubits)) throw ValidationError("reference_state: size mismatch");
  Eigen::VectorXcd psi = init;
  auto bit_of = [&](const std::string& q) {
    int i = qubit_index(q);
    if (i > n_qubits) throw ValidationError("reference_state: qubit out of range");
    return 1L << (n_qubits - i);
  };
  for (const auto& in : logical.ins) {
    switch (in.op) {
      case Op::Prx: {
        Operator u = rot(in.phase, in.angle).topLeftCorner(2, 2);
        long b = bit_of(in.targets[0]);
        for (long i = 0; i < psi.size(); ++i) {
          if (i & b) continue;
          cplx a0 = psi(i), a1 = psi(i | b);
          psi(i) = u(0, 0) * a0 + u(0, 1) * a1;
          psi(i | b) = u(1, 0) * a0 + u(1, 1) * a1;
        }
        break;
      }
      case Op::Vz: {
        if (in.targets[0] == kResonatorLabel) throw ValidationError("reference_state: resonator in logical circuit");
        long b = bit_of(in.targets[0]);
        cplx ph = std::exp(kI * in.angle);
        for (long i = 0; i < psi.size(); ++i)
          if (i & b) psi(i) *= ph;
        break;
      }
      case Op::Cz: {
        if (in.targets[1] == kResonatorLabel) throw ValidationError("reference_state: native CZ in logical circuit");
        long b = bit_of(in.targets[0]) | bit_of(in.targets[1]);
        for (long i = 0; i < psi.size(); ++i)
          if ((i & b) == b) psi(i) = -psi(i);
        break;
      }
      case Op::Move:
        throw ValidationError("reference_state: MOVE in logical circuit");
      default:
        break;
    }
  }
  return psi;
}

}  // namespace starq
