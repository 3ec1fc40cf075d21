#include "starq/transpiler.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace starq {

namespace {

bool is_logical_cz(const Instruction& i) { return i.op == Op::Cz && i.targets[1] != kResonatorLabel; }

bool touches(const Instruction& i, const std::string& q) {
  return std::find(i.targets.begin(), i.targets.end(), q) != i.targets.end();
}

// Number of upcoming logical CZs that could share holder `h` starting at `from`.
int chain_length(const Circuit& c, std::size_t from, const std::string& h) {
  int n = 0;
  for (std::size_t k = from; k < c.ins.size(); ++k) {
    const auto& in = c.ins[k];
    if (is_logical_cz(in)) {
      if (!touches(in, h)) break;
      ++n;
    } else if (in.op == Op::Barrier || in.op == Op::Measure || in.op == Op::Move || in.op == Op::Cz) {
      break;
    } else if (touches(in, h)) {
      break;
    }
  }
  return n;
}

Circuit strip_frame(const Circuit& c) {
  Circuit out;
  for (const auto& i : c.ins)
    if (!(i.op == Op::Vz && i.frame)) out.ins.push_back(i);
  return out;
}

}  // namespace

Circuit lower_cz(const Circuit& logical, const LowerOptions& opt) {
  Circuit out;
  std::optional<std::string> holder;         // opened by lowering
  std::optional<std::string> native_holder;  // from MOVEs already in the input
  auto close = [&] {
    if (!holder) return;
    out.move(*holder);
    out.vz(*holder, kPi);
    holder.reset();
  };

  for (std::size_t i = 0; i < logical.ins.size(); ++i) {
    const auto& in = logical.ins[i];
    if (is_logical_cz(in)) {
      const std::string& a = in.targets[0];
      const std::string& b = in.targets[1];
      if (native_holder)
        throw ValidationError("instruction " + std::to_string(i) + ": CZ while the resonator holds " + *native_holder);
      if (holder && (a == *holder || b == *holder)) {
        out.cz(a == *holder ? b : a, kResonatorLabel);
        continue;
      }
      close();
      std::string h;
      if (opt.preferred_holder && (*opt.preferred_holder == a || *opt.preferred_holder == b)) {
        h = *opt.preferred_holder;
      } else {
        int la = chain_length(logical, i, a), lb = chain_length(logical, i, b);
        if (la != lb)
          h = la > lb ? a : b;
        else
          h = qubit_index(a) < qubit_index(b) ? a : b;
      }
      out.move(h);
      out.cz(h == a ? b : a, kResonatorLabel);
      holder = h;
      continue;
    }
    switch (in.op) {
      case Op::Cz:  // native CZ(q, CR)
        close();
        if (!native_holder)
          throw ValidationError("instruction " + std::to_string(i) + ": CZ(" + in.targets[0] +
                                ", CR) while the resonator holds no state");
        out.ins.push_back(in);
        break;
      case Op::Move:
        close();
        if (!native_holder)
          native_holder = in.targets[0];
        else if (*native_holder == in.targets[0])
          native_holder.reset();
        out.ins.push_back(in);
        break;
      case Op::Barrier:
      case Op::Measure:
        close();
        out.ins.push_back(in);
        break;
      default:
        if (holder && touches(in, *holder)) close();
        out.ins.push_back(in);
    }
  }
  close();
  return out;
}

std::vector<Diagnostic> validate(const Circuit& c) {
  std::vector<Diagnostic> diag;
  std::optional<std::string> holder;
  for (std::size_t i = 0; i < c.ins.size(); ++i) {
    const auto& in = c.ins[i];
    switch (in.op) {
      case Op::Prx:
        if (holder && *holder == in.targets[0])
          diag.push_back({i, "i", "rotation on " + in.targets[0] + " while its state is in the resonator"});
        break;
      case Op::Move:
        if (!holder)
          holder = in.targets[0];
        else if (*holder == in.targets[0])
          holder.reset();
        else
          diag.push_back({i, "ii", "MOVE " + in.targets[0] + " while " + *holder + " holds the resonator"});
        break;
      case Op::Cz:
        if (is_logical_cz(in))
          diag.push_back({i, "logical-cz", "qubit-qubit CZ in a native circuit"});
        else if (holder && *holder == in.targets[0])
          diag.push_back({i, "iii", "CZ(" + in.targets[0] + ", CR) while " + in.targets[0] + " holds the resonator"});
        break;
      case Op::Measure:
        for (const auto& q : in.targets)
          if (holder && *holder == q) diag.push_back({i, "iv", "measurement of " + q + " while it holds the resonator"});
        break;
      default:
        break;
    }
  }
  if (holder) diag.push_back({c.ins.size(), "unbalanced", "resonator still holds the state of " + *holder});
  return diag;
}

Schedule schedule(const Circuit& c, const Device& d) {
  Schedule s;
  s.slots.resize(c.ins.size());
  std::map<std::string, double> free;
  auto at = [&](const std::string& comp) { return free.count(comp) ? free[comp] : 0.0; };
  auto dur = [&](const std::string& q) -> const GateDurations& { return d.duration(device_id(d, q)); };

  for (std::size_t i = 0; i < c.ins.size(); ++i) {
    const auto& in = c.ins[i];
    TimeSlot& t = s.slots[i];
    switch (in.op) {
      case Op::Prx:
        t.start_ns = at(in.targets[0]);
        t.end_ns = t.start_ns + dur(in.targets[0]).single_ns;
        free[in.targets[0]] = t.end_ns;
        break;
      case Op::Vz:
        t.start_ns = t.end_ns = at(in.targets[0]);
        break;
      case Op::Depol: {
        double st = 0;
        for (const auto& x : in.targets) st = std::max(st, at(x));
        t.start_ns = t.end_ns = st;
        break;
      }
      case Op::Cz:
      case Op::Move: {
        if (is_logical_cz(in)) throw ValidationError("schedule: qubit-qubit CZ needs lowering first");
        const std::string& q = in.targets[0];
        t.start_ns = std::max(at(q), at(kResonatorLabel));
        t.end_ns = t.start_ns + (in.op == Op::Cz ? dur(q).cz_ns : dur(q).move_ns);
        free[q] = free[kResonatorLabel] = t.end_ns;
        break;
      }
      case Op::Barrier: {
        double st = 0;
        for (const auto& [k, v] : free) st = std::max(st, v);
        for (auto& [k, v] : free) v = st;
        t.start_ns = t.end_ns = st;
        break;
      }
      case Op::Measure: {
        double st = 0, ro = 0;
        for (const auto& q : in.targets) {
          st = std::max(st, at(q));
          ro = std::max(ro, dur(q).readout_ns);
        }
        t.start_ns = st;
        t.end_ns = st + ro;
        for (const auto& q : in.targets) free[q] = t.end_ns;
        break;
      }
    }
    s.total_ns = std::max(s.total_ns, t.end_ns);
    if (in.op != Op::Measure) s.gate_end_ns = std::max(s.gate_end_ns, t.end_ns);
  }
  return s;
}

double move_frame_phase(const Device& d, const std::string& qubit_label, double gap_ns) {
  double fr = d.component(d.resonator_id()).frequency_GHz;
  double fq = d.component(device_id(d, qubit_label)).frequency_GHz;
  return kTwoPi * (fr - fq) * gap_ns;
}

Circuit resolve_phases(const Circuit& native, const Device& d, const PhaseCorrections& corr) {
  Circuit base = strip_frame(native);
  Schedule s = schedule(base, d);
  auto lookup = [](const std::map<std::string, double>& m, const std::string& q) {
    auto it = m.find(q);
    return it == m.end() ? 0.0 : it->second;
  };

  Circuit out;
  std::optional<std::string> holder;
  double t_in = 0, pending = 0;
  for (std::size_t i = 0; i < base.ins.size(); ++i) {
    const auto& in = base.ins[i];
    out.ins.push_back(in);
    if (in.op == Op::Move) {
      const std::string& q = in.targets[0];
      if (!holder) {
        holder = q;
        t_in = s.slots[i].end_ns;
        pending = 0;
      } else if (*holder == q) {
        double gap = s.slots[i].start_ns - t_in;
        double ang = move_frame_phase(d, q, gap) + pending - lookup(corr.move_pair, q);
        holder.reset();
        if (ang != 0.0) out.vz(q, wrap_angle(ang), true);
      } else {
        throw ValidationError("resolve_phases: MOVE " + q + " at " + std::to_string(i) + " while " + *holder +
                              " holds the resonator");
      }
    } else if (in.op == Op::Cz && !is_logical_cz(in)) {
      const std::string& q = in.targets[0];
      double cq = lookup(corr.cz_qubit, q);
      if (cq != 0.0) out.vz(q, -cq, true);
      pending -= lookup(corr.cz_resonator, q);
    }
  }
  return out;
}

std::vector<std::string> ghz_qubits(int N, const std::string& move_qubit) {
  if (N < 2 || N > 6) throw ValidationError("ghz: N must lie in [2, 6]");
  int l = qubit_index(move_qubit);
  std::vector<std::string> qs{move_qubit};
  for (int k = 1; static_cast<int>(qs.size()) < N; ++k)
    if (k != l) qs.push_back(qubit_label(k));
  return qs;
}

Circuit ghz_logical(int N, const std::string& move_qubit) {
  auto qs = ghz_qubits(N, move_qubit);
  Circuit c;
  for (const auto& q : qs) c.ry(q, kPi / 2);
  for (std::size_t k = 1; k < qs.size(); ++k) c.cz(move_qubit, qs[k]);
  c.barrier();
  for (std::size_t k = 1; k < qs.size(); ++k) {
    c.ry(qs[k], kPi / 2);
    c.rx(qs[k], kPi);
  }
  return c;
}

Circuit ghz_circuit(int N, const std::string& move_qubit) {
  LowerOptions opt;
  opt.preferred_holder = move_qubit;
  return lower_cz(ghz_logical(N, move_qubit), opt);
}

Circuit inverse(const Circuit& c) {
  Circuit out;
  for (auto it = c.ins.rbegin(); it != c.ins.rend(); ++it) {
    Instruction in = *it;
    switch (in.op) {
      case Op::Prx:
      case Op::Vz:
        in.angle = -in.angle;
        out.ins.push_back(in);
        break;
      case Op::Move:
        out.vz(in.targets[0], kPi);
        out.ins.push_back(in);
        out.vz(in.targets[0], kPi);
        break;
      case Op::Measure:
        throw ValidationError("inverse: measurement inside the folded region");
      default:
        out.ins.push_back(in);
    }
  }
  return out;
}

Circuit fold(const Circuit& c, double lambda, const Device* d, const PhaseCorrections& corr) {
  if (!(lambda >= 1.0)) throw ValidationError("fold: lambda must be >= 1");
  Circuit base = strip_frame(c);
  Circuit gates, measures;
  for (std::size_t i = 0; i < base.ins.size(); ++i) {
    const auto& in = base.ins[i];
    if (in.op == Op::Measure)
      measures.ins.push_back(in);
    else if (!measures.ins.empty())
      throw ValidationError("fold: measurement inside the folded region");
    else
      gates.ins.push_back(in);
  }
  const std::size_t n = gates.ins.size();
  const int k = static_cast<int>(std::floor((lambda - 1.0) / 2.0 + 1e-12));
  const double rem = lambda - 1.0 - 2.0 * k;
  const auto s = static_cast<std::size_t>(std::llround(rem * static_cast<double>(n) / 2.0));

  Circuit inv = inverse(gates);
  Circuit out = gates;
  for (int r = 0; r < k; ++r) out.append(inv).append(gates);
  if (s > 0) {
    Circuit tail;
    tail.ins.assign(gates.ins.end() - static_cast<long>(std::min(s, n)), gates.ins.end());
    out.append(inverse(tail)).append(tail);
  }
  out.append(measures);
  return d ? resolve_phases(out, *d, corr) : out;
}

}  // namespace starq
