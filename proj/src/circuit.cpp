#include "starq/circuit.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace starq {

namespace {

void check_component(const std::string& c) {
  if (c != kResonatorLabel && !is_qubit_label(c)) throw ValidationError("unknown component '" + c + "'");
}

double parse_number(const std::string& tok, int line) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size() || !std::isfinite(v))
    throw ValidationError("line " + std::to_string(line) + ": bad number '" + tok + "'");
  return v;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::Prx: return "PRX";
    case Op::Vz: return "VZ";
    case Op::Cz: return "CZ";
    case Op::Move: return "MOVE";
    case Op::Barrier: return "BARRIER";
    case Op::Measure: return "MEASURE";
    case Op::Depol: return "DEPOL";
  }
  return "?";
}

std::string qubit_label(int index) { return "q" + std::to_string(index); }

bool is_qubit_label(const std::string& s) {
  if (s.size() < 2 || s[0] != 'q' || s[1] == '0') return false;
  return std::all_of(s.begin() + 1, s.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
}

int qubit_index(const std::string& label) {
  if (!is_qubit_label(label)) throw ValidationError("'" + label + "' is not a qubit label");
  return std::stoi(label.substr(1));
}

std::string device_id(const Device& d, const std::string& label) {
  if (label == kResonatorLabel) return d.resonator_id();
  auto qs = d.qubit_ids();
  int i = qubit_index(label);
  if (i > static_cast<int>(qs.size()))
    throw ValidationError("qubit '" + label + "' not on device (" + std::to_string(qs.size()) + " qubits)");
  return qs[i - 1];
}

Circuit& Circuit::prx(const std::string& q, double angle, double phase) {
  if (!is_qubit_label(q)) throw ValidationError("PRX needs a qubit, got '" + q + "'");
  ins.push_back({Op::Prx, {q}, angle, phase, false});
  return *this;
}

Circuit& Circuit::vz(const std::string& c, double angle, bool frame) {
  check_component(c);
  ins.push_back({Op::Vz, {c}, angle, 0.0, frame});
  return *this;
}

Circuit& Circuit::cz(const std::string& a, const std::string& b) {
  if (!is_qubit_label(a)) throw ValidationError("CZ: first target must be a qubit");
  check_component(b);
  if (a == b) throw ValidationError("CZ: targets must differ");
  ins.push_back({Op::Cz, {a, b}, 0.0, 0.0, false});
  return *this;
}

Circuit& Circuit::move(const std::string& q) {
  if (!is_qubit_label(q)) throw ValidationError("MOVE needs a qubit, got '" + q + "'");
  ins.push_back({Op::Move, {q}, 0.0, 0.0, false});
  return *this;
}

Circuit& Circuit::barrier() {
  ins.push_back({Op::Barrier, {}, 0.0, 0.0, false});
  return *this;
}

Circuit& Circuit::measure(const std::vector<std::string>& qs) {
  if (qs.empty()) throw ValidationError("MEASURE needs at least one qubit");
  for (const auto& q : qs)
    if (!is_qubit_label(q)) throw ValidationError("MEASURE needs qubits, got '" + q + "'");
  ins.push_back({Op::Measure, qs, 0.0, 0.0, false});
  return *this;
}

Circuit& Circuit::depol(const std::vector<std::string>& cs, double p) {
  if (cs.empty() || cs.size() > 2) throw ValidationError("DEPOL acts on one or two components");
  for (const auto& c : cs) check_component(c);
  if (!(p >= 0 && p <= 1)) throw ValidationError("DEPOL probability must lie in [0,1]");
  ins.push_back({Op::Depol, cs, p, 0.0, false});
  return *this;
}

Circuit& Circuit::append(const Circuit& other) {
  ins.insert(ins.end(), other.ins.begin(), other.ins.end());
  return *this;
}

std::vector<std::string> Circuit::qubits() const {
  std::set<int> idx;
  for (const auto& i : ins)
    for (const auto& t : i.targets)
      if (is_qubit_label(t)) idx.insert(qubit_index(t));
  std::vector<std::string> out;
  for (int k : idx) out.push_back(qubit_label(k));
  return out;
}

bool Circuit::uses_resonator() const {
  for (const auto& i : ins) {
    if (i.op == Op::Move) return true;
    for (const auto& t : i.targets)
      if (t == kResonatorLabel) return true;
  }
  return false;
}

bool Circuit::is_native() const {
  return std::none_of(ins.begin(), ins.end(),
                      [](const Instruction& i) { return i.op == Op::Cz && i.targets[1] != kResonatorLabel; });
}

std::vector<std::string> Circuit::measured() const {
  std::vector<std::string> out;
  for (const auto& i : ins)
    if (i.op == Op::Measure)
      for (const auto& q : i.targets)
        if (std::find(out.begin(), out.end(), q) == out.end()) out.push_back(q);
  return out;
}

Circuit parse_circuit(const std::string& text) {
  Circuit c;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string& m = tok[0];
    auto want = [&](std::size_t n) {
      if (tok.size() != n)
        throw ValidationError("line " + std::to_string(line) + ": " + m + " expects " + std::to_string(n - 1) +
                              " operands");
    };
    try {
      if (m == "PRX") {
        want(4);
        c.prx(tok[1], parse_number(tok[2], line), parse_number(tok[3], line));
      } else if (m == "VZ") {
        want(3);
        c.vz(tok[1], parse_number(tok[2], line));
      } else if (m == "CZ") {
        want(3);
        c.cz(tok[1], tok[2]);
      } else if (m == "MOVE") {
        want(2);
        c.move(tok[1]);
      } else if (m == "BARRIER") {
        want(1);
        c.barrier();
      } else if (m == "MEASURE") {
        if (tok.size() < 2) throw ValidationError("MEASURE needs qubits");
        c.measure(std::vector<std::string>(tok.begin() + 1, tok.end()));
      } else if (m == "DEPOL") {
        if (tok.size() != 3 && tok.size() != 4) throw ValidationError("DEPOL expects 1 or 2 components and p");
        c.depol(std::vector<std::string>(tok.begin() + 1, tok.end() - 1), parse_number(tok.back(), line));
      } else {
        throw ValidationError("unknown instruction '" + m + "'");
      }
    } catch (const ValidationError& e) {
      std::string msg = e.what();
      if (msg.rfind("line ", 0) == 0) throw;
      throw ValidationError("line " + std::to_string(line) + ": " + msg);
    }
  }
  return c;
}

std::string write_circuit(const Circuit& c) {
  std::string out;
  for (const auto& i : c.ins) {
    out += op_name(i.op);
    switch (i.op) {
      case Op::Prx: out += " " + i.targets[0] + " " + fmt(i.angle) + " " + fmt(i.phase); break;
      case Op::Vz: out += " " + i.targets[0] + " " + fmt(i.angle); break;
      case Op::Depol:
        for (const auto& t : i.targets) out += " " + t;
        out += " " + fmt(i.angle);
        break;
      default:
        for (const auto& t : i.targets) out += " " + t;
    }
    out += "\n";
  }
  return out;
}

Circuit load_circuit(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open circuit file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_circuit(ss.str());
}

void save_circuit(const Circuit& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write circuit file '" + path + "'");
  out << write_circuit(c);
}

GateCounts count_gates(const Circuit& c) {
  GateCounts n;
  for (const auto& i : c.ins) switch (i.op) {
      case Op::Prx: ++n.prx; break;
      case Op::Vz: ++n.vz; break;
      case Op::Cz: ++n.cz; break;
      case Op::Move: ++n.move; break;
      case Op::Measure: ++n.measure; break;
      case Op::Depol: ++n.depol; break;
      case Op::Barrier: break;
    }
  return n;
}

}  // namespace starq
