#include "starq/hilbert.hpp"

#include <algorithm>

namespace starq {

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Qubit: return "qubit";
    case Kind::Coupler: return "coupler";
    case Kind::Resonator: return "resonator";
  }
  return "?";
}

Kind parse_kind(const std::string& s) {
  if (s == "qubit") return Kind::Qubit;
  if (s == "coupler") return Kind::Coupler;
  if (s == "resonator") return Kind::Resonator;
  throw ValidationError("unknown component kind '" + s + "'");
}

Layout::Layout(std::vector<Subsystem> subsystems) : subs_(std::move(subsystems)) {
  for (std::size_t i = 0; i < subs_.size(); ++i) {
    const auto& s = subs_[i];
    if (s.kind == Kind::Resonator) {
      if (s.dim < 2) throw ValidationError("resonator '" + s.id + "' needs n_max >= 1");
    } else if (s.dim != 3) {
      throw ValidationError("transmon '" + s.id + "' must have 3 levels");
    }
    for (std::size_t j = 0; j < i; ++j)
      if (subs_[j].id == s.id) throw ValidationError("duplicate subsystem id '" + s.id + "'");
  }
  strides_.assign(subs_.size(), 1);
  dim_ = 1;
  for (int k = static_cast<int>(subs_.size()) - 1; k >= 0; --k) {
    strides_[k] = dim_;
    dim_ *= subs_[k].dim;
  }
}

int Layout::index_of(const std::string& id) const {
  for (int k = 0; k < size(); ++k)
    if (subs_[k].id == id) return k;
  throw ValidationError("unknown subsystem id '" + id + "'");
}

bool Layout::contains(const std::string& id) const {
  return std::any_of(subs_.begin(), subs_.end(), [&](const Subsystem& s) { return s.id == id; });
}

long Layout::index(std::span<const int> occ) const {
  if (static_cast<int>(occ.size()) != size()) throw ValidationError("occupation length mismatch");
  long idx = 0;
  for (int k = 0; k < size(); ++k) {
    if (occ[k] < 0 || occ[k] >= subs_[k].dim) throw ValidationError("occupation out of range");
    idx += occ[k] * strides_[k];
  }
  return idx;
}

std::vector<int> Layout::occupation(long idx) const {
  std::vector<int> occ(size());
  for (int k = 0; k < size(); ++k) occ[k] = digit(idx, k);
  return occ;
}

bool Layout::operator==(const Layout& o) const {
  if (size() != o.size()) return false;
  for (int k = 0; k < size(); ++k)
    if (subs_[k].id != o.subs_[k].id || subs_[k].kind != o.subs_[k].kind || subs_[k].dim != o.subs_[k].dim)
      return false;
  return true;
}

Layout qubits_and_resonator(const std::vector<std::string>& qubit_ids, const std::string& resonator_id,
                            int n_max) {
  std::vector<Subsystem> subs;
  for (const auto& q : qubit_ids) subs.push_back({q, Kind::Qubit, 3});
  subs.push_back({resonator_id, Kind::Resonator, n_max + 1});
  return Layout(std::move(subs));
}

Operator annihilation(int dim) {
  Operator a = Operator::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

Operator number_op(int dim) {
  Operator n = Operator::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) n(k, k) = k;
  return n;
}

State basis_state(const Layout& layout, std::span<const int> occupation) {
  State psi = State::Zero(layout.dim());
  psi(layout.index(occupation)) = 1.0;
  return psi;
}

namespace {

long local_dim(const Layout& layout, std::span<const int> targets) {
  long local = 1;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    int t = targets[j];
    if (t < 0 || t >= layout.size()) throw ValidationError("target index out of range");
    for (std::size_t i = 0; i < j; ++i)
      if (targets[i] == t) throw ValidationError("repeated target");
    local *= layout.levels(t);
  }
  return local;
}

LocalIndex local_map(const Layout& layout, std::span<const int> targets, long op_dim) {
  if (local_dim(layout, targets) != op_dim) throw ValidationError("operator dimension does not match target dimensions");
  return local_index(layout, targets);
}

}  // namespace

LocalIndex local_index(const Layout& layout, std::span<const int> targets) {
  const long local = local_dim(layout, targets);
  LocalIndex m;
  m.offsets.assign(local, 0);
  for (long l = 0; l < local; ++l) {
    long rem = l, off = 0;
    for (int j = static_cast<int>(targets.size()) - 1; j >= 0; --j) {
      int d = layout.levels(targets[j]);
      off += (rem % d) * layout.stride(targets[j]);
      rem /= d;
    }
    m.offsets[l] = off;
  }
  m.bases.reserve(layout.dim() / local);
  for (long idx = 0; idx < layout.dim(); ++idx) {
    bool zero = true;
    for (int t : targets)
      if (layout.digit(idx, t) != 0) {
        zero = false;
        break;
      }
    if (zero) m.bases.push_back(idx);
  }
  return m;
}

Operator embed(const Layout& layout, const Operator& op, std::span<const int> targets) {
  if (layout.dim() > 4096) throw ValidationError("embed: layout too large for a dense operator");
  if (op.rows() != op.cols()) throw ValidationError("embed: operator must be square");
  LocalIndex m = local_map(layout, targets, op.rows());
  Operator full = Operator::Zero(layout.dim(), layout.dim());
  const long d = op.rows();
  for (long b : m.bases)
    for (long r = 0; r < d; ++r)
      for (long c = 0; c < d; ++c) full(b + m.offsets[r], b + m.offsets[c]) = op(r, c);
  return full;
}

Operator embed(const Layout& layout, const Operator& op, const std::vector<std::string>& target_ids) {
  std::vector<int> t;
  for (const auto& id : target_ids) t.push_back(layout.index_of(id));
  return embed(layout, op, t);
}

void apply(const LocalIndex& m, const Operator& op, State& psi) {
  const long d = op.rows();
  if (op.cols() != d || static_cast<long>(m.offsets.size()) != d)
    throw ValidationError("apply: operator does not match the local index");
  struct Entry {
    long r, c;
    cplx v;
  };
  std::vector<Entry> nz;
  bool diagonal = true;
  for (long c = 0; c < d; ++c)
    for (long r = 0; r < d; ++r)
      if (op(r, c) != cplx(0.0)) {
        nz.push_back({r, c, op(r, c)});
        if (r != c) diagonal = false;
      }
  cplx* data = psi.data();
  if (diagonal) {
    Eigen::VectorXcd diag = op.diagonal();
    apply_diagonal(m, diag, psi);
    return;
  }
  std::vector<cplx> in(d), out(d);
  for (long b : m.bases) {
    for (long l = 0; l < d; ++l) {
      in[l] = data[b + m.offsets[l]];
      out[l] = 0.0;
    }
    for (const auto& e : nz) out[e.r] += e.v * in[e.c];
    for (long l = 0; l < d; ++l) data[b + m.offsets[l]] = out[l];
  }
}

void apply_diagonal(const LocalIndex& m, const Eigen::VectorXcd& diag, State& psi) {
  if (static_cast<long>(m.offsets.size()) != diag.size())
    throw ValidationError("apply_diagonal: operator does not match the local index");
  cplx* data = psi.data();
  for (long b : m.bases)
    for (long l = 0; l < diag.size(); ++l)
      if (diag(l) != cplx(1.0)) data[b + m.offsets[l]] *= diag(l);
}

void apply(const Layout& layout, const Operator& op, std::span<const int> targets, State& psi) {
  if (psi.size() != layout.dim()) throw ValidationError("apply: state dimension mismatch");
  if (op.rows() != op.cols()) throw ValidationError("apply: operator must be square");
  apply(local_map(layout, targets, op.rows()), op, psi);
}

void apply_diagonal(const Layout& layout, const Eigen::VectorXcd& diag, std::span<const int> targets,
                    State& psi) {
  if (psi.size() != layout.dim()) throw ValidationError("apply: state dimension mismatch");
  apply_diagonal(local_map(layout, targets, diag.size()), diag, psi);
}

double apply_jump(const Layout& layout, const Operator& op, std::span<const int> targets, State& psi) {
  apply(layout, op, targets, psi);
  double n2 = psi.squaredNorm();
  if (n2 <= 0.0) throw NumericalError("jump produced a null state");
  psi /= std::sqrt(n2);
  return n2;
}

Eigen::VectorXd populations(const Layout& layout, const State& psi, int k) {
  if (psi.size() != layout.dim()) throw ValidationError("populations: state dimension mismatch");
  if (k < 0 || k >= layout.size()) throw ValidationError("populations: subsystem out of range");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(layout.levels(k));
  for (long i = 0; i < psi.size(); ++i) p(layout.digit(i, k)) += std::norm(psi(i));
  return p;
}

Eigen::VectorXd populations(const Layout& layout, const State& psi, const std::string& id) {
  return populations(layout, psi, layout.index_of(id));
}

Eigen::MatrixXd joint_populations(const Layout& layout, const State& psi, int a, int b) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(layout.levels(a), layout.levels(b));
  for (long i = 0; i < psi.size(); ++i) p(layout.digit(i, a), layout.digit(i, b)) += std::norm(psi(i));
  return p;
}

Eigen::VectorXd binary_populations(const Layout& layout, const State& psi, std::span<const int> ks) {
  const int n = static_cast<int>(ks.size());
  Eigen::VectorXd p = Eigen::VectorXd::Zero(1L << n);
  for (long i = 0; i < psi.size(); ++i) {
    long key = 0;
    bool binary = true;
    for (int j = 0; j < n; ++j) {
      int d = layout.digit(i, ks[j]);
      if (d > 1) {
        binary = false;
        break;
      }
      key = (key << 1) | d;
    }
    if (binary) p(key) += std::norm(psi(i));
  }
  return p;
}

double state_fidelity(const State& psi, const State& target) {
  if (psi.size() != target.size()) throw ValidationError("state_fidelity: layout mismatch");
  return std::norm(target.dot(psi));
}

}  // namespace starq
