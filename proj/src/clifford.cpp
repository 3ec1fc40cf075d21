#include "starq/clifford.hpp"

#include <cmath>
#include <deque>

#include "starq/gates.hpp"

namespace starq {

namespace {

template <typename M>
std::uint64_t phase_key(const M& u) {
  cplx ref = 0;
  for (long j = 0; j < u.cols() && ref == cplx(0); ++j)
    for (long i = 0; i < u.rows(); ++i)
      if (std::abs(u(i, j)) > 1e-6) {
        ref = std::conj(u(i, j)) / std::abs(u(i, j));
        break;
      }
  std::uint64_t h = 1469598103934665603ULL;
  for (long j = 0; j < u.cols(); ++j)
    for (long i = 0; i < u.rows(); ++i) {
      cplx z = u(i, j) * ref;
      for (double x : {z.real(), z.imag()}) {
        auto q = static_cast<std::int64_t>(std::llround(x * 1e4));
        h ^= static_cast<std::uint64_t>(q);
        h *= 1099511628211ULL;
      }
    }
  return h;
}

Eigen::Matrix2cd pulse_matrix(const Pulse& p) { return rot(p.phase, p.angle).topLeftCorner(2, 2); }

struct Group1 {
  std::vector<Clifford1> elems;
  std::vector<int> inv;
  std::vector<std::vector<int>> then;
};

const Group1& group1() {
  static const Group1 g = [] {
    Group1 out;
    const std::vector<Pulse> gens = {{kPi / 2, 0}, {-kPi / 2, 0}, {kPi / 2, kPi / 2},
                                     {-kPi / 2, kPi / 2}, {kPi, 0}, {kPi, kPi / 2}};
    out.elems.push_back({Eigen::Matrix2cd::Identity(), {}});
    std::deque<int> queue{0};
    while (!queue.empty()) {
      int cur = queue.front();
      queue.pop_front();
      for (const auto& p : gens) {
        Eigen::Matrix2cd u = pulse_matrix(p) * out.elems[cur].u;
        bool seen = false;
        for (const auto& e : out.elems)
          if (equal_up_to_phase(e.u, u)) seen = true;
        if (seen) continue;
        Clifford1 c{u, out.elems[cur].pulses};
        c.pulses.push_back(p);
        out.elems.push_back(c);
        queue.push_back(static_cast<int>(out.elems.size()) - 1);
      }
    }
    const int n = static_cast<int>(out.elems.size());
    auto find = [&](const Eigen::Matrix2cd& u) {
      for (int i = 0; i < n; ++i)
        if (equal_up_to_phase(out.elems[i].u, u)) return i;
      return -1;
    };
    out.inv.resize(n);
    out.then.assign(n, std::vector<int>(n));
    for (int i = 0; i < n; ++i) {
      out.inv[i] = find(out.elems[i].u.adjoint());
      for (int j = 0; j < n; ++j) out.then[i][j] = find(out.elems[j].u * out.elems[i].u);
    }
    return out;
  }();
  return g;
}

bool same4(const Eigen::Matrix4cd& a, const Eigen::Matrix4cd& b) {
  cplx ov = (a.adjoint() * b).trace();
  if (std::abs(std::abs(ov) - 4.0) > 4e-8) return false;
  return (a * (ov / std::abs(ov)) - b).norm() < 4e-8;
}

Eigen::Matrix4cd kron2(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
  Eigen::Matrix4cd k;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return k;
}

}  // namespace

bool equal_up_to_phase(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b, double tol) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  cplx ov = (a.adjoint() * b).trace();
  double n = static_cast<double>(a.rows());
  return std::abs(std::abs(ov) - n) < tol * n && (a * (ov / std::abs(ov)) - b).norm() < tol * n;
}

const std::vector<Clifford1>& clifford_1q() { return group1().elems; }

int clifford_1q_find(const Eigen::Matrix2cd& u) {
  const auto& e = group1().elems;
  for (std::size_t i = 0; i < e.size(); ++i)
    if (equal_up_to_phase(e[i].u, u)) return static_cast<int>(i);
  return -1;
}

int clifford_1q_inverse(int i) { return group1().inv.at(i); }
int clifford_1q_then(int first, int second) { return group1().then.at(first).at(second); }

Clifford2Group::Clifford2Group() {
  const auto& c1 = clifford_1q();
  const int n1 = static_cast<int>(c1.size());
  Eigen::Matrix4cd cz = Eigen::Matrix4cd::Identity();
  cz(3, 3) = -1;

  auto insert = [&](const Eigen::Matrix4cd& u, std::vector<Clifford2Op> ops, int ncz) {
    if (find(u) >= 0) return false;
    index_.emplace(phase_key(u), static_cast<int>(elems_.size()));
    elems_.push_back({u, std::move(ops), ncz});
    return true;
  };

  std::vector<Eigen::Matrix4cd> pairs(n1 * n1);
  for (int a = 0; a < n1; ++a)
    for (int b = 0; b < n1; ++b) {
      pairs[a * n1 + b] = kron2(c1[a].u, c1[b].u);
      insert(pairs[a * n1 + b], {{false, a, b}}, 0);
    }
  constexpr std::size_t kOrder = 11520;  // |C2| / U(1)
  std::size_t lo = 0, hi = elems_.size();
  for (int layer = 1; layer <= 3; ++layer) {
    for (std::size_t g = lo; g < hi && elems_.size() < kOrder; ++g) {
      Eigen::Matrix4cd base = cz * elems_[g].u;
      // Copy: insert may reallocate elems_.
      std::vector<Clifford2Op> prefix = elems_[g].ops;
      prefix.push_back({true, 0, 0});
      for (int a = 0; a < n1; ++a)
        for (int b = 0; b < n1; ++b) {
          Eigen::Matrix4cd u = pairs[a * n1 + b] * base;
          if (find(u) >= 0) continue;
          auto ops = prefix;
          ops.push_back({false, a, b});
          insert(u, std::move(ops), layer);
        }
    }
    lo = hi;
    hi = elems_.size();
  }
}

const Clifford2Group& Clifford2Group::instance() {
  static const Clifford2Group g;
  return g;
}

int Clifford2Group::find(const Eigen::Matrix4cd& u) const {
  auto range = index_.equal_range(phase_key(u));
  for (auto it = range.first; it != range.second; ++it)
    if (same4(elems_[it->second].u, u)) return it->second;
  return -1;
}

int Clifford2Group::inverse(int i) const { return find(elems_.at(i).u.adjoint()); }

int Clifford2Group::then(int first, int second) const { return find(elems_.at(second).u * elems_.at(first).u); }

std::array<int, 4> Clifford2Group::class_counts() const {
  std::array<int, 4> n{0, 0, 0, 0};
  for (const auto& e : elems_) ++n.at(e.cz_count);
  return n;
}

void append_clifford_1q(Circuit& c, int element, const std::string& q) {
  for (const auto& p : clifford_1q().at(element).pulses) c.prx(q, p.angle, p.phase);
}

void append_clifford_2q(Circuit& c, int element, const std::string& q0, const std::string& q1) {
  for (const auto& op : Clifford2Group::instance()[element].ops) {
    if (op.cz) {
      c.cz(q0, q1);
    } else {
      append_clifford_1q(c, op.c0, q0);
      append_clifford_1q(c, op.c1, q1);
    }
  }
}

}  // namespace starq
