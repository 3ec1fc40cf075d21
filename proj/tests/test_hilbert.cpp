#include <doctest.h>

#include <random>

#include "starq/hilbert.hpp"

using namespace starq;

namespace {

Operator kron(const Operator& a, const Operator& b) {
  Operator r(a.rows() * b.rows(), a.cols() * b.cols());
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j) r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return r;
}

Operator random_op(int d, std::mt19937_64& g) {
  std::normal_distribution<double> n;
  Operator m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = cplx(n(g), n(g));
  return m;
}

State random_state(long d, std::mt19937_64& g) {
  std::normal_distribution<double> n;
  State s(d);
  for (long i = 0; i < d; ++i) s(i) = cplx(n(g), n(g));
  return s.normalized();
}

Layout abc() { return Layout({{"a", Kind::Qubit, 3}, {"b", Kind::Resonator, 2}, {"c", Kind::Resonator, 4}}); }

}  // namespace

TEST_SUITE("hilbert") {
  TEST_CASE("row-major layout, last subsystem fastest") {
    Layout l = abc();
    CHECK(l.dim() == 24);
    CHECK(l.stride(0) == 8);
    CHECK(l.stride(1) == 4);
    CHECK(l.stride(2) == 1);
    int occ[3] = {2, 1, 3};
    CHECK(l.index(occ) == 2 * 8 + 4 + 3);
    for (long i = 0; i < l.dim(); ++i) CHECK(l.index(l.occupation(i)) == i);
    CHECK(l.digit(23, 0) == 2);
    CHECK(l.index_of("c") == 2);
    CHECK_THROWS(l.index_of("zz"));
  }

  TEST_CASE("ladder operators") {
    Operator a = annihilation(5);
    Operator n = number_op(5);
    CHECK((a.adjoint() * a - n).norm() < 1e-14);
    Operator comm = a * a.adjoint() - a.adjoint() * a;
    for (int k = 0; k < 4; ++k) CHECK(std::abs(comm(k, k) - 1.0) < 1e-14);
    CHECK(std::abs(a(2, 3) - std::sqrt(3.0)) < 1e-14);
  }

  TEST_CASE("embed equals the Kronecker product") {
    std::mt19937_64 g(3);
    Layout l = abc();
    Operator oa = random_op(3, g), oc = random_op(4, g);
    Operator I2 = Operator::Identity(2, 2);
    int ta[1] = {0};
    CHECK((embed(l, oa, ta) - kron(kron(oa, I2), Operator::Identity(4, 4))).norm() < 1e-12);
    int tc[1] = {2};
    CHECK((embed(l, oc, tc) - kron(kron(Operator::Identity(3, 3), I2), oc)).norm() < 1e-12);
    // Target order matters: {c, a} means c is the major index of the local op.
    Operator oca = kron(oc, oa);
    Operator full = embed(l, oca, std::vector<std::string>{"c", "a"});
    State psi = random_state(l.dim(), g);
    State via_two = embed(l, oc, tc) * (embed(l, oa, ta) * psi);
    CHECK((full * psi - via_two).norm() < 1e-12);
  }

  TEST_CASE("in-place apply matches the dense embedding on random states") {
    std::mt19937_64 g(11);
    Layout l = abc();
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<int> t = trial % 2 ? std::vector<int>{2, 0} : std::vector<int>{1, 2};
      long ld = 1;
      for (int k : t) ld *= l.levels(k);
      Operator op = random_op(static_cast<int>(ld), g);
      State psi = random_state(l.dim(), g);
      State ref = embed(l, op, t) * psi;
      apply(l, op, t, psi);
      CHECK((psi - ref).norm() < 1e-12);
    }
  }

  TEST_CASE("diagonal apply and jumps") {
    std::mt19937_64 g(5);
    Layout l = abc();
    State psi = random_state(l.dim(), g);
    Eigen::VectorXcd d(4);
    d << 1.0, kI, -1.0, 0.5;
    int t[1] = {2};
    State ref = embed(l, Operator(d.asDiagonal()), t) * psi;
    State p2 = psi;
    apply_diagonal(l, d, t, p2);
    CHECK((p2 - ref).norm() < 1e-12);

    State p3 = psi;
    Operator a = annihilation(4);
    State expect = embed(l, a, t) * psi;
    double w = apply_jump(l, a, t, p3);
    CHECK(w == doctest::Approx(expect.squaredNorm()).epsilon(1e-12));
    CHECK((p3 - expect / std::sqrt(w)).norm() < 1e-12);
  }

  TEST_CASE("marginals and joint populations") {
    std::mt19937_64 g(8);
    Layout l = abc();
    State psi = random_state(l.dim(), g);
    Eigen::VectorXd pa = populations(l, psi, 0);
    CHECK(pa.sum() == doctest::Approx(1.0));
    Eigen::MatrixXd j = joint_populations(l, psi, 0, 2);
    CHECK((j.rowwise().sum() - pa).norm() < 1e-12);
    CHECK((j.colwise().sum().transpose() - populations(l, psi, "c")).norm() < 1e-12);
    double manual = 0;
    for (long i = 0; i < l.dim(); ++i)
      if (l.digit(i, 0) == 1 && l.digit(i, 2) == 3) manual += std::norm(psi(i));
    CHECK(j(1, 3) == doctest::Approx(manual).epsilon(1e-12));
  }

  TEST_CASE("binary populations drop leaked levels") {
    Layout l({{"q1", Kind::Qubit, 3}, {"q2", Kind::Qubit, 3}});
    State psi = State::Zero(9);
    psi(l.index(std::vector<int>{1, 0})) = std::sqrt(0.5);
    psi(l.index(std::vector<int>{0, 1})) = std::sqrt(0.3);
    psi(l.index(std::vector<int>{2, 0})) = std::sqrt(0.2);
    int ks[2] = {0, 1};
    Eigen::VectorXd b = binary_populations(l, psi, ks);
    CHECK(b(2) == doctest::Approx(0.5));
    CHECK(b(1) == doctest::Approx(0.3));
    CHECK(b.sum() == doctest::Approx(0.8));
    CHECK(state_fidelity(psi, psi) == doctest::Approx(1.0));
  }

  TEST_CASE("qubits_and_resonator layout") {
    Layout l = qubits_and_resonator({"QB1", "QB2"}, "CR", 3);
    CHECK(l.size() == 3);
    CHECK(l.dim() == 3 * 3 * 4);
    CHECK(l[2].kind == Kind::Resonator);
    CHECK(parse_kind(kind_name(Kind::Coupler)) == Kind::Coupler);
  }
}
