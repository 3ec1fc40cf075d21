#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "starq/gates.hpp"
#include "starq/hamiltonian.hpp"

using namespace starq;

namespace {

// exp(-i t H) for Hermitian H.
Operator expm_herm(const Operator& h, double t) {
  Eigen::SelfAdjointEigenSolver<Operator> es(h);
  Eigen::VectorXcd ph = (-kI * t * es.eigenvalues().cast<cplx>()).array().exp();
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

// Interaction sigma_+ a + sigma_- a^dag on qubit (3 levels, g-e only) x resonator.
Operator jc_interaction(int n_max) {
  int dr = n_max + 1;
  Operator sm = Operator::Zero(3, 3);
  sm(0, 1) = 1.0;
  Operator a = Operator::Zero(dr, dr);
  for (int n = 1; n < dr; ++n) a(n - 1, n) = std::sqrt(double(n));
  Operator h = Operator::Zero(3 * dr, 3 * dr);
  for (int q1 = 0; q1 < 3; ++q1)
    for (int q2 = 0; q2 < 3; ++q2)
      h.block(q1 * dr, q2 * dr, dr, dr) = sm.adjoint()(q1, q2) * a + sm(q1, q2) * a.adjoint();
  return h;
}

bool unitary(const Operator& u, double tol = 1e-12) {
  return (u.adjoint() * u - Operator::Identity(u.rows(), u.cols())).norm() < tol;
}

}  // namespace

TEST_SUITE("gates") {
  TEST_CASE("JC gate equals the exponentiated JC interaction") {
    for (double theta : {kPi, 0.3, 2.1, kPi * 1.02}) {
      for (int n_max : {1, 3, 5}) {
        JCPhases p;
        p.theta = theta;
        Operator ref = expm_herm(jc_interaction(n_max), theta / 2.0);
        // The unpartnered |e, n_max> stays put in both.
        CHECK((jc_gate(p, n_max) - ref).norm() < 1e-12);
      }
    }
  }

  TEST_CASE("MOVE transfers |e0> to |g1> and squares to Z on the qubit mapping") {
    Operator m = move_gate(2);
    const int dr = 3;
    CHECK(unitary(m));
    CHECK(std::abs(m(0 * dr + 1, 1 * dr + 0)) == doctest::Approx(1.0));
    CHECK(std::abs(m(1 * dr + 0, 0 * dr + 1)) == doctest::Approx(1.0));
    CHECK(std::abs(m(0, 0) - 1.0) < 1e-15);
    Operator m2 = m * m;
    CHECK(std::abs(m2(1 * dr, 1 * dr) + 1.0) < 1e-12);  // |e0> -> -|e0>
    CHECK(std::abs(m2(1, 1) + 1.0) < 1e-12);            // |g1> -> -|g1>
    // |e1> leaks to |g2> with probability s_2^2.
    double s2 = std::sin(std::sqrt(2.0) * kPi / 2);
    CHECK(std::norm(m(0 * dr + 2, 1 * dr + 1)) == doctest::Approx(s2 * s2));
  }

  TEST_CASE("phased JC amplitudes follow the published parametrization") {
    JCPhases p;
    p.theta = 1.3;
    p.gamma = {0.1, -0.4};
    p.zeta = {0.2, 0.7};
    p.chi = {-0.3, 0.25};
    for (int n = 1; n <= 3; ++n) {
      JCAmplitudes a = jc_amplitudes(p, n);
      double c = std::cos(std::sqrt(n) * 0.65), s = std::sin(std::sqrt(n) * 0.65);
      double g = n <= 2 ? p.gamma[n - 1] : 0, z = n <= 2 ? p.zeta[n - 1] : 0, h = n <= 2 ? p.chi[n - 1] : 0;
      CHECK(std::abs(a.c_plus - std::polar(c, -(g + z))) < 1e-14);
      CHECK(std::abs(a.c_minus - std::polar(c, -(g - z))) < 1e-14);
      CHECK(std::abs(a.s_plus - std::polar(s, -(g + h))) < 1e-14);
      CHECK(std::abs(a.s_minus - std::polar(s, -(g - h))) < 1e-14);
    }
    CHECK(unitary(jc_gate(p, 4)));
  }

  TEST_CASE("guard flags |e, n>=1> and |f>") {
    Layout l = qubits_and_resonator({"q1"}, "CR", 2);
    State psi = State::Zero(l.dim());
    psi(l.index(std::vector<int>{1, 0})) = 1.0;
    CHECK(move_guard(l, psi, 0, 1).ok);
    psi(l.index(std::vector<int>{1, 1})) = 0.1;
    psi.normalize();
    GuardResult g = move_guard(l, psi, 0, 1);
    CHECK_FALSE(g.ok);
    CHECK(g.probability == doctest::Approx(0.01 / 1.01));
  }

  TEST_CASE("ideal CZ and VZ residuals") {
    CzSpec s;
    Operator u = cz_gate(s, 2);
    const int dr = 3;
    for (int i = 0; i < u.rows(); ++i) {
      cplx want = i == 1 * dr + 1 ? cplx(-1.0) : cplx(1.0);
      CHECK(std::abs(u(i, i) - want) < 1e-15);
    }
    s.vz_qubit = 0.3;
    s.vz_resonator = -0.7;
    s.conditional_phase = 1.0;
    u = cz_gate(s, 2);
    CHECK(std::abs(u(1 * dr + 1, 1 * dr + 1) - std::exp(kI * (1.0 + 0.3 - 0.7))) < 1e-14);
    CHECK(std::abs(u(0 * dr + 2, 0 * dr + 2) - std::exp(kI * (-1.4))) < 1e-14);
    CHECK(std::abs(u(2 * dr + 0, 2 * dr + 0) - std::exp(kI * 0.6)) < 1e-14);
  }

  TEST_CASE("rotations are SU(2) exponentials on {g, e}") {
    Eigen::Matrix2cd X, Y;
    X << 0, 1, 1, 0;
    Y << 0, -kI, kI, 0;
    for (double axis : {0.0, kPi / 2, 0.77}) {
      Eigen::Matrix2cd n = std::cos(axis) * X + std::sin(axis) * Y;
      double ang = 1.234;
      Eigen::Matrix2cd ref = std::cos(ang / 2) * Eigen::Matrix2cd::Identity() - kI * std::sin(ang / 2) * n;
      Operator r = rot(axis, ang);
      CHECK((r.topLeftCorner(2, 2) - ref).norm() < 1e-14);
      CHECK(std::abs(r(2, 2) - 1.0) < 1e-15);
    }
    Eigen::VectorXcd d = vz_diagonal(3, 0.4);
    CHECK(std::abs(d(2) - std::exp(kI * 0.8)) < 1e-15);
  }

  TEST_CASE("five-level propagator is unitary and matches a direct exponential") {
    FiveLevelModel m;
    m.omega_q = 4.4;
    m.omega_r = 4.22;
    m.alpha_q = -0.18;
    m.g_cz = 0.005;
    m.g_move = 0.002;
    m.include_move_coupling = true;
    m.t_ns = 73.0;
    auto u = five_level_propagator(m);
    CHECK((u.adjoint() * u - Eigen::Matrix<cplx, 5, 5>::Identity()).norm() < 1e-12);
    // Direct: H in the basis {gg0, eg0, gg1, eg1, fg0}, exp(-i 2 pi H t), then the frame.
    Operator h = Operator::Zero(5, 5);
    h(1, 1) = 4.4;
    h(2, 2) = 4.22;
    h(3, 3) = 4.4 + 4.22;
    h(4, 4) = 2 * 4.4 - 0.18;
    h(3, 4) = h(4, 3) = 0.005;
    h(1, 2) = h(2, 1) = 0.002;
    Operator ref = expm_herm(h, kTwoPi * 73.0);
    Operator frame = Operator::Zero(5, 5);
    double f[5] = {0, 4.4, 4.22, 4.4 + 4.22, 2 * 4.4};
    for (int k = 0; k < 5; ++k) frame(k, k) = std::exp(kI * kTwoPi * 73.0 * f[k]);
    ref = frame * ref;
    CHECK((Operator(u) - ref).norm() < 1e-9);
  }

  TEST_CASE("frame ledger") {
    FrameLedger l;
    l.frame_GHz["q1"] = 4.5;
    l.frame_GHz["CR"] = 4.2;
    double p = resolve_frame_phase(l, "CR", "q1", 10.0);
    CHECK(p == doctest::Approx(kTwoPi * -0.3 * 10.0));
    CHECK(l.phase["CR"] == doctest::Approx(p));
    CHECK_THROWS_AS(resolve_frame_phase(l, "CR", "q1", -1.0), ValidationError);
  }
}
