#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "starq/device.hpp"
#include "starq/gates.hpp"
#include "starq/hamiltonian.hpp"

using namespace starq;

namespace {

Device preset() { return preset_device("paper-qpu"); }

TrioParams scaled(TrioParams p, double s) {
  p.gqc *= s;
  p.grc *= s;
  p.gqr *= s;
  return p;
}

// Half the minimum splitting of the pair with the largest weight on bare
// states i1, i2, found by a plain scan plus local refinement.
std::pair<double, double> scan_crossing(const std::function<TrioParams(double)>& make, int nl, int i1q, int i1r,
                                        int i2q, int i2r, double lo, double hi) {
  auto gap = [&](double wq) {
    Eigen::MatrixXd h = trio_hamiltonian(make(wq), nl, nl + 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    int nr = nl + 1, nc = nl;
    int a = (i1q * nc) * nr + i1r, b = (i2q * nc) * nr + i2r;
    Eigen::VectorXd w = es.eigenvectors().row(a).cwiseAbs2() + es.eigenvectors().row(b).cwiseAbs2();
    Eigen::Index k1, k2;
    w.maxCoeff(&k1);
    w(k1) = -1;
    w.maxCoeff(&k2);
    return std::abs(es.eigenvalues()(k1) - es.eigenvalues()(k2));
  };
  double best = lo, bg = 1e9;
  for (int i = 0; i <= 600; ++i) {
    double x = lo + (hi - lo) * i / 600;
    double g = gap(x);
    if (g < bg) bg = g, best = x;
  }
  double step = (hi - lo) / 600;
  for (int it = 0; it < 40; ++it) {
    step /= 2;
    for (double x : {best - step, best + step})
      if (double g = gap(x); g < bg) bg = g, best = x;
  }
  return {best, bg / 2};
}

}  // namespace

TEST_SUITE("hamiltonian") {
  TEST_CASE("uncoupled trio spectrum equals bare ladder energies") {
    TrioParams p{4.5, 6.1, 4.2, -0.19, -0.21, 0, 0, 0};
    Eigen::MatrixXd h = trio_hamiltonian(p, 3, 4);
    CHECK((h - h.transpose()).norm() == 0.0);
    for (int q = 0; q < 3; ++q)
      for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 4; ++r) {
          double e = q * p.wq + p.aq * q * (q - 1) / 2 + c * p.wc + p.ac * c * (c - 1) / 2 + r * p.wr;
          int i = (q * 3 + c) * 4 + r;
          CHECK(h(i, i) == doctest::Approx(e));
        }
  }

  TEST_CASE("ladder couplings scale as sqrt(n)") {
    auto e = effective_params(preset(), "QB1");
    REQUIRE(e.g_ladder.size() >= 4);
    for (int n = 1; n <= 4; ++n) CHECK(std::abs(e.g_ladder[n - 1] / e.g_ladder[0] - std::sqrt(double(n))) < 1e-12);
  }

  TEST_CASE("direct dispersive ZZ with the coupler switched off") {
    // Qubit-resonator only, second order: |e1> is pushed by |g2> (2g^2/D) and
    // |f0> (-2g^2/(D + alpha)), |e0> and |g1> shifts cancel, so
    // zeta = 2 g^2 alpha / (D (D + alpha)), D = w_q - w_r.
    TrioParams p{4.5, 7.5, 4.2, -0.2, -0.2, 0, 0, 0.005};
    double D = 0.3, a = -0.2, g = 0.005;
    double oracle = 2 * g * g * a / (D * (D + a)) * 1e3;
    CHECK(zz_coupling(p).zeta_MHz == doctest::Approx(oracle).epsilon(0.01));
  }

  TEST_CASE("SW couplings converge to the exact crossing as couplings shrink") {
    Device d = preset();
    TrioParams base = trio_params(d, "QB2");
    double prev = 1.0;
    for (double s : {1.0, 0.5, 0.25}) {
      auto make = [&](double wq) {
        TrioParams p = scaled(base, s);
        p.wq = wq;
        p.wc = base.wr + 1.0;
        return p;
      };
      Crossing c = exact_crossing(make, GateKind::Move);
      CHECK(c.rel_error < prev);
      prev = c.rel_error;
    }
    CHECK(prev < 0.01);
  }

  TEST_CASE("exact crossing agrees with a brute-force scan") {
    Device d = preset();
    for (GateKind k : {GateKind::Move, GateKind::Cz}) {
      OperatingPoint op = gate_operating_point(d, "QB1", k);
      Crossing c = exact_crossing(d, "QB1", op.omega_c, k);
      auto make = [&](double wq) { return trio_params(d, "QB1", wq, op.omega_c); };
      auto [wq, g] = k == GateKind::Move ? scan_crossing(make, 3, 1, 0, 0, 1, c.omega_q - 0.02, c.omega_q + 0.02)
                                         : scan_crossing(make, 5, 1, 1, 2, 0, c.omega_q - 0.02, c.omega_q + 0.02);
      CHECK(c.omega_q == doctest::Approx(wq).epsilon(2e-6));
      CHECK(c.g_exact == doctest::Approx(g).epsilon(1e-3));
    }
  }

  TEST_CASE("operating points hit the requested coupling") {
    Device d = preset();
    for (const auto& q : d.qubit_ids()) {
      OperatingPoint m = gate_operating_point(d, q, GateKind::Move);
      CHECK(std::abs(m.eff.g_move) == doctest::Approx(1.0 / (4.0 * d.duration(q).move_ns)).epsilon(1e-6));
      CHECK(m.eff.wq_t == doctest::Approx(m.eff.wr_t).epsilon(1e-9));
      OperatingPoint c = gate_operating_point(d, q, GateKind::Cz);
      CHECK(std::abs(c.eff.g_cz) == doctest::Approx(1.0 / (2.0 * d.duration(q).cz_ns)).epsilon(1e-6));
    }
  }

  TEST_CASE("CZ closed forms match the exact two-level amplitude and the propagator") {
    std::mt19937_64 g(21);
    std::uniform_real_distribution<double> u(0, 1);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
      EffectiveCouplings e;
      e.wq_t = 4.3 + 0.3 * u(g);
      e.alpha_q = -0.17 - 0.05 * u(g);
      e.g_cz = 0.002 + 0.008 * u(g);
      e.wr_t = e.wq_t + e.alpha_q + (u(g) - 0.5) * 0.03;
      e.delta_t = e.wr_t - e.wq_t;
      e.omega_t = std::sqrt(std::pow(e.delta_t - e.alpha_q, 2) + 4 * e.g_cz * e.g_cz);
      double t = 20 + 200 * u(g);
      // Two-level oracle, angular units, frame of |eg1>.
      double dl = kTwoPi * (e.alpha_q - e.delta_t), W = std::sqrt(dl * dl + std::pow(2 * kTwoPi * e.g_cz, 2));
      cplx amp = std::exp(-kI * dl * t / 2.0) * (std::cos(W * t / 2) + kI * dl / W * std::sin(W * t / 2));
      CHECK(cz_population(t, e) == doctest::Approx(std::norm(amp)).epsilon(1e-12));
      if (std::abs(std::cos(W * t / 2)) < 1e-3) continue;  // branch point
      ++checked;
      CHECK(std::abs(wrap_angle(cz_conditional_phase(t, e) + std::arg(amp))) < 1e-9);
      auto p = five_level_propagator(five_level_model(e, t));
      CHECK(std::abs(wrap_angle(cz_conditional_phase(t, e) + std::arg(p(3, 3)))) < 1e-6);
    }
    CHECK(checked > 90);
  }

  TEST_CASE("ZZ landscape has large values and a zero contour; idling root") {
    auto pts = zz_landscape([](double q, double c) { return reference_trio(q, c); }, 4.3, 3.0, 8.0, 21, -1.0, 1.0, 21);
    double mx = 0;
    int pos = 0, neg = 0;
    for (const auto& p : pts) {
      if (std::isnan(p.zeta_MHz)) continue;
      mx = std::max(mx, std::abs(p.zeta_MHz));
      (p.zeta_MHz > 0 ? pos : neg)++;
    }
    CHECK(mx > 20.0);
    CHECK(pos > 0);
    CHECK(neg > 0);
    IdlingPoint ip = idling_point([](double wc) { return reference_trio(4.4, wc); }, 4.5, 8.0);
    CHECK(std::abs(ip.zeta_MHz) < 1e-3);
    CHECK(std::abs(zz_coupling(reference_trio(4.4, ip.omega_c)).zeta_MHz) < 2e-3);
  }

  TEST_CASE("preset couplers idle at the minimum of |zeta|") {
    Device d = preset();
    for (const auto& q : d.qubit_ids()) {
      double wc = d.component(d.coupler_of(q)).frequency_GHz;
      double z0 = std::abs(zz_coupling(trio_params(d, q, std::nullopt, wc)).zeta_MHz);
      CHECK(z0 < 0.02);
      CHECK(std::abs(zz_coupling(trio_params(d, q, std::nullopt, wc - 0.05)).zeta_MHz) > z0);
      CHECK(std::abs(zz_coupling(trio_params(d, q, std::nullopt, wc + 0.05)).zeta_MHz) > z0);
    }
  }

  TEST_CASE("spectators stay weakly coupled during a CZ") {
    Device d = preset();
    OperatingPoint op = gate_operating_point(d, "QB1", GateKind::Cz);
    auto sp = spectator_couplings(d, "QB1", op.omega_c);
    int active = 0;
    for (const auto& s : sp) {
      if (s.active) {
        ++active;
        CHECK(std::abs(s.g_MHz) > 1.0);
      } else {
        CHECK(std::abs(s.g_MHz) < 1.0);
      }
    }
    CHECK(active == 1);
  }

  TEST_CASE("vanishing denominators are numerical errors") {
    TrioParams p{4.5, 4.5, 4.2, -0.2, -0.2, 0.1, 0.1, 0.0};
    CHECK_THROWS_AS(effective_params(p), NumericalError);
  }
}
