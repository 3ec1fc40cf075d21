#include <doctest.h>

#include <random>

#include "starq/calib.hpp"
#include "starq/device.hpp"
#include "starq/gates.hpp"
#include "starq/hamiltonian.hpp"

using namespace starq;

namespace {

Device preset() { return preset_device("paper-qpu"); }

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(a + (b - a) * i / (n - 1));
  return v;
}

// Independent (X_pi; MOVE)^n: a state stays in the span of |g,n> and |e,n-1>
// manifolds, so track (level, photons) amplitudes with explicit 2x2 updates.
Eigen::VectorXcd ladder_oracle(int n_steps) {
  int np = n_steps + 1;
  Eigen::VectorXcd a = Eigen::VectorXcd::Zero(2 * np);  // [level * np + photons]
  a(0) = 1;
  for (int s = 0; s < n_steps; ++s) {
    // X_pi: |g> -> -i|e>, |e> -> -i|g>.
    for (int n = 0; n < np; ++n) {
      cplx g = a(n), e = a(np + n);
      a(n) = -kI * e;
      a(np + n) = -kI * g;
    }
    // MOVE with theta = pi: |e,n> <-> |g,n+1> with amplitude cos/sin(sqrt(n+1) pi/2).
    Eigen::VectorXcd b = a;
    for (int n = 0; n + 1 < np; ++n) {
      double x = std::sqrt(n + 1.0) * kPi / 2;
      cplx e = a(np + n), g = a(n + 1);
      b(np + n) = std::cos(x) * e - kI * std::sin(x) * g;
      b(n + 1) = -kI * std::sin(x) * e + std::cos(x) * g;
    }
    a = b;
  }
  return a;
}

}  // namespace

TEST_SUITE("calib") {
  TEST_CASE("MOVE chevron reaches full transfer at the crossing") {
    Device d = preset();
    ChevronGrid g = default_chevron_grid(d, "q1", GateKind::Move, 41, 11);
    CalibResult r = chevron(GateKind::Move, d, "q1", g.wq, g.wc, g.t_ns);
    CHECK(r.rows() == 41 * 11);
    CHECK(1 - r.at("P_e") >= 0.99);
    CHECK(std::abs(r.at("omega_q") - r.diagnostics.at("crossing_omega_q")) <= r.diagnostics.at("step_omega_q"));
    // Two-level Rabi oracle at the dressed coupling: P_e = cos^2(2 pi g t).
    Crossing x = exact_crossing(d, "QB1", r.at("omega_c"), GateKind::Move);
    CHECK(r.at("P_e") == doctest::Approx(std::pow(std::cos(kTwoPi * x.g_exact * g.t_ns), 2)).epsilon(0.01).scale(1));
    CHECK(r.diagnostics.at("top_level_growth") < 1e-3);
  }

  TEST_CASE("CZ chevron optimum sits on the |eg1>/|fg0> crossing") {
    Device d = preset();
    ChevronGrid g = default_chevron_grid(d, "q2", GateKind::Cz, 41, 11);
    CalibResult r = chevron(GateKind::Cz, d, "q2", g.wq, g.wc, g.t_ns);
    CHECK(r.at("P_r0") > 0.95);
    CHECK(std::abs(r.diagnostics.at("crossing_offset_GHz")) <= r.diagnostics.at("step_omega_q"));
  }

  TEST_CASE("MOVE fine calibration finds the dressed resonance") {
    Device d = preset();
    OperatingPoint op = gate_operating_point(d, "QB1", GateKind::Move);
    Crossing x = exact_crossing(d, "QB1", op.omega_c, GateKind::Move);
    MoveFineOptions o;
    o.detuning = linspace(-3e-3, 3e-3, 25);
    o.phi = linspace(0, kTwoPi * 7 / 8, 8);
    CalibResult r = move_fine_cal(d, "q1", o);
    CHECK(std::abs(r.at("omega_q") - x.omega_q) <= r.diagnostics.at("step"));
    CHECK_FALSE(r.extrapolated);
  }

  TEST_CASE("MOVE VZ calibration recovers an injected Z error") {
    Device d = preset();
    MoveVzOptions o;
    o.move.gamma = {0.3};
    CalibResult r = move_vz_cal(d, "q1", o);
    CHECK(wrap_angle(r.at("vz_pair") - 0.6) == doctest::Approx(0.0).scale(1).epsilon(1e-3));
    MoveVzOptions a = o, b = o;
    a.n_list = {2, 4};
    b.n_list = {6, 8};
    CHECK(std::abs(wrap_angle(move_vz_cal(d, "q1", a).at("vz_pair") - move_vz_cal(d, "q1", b).at("vz_pair"))) < 1e-3);
    CHECK(std::abs(wrap_angle(move_vz_cal(d, "q1", MoveVzOptions{}).at("vz_pair"))) < 1e-3);
  }

  TEST_CASE("CZ phase calibration") {
    Device d = preset();
    CalibResult ideal = cz_phase_cal(d, "q2", "q1");
    CHECK(std::abs(wrap_angle(ideal.at("conditional_phase") - kPi)) < 1e-3);
    CHECK(std::abs(ideal.at("vz_qubit")) < 1e-3);
    CHECK(std::abs(ideal.at("vz_resonator")) < 1e-3);
    CzPhaseOptions o;
    o.cz.vz_qubit = 0.1;
    o.cz.vz_resonator = -0.2;
    CalibResult r = cz_phase_cal(d, "q2", "q1", o);
    CHECK(r.at("vz_qubit") == doctest::Approx(0.1).epsilon(1e-2));
    CHECK(r.at("vz_resonator") == doctest::Approx(-0.2).epsilon(1e-2));
    CHECK(std::abs(wrap_angle(r.at("conditional_phase") - kPi)) < 1e-3);
    // Five-level gate: measured conditional phase follows the closed form.
    OperatingPoint op = gate_operating_point(d, "QB2", GateKind::Cz);
    CzPhaseOptions f;
    f.cz.five_level = true;
    f.cz.model = five_level_model(op.eff, d.duration("QB2").cz_ns);
    CalibResult rf = cz_phase_cal(d, "q2", "q1", f);
    CHECK(std::abs(wrap_angle(rf.at("conditional_phase") - cz_conditional_phase(d.duration("QB2").cz_ns, op.eff))) <
          1e-2);
  }

  TEST_CASE("resonator T1 from a short trajectory run") {
    Device d = preset();
    ResonatorOptions o;
    o.trajectories = 300;
    CalibResult r = cr_t1(d, "q1", linspace(0, 16000, 17), o);
    double t1 = *d.component(d.resonator_id()).T1_us;
    CHECK(r.at("T1_us") == doctest::Approx(t1).epsilon(0.15));
  }

  TEST_CASE("sawtooth crossing") {
    double delta = 0.2817, fs = 0.5;
    std::vector<double> dv = linspace(0.26, 0.30, 21), f;
    for (double x : dv) f.push_back(std::abs(x - delta));
    CHECK(sawtooth_crossing(dv, f, fs, 0.28) == doctest::Approx(delta).epsilon(1e-6));
    // Aliased: observed frequencies fold back into [0, fs/2].
    double fs2 = 0.03;
    std::vector<double> h;
    for (double x : dv) {
      double y = std::fmod(std::abs(x - delta), fs2);
      h.push_back(y > fs2 / 2 ? fs2 - y : y);
    }
    CHECK(sawtooth_crossing(dv, h, fs2, 0.28) == doctest::Approx(delta).epsilon(1e-6));
  }

  TEST_CASE("Ramsey sawtooth lands within one bin of the injected detuning") {
    Device d = preset();
    ResonatorOptions o;
    o.trajectories = 1;
    o.detuning_GHz = 0.2813;
    CalibResult r = cr_ramsey(d, "q1", linspace(0, 254, 128), linspace(0.27, 0.29, 11), o);
    CHECK(std::abs(r.at("detuning_GHz") - 0.2813) <= r.diagnostics.at("fft_bin_GHz"));
  }

  TEST_CASE("JC ladder") {
    for (int n = 1; n <= 4; ++n)
      CHECK((jc_ladder_amplitudes(JCPhases{}, n) - ladder_oracle(n)).norm() < 1e-12);
    Device d = preset();
    CalibResult one = jc_ladder(d, "q1", 1);
    CHECK(one.at("P_ee") == doctest::Approx(1.0));
    Eigen::VectorXcd a = ladder_oracle(3);
    CalibResult three = jc_ladder(d, "q1", 3, LadderOptions{3, std::nullopt, {}});
    CHECK(three.at("P_ee") == doctest::Approx(std::norm(a(3))).epsilon(1e-9));
    CHECK(three.at("P_eg") == doctest::Approx(std::norm(a(4 + 2))).epsilon(1e-9));
    CHECK(three.at("spectator_e") < 1e-12);
    CHECK_THROWS_AS(jc_ladder(d, "q1", 3, LadderOptions{2, std::nullopt, {}}), NumericalError);
  }

  TEST_CASE("populated Ramsey closed form and calibration") {
    std::mt19937_64 g(4);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> p(4);
      double s = 0;
      for (double& x : p) s += (x = u(g));
      for (double& x : p) x /= s;
      double dt = 6 * u(g);
      // Incoherent mixture: average the pure-state result over Fock states.
      double mix = 0;
      for (int n = 0; n < 4; ++n) {
        Eigen::VectorXcd fock = Eigen::VectorXcd::Zero(6);
        fock(n) = 1;
        mix += p[n] * populated_ramsey_state(fock, dt);
      }
      CHECK(populated_ramsey_mixture(p, dt) == doctest::Approx(mix).epsilon(1e-9));
    }
    for (double dt : {0.0, 0.7, 2.9}) CHECK(populated_ramsey_mixture({1.0}, dt) == doctest::Approx(0.5 * (1 - std::cos(dt))));

    Device d = preset();
    std::vector<double> ts = linspace(0, 39.5, 80);
    PopulatedRamseyOptions o;
    o.detuning_GHz = 0.281;
    o.probe_move.gamma = {0, 0.4};
    o.probe_move.zeta = {0, -0.3};
    CalibResult r = populated_ramsey(d, "q3", "q2", ts, o);
    CHECK(std::abs(wrap_angle(2 * (r.at("gamma2") - 0.4))) < 1e-3);
    CHECK(std::abs(wrap_angle(2 * (r.at("zeta2") + 0.3))) < 1e-3);
    PopulatedRamseyOptions c = o;
    c.phi = r.at("phi_corr");
    c.phi_prime = r.at("phi_prime_corr");
    CalibResult fixed = populated_ramsey(d, "q3", "q2", ts, c);
    CHECK(std::abs(fixed.at("phi_fit")) < 1e-3);
    CHECK(std::abs(fixed.at("phi_prime_fit")) < 1e-3);
    CHECK_THROWS_AS(populated_ramsey(d, "q3", "q2", linspace(0, 390, 80), o), ValidationError);
  }
}
