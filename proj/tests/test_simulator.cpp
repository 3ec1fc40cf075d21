#include <doctest.h>

#include <cstdlib>
#include <random>

#include "oracle.hpp"
#include "starq/device.hpp"
#include "starq/simulator.hpp"
#include "starq/transpiler.hpp"

using namespace starq;

namespace {

Device preset() { return preset_device("paper-qpu"); }

Eigen::VectorXcd ghz_vector(int n) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(1L << n);
  v(0) = v(v.size() - 1) = 1 / std::sqrt(2.0);
  return v;
}

}  // namespace

TEST_SUITE("simulator") {
  TEST_CASE("noiseless GHZ preparation") {
    Device d = preset();
    for (int N : {2, 4, 6}) {
      Circuit c = resolve_phases(ghz_circuit(N, "q3"), d);
      Simulator s(d, c);
      Rng g(1);
      Trajectory t = s.run(g);
      // ghz_qubits puts the MOVE qubit first; the layout is index-ordered, so compare
      // through the symmetric GHZ vector, which is invariant under qubit reordering.
      CHECK(std::norm(ghz_vector(N).dot(s.computational(t.psi))) == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(t.guard_violations == 0);
    }
  }

  TEST_CASE("unresolved frames break the GHZ phase") {
    Device d = preset();
    // On the preset the q1 gap is a whole number of detuning cycles; shift the resonator.
    d.component(d.resonator_id()).frequency_GHz += 0.0013;
    Circuit raw = ghz_circuit(3, "q1");
    Simulator s(d, raw);
    Rng g(1);
    CHECK(std::norm(ghz_vector(3).dot(s.computational(s.run(g).psi))) < 0.99);
    Simulator fixed(d, resolve_phases(raw, d));
    CHECK(std::norm(ghz_vector(3).dot(fixed.computational(fixed.run(g).psi))) == doctest::Approx(1.0).epsilon(1e-10));
  }

  TEST_CASE("MOVE guard policy") {
    Device d = preset();
    Circuit c;
    c.rx("q1", kPi).move("q1").rx("q1", kPi).move("q1").move("q1").move("q1");
    Rng g0(1);
    CHECK_THROWS_AS(Simulator(d, c).run(g0), ValidationError);
    ExecOptions o;
    o.gates.guard = Policy::Record;
    Simulator s(d, c, o);
    Rng g(1);
    Trajectory t = s.run(g);
    CHECK(t.guard_violations >= 1);
    CHECK(t.guard_max > 0.5);
  }

  TEST_CASE("truncation overflow is a numerical error") {
    Device d = preset();
    Circuit c;
    for (int k = 0; k < 3; ++k) c.rx("q1", kPi).move("q1");
    ExecOptions o;
    o.n_max = 2;
    o.gates.guard = Policy::Record;
    Rng g(1);
    CHECK_THROWS_AS(Simulator(d, c, o).run(g), NumericalError);
    o.n_max = 3;
    Rng g2(1);
    CHECK_NOTHROW(Simulator(d, c, o).run(g2));
    // Stochastic runs record the loss instead.
    o.n_max = 2;
    o.noise.depol_1q = 1e-12;
    Rng g3(1);
    Trajectory t = Simulator(d, c, o).run(g3);
    CHECK(t.overflow > 0.1);
  }

  TEST_CASE("readout assignment is a tensor product") {
    Eigen::Matrix2d a, b;
    a << 0.97, 0.05, 0.03, 0.95;
    b << 0.9, 0.2, 0.1, 0.8;
    Eigen::VectorXd p(4);
    p << 0.1, 0.2, 0.3, 0.4;
    Eigen::Matrix4d k;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    CHECK((apply_tensor(p, {a, b}) - k * p).norm() < 1e-15);
  }

  TEST_CASE("sampling and ensembles are seeded and order independent") {
    Device d = preset();
    Circuit c = resolve_phases(ghz_circuit(3, "q2"), d);
    c.measure({"q1", "q2", "q3"});
    ExecOptions o;
    o.noise.decoherence = true;
    o.noise.readout = true;
    Simulator s(d, c, o);
    setenv("STARQ_THREADS", "1", 1);
    EnsembleResult a = run_ensemble(s, 64, 500, 9);
    setenv("STARQ_THREADS", "3", 1);
    EnsembleResult b = run_ensemble(s, 64, 500, 9);
    unsetenv("STARQ_THREADS");
    CHECK(a.probabilities == b.probabilities);
    CHECK(a.counts == b.counts);
    long tot = 0;
    for (long x : a.counts) tot += x;
    CHECK(tot == 500);
    CHECK(a.probabilities.sum() == doctest::Approx(1.0));
    EnsembleResult c2 = run_ensemble(s, 64, 500, 10);
    CHECK(c2.counts != a.counts);
  }

  TEST_CASE("DEPOL with p = 1 fully mixes a qubit") {
    Device d = preset();
    Circuit c;
    c.depol({"q1"}, 1.0).measure({"q1"});
    Simulator s(d, c);
    CHECK(s.stochastic());
    EnsembleResult r = run_ensemble(s, 4000, 0, 3);
    // Uniform random Pauli (identity included) on |g>: X or Y flips, so P(e) = 1/2.
    CHECK(r.probabilities(1) == doctest::Approx(0.5).epsilon(0.05));
  }

  TEST_CASE("qubit decay under the simulator matches T1") {
    Device d = preset();
    Circuit c;
    c.rx("q2", kPi).barrier();
    // VZs take no time, so idle with zero-angle pulses.
    int n_wait = 250;
    for (int k = 0; k < n_wait; ++k) c.prx("q2", 0.0, 0.0);
    c.measure({"q2"});
    ExecOptions o;
    o.noise.decoherence = true;
    Simulator s(d, c, o);
    EnsembleResult r = run_ensemble(s, 2000, 0, 5);
    double t_us = (n_wait * d.duration("QB2").single_ns) * 1e-3;
    double expect = std::exp(-t_us / *d.component("QB2").T1_us);
    CHECK(r.probabilities(1) == doctest::Approx(expect).epsilon(0.05));
  }

  TEST_CASE("reference semantics agree with the independent oracle") {
    std::mt19937_64 g(2);
    for (int t = 0; t < 10; ++t) {
      Circuit c = oracle::random_circuit(4, 15, g);
      Eigen::VectorXcd init = oracle::random_state(4, g);
      CHECK((reference_state(c, 4, init) - oracle::run(c, 4, init)).norm() < 1e-12);
    }
  }

  TEST_CASE("bitstrings are first-qubit major") {
    CHECK(bitstring(1, 3) == "001");
    CHECK(bitstring(6, 3) == "110");
  }
}
