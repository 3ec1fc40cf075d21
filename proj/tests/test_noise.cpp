#include <doctest.h>

#include "starq/device.hpp"
#include "starq/noise.hpp"
#include "starq/parallel.hpp"

using namespace starq;

namespace {

Device preset() { return preset_device("paper-qpu"); }

// Mean of f over n trajectories of a single subsystem evolved for t_ns.
template <typename F>
std::pair<double, double> ensemble(int dim, const State& init, const Rates& r, double t_ns, int n, F&& f) {
  Layout l({{"x", dim == 3 ? Kind::Qubit : Kind::Resonator, dim}});
  std::vector<double> v = parallel_map<double>(n, [&](std::size_t i) {
    Rng g = task_rng(99, i);
    State s = init;
    trajectory_step(l, s, 0, r, t_ns, g);
    return f(s);
  });
  double m = ordered_sum(v) / n, var = 0;
  for (double x : v) var += (x - m) * (x - m);
  return {m, std::sqrt(var / (n - 1) / n)};
}

}  // namespace

TEST_SUITE("noise") {
  TEST_CASE("energy relaxation follows exp(-gamma1 t)") {
    Rates r;
    r.gamma1 = 0.05;  // 1/us
    State e = State::Zero(3);
    e(1) = 1;
    for (double t : {5000.0, 20000.0, 40000.0}) {
      auto [m, sem] = ensemble(3, e, r, t, 4000, [](const State& s) { return std::norm(s(1)); });
      CHECK(std::abs(m - std::exp(-r.gamma1 * t * 1e-3)) < 4 * sem + 1e-3);
    }
  }

  TEST_CASE("pure dephasing decays the coherence at gamma_phi") {
    Rates r;
    r.gamma_phi = 0.1;
    State plus = State::Zero(3);
    plus(0) = plus(1) = 1 / std::sqrt(2.0);
    double t = 8000.0;
    auto [m, sem] = ensemble(3, plus, r, t, 4000, [](const State& s) { return (s(0) * std::conj(s(1))).real(); });
    CHECK(std::abs(m - 0.5 * std::exp(-r.gamma_phi * t * 1e-3)) < 4 * sem + 1e-3);
  }

  TEST_CASE("thermal mode relaxes to the Bose occupation") {
    Rates r;
    r.gamma1 = 1.0;
    r.n_th = 0.2;
    State vac = State::Zero(7);
    vac(0) = 1;
    auto [m, sem] = ensemble(7, vac, r, 20000.0, 3000, [](const State& s) {
      double n = 0;
      for (int k = 0; k < 7; ++k) n += k * std::norm(s(k));
      return n;
    });
    CHECK(std::abs(m - 0.2) < 4 * sem + 2e-3);
  }

  TEST_CASE("single-qubit limit matches the idle channel to first order") {
    double g1 = 0.04, gp = 0.02, tau = 40.0, t = tau * 1e-3;
    // Average fidelity of amplitude + phase damping: (3 + e^{-g1 t} + 2 e^{-t/T2}) / 6.
    double exact = (3 + std::exp(-g1 * t) + 2 * std::exp(-(g1 / 2 + gp) * t)) / 6;
    CHECK(std::abs(limit_sqg(g1, gp, 0.0, tau) - exact) < 1e-6);  // second order is ~2e-7
  }

  TEST_CASE("MOVE limit is the half-and-half single-component formula") {
    double g1q = 0.04, g1r = 0.18, gpq = 0.02, gpr = 0.01, tau = 88;
    // d = 2 general limit applied to the qubit for tau/2 and to the resonator for tau/2.
    double half = 1e-3 * tau / 2;
    double f = 1 - 2 * half / 6 * (g1q + gpq) - 2 * half / 6 * (g1r + gpr);
    CHECK(limit_move(g1q, g1r, gpq, gpr, 0, 0, tau) == doctest::Approx(f).epsilon(1e-14));
    // Thermal term coefficients 1/3.
    double dn = limit_move(g1q, g1r, gpq, gpr, 0, 0, tau) - limit_move(g1q, g1r, gpq, gpr, 0.1, 0.2, tau);
    CHECK(dn == doctest::Approx(1e-3 * tau / 3 * (g1q * 0.1 + g1r * 0.2)).epsilon(1e-10));
  }

  TEST_CASE("CZ limit coefficients") {
    double tau = 100, t = 0.1;
    auto slope = [&](int which) {
      double r[4] = {0, 0, 0, 0};
      r[which] = 1.0;
      return (1.0 - limit_cz(r[0], r[1], r[2], r[3], 0, 0, tau)) / t;
    };
    CHECK(slope(0) == doctest::Approx(1.0 / 2));
    CHECK(slope(1) == doctest::Approx(3.0 / 10));
    CHECK(slope(2) == doctest::Approx(61.0 / 80));
    CHECK(slope(3) == doctest::Approx(29.0 / 80));
    double th = limit_cz(1, 1, 0, 0, 0, 0, tau) - limit_cz(1, 1, 0, 0, 1, 1, tau);
    CHECK(th == doctest::Approx(t * (9.0 / 5 + 7.0 / 5)));
  }

  TEST_CASE("device limits and budget bookkeeping") {
    Device d = preset();
    DeviceLimits L = device_limits(d);
    double s = 0;
    for (auto& [q, f] : L.F_mm) s += f;
    CHECK(L.mean_F_mm == doctest::Approx(s / L.F_mm.size()));
    for (auto& [q, f] : L.F_mm) CHECK(f == doctest::Approx(std::pow(limit_move(d, q).F_m, 2)));
    CoherenceBudget b = ghz_budget(d, "QB3", 6);
    CHECK(b.cz_qubits.size() == 5);
    CHECK(b.F_ghz == doctest::Approx(b.F1 * b.F2 * b.F3 * b.F4 * b.F5));
    CHECK(b.F_ghz_readout == doctest::Approx(b.F_ghz * b.readout));
    // Fewer qubits, higher budget.
    CHECK(ghz_budget(d, "QB3", 3).F_ghz > b.F_ghz);
  }

  TEST_CASE("thermal occupation is opt-in") {
    Device d = preset();
    const auto& c = d.component("QB1");
    CHECK(component_rates(c, false).n_th == 0.0);
    CHECK(component_rates(c, true).n_th > 0.0);
    CHECK(component_rates(c, true).gamma1 == doctest::Approx(1.0 / *c.T1_us));
  }
}
