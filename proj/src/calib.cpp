#include "starq/calib.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "starq/circuit.hpp"
#include "starq/fit.hpp"
#include "starq/noise.hpp"
#include "starq/parallel.hpp"
#include "starq/simulator.hpp"
#include "starq/transpiler.hpp"

namespace starq {

namespace {

std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(seed ^ 0x5ca1ab1eULL) + a * 0x9e3779b97f4a7c15ULL + b);
}

std::vector<double> phase_grid(const std::vector<double>& given, int n) {
  if (!given.empty()) return given;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = kTwoPi * i / n;
  return out;
}

// y ~ a + b cos(phi) + c sin(phi)
Eigen::Vector3d fit_sinusoid(const std::vector<double>& phi, const std::vector<double>& y) {
  if (phi.size() < 3) throw ValidationError("phase fit needs at least 3 points");
  Eigen::MatrixXd X(phi.size(), 3);
  Eigen::VectorXd v(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) {
    X(i, 0) = 1;
    X(i, 1) = std::cos(phi[i]);
    X(i, 2) = std::sin(phi[i]);
    v(i) = y[i];
  }
  FitResult f = linear_fit(X, v);
  if (!f.converged) throw NumericalError("phase fit failed");
  if (std::hypot(f.params(1), f.params(2)) < 1e-6) throw NumericalError("phase fit: no fringe contrast");
  return f.params;
}

// Ramsey phase theta from P_e = 1/2 (1 - cos(theta + phi)).
double ramsey_phase(const std::vector<double>& phi, const std::vector<double>& pe) {
  Eigen::Vector3d p = fit_sinusoid(phi, pe);
  return std::atan2(p(2), -p(1));
}

double excited(const Simulator& sim) {
  Rng rng(0);
  Trajectory tr = sim.run(rng);
  Eigen::VectorXd p = sim.outcome_probabilities(tr.psi);
  return p(1);
}

bool on_edge(std::size_t i, std::size_t n) { return n > 1 && (i == 0 || i + 1 == n); }

// Trio in the idle dressed basis.
struct IdleTrio {
  TrioSpectrum idle;
  std::vector<int> q, c, r;  // bare labels per eigenvector
  int nl = 3, nr = 4;

  IdleTrio(const Device& d, const std::string& id, int n_levels, int nr_levels) : nl(n_levels), nr(nr_levels) {
    idle = trio_spectrum(trio_params(d, id), nl, nr);
    const long n = idle.vectors.cols();
    q.resize(n);
    c.resize(n);
    r.resize(n);
    std::vector<int> seen(n, 0);
    for (long k = 0; k < n; ++k) {
      int b = idle.eigen_label[k];
      if (seen[b]++) throw NumericalError("idle trio labels are ambiguous");
      q[k] = b / (nl * nr);
      c[k] = (b / nr) % nl;
      r[k] = b % nr;
    }
  }

  long find(int qq, int cc, int rr) const {
    for (std::size_t k = 0; k < q.size(); ++k)
      if (q[k] == qq && c[k] == cc && r[k] == rr) return static_cast<long>(k);
    throw NumericalError("idle trio state not found");
  }

  // Sudden square pulse at `p` for t_ns, in the idle eigenbasis. With
  // `frame`, the idle dynamical phases are removed.
  Operator pulse(const TrioParams& p, double t_ns, bool frame) const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(trio_hamiltonian(p, nl, nr));
    if (es.info() != Eigen::Success) throw NumericalError("trio diagonalization failed");
    const Eigen::MatrixXd& V = es.eigenvectors();
    Eigen::VectorXcd ph(V.cols());
    for (long k = 0; k < V.cols(); ++k) ph(k) = std::exp(-kI * (kTwoPi * es.eigenvalues()(k) * t_ns));
    Eigen::MatrixXd W = idle.vectors.transpose() * V;
    Operator u = W.cast<cplx>() * ph.asDiagonal() * W.transpose().cast<cplx>();
    if (frame)
      for (long k = 0; k < u.rows(); ++k) u.row(k) *= std::exp(kI * (kTwoPi * idle.energies(k) * t_ns));
    return u;
  }

  // Largest bare population in the top level of any mode.
  double top_weight(const Eigen::VectorXcd& amp_idle) const {
    Eigen::VectorXcd bare = idle.vectors.cast<cplx>() * amp_idle;
    double w = 0;
    for (long b = 0; b < bare.size(); ++b) {
      int qq = static_cast<int>(b / (nl * nr)), cc = static_cast<int>((b / nr) % nl), rr = static_cast<int>(b % nr);
      if (qq == nl - 1 || cc == nl - 1 || rr == nr - 1) w += std::norm(bare(b));
    }
    return w;
  }
};

// Growth of the top-level weight that counts as truncation overflow.
constexpr double kTrioOverflow = 1e-3;

}  // namespace

// ---------------------------------------------------------------- result

long CalibResult::rows() const {
  long n = 1;
  for (const auto& a : axes) n *= static_cast<long>(a.values.size());
  return n;
}

double CalibResult::at(const std::string& key) const {
  auto it = optimum.find(key);
  if (it == optimum.end()) throw ValidationError(experiment + ": no result '" + key + "'");
  return it->second;
}

void write_calib_csv(std::ostream& os, const CalibResult& r) {
  const long n = r.rows();
  if (r.data.rows() != n || r.data.cols() != static_cast<long>(r.columns.size()))
    throw ValidationError(r.experiment + ": data shape does not match axes");
  bool first = true;
  for (const auto& a : r.axes) {
    os << (first ? "" : ",") << a.name;
    first = false;
  }
  for (const auto& c : r.columns) {
    os << (first ? "" : ",") << c;
    first = false;
  }
  os << "\n";
  char buf[64];
  for (long i = 0; i < n; ++i) {
    long rem = i;
    std::vector<double> vals(r.axes.size());
    for (int k = static_cast<int>(r.axes.size()) - 1; k >= 0; --k) {
      long m = static_cast<long>(r.axes[k].values.size());
      vals[k] = r.axes[k].values[rem % m];
      rem /= m;
    }
    first = true;
    auto put = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.12g", v);
      os << (first ? "" : ",") << buf;
      first = false;
    };
    for (double v : vals) put(v);
    for (long c = 0; c < r.data.cols(); ++c) put(r.data(i, c));
    os << "\n";
  }
}

std::string calib_json(const CalibResult& r) {
  nlohmann::ordered_json j;
  j["experiment"] = r.experiment;
  j["axes"] = nlohmann::json::array();
  for (const auto& a : r.axes) {
    double lo = a.values.empty() ? 0 : *std::min_element(a.values.begin(), a.values.end());
    double hi = a.values.empty() ? 0 : *std::max_element(a.values.begin(), a.values.end());
    j["axes"].push_back({{"name", a.name}, {"unit", a.unit}, {"points", a.values.size()}, {"min", lo}, {"max", hi}});
  }
  j["columns"] = r.columns;
  j["optimum"] = r.optimum;
  j["extrapolated"] = r.extrapolated;
  j["diagnostics"] = r.diagnostics;
  j["notes"] = r.notes;
  return j.dump(2);
}

// ---------------------------------------------------------------- chevrons

ChevronGrid default_chevron_grid(const Device& d, const std::string& qubit, GateKind kind, int n_wq, int n_wc,
                                 double span_g, double wc_span) {
  if (n_wq < 1 || n_wc < 1) throw ValidationError("chevron grid needs at least one point per axis");
  const std::string id = device_id(d, qubit);
  ChevronGrid g;
  g.guess = gate_operating_point(d, id, kind);
  const GateDurations& gd = d.duration(id);
  // Half the CZ duration: the swap into |f g 0> is complete at the operating point.
  g.t_ns = kind == GateKind::Move ? gd.move_ns : gd.cz_ns / 2;
  double geff = std::abs(kind == GateKind::Move ? g.guess.eff.g_move : g.guess.eff.g_cz);
  for (int i = 0; i < n_wq; ++i)
    g.wq.push_back(g.guess.omega_q + (n_wq > 1 ? span_g * geff * (2.0 * i / (n_wq - 1) - 1.0) : 0.0));
  for (int i = 0; i < n_wc; ++i)
    g.wc.push_back(g.guess.omega_c + (n_wc > 1 ? wc_span * (2.0 * i / (n_wc - 1) - 1.0) : 0.0));
  return g;
}

CalibResult chevron(GateKind kind, const Device& d, const std::string& qubit, const std::vector<double>& wq,
                    const std::vector<double>& wc, double t_ns) {
  if (wq.empty() || wc.empty()) throw ValidationError("chevron: empty grid");
  if (!(t_ns >= 0)) throw ValidationError("chevron: negative duration");
  const std::string id = device_id(d, qubit);
  const double wr = d.component(d.resonator_id()).frequency_GHz;
  for (double x : wq)
    if (!(x > 0) || std::abs(x - wr) > 2.0) throw ValidationError("chevron: qubit frequency outside tuning range");
  for (double x : wc)
    if (!(x > 0) || x < wr - 0.5) throw ValidationError("chevron: coupler frequency outside tuning range");

  const bool move = kind == GateKind::Move;
  IdleTrio trio(d, id, move ? 3 : 4, 4);
  const long start = move ? trio.find(1, 0, 0) : trio.find(1, 0, 1);
  const double base = trio.top_weight(Eigen::VectorXcd::Unit(trio.idle.vectors.cols(), start));
  const std::size_t n = wq.size() * wc.size();
  struct Point {
    double value, top;
  };
  auto pts = parallel_map<Point>(n, [&](std::size_t k) {
    double x = wq[k / wc.size()], y = wc[k % wc.size()];
    Operator u = trio.pulse(trio_params(d, id, x, y), t_ns, false);
    Eigen::VectorXcd psi = u.col(start);
    double v = 0;
    for (long j = 0; j < psi.size(); ++j) {
      bool hit = move ? trio.q[j] == 1 : trio.r[j] == 0;
      if (hit) v += std::norm(psi(j));
    }
    return Point{v, trio.top_weight(psi) - base};
  });

  CalibResult r;
  r.experiment = move ? "chevron_move" : "chevron_cz";
  r.axes = {{"omega_q", "GHz", wq}, {"omega_c", "GHz", wc}};
  r.columns = {move ? "P_e" : "P_r0"};
  r.data.resize(static_cast<long>(n), 1);
  std::size_t best = 0;
  double top = 0;
  for (std::size_t k = 0; k < n; ++k) {
    r.data(static_cast<long>(k), 0) = pts[k].value;
    top = std::max(top, pts[k].top);
    bool better = move ? pts[k].value < pts[best].value : pts[k].value > pts[best].value;
    if (better) best = k;
  }
  if (top > kTrioOverflow)
    throw NumericalError("chevron: truncation overflow (top-level population " + std::to_string(top) + ")");
  const double bc = wc[best % wc.size()];
  // Along w_q the landscape is symmetric about the resonance even when an
  // over-rotated pulse splits the peak, so the optimum w_q is the weighted
  // centroid of the row through the best grid point.
  double bq = wq[best / wc.size()];
  if (wq.size() > 2) {
    std::vector<double> sig(wq.size());
    for (std::size_t i = 0; i < wq.size(); ++i) {
      double v = pts[i * wc.size() + best % wc.size()].value;
      sig[i] = move ? 1 - v : v;
    }
    double lo = *std::min_element(sig.begin(), sig.end());
    double sw = 0, sx = 0;
    for (std::size_t i = 0; i < wq.size(); ++i) {
      double w = (sig[i] - lo) * (sig[i] - lo);
      sw += w;
      sx += w * wq[i];
    }
    if (sw > 0) bq = sx / sw;
  }
  r.optimum["omega_q"] = bq;
  r.optimum["grid_omega_q"] = wq[best / wc.size()];
  r.optimum["omega_c"] = bc;
  r.optimum[r.columns[0]] = pts[best].value;
  r.extrapolated = on_edge(best / wc.size(), wq.size()) || on_edge(best % wc.size(), wc.size());
  r.diagnostics["t_ns"] = t_ns;
  r.diagnostics["top_level_growth"] = top;
  r.diagnostics["step_omega_q"] = wq.size() > 1 ? std::abs(wq[1] - wq[0]) : 0.0;
  r.diagnostics["step_omega_c"] = wc.size() > 1 ? std::abs(wc[1] - wc[0]) : 0.0;
  try {
    double full = move ? t_ns : 2 * t_ns;
    OperatingPoint g = gate_operating_point(d, id, kind, full > 0 ? std::optional<double>(full) : std::nullopt);
    r.diagnostics["guess_omega_q"] = g.omega_q;
    r.diagnostics["guess_omega_c"] = g.omega_c;
  } catch (const NumericalError&) {
    r.notes.push_back("no closed-form operating point for this duration");
  }
  EffectiveCouplings e = effective_params(trio_params(d, id, bq, bc), d.resonator_n_max);
  // Dressed resonance mismatch at the optimum: w~q - w~r (MOVE), w~q + alpha - w~r (CZ).
  r.diagnostics["resonance_mismatch_GHz"] = move ? e.wq_t - e.wr_t : e.wq_t + e.alpha_q - e.wr_t;
  // Offset from the exact avoided crossing at the optimal coupler frequency.
  try {
    Crossing x = exact_crossing(d, id, bc, kind);
    r.diagnostics["crossing_omega_q"] = x.omega_q;
    r.diagnostics["crossing_offset_GHz"] = bq - x.omega_q;
  } catch (const NumericalError&) {
    r.notes.push_back("exact crossing not found");
  }
  return r;
}

// ---------------------------------------------------------------- MOVE fine

CalibResult move_fine_cal(const Device& d, const std::string& qubit, const MoveFineOptions& opt) {
  if (opt.n_moves < 2 || opt.n_moves % 2) throw ValidationError("move_fine_cal: N must be even and >= 2");
  const std::string id = device_id(d, qubit);
  const double t = opt.t_ns.value_or(d.duration(id).move_ns);
  double wc = 0, center = 0, geff = 0;
  if (opt.wc) {
    wc = *opt.wc;
    auto make = [&](double x) { return trio_params(d, id, x, wc); };
    center = sw_resonance(make, GateKind::Move, d.component(d.resonator_id()).frequency_GHz);
    geff = std::abs(effective_params(make(center)).g_move);
  } else {
    OperatingPoint op = gate_operating_point(d, id, GateKind::Move, t);
    wc = op.omega_c;
    center = op.omega_q;
    geff = std::abs(op.eff.g_move);
  }
  std::vector<double> det = opt.detuning;
  if (det.empty())
    for (int i = 0; i < 41; ++i) det.push_back(geff * (-1.5 + 3.0 * i / 40.0));
  const std::vector<double> phi = phase_grid(opt.phi, 16);

  IdleTrio trio(d, id, 3, 4);
  const long start = trio.find(1, 0, 0);
  auto rows = parallel_map<std::vector<double>>(det.size(), [&](std::size_t i) {
    Operator u = trio.pulse(trio_params(d, id, center + det[i], wc), t, true);
    std::vector<double> out(phi.size());
    for (std::size_t j = 0; j < phi.size(); ++j) {
      Eigen::VectorXcd z(u.rows());
      for (long k = 0; k < z.size(); ++k) z(k) = std::exp(kI * (phi[j] * trio.q[k]));
      Eigen::VectorXcd psi = u.col(start);
      for (int m = 1; m < opt.n_moves; ++m) psi = u * (z.asDiagonal() * psi);
      double pe = 0;
      for (long k = 0; k < psi.size(); ++k)
        if (trio.q[k] == 1) pe += std::norm(psi(k));
      out[j] = pe;
    }
    return out;
  });

  CalibResult r;
  r.experiment = "move_fine";
  r.axes = {{"detuning", "GHz", det}, {"phi", "rad", phi}};
  r.columns = {"P_e", "P_e_mean"};
  r.data.resize(static_cast<long>(det.size() * phi.size()), 2);
  std::vector<double> mean(det.size());
  double fringe = 0;
  for (std::size_t i = 0; i < det.size(); ++i) {
    mean[i] = ordered_sum(rows[i]) / static_cast<double>(phi.size());
    auto [lo, hi] = std::minmax_element(rows[i].begin(), rows[i].end());
    fringe = std::max(fringe, *hi - *lo);
    for (std::size_t j = 0; j < phi.size(); ++j) {
      r.data(static_cast<long>(i * phi.size() + j), 0) = rows[i][j];
      r.data(static_cast<long>(i * phi.size() + j), 1) = mean[i];
    }
  }
  std::size_t best = static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin());
  if (det.size() < 3 || on_edge(best, det.size()))
    throw NumericalError("move_fine_cal: the detuning window misses the peak");
  const int half = std::max(1, opt.fit_points / 2);
  std::size_t lo = best >= static_cast<std::size_t>(half) ? best - half : 0;
  std::size_t hi = std::min(det.size() - 1, best + half);
  Eigen::MatrixXd X(hi - lo + 1, 3);
  Eigen::VectorXd y(hi - lo + 1);
  for (std::size_t i = lo; i <= hi; ++i) {
    X(i - lo, 0) = 1;
    X(i - lo, 1) = det[i];
    X(i - lo, 2) = det[i] * det[i];
    y(i - lo) = mean[i];
  }
  FitResult f = linear_fit(X, y);
  if (!f.converged || !(f.params(2) < 0)) throw NumericalError("move_fine_cal: quadratic fit has no maximum");
  double vertex = -f.params(1) / (2 * f.params(2));
  auto [dmin, dmax] = std::minmax_element(det.begin(), det.end());
  if (vertex < *dmin || vertex > *dmax) throw NumericalError("move_fine_cal: fitted peak outside the window");
  std::size_t nearest = 0;
  for (std::size_t i = 0; i < det.size(); ++i)
    if (std::abs(det[i] - vertex) < std::abs(det[nearest] - vertex)) nearest = i;
  auto [flo, fhi] = std::minmax_element(rows[nearest].begin(), rows[nearest].end());

  r.optimum["detuning"] = vertex;
  r.optimum["omega_q"] = center + vertex;
  r.optimum["P_e_mean"] = f.params(0) + f.params(1) * vertex + f.params(2) * vertex * vertex;
  r.optimum["fringe"] = fringe;
  r.optimum["fringe_at_optimum"] = *fhi - *flo;
  r.diagnostics["center_omega_q"] = center;
  r.diagnostics["omega_c"] = wc;
  r.diagnostics["t_ns"] = t;
  r.diagnostics["n_moves"] = opt.n_moves;
  r.diagnostics["curvature"] = f.params(2);
  r.diagnostics["fit_rss"] = f.rss;
  r.diagnostics["step"] = det.size() > 1 ? std::abs(det[1] - det[0]) : 0.0;
  return r;
}

// ---------------------------------------------------------------- MOVE VZ

CalibResult move_vz_cal(const Device& d, const std::string& qubit, const MoveVzOptions& opt) {
  if (opt.n_list.empty()) throw ValidationError("move_vz_cal: empty N list");
  for (int n : opt.n_list)
    if (n < 2 || n % 2) throw ValidationError("move_vz_cal: every N must be even and >= 2");
  const std::vector<double> phi = phase_grid(opt.phi, 24);
  ExecOptions ex;
  ex.n_max = 2;
  ex.gates.move[qubit] = opt.move;
  ex.gates.frame_tracking = false;

  const std::size_t np = phi.size();
  auto pg = parallel_map<double>(opt.n_list.size() * np, [&](std::size_t k) {
    int n = opt.n_list[k / np];
    Circuit c;
    c.rx(qubit, kPi / 2);
    for (int m = 0; m < n; ++m) c.move(qubit);
    c.vz(qubit, n / 2 * kPi);
    c.vz(qubit, phi[k % np]);
    c.rx(qubit, -kPi / 2);
    c.measure({qubit});
    Simulator sim(d, c, ex);
    return 1.0 - excited(sim);
  });

  CalibResult r;
  r.experiment = "move_vz";
  std::vector<double> nax(opt.n_list.begin(), opt.n_list.end());
  r.axes = {{"N", "", nax}, {"phi", "rad", phi}};
  r.columns = {"P_g"};
  r.data.resize(static_cast<long>(pg.size()), 1);
  for (std::size_t k = 0; k < pg.size(); ++k) r.data(static_cast<long>(k), 0) = pg[k];

  std::vector<std::size_t> order(opt.n_list.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return opt.n_list[a] < opt.n_list[b]; });
  double running = 0;
  std::vector<double> per_pair;
  for (std::size_t i : order) {
    int n = opt.n_list[i];
    std::vector<double> y(pg.begin() + static_cast<long>(i * np), pg.begin() + static_cast<long>((i + 1) * np));
    Eigen::Vector3d p = fit_sinusoid(phi, y);
    double star = std::atan2(p(2), p(1));
    r.optimum["phi_N" + std::to_string(n)] = star;
    const double pairs = n / 2;
    double est = star / pairs;
    if (!per_pair.empty()) {
      // Choose the branch of star + 2 pi k nearest the running estimate.
      double k = std::round((running * pairs - star) / kTwoPi);
      est = (star + kTwoPi * k) / pairs;
    }
    per_pair.push_back(est);
    running = ordered_sum(per_pair) / static_cast<double>(per_pair.size());
  }
  r.optimum["vz_pair"] = running;
  double spread = 0;
  for (double v : per_pair) spread = std::max(spread, std::abs(v - running));
  r.diagnostics["spread"] = spread;
  return r;
}

// ---------------------------------------------------------------- CZ phases

CalibResult cz_phase_cal(const Device& d, const std::string& cz_q, const std::string& move_q,
                         const CzPhaseOptions& opt) {
  if (cz_q == move_q) throw ValidationError("cz_phase_cal: the CZ and MOVE qubits must differ");
  if (!is_qubit_label(cz_q) || !is_qubit_label(move_q)) throw ValidationError("cz_phase_cal: invalid qubit labels");
  if (opt.resonator_repeats < 1) throw ValidationError("cz_phase_cal: need at least one CZ");
  const std::vector<double> phi = phase_grid(opt.phi, 24);
  ExecOptions ex;
  ex.n_max = 2;
  ex.gates.cz[cz_q] = opt.cz;
  ex.gates.guard = Policy::Record;
  ex.qubits = {cz_q, move_q};
  if (qubit_index(ex.qubits[0]) > qubit_index(ex.qubits[1])) std::swap(ex.qubits[0], ex.qubits[1]);
  ex.with_resonator = true;

  auto build = [&](int seq, double ph) {
    Circuit c;
    if (seq == 2) {
      c.rx(move_q, kPi / 2).move(move_q);
      for (int i = 0; i < opt.resonator_repeats; ++i) c.cz(cz_q, kResonatorLabel);
      c.move(move_q).vz(move_q, kPi).vz(move_q, ph).rx(move_q, -kPi / 2).measure({move_q});
      return c;
    }
    if (seq == 1) c.rx(move_q, kPi).move(move_q);
    c.rx(cz_q, kPi / 2).cz(cz_q, kResonatorLabel);
    if (seq == 1) c.move(move_q);
    c.vz(cz_q, ph).rx(cz_q, -kPi / 2).measure({cz_q});
    return c;
  };
  const std::size_t np = phi.size();
  auto pe = parallel_map<double>(3 * np, [&](std::size_t k) {
    Circuit c = build(static_cast<int>(k / np), phi[k % np]);
    Simulator sim(d, c, ex);
    return excited(sim);
  });

  CalibResult r;
  r.experiment = "cz_phase";
  r.axes = {{"sequence", "", {0, 1, 2}}, {"phi", "rad", phi}};
  r.columns = {"P_e"};
  r.data.resize(static_cast<long>(pe.size()), 1);
  for (std::size_t k = 0; k < pe.size(); ++k) r.data(static_cast<long>(k), 0) = pe[k];
  r.notes.push_back("sequence 0: CZ-qubit Ramsey, empty resonator");
  r.notes.push_back("sequence 1: CZ-qubit Ramsey, photon loaded by the MOVE qubit");
  r.notes.push_back("sequence 2: resonator Ramsey through the MOVE qubit");

  auto slice = [&](int s) { return std::vector<double>(pe.begin() + s * np, pe.begin() + (s + 1) * np); };
  double th0 = ramsey_phase(phi, slice(0));
  double th1 = ramsey_phase(phi, slice(1));
  double th2 = ramsey_phase(phi, slice(2));

  Circuit c2 = build(2, 0.0);
  Schedule s = schedule(c2, d);
  double move_in_end = 0, move_out_start = 0;
  bool first = true;
  for (std::size_t i = 0; i < c2.ins.size(); ++i) {
    if (c2.ins[i].op != Op::Move) continue;
    if (first) {
      move_in_end = s.slots[i].end_ns;
      first = false;
    } else {
      move_out_start = s.slots[i].start_ns;
    }
  }
  double gap = move_out_start - move_in_end;
  double frame = move_frame_phase(d, move_q, gap);

  r.optimum["conditional_phase"] = wrap_angle(th1 - th0);
  r.optimum["vz_qubit"] = wrap_angle(th0);
  r.optimum["vz_resonator"] = wrap_angle(th2 + frame) / opt.resonator_repeats;
  r.optimum["frame_phase"] = frame;
  r.diagnostics["gap_ns"] = gap;
  r.diagnostics["theta_empty"] = th0;
  r.diagnostics["theta_loaded"] = th1;
  r.diagnostics["theta_resonator"] = th2;
  return r;
}

// ---------------------------------------------------------------- resonator

namespace {

struct Probe {
  Layout layout;
  std::vector<NoiseChannel> channels;
  double detuning = 0;  // f_CR - f_q, GHz
  Operator move;
};

Probe make_probe(const Device& d, const std::string& probe, const ResonatorOptions& opt) {
  const std::string id = device_id(d, probe);
  const std::string res = d.resonator_id();
  Probe p;
  p.layout = qubits_and_resonator({id}, res, 2);
  p.channels = {{0, component_rates(d.component(id), opt.thermal)}, {1, component_rates(d.component(res), opt.thermal)}};
  p.detuning = opt.detuning_GHz.value_or(d.component(res).frequency_GHz - d.component(id).frequency_GHz);
  p.move = move_gate(2);
  return p;
}

// Ensemble-averaged P_e for `shot(rng)` over trajectories, fixed order.
template <typename F>
double ensemble(int trajectories, std::uint64_t seed, F&& shot) {
  std::vector<double> v(trajectories);
  for (int i = 0; i < trajectories; ++i) {
    Rng rng = task_rng(seed, static_cast<std::uint64_t>(i));
    v[i] = shot(rng);
  }
  return ordered_sum(v) / trajectories;
}

double qubit_excited(const Layout& l, const State& psi) { return 1.0 - populations(l, psi, 0)(0); }

const int kProbeTargets[] = {0, 1};
const int kQubitTarget[] = {0};
const int kResTarget[] = {1};

}  // namespace

CalibResult cr_t1(const Device& d, const std::string& probe, const std::vector<double>& delays_ns,
                  const ResonatorOptions& opt) {
  if (delays_ns.size() < 4) throw ValidationError("cr_t1: need at least 4 delays");
  if (opt.trajectories < 1) throw ValidationError("cr_t1: trajectories must be positive");
  Probe p = make_probe(d, probe, opt);
  auto [dlo, dhi] = std::minmax_element(delays_ns.begin(), delays_ns.end());
  const double T1_cfg = p.channels[1].rates.gamma1 > 0 ? 1.0 / p.channels[1].rates.gamma1 : 0.0;
  if (T1_cfg > 0 && (*dhi - *dlo) * 1e-3 < 2 * T1_cfg)
    throw ValidationError("cr_t1: delays must span at least two decay constants");
  const Operator x = rot(0, kPi);
  auto pe = parallel_map<double>(delays_ns.size(), [&](std::size_t j) {
    return ensemble(opt.trajectories, derive(opt.seed, 1, j), [&](Rng& rng) {
      State psi = State::Zero(p.layout.dim());
      psi(0) = 1;
      apply(p.layout, x, kQubitTarget, psi);
      apply(p.layout, p.move, kProbeTargets, psi);
      trajectory_step(p.layout, psi, p.channels, delays_ns[j], rng);
      apply(p.layout, p.move, kProbeTargets, psi);
      return qubit_excited(p.layout, psi);
    });
  });
  std::vector<double> x_us(delays_ns.size());
  for (std::size_t i = 0; i < x_us.size(); ++i) x_us[i] = delays_ns[i] * 1e-3;
  FitResult f = fit_exp_decay(x_us, pe, std::max(1e-3, (*dhi - *dlo) * 1e-3 / 3));
  if (!f.converged || !(f.params(1) > 0)) throw NumericalError("cr_t1: exponential fit did not converge");

  CalibResult r;
  r.experiment = "cr_t1";
  r.axes = {{"delay", "ns", delays_ns}};
  r.columns = {"P_e"};
  r.data = Eigen::Map<const Eigen::VectorXd>(pe.data(), static_cast<long>(pe.size()));
  r.optimum["T1_us"] = f.params(1);
  r.optimum["A"] = f.params(0);
  r.optimum["B"] = f.params(2);
  r.diagnostics["T1_err_us"] = f.errors()(1);
  r.diagnostics["trajectories"] = opt.trajectories;
  return r;
}

double sawtooth_crossing(const std::vector<double>& dv, const std::vector<double>& f_obs, double fs, double center) {
  if (dv.size() != f_obs.size() || dv.size() < 3) throw ValidationError("sawtooth fit needs at least 3 points");
  if (!(fs > 0)) throw ValidationError("sawtooth fit: sampling rate must be positive");
  auto model = [fs](double x, double delta) {
    double w = std::remainder(x - delta, fs);  // [-fs/2, fs/2]
    return std::abs(w);
  };
  auto cost = [&](double delta) {
    double s = 0;
    // Absolute deviations: a trace with no resolvable oscillation gives an arbitrary peak.
    for (std::size_t i = 0; i < dv.size(); ++i) s += std::abs(model(dv[i], delta) - f_obs[i]);
    return s;
  };
  // Coarse scan over one period, then golden-section refinement.
  const int n = 2000;
  double best = center, bc = cost(center);
  for (int i = 0; i < n; ++i) {
    double x = center - fs / 2 + fs * i / n;
    double c = cost(x);
    if (c < bc) {
      bc = c;
      best = x;
    }
  }
  double a = best - fs / n, b = best + fs / n;
  const double gr = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 100 && b - a > 1e-12; ++it) {
    double c = b - gr * (b - a), e = a + gr * (b - a);
    if (cost(c) < cost(e))
      b = e;
    else
      a = c;
  }
  best = 0.5 * (a + b);
  // The model is periodic in delta with period fs; take the crossing nearest the center.
  return best - fs * std::round((best - center) / fs);
}

CalibResult cr_ramsey(const Device& d, const std::string& probe, const std::vector<double>& delays_ns,
                      const std::vector<double>& virtual_GHz, const ResonatorOptions& opt,
                      std::optional<int> decay_trace) {
  if (delays_ns.size() < 8) throw ValidationError("cr_ramsey: need at least 8 delays");
  if (virtual_GHz.empty()) throw ValidationError("cr_ramsey: no virtual detunings");
  const double dt = delays_ns[1] - delays_ns[0];
  if (!(dt > 0)) throw ValidationError("cr_ramsey: delays must increase");
  for (std::size_t i = 1; i < delays_ns.size(); ++i)
    if (std::abs(delays_ns[i] - delays_ns[i - 1] - dt) > 1e-9 * std::max(1.0, dt))
      throw ValidationError("cr_ramsey: delays must be uniformly spaced");
  if (decay_trace && (*decay_trace < 0 || *decay_trace >= static_cast<int>(virtual_GHz.size())))
    throw ValidationError("cr_ramsey: decay trace index out of range");
  Probe p = make_probe(d, probe, opt);
  const Operator x2 = rot(0, kPi / 2);
  const std::size_t nd = delays_ns.size();
  auto pe = parallel_map<double>(virtual_GHz.size() * nd, [&](std::size_t k) {
    const double dv = virtual_GHz[k / nd], tau = delays_ns[k % nd];
    const Eigen::VectorXcd free = vz_diagonal(3, -kTwoPi * p.detuning * tau);
    const Eigen::VectorXcd vz = vz_diagonal(3, kTwoPi * dv * tau);
    return ensemble(opt.trajectories, derive(opt.seed, 2, k), [&](Rng& rng) {
      State psi = State::Zero(p.layout.dim());
      psi(0) = 1;
      apply(p.layout, x2, kQubitTarget, psi);
      apply(p.layout, p.move, kProbeTargets, psi);
      apply_diagonal(p.layout, free, kResTarget, psi);
      trajectory_step(p.layout, psi, p.channels, tau, rng);
      apply(p.layout, p.move, kProbeTargets, psi);
      apply_diagonal(p.layout, vz, kQubitTarget, psi);
      apply(p.layout, x2, kQubitTarget, psi);
      return qubit_excited(p.layout, psi);
    });
  });

  CalibResult r;
  r.experiment = "cr_ramsey";
  r.axes = {{"virtual_detuning", "GHz", virtual_GHz}, {"delay", "ns", delays_ns}};
  r.columns = {"P_e"};
  r.data = Eigen::Map<const Eigen::VectorXd>(pe.data(), static_cast<long>(pe.size()));

  std::vector<double> fobs(virtual_GHz.size());
  for (std::size_t i = 0; i < virtual_GHz.size(); ++i) {
    std::vector<double> y(pe.begin() + static_cast<long>(i * nd), pe.begin() + static_cast<long>((i + 1) * nd));
    fobs[i] = dominant_frequency(y, dt, 4);
    r.diagnostics["f_osc_" + std::to_string(i)] = fobs[i];
  }
  const double fs = 1.0 / dt;
  const double bin = fs / static_cast<double>(nd);
  auto [vlo, vhi] = std::minmax_element(virtual_GHz.begin(), virtual_GHz.end());
  const double center = 0.5 * (*vlo + *vhi);
  const std::string id = device_id(d, probe);
  if (virtual_GHz.size() >= 3) {
    double delta = sawtooth_crossing(virtual_GHz, fobs, fs, center);
    r.optimum["detuning_GHz"] = delta;
    r.optimum["f_CR_GHz"] = d.component(id).frequency_GHz + delta;
    r.extrapolated = delta < *vlo || delta > *vhi;
  }
  r.optimum["f_osc"] = fobs[decay_trace.value_or(0)];
  r.diagnostics["fft_bin_GHz"] = bin;
  r.diagnostics["sample_rate_GHz"] = fs;
  if (decay_trace) {
    const int k = *decay_trace;
    std::vector<double> x_us(nd), y(pe.begin() + static_cast<long>(k * nd), pe.begin() + static_cast<long>((k + 1) * nd));
    for (std::size_t i = 0; i < nd; ++i) x_us[i] = delays_ns[i] * 1e-3;
    double span = x_us.back() - x_us.front();
    FitResult f = fit_damped_cosine(x_us, y, span / 3, fobs[k] * 1e3, kPi);
    if (!f.converged || !(f.params(1) > 0)) throw NumericalError("cr_ramsey: damped-cosine fit did not converge");
    r.optimum["T2_star_us"] = f.params(1);
    r.optimum["f_fit_MHz"] = std::abs(f.params(2));
    r.diagnostics["T2_star_err_us"] = f.errors()(1);
  }
  return r;
}

// ---------------------------------------------------------------- JC ladder

Eigen::VectorXcd jc_ladder_amplitudes(const JCPhases& phases, int n_steps) {
  if (n_steps < 0) throw ValidationError("jc_ladder_amplitudes: negative step count");
  const int m = n_steps + 1;
  std::vector<cplx> g(m, 0.0), e(m, 0.0);
  g[0] = 1;
  for (int s = 0; s < n_steps; ++s) {
    for (int n = 0; n < m; ++n) {  // X_pi on the qubit
      cplx a = g[n], b = e[n];
      g[n] = -kI * b;
      e[n] = -kI * a;
    }
    for (int n = 1; n < m; ++n) {  // manifold n: |e, n-1>, |g, n>
      JCAmplitudes a = jc_amplitudes(phases, n);
      cplx en = e[n - 1], gn = g[n];
      e[n - 1] = a.c_plus * en - kI * a.s_plus * gn;
      g[n] = -kI * a.s_minus * en + a.c_minus * gn;
    }
    if (std::norm(e[m - 1]) > 0) throw NumericalError("jc_ladder_amplitudes: ladder exceeds its range");
  }
  Eigen::VectorXcd out(2 * m);
  for (int n = 0; n < m; ++n) {
    out(n) = g[n];
    out(m + n) = e[n];
  }
  return out;
}

CalibResult jc_ladder(const Device& d, const std::string& qubit, int n_steps, const LadderOptions& opt) {
  if (n_steps < 1) throw ValidationError("jc_ladder: need at least one step");
  const int n_max = opt.n_max.value_or(d.resonator_n_max);
  if (n_max < 1) throw ValidationError("jc_ladder: n_max must be >= 1");
  if (n_steps > n_max)
    throw NumericalError("jc_ladder: truncation overflow, " + std::to_string(n_steps) + " steps need n_max >= " +
                         std::to_string(n_steps));
  std::string spec = opt.spectator.value_or("");
  if (spec.empty()) {
    const int nq = static_cast<int>(d.qubit_ids().size());
    for (int i = 1; i <= nq && spec.empty(); ++i)
      if (qubit_label(i) != qubit) spec = qubit_label(i);
  }
  if (spec == qubit) throw ValidationError("jc_ladder: spectator must differ from the ladder qubit");

  Circuit c;
  for (int s = 0; s < n_steps; ++s) c.rx(qubit, kPi).move(qubit);
  ExecOptions ex;
  ex.n_max = n_max;
  ex.gates.move[qubit] = opt.move;
  ex.gates.guard = Policy::Record;
  ex.overflow_tolerance = 1e-12;
  ex.qubits = {qubit, spec};
  if (qubit_index(spec) < qubit_index(qubit)) std::swap(ex.qubits[0], ex.qubits[1]);
  Simulator sim(d, c, ex);
  Rng rng(0);
  Trajectory tr = sim.run(rng);
  const Layout& l = sim.layout();
  Eigen::MatrixXd joint = joint_populations(l, tr.psi, sim.subsystem(qubit), sim.subsystem(kResonatorLabel));

  CalibResult r;
  r.experiment = "jc_ladder";
  std::vector<double> lv{0, 1, 2}, nv;
  for (int n = 0; n <= n_max; ++n) nv.push_back(n);
  r.axes = {{"qubit_level", "", lv}, {"photons", "", nv}};
  r.columns = {"P"};
  r.data.resize(3 * (n_max + 1), 1);
  for (int q = 0; q < 3; ++q)
    for (int n = 0; n <= n_max; ++n) r.data(q * (n_max + 1) + n, 0) = joint(q, n);
  r.optimum["P_ee"] = joint(0, n_steps);
  r.optimum["P_eg"] = joint(1, n_steps - 1);
  r.optimum["spectator_e"] = 1.0 - populations(l, tr.psi, sim.subsystem(spec))(0);
  r.diagnostics["guard_violations"] = tr.guard_violations;
  r.diagnostics["overflow"] = tr.overflow;
  r.notes.push_back("spectator " + spec);
  return r;
}

// ---------------------------------------------------------------- populated Ramsey

double populated_ramsey_mixture(const std::vector<double>& photon_populations, double delta_t) {
  auto cs = [](int n) {
    double x = std::sqrt(static_cast<double>(n)) * kPi / 2;
    return std::pair{std::cos(x) * std::cos(x), std::sin(x) * std::sin(x)};
  };
  double out = 0;
  for (std::size_t n = 0; n < photon_populations.size(); ++n) {
    auto [c0, s0] = cs(static_cast<int>(n));
    auto [c1, s1] = cs(static_cast<int>(n) + 1);
    out += photon_populations[n] * 0.5 *
           (1 + c0 * c1 - (c1 * s0 + c0 * s1) * std::cos(delta_t) + s0 * s1 * std::cos(2 * delta_t));
  }
  return out;
}

double populated_ramsey_state(const Eigen::VectorXcd& resonator, double delta_t, const JCPhases& phases, double phi,
                              double phi_prime) {
  if (resonator.size() < 1) throw ValidationError("populated_ramsey_state: empty resonator state");
  const int n_max = static_cast<int>(resonator.size());
  const Layout l = qubits_and_resonator({"probe"}, "CR", n_max);
  State psi = State::Zero(l.dim());
  for (long n = 0; n < resonator.size(); ++n) psi(n) = resonator(n);
  psi.normalize();
  const Operator m = jc_gate(phases, n_max);
  const Operator x2 = rot(0, kPi / 2);
  apply(l, x2, kQubitTarget, psi);
  apply(l, m, kProbeTargets, psi);
  apply_diagonal(l, vz_diagonal(3, phi), kQubitTarget, psi);
  apply_diagonal(l, vz_diagonal(n_max + 1, -delta_t), kResTarget, psi);
  apply(l, m, kProbeTargets, psi);
  apply_diagonal(l, vz_diagonal(3, phi_prime), kQubitTarget, psi);
  apply(l, x2, kQubitTarget, psi);
  return 1.0 - populations(l, psi, 0)(0);
}

CalibResult populated_ramsey(const Device& d, const std::string& load, const std::string& probe,
                             const std::vector<double>& delays_ns, const PopulatedRamseyOptions& opt) {
  if (load == probe) throw ValidationError("populated_ramsey: probe must differ from the load qubit");
  if (delays_ns.size() < 5) throw ValidationError("populated_ramsey: need at least 5 delays");
  const double delta =
      opt.detuning_GHz.value_or(d.component(d.resonator_id()).frequency_GHz - d.component(device_id(d, probe)).frequency_GHz);
  std::vector<double> t = delays_ns;
  std::sort(t.begin(), t.end());
  double dt_max = 0;
  for (std::size_t i = 1; i < t.size(); ++i) dt_max = std::max(dt_max, t[i] - t[i - 1]);
  if (4 * std::abs(delta) * dt_max >= 1)
    throw ValidationError("populated_ramsey: delay spacing does not resolve the 2D component");
  if (std::abs(delta) * (t.back() - t.front()) < 1)
    throw NumericalError("populated_ramsey: delay span shorter than one detuning period");

  ExecOptions ex;
  ex.n_max = 3;
  ex.gates.move[probe] = opt.probe_move;
  ex.gates.frame_tracking = false;
  ex.gates.guard = Policy::Record;
  ex.qubits = {load, probe};
  if (qubit_index(probe) < qubit_index(load)) std::swap(ex.qubits[0], ex.qubits[1]);
  auto pe = parallel_map<double>(delays_ns.size(), [&](std::size_t i) {
    Circuit c;
    c.rx(load, kPi).move(load);
    c.rx(probe, kPi / 2).move(probe).vz(probe, opt.phi);
    c.vz(kResonatorLabel, -kTwoPi * delta * delays_ns[i]);
    c.move(probe).vz(probe, opt.phi_prime).rx(probe, kPi / 2).measure({probe});
    Simulator sim(d, c, ex);
    return excited(sim);
  });

  Eigen::MatrixXd X(delays_ns.size(), 5);
  Eigen::VectorXd y(delays_ns.size());
  for (std::size_t i = 0; i < delays_ns.size(); ++i) {
    double x = kTwoPi * delta * delays_ns[i];
    X.row(i) << 1, std::cos(x), std::sin(x), std::cos(2 * x), std::sin(2 * x);
    y(i) = pe[i];
  }
  FitResult f = linear_fit(X, y);
  if (!f.converged) throw NumericalError("populated_ramsey: fit failed");
  const Eigen::VectorXd& b = f.params;
  if (std::hypot(b(1), b(2)) < 1e-6 || std::hypot(b(3), b(4)) < 1e-6)
    throw NumericalError("populated_ramsey: a frequency component has no contrast");
  const double phi_fit = std::atan2(b(2), -b(1));
  const double phi_prime_fit = std::atan2(-b(4), b(3));
  // With free evolution e^{-i n D t}: phi_fit = 2 g2 + 2 z2 - phi',
  // phi'_fit = 2 g2 - phi' + phi (mod 2 pi).
  auto half = [](double a) { return 0.5 * wrap_angle(a); };  // mod pi
  const double gamma2 = half(phi_prime_fit + opt.phi_prime - opt.phi);
  const double zeta2 = half(phi_fit + opt.phi_prime - 2 * gamma2);

  CalibResult r;
  r.experiment = "populated_ramsey";
  r.axes = {{"delay", "ns", delays_ns}};
  r.columns = {"P_e", "fit"};
  r.data.resize(static_cast<long>(delays_ns.size()), 2);
  Eigen::VectorXd model = X * b;
  for (std::size_t i = 0; i < delays_ns.size(); ++i) {
    r.data(static_cast<long>(i), 0) = pe[i];
    r.data(static_cast<long>(i), 1) = model(static_cast<long>(i));
  }
  r.optimum["phi_fit"] = phi_fit;
  r.optimum["phi_prime_fit"] = phi_prime_fit;
  r.optimum["gamma2"] = gamma2;
  r.optimum["zeta2"] = zeta2;
  r.optimum["phi_corr"] = wrap_angle(2 * zeta2);
  r.optimum["phi_prime_corr"] = wrap_angle(2 * gamma2 + 2 * zeta2);
  r.diagnostics["detuning_GHz"] = delta;
  r.diagnostics["amplitude_1"] = 2 * std::hypot(b(1), b(2));
  r.diagnostics["amplitude_2"] = 2 * std::hypot(b(3), b(4));
  r.diagnostics["offset"] = b(0);
  r.diagnostics["fit_rss"] = f.rss;
  return r;
}

}  // namespace starq
