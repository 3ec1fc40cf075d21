#include "starq/hamiltonian.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "starq/parallel.hpp"

namespace starq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_den(double x, const char* name) {
  if (std::abs(x) < 1e-12) throw NumericalError(std::string("singular denominator ") + name);
}

template <class F>
double golden_min(F f, double a, double b, double tol) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

double zeta_or_nan(const TrioParams& p) {
  try {
    return zz_coupling(p).zeta_MHz;
  } catch (const NumericalError&) {
    return kNaN;
  }
}

}  // namespace

TrioParams trio_from_betas(double wq, double wc, double wr, double aq, double ac, const CouplingBetas& b) {
  TrioParams p{wq, wc, wr, aq, ac, 0, 0, 0};
  p.gqc = b.qc * std::sqrt(wq * wc);
  p.grc = b.rc * std::sqrt(wr * wc);
  p.gqr = b.qr * std::sqrt(wq * wr);
  return p;
}

TrioParams reference_trio(double wq, double wc) { return trio_from_betas(wq, wc, 4.3, -0.187, -0.11, {}); }

TrioParams trio_params(const Device& d, const std::string& qubit, std::optional<double> wq,
                       std::optional<double> wc) {
  const auto& q = d.component(qubit);
  if (q.kind != Kind::Qubit) throw ValidationError("'" + qubit + "' is not a qubit");
  std::string c = d.coupler_of(qubit), r = d.resonator_id();
  TrioParams p;
  p.wq = wq.value_or(q.frequency_GHz);
  p.wc = wc.value_or(d.component(c).frequency_GHz);
  p.wr = d.component(r).frequency_GHz;
  p.aq = q.anharmonicity_GHz;
  p.ac = d.component(c).anharmonicity_GHz;
  p.gqc = d.coupling(qubit, c, p.wq, p.wc);
  p.grc = d.coupling(c, r, p.wc, p.wr);
  p.gqr = d.coupling(qubit, r, p.wq, p.wr);
  return p;
}

EffectiveCouplings effective_params(const TrioParams& p, int n_max) {
  EffectiveCouplings e;
  e.Dqc = p.wq - p.wc;
  e.Drc = p.wr - p.wc;
  e.Sqc = p.wq + p.wc;
  e.Src = p.wr + p.wc;
  check_den(e.Dqc, "Delta_qc");
  check_den(e.Drc, "Delta_rc");
  check_den(e.Sqc, "Sigma_qc");
  check_den(e.Src, "Sigma_rc");
  check_den(e.Sqc + p.aq, "Sigma_qc + alpha_q");
  check_den(e.Dqc + p.aq, "Delta_qc + alpha_q");
  const double gqc2 = p.gqc * p.gqc, grc2 = p.grc * p.grc;
  e.wq_t = p.wq + gqc2 / e.Dqc - 2.0 * gqc2 / (e.Sqc + p.aq) + gqc2 / e.Sqc;
  e.wr_t = p.wr + grc2 / e.Drc - grc2 / e.Src;
  const double gg = p.gqc * p.grc / 2.0;
  e.g_move = p.gqr + gg * (1.0 / e.Dqc + 1.0 / e.Drc - 1.0 / e.Sqc - 1.0 / e.Src);
  e.g_cz = std::sqrt(2.0) *
           (p.gqr + gg * (1.0 / e.Drc + 1.0 / (e.Dqc + p.aq) - 1.0 / e.Src - 1.0 / (e.Sqc + p.aq)));
  for (int n = 1; n <= n_max; ++n) {
    e.g_ladder.push_back(std::sqrt(static_cast<double>(n)) * e.g_move);
    e.g_cz_ladder.push_back(std::sqrt(static_cast<double>(n)) * e.g_cz);
  }
  e.alpha_q = p.aq;
  e.delta_t = e.wr_t - e.wq_t;
  e.omega_t = std::sqrt((e.delta_t - p.aq) * (e.delta_t - p.aq) + 4.0 * e.g_cz * e.g_cz);
  e.ratio_qc = std::abs(p.gqc / e.Dqc);
  e.ratio_rc = std::abs(p.grc / e.Drc);
  if (e.ratio_qc >= 0.3) e.warnings.push_back("g_qc/|Delta_qc| >= 0.3, outside the dispersive regime");
  if (e.ratio_rc >= 0.3) e.warnings.push_back("g_rc/|Delta_rc| >= 0.3, outside the dispersive regime");
  return e;
}

EffectiveCouplings effective_params(const Device& d, const std::string& qubit, std::optional<double> wq,
                                    std::optional<double> wc) {
  return effective_params(trio_params(d, qubit, wq, wc), d.resonator_n_max);
}

Eigen::MatrixXd trio_hamiltonian(const TrioParams& p, int n_levels, int nr_levels) {
  if (n_levels < 3 || nr_levels < 3) throw ValidationError("trio_hamiltonian: needs >= 3 levels per component");
  const int nq = n_levels, nc = n_levels, nr = nr_levels, dim = nq * nc * nr;
  auto idx = [&](int q, int c, int r) { return (q * nc + c) * nr + r; };
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (int q = 0; q < nq; ++q)
    for (int c = 0; c < nc; ++c)
      for (int r = 0; r < nr; ++r)
        h(idx(q, c, r), idx(q, c, r)) =
            p.wq * q + 0.5 * p.aq * q * (q - 1) + p.wc * c + 0.5 * p.ac * c * (c - 1) + p.wr * r;
  // -g (a^dag - a)(b^dag - b) between modes ia and ib.
  const int dims[3] = {nq, nc, nr};
  auto couple = [&](double g, int ia, int ib) {
    for (int q = 0; q < nq; ++q)
      for (int c = 0; c < nc; ++c)
        for (int r = 0; r < nr; ++r) {
          int occ[3] = {q, c, r};
          for (int sa : {+1, -1})
            for (int sb : {+1, -1}) {
              int na = occ[ia] + sa, nb = occ[ib] + sb;
              if (na < 0 || na >= dims[ia] || nb < 0 || nb >= dims[ib]) continue;
              double amp = std::sqrt(static_cast<double>(sa > 0 ? na : occ[ia])) *
                           std::sqrt(static_cast<double>(sb > 0 ? nb : occ[ib]));
              // (a^dag - a): +1 for raising, -1 for lowering.
              double sign = static_cast<double>(sa * sb);
              int to[3] = {occ[0], occ[1], occ[2]};
              to[ia] = na;
              to[ib] = nb;
              h(idx(to[0], to[1], to[2]), idx(q, c, r)) += -g * sign * amp;
            }
        }
  };
  couple(p.gqc, 0, 1);
  couple(p.grc, 2, 1);
  couple(p.gqr, 0, 2);
  return h;
}

StateLabel TrioSpectrum::label(int q, int c, int r) const {
  int i = basis_index(q, c, r);
  StateLabel l;
  Eigen::Index k;
  l.overlap = vectors.row(i).cwiseAbs2().maxCoeff(&k);
  l.eigen = static_cast<int>(k);
  l.degenerate = l.overlap < 0.5;
  return l;
}

double TrioSpectrum::energy(int q, int c, int r) const {
  StateLabel l = label(q, c, r);
  if (l.degenerate)
    throw NumericalError("ambiguous eigenstate label |" + std::to_string(q) + std::to_string(c) +
                         std::to_string(r) + ">");
  return energies(l.eigen);
}

TrioSpectrum trio_spectrum(const TrioParams& p, int n_levels, int nr_levels) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(trio_hamiltonian(p, n_levels, nr_levels));
  if (es.info() != Eigen::Success) throw NumericalError("trio diagonalization failed");
  TrioSpectrum s;
  s.nq = s.nc = n_levels;
  s.nr = nr_levels;
  s.energies = es.eigenvalues();
  s.vectors = es.eigenvectors();
  for (int k = 0; k < s.vectors.cols(); ++k) {
    Eigen::Index i;
    double ov = s.vectors.col(k).cwiseAbs2().maxCoeff(&i);
    s.eigen_label.push_back(static_cast<int>(i));
    s.eigen_degenerate.push_back(ov < 0.5);
  }
  return s;
}

TrioSpectrum trio_spectrum(const Device& d, const std::string& qubit, std::optional<double> wq,
                           std::optional<double> wc, int n_levels) {
  return trio_spectrum(trio_params(d, qubit, wq, wc), n_levels, std::max(4, n_levels + 1));
}

ZZResult zz_coupling(const TrioParams& p) {
  TrioSpectrum s = trio_spectrum(p);
  ZZResult z;
  z.e_eg1 = s.energy(1, 0, 1);
  z.e_gg0 = s.energy(0, 0, 0);
  z.e_gg1 = s.energy(0, 0, 1);
  z.e_eg0 = s.energy(1, 0, 0);
  z.zeta_MHz = ZZResult::combine(z.e_eg1, z.e_gg0, z.e_gg1, z.e_eg0);
  return z;
}

ZZResult zz_coupling(const Device& d, const std::string& qubit, double wc, double delta) {
  double wr = d.component(d.resonator_id()).frequency_GHz;
  return zz_coupling(trio_params(d, qubit, wr - delta, wc));
}

std::vector<ZZPoint> zz_landscape(const std::function<TrioParams(double, double)>& make, double wr, double wc_lo,
                                  double wc_hi, int n_c, double d_lo, double d_hi, int n_d) {
  if (n_c < 2 || n_d < 2) throw ValidationError("zz_landscape: need at least 2 points per axis");
  std::size_t n = static_cast<std::size_t>(n_c) * n_d;
  return parallel_map<ZZPoint>(n, [&](std::size_t k) {
    int i = static_cast<int>(k / n_d), j = static_cast<int>(k % n_d);
    double wc = wc_lo + (wc_hi - wc_lo) * i / (n_c - 1);
    double dl = d_lo + (d_hi - d_lo) * j / (n_d - 1);
    return ZZPoint{wc, dl, zeta_or_nan(make(wr - dl, wc))};
  });
}

std::string landscape_csv(const std::vector<ZZPoint>& pts) {
  std::string out = "omega_c_GHz,delta_GHz,zeta_MHz\n";
  char buf[96];
  for (const auto& p : pts) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.9g\n", p.omega_c, p.delta, p.zeta_MHz);
    out += buf;
  }
  return out;
}

IdlingPoint idling_point(const std::function<TrioParams(double)>& make_wc, double lo, double hi, int scan) {
  if (!(hi > lo) || scan < 2) throw ValidationError("idling_point: empty coupler range");
  std::vector<double> w(scan + 1), z(scan + 1);
  bool all_zero = true;
  for (int i = 0; i <= scan; ++i) {
    w[i] = lo + (hi - lo) * i / scan;
    z[i] = zeta_or_nan(make_wc(w[i]));
    if (!(std::abs(z[i]) < 1e-9)) all_zero = false;
  }
  if (all_zero) return {lo, z[0], true};
  for (int i = 0; i < scan; ++i) {
    if (std::isnan(z[i]) || std::isnan(z[i + 1])) continue;
    if (z[i] == 0.0) return {w[i], 0.0, false};
    if (z[i] * z[i + 1] < 0) {
      double a = w[i], b = w[i + 1], za = z[i];
      while (b - a > 1e-6) {
        double m = 0.5 * (a + b);
        double zm = zeta_or_nan(make_wc(m));
        if (std::isnan(zm)) throw NumericalError("idling_point: ambiguous labels during bisection");
        if (zm * za <= 0) {
          b = m;
        } else {
          a = m;
          za = zm;
        }
      }
      double root = 0.5 * (a + b);
      return {root, zeta_or_nan(make_wc(root)), false};
    }
  }
  throw NumericalError("no idling point: zeta does not change sign in [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "] GHz");
}

IdlingPoint idling_point(const Device& d, const std::string& qubit, double lo, double hi) {
  return idling_point([&](double wc) { return trio_params(d, qubit, std::nullopt, wc); }, lo, hi);
}

IdlingPoint min_zz_point(const std::function<TrioParams(double)>& make_wc, double lo, double hi, int scan) {
  double best = std::numeric_limits<double>::infinity();
  int kb = -1;
  for (int i = 0; i <= scan; ++i) {
    double z = std::abs(zeta_or_nan(make_wc(lo + (hi - lo) * i / scan)));
    if (z < best) {
      best = z;
      kb = i;
    }
  }
  if (kb < 0) throw NumericalError("min_zz_point: no resolvable point");
  double step = (hi - lo) / scan;
  double a = std::max(lo, lo + (kb - 1) * step), b = std::min(hi, lo + (kb + 1) * step);
  double w = golden_min(
      [&](double x) {
        double z = zeta_or_nan(make_wc(x));
        return std::isnan(z) ? std::numeric_limits<double>::infinity() : std::abs(z);
      },
      a, b, 1e-7);
  return {w, zeta_or_nan(make_wc(w)), false};
}

double sw_resonance(const std::function<TrioParams(double)>& make_wq, GateKind kind, double guess) {
  double wq = guess;
  for (int it = 0; it < 200; ++it) {
    TrioParams p = make_wq(wq);
    EffectiveCouplings e = effective_params(p, 1);
    double f = e.wq_t - e.wr_t + (kind == GateKind::Cz ? p.aq : 0.0);
    if (std::abs(f) < 1e-13) break;
    // d(w~q)/d(wq) is close to 1; a damped fixed-point step is enough.
    double h = 1e-6;
    TrioParams p2 = make_wq(wq + h);
    EffectiveCouplings e2 = effective_params(p2, 1);
    double f2 = e2.wq_t - e2.wr_t + (kind == GateKind::Cz ? p2.aq : 0.0);
    double df = (f2 - f) / h;
    if (!(std::abs(df) > 1e-3)) df = 1.0;
    wq -= f / df;
  }
  return wq;
}

Crossing exact_crossing(const std::function<TrioParams(double)>& make_wq, GateKind kind, double window) {
  TrioParams p0 = make_wq(1.0);
  double guess = p0.wr - (kind == GateKind::Cz ? p0.aq : 0.0);
  double wq0 = sw_resonance(make_wq, kind, guess);
  // MOVE pair {eg0, gg1}, CZ pair {eg1, fg0}. The CZ pair needs the level
  // above |f>, otherwise its coupler-induced shift is lost (~4 MHz here).
  const int nl = kind == GateKind::Cz ? 4 : 3;
  auto gap = [&](double wq) {
    TrioSpectrum s = trio_spectrum(make_wq(wq), nl, nl + 1);
    int i1 = kind == GateKind::Move ? s.basis_index(1, 0, 0) : s.basis_index(1, 0, 1);
    int i2 = kind == GateKind::Move ? s.basis_index(0, 0, 1) : s.basis_index(2, 0, 0);
    Eigen::VectorXd w = s.vectors.row(i1).cwiseAbs2() + s.vectors.row(i2).cwiseAbs2();
    Eigen::Index k1, k2;
    w.maxCoeff(&k1);
    w(k1) = -1.0;
    w.maxCoeff(&k2);
    return std::abs(s.energies(k1) - s.energies(k2));
  };
  Crossing c;
  c.omega_q = golden_min(gap, wq0 - window, wq0 + window, 1e-10);
  c.g_exact = 0.5 * gap(c.omega_q);
  EffectiveCouplings e = effective_params(make_wq(c.omega_q), 1);
  c.g_sw = std::abs(kind == GateKind::Move ? e.g_move : e.g_cz);
  c.rel_error = std::abs(c.g_sw - c.g_exact) / c.g_exact;
  return c;
}

Crossing exact_crossing(const Device& d, const std::string& qubit, double wc, GateKind kind) {
  return exact_crossing([&](double wq) { return trio_params(d, qubit, wq, wc); }, kind);
}

OperatingPoint gate_operating_point(const Device& d, const std::string& qubit, GateKind kind,
                                    std::optional<double> duration_ns) {
  const GateDurations& gd = d.duration(qubit);
  double tau = duration_ns.value_or(kind == GateKind::Move ? gd.move_ns : gd.cz_ns);
  if (!(tau > 0)) throw ValidationError("gate_operating_point: duration must be positive");
  double target = kind == GateKind::Move ? 1.0 / (4.0 * tau) : 1.0 / (2.0 * tau);
  double wr = d.component(d.resonator_id()).frequency_GHz;
  double aq = d.component(qubit).anharmonicity_GHz;
  auto at = [&](double wc, double& wq) {
    auto make = [&](double x) { return trio_params(d, qubit, x, wc); };
    wq = sw_resonance(make, kind, kind == GateKind::Move ? wr : wr - aq);
    EffectiveCouplings e = effective_params(make(wq), d.resonator_n_max);
    return std::abs(kind == GateKind::Move ? e.g_move : e.g_cz) - target;
  };
  double wq = 0;
  double a = wr + 0.45, fa = at(a, wq);
  if (fa < 0) throw NumericalError("gate_operating_point: coupling too weak for the requested duration");
  double b = a;
  double fb = fa;
  while (fb > 0) {
    a = b;
    b += 0.01;
    if (b > 8.0) throw NumericalError("gate_operating_point: no coupler frequency reaches the target coupling");
    fb = at(b, wq);
  }
  while (b - a > 1e-9) {
    double m = 0.5 * (a + b);
    if (at(m, wq) > 0)
      a = m;
    else
      b = m;
  }
  OperatingPoint op;
  op.omega_c = 0.5 * (a + b);
  at(op.omega_c, op.omega_q);
  op.eff = effective_params(trio_params(d, qubit, op.omega_q, op.omega_c), d.resonator_n_max);
  return op;
}

FiveLevelModel five_level_model(const EffectiveCouplings& eff, double t_ns, bool include_move) {
  FiveLevelModel m;
  m.omega_q = eff.wq_t;
  m.omega_r = eff.wr_t;
  m.alpha_q = eff.alpha_q;
  m.g_cz = eff.g_cz;
  m.g_move = eff.g_move;
  m.include_move_coupling = include_move;
  m.t_ns = t_ns;
  return m;
}

double cz_population(double t_ns, const EffectiveCouplings& eff) {
  double W = kTwoPi * eff.omega_t;
  if (W == 0.0) return 1.0;
  double g = kTwoPi * eff.g_cz;
  return 1.0 - (2.0 * g * g / (W * W)) * (1.0 - std::cos(W * t_ns));
}

double cz_conditional_phase(double t_ns, const EffectiveCouplings& eff) {
  double W = kTwoPi * eff.omega_t;
  double D = kTwoPi * eff.delta_t, a = kTwoPi * eff.alpha_q;
  double c = std::cos(W * t_ns / 2.0);
  double sgn = c > 0 ? 1.0 : (c < 0 ? -1.0 : 0.0);
  double geo = 0.5 * ((a - D) * t_ns + kPi * (1.0 - sgn));
  double dyn = W == 0.0 ? 0.0 : std::atan((D - a) / W * std::tan(W * t_ns / 2.0));
  return geo + dyn;
}

namespace {

// Hamiltonian over a subset of device components with an optional cap on the
// total excitation number.
struct SubHamiltonian {
  std::vector<std::vector<int>> basis;
  std::map<std::vector<int>, int> index;
  Eigen::VectorXd energies;
  Eigen::MatrixXd vectors;

  int state(const std::vector<std::pair<int, int>>& exc, int n) const {
    std::vector<int> o(n, 0);
    for (auto [k, v] : exc) o[k] = v;
    return index.at(o);
  }
  // Eigenvector with maximal overlap on basis state i.
  int label(int i, bool& degenerate) const {
    Eigen::Index k;
    double ov = vectors.row(i).cwiseAbs2().maxCoeff(&k);
    degenerate = ov < 0.5;
    return static_cast<int>(k);
  }
};

SubHamiltonian sub_hamiltonian(const Device& d, const std::vector<int>& comps, const std::vector<double>& f,
                               int max_exc, bool rwa, long max_dim) {
  const int nk = static_cast<int>(comps.size());
  std::vector<int> dim(nk);
  std::vector<double> alpha(nk);
  std::map<std::string, int> local;
  for (int k = 0; k < nk; ++k) {
    const auto& c = d.components[comps[k]];
    dim[k] = c.kind == Kind::Resonator ? d.resonator_n_max + 1 : 3;
    alpha[k] = c.anharmonicity_GHz;
    local[c.id] = k;
  }
  SubHamiltonian sh;
  std::vector<int> occ(nk, 0);
  std::function<void(int, int)> build = [&](int k, int left) {
    if (k == nk) {
      sh.index[occ] = static_cast<int>(sh.basis.size());
      sh.basis.push_back(occ);
      return;
    }
    for (int n = 0; n <= std::min(left, dim[k] - 1); ++n) {
      occ[k] = n;
      build(k + 1, left - n);
    }
    occ[k] = 0;
  };
  build(0, max_exc);
  const long n = static_cast<long>(sh.basis.size());
  if (n > max_dim) throw ValidationError("spectator_couplings: basis dimension exceeds the memory bound");

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (long s = 0; s < n; ++s) {
    double e = 0;
    for (int k = 0; k < nk; ++k) {
      int m = sh.basis[s][k];
      e += f[comps[k]] * m + 0.5 * alpha[k] * m * (m - 1);
    }
    h(s, s) = e;
  }
  for (const auto& cp : d.couplings) {
    if (!local.count(cp.a) || !local.count(cp.b)) continue;
    int ia = local.at(cp.a), ib = local.at(cp.b);
    double g = d.coupling(cp.a, cp.b, f[comps[ia]], f[comps[ib]]);
    for (long s = 0; s < n; ++s)
      for (int sa : {+1, -1})
        for (int sb : {+1, -1}) {
          if (rwa && sa == sb) continue;
          std::vector<int> to = sh.basis[s];
          to[ia] += sa;
          to[ib] += sb;
          if (to[ia] < 0 || to[ib] < 0 || to[ia] >= dim[ia] || to[ib] >= dim[ib]) continue;
          auto it = sh.index.find(to);
          if (it == sh.index.end()) continue;
          double amp = std::sqrt(static_cast<double>(sa > 0 ? to[ia] : sh.basis[s][ia])) *
                       std::sqrt(static_cast<double>(sb > 0 ? to[ib] : sh.basis[s][ib]));
          h(it->second, s) += -g * sa * sb * amp;
        }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("spectator diagonalization failed");
  sh.energies = es.eigenvalues();
  sh.vectors = es.eigenvectors();
  return sh;
}

// Effective Hamiltonian on the model states by symmetric orthonormalization
// of their labeled eigenvectors.
Eigen::MatrixXd model_hamiltonian(const SubHamiltonian& sh, const std::vector<int>& model) {
  const int m = static_cast<int>(model.size());
  std::vector<int> eig(m);
  for (int i = 0; i < m; ++i) {
    bool deg;
    eig[i] = sh.label(model[i], deg);
    if (deg) throw NumericalError("spectator_couplings: ambiguous single-excitation label");
    for (int j = 0; j < i; ++j)
      if (eig[j] == eig[i]) throw NumericalError("spectator_couplings: two model states share an eigenstate");
  }
  Eigen::MatrixXd P(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) P(i, j) = sh.vectors(model[i], eig[j]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pp(P.transpose() * P);
  Eigen::MatrixXd X = P * pp.operatorInverseSqrt();
  Eigen::VectorXd Em(m);
  for (int j = 0; j < m; ++j) Em(j) = sh.energies(eig[j]);
  return X * Em.asDiagonal() * X.transpose();
}

// zeta of qubit slot q against resonator slot r, kHz; NaN on ambiguous labels.
double pair_zeta_kHz(const SubHamiltonian& sh, int nk, int q, int r) {
  bool d0, d1, d2, d3;
  double e0 = sh.energies(sh.label(sh.state({}, nk), d0));
  double er = sh.energies(sh.label(sh.state({{r, 1}}, nk), d1));
  double eq = sh.energies(sh.label(sh.state({{q, 1}}, nk), d2));
  double eqr = sh.energies(sh.label(sh.state({{q, 1}, {r, 1}}, nk), d3));
  if (d0 || d1 || d2 || d3) return kNaN;
  return (eqr + e0 - er - eq) * 1e6;
}

}  // namespace

std::vector<SpectatorCoupling> spectator_couplings(const Device& d, const std::string& active_qubit,
                                                   double wc_active, const SpectatorOptions& opt) {
  const int nk = static_cast<int>(d.components.size());
  std::map<std::string, int> pos;
  std::vector<double> f(nk);
  for (int k = 0; k < nk; ++k) {
    pos[d.components[k].id] = k;
    f[k] = d.components[k].frequency_GHz;
  }
  const int qa = pos.at(active_qubit);
  const int ca = pos.at(d.coupler_of(active_qubit));
  const int r = pos.at(d.resonator_id());
  f[ca] = wc_active;
  if (opt.active_wq) {
    f[qa] = *opt.active_wq;
  } else {
    auto make = [&](double x) { return trio_params(d, active_qubit, x, wc_active); };
    f[qa] = sw_resonance(make, GateKind::Cz, f[r] - d.components[qa].anharmonicity_GHz);
  }
  std::vector<std::string> qubits = d.qubit_ids();
  std::vector<SpectatorCoupling> out;

  if (opt.method == SpectatorMethod::ExcitationRestricted) {
    std::vector<int> all(nk);
    for (int k = 0; k < nk; ++k) all[k] = k;
    SubHamiltonian sh = sub_hamiltonian(d, all, f, opt.max_excitations, opt.rotating_wave, opt.max_dim);
    std::vector<int> model;
    for (const auto& q : qubits) model.push_back(sh.state({{pos.at(q), 1}}, nk));
    model.push_back(sh.state({{r, 1}}, nk));
    Eigen::MatrixXd heff = model_hamiltonian(sh, model);
    const int m = static_cast<int>(model.size());
    for (int i = 0; i < static_cast<int>(qubits.size()); ++i) {
      SpectatorCoupling sc;
      sc.qubit = qubits[i];
      sc.active = qubits[i] == active_qubit;
      sc.g_MHz = heff(i, m - 1) * 1e3;
      sc.zeta_kHz = pair_zeta_kHz(sh, nk, pos.at(qubits[i]), r);
      out.push_back(sc);
    }
    return out;
  }

  // Cluster: each spectator trio together with the active trio, untruncated.
  for (const auto& q : qubits) {
    SpectatorCoupling sc;
    sc.qubit = q;
    sc.active = q == active_qubit;
    std::vector<int> comps = {pos.at(q), pos.at(d.coupler_of(q)), r};
    if (!sc.active) {
      comps.push_back(ca);
      comps.push_back(qa);
    }
    const int n = static_cast<int>(comps.size());
    SubHamiltonian sh = sub_hamiltonian(d, comps, f, 1 << 20, opt.rotating_wave, opt.max_dim);
    std::vector<int> model = {sh.state({{0, 1}}, n), sh.state({{2, 1}}, n)};
    if (!sc.active) model.push_back(sh.state({{4, 1}}, n));
    Eigen::MatrixXd heff = model_hamiltonian(sh, model);
    sc.g_MHz = heff(0, 1) * 1e3;
    sc.zeta_kHz = pair_zeta_kHz(sh, n, 0, 2);
    out.push_back(sc);
  }
  return out;
}

}  // namespace starq
