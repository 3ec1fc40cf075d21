#include "starq/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "starq/clifford.hpp"
#include "starq/parallel.hpp"

namespace starq {

namespace {

std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  return splitmix64(splitmix64(splitmix64(seed ^ 0x5851f42d4c957f2dULL) + a) + b) + c;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

double mean_of(const std::vector<double>& v) { return ordered_sum(v) / static_cast<double>(v.size()); }

double sem_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - m) * (v[i] - m);
  return std::sqrt(ordered_sum(sq) / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

Circuit rb_sequence(const std::vector<std::string>& qubits, int m, const std::optional<Interleave>& il,
                    double depol, Rng& rng) {
  Circuit c;
  if (qubits.size() == 1) {
    const auto& q = qubits[0];
    std::uniform_int_distribution<int> pick(0, 23);
    int total = 0;
    for (int j = 0; j < m; ++j) {
      int e = pick(rng);
      append_clifford_1q(c, e, q);
      total = clifford_1q_then(total, e);
      if (depol > 0) c.depol({q}, depol);
      if (il) {
        c.append(il->gate);
        total = clifford_1q_then(total, il->ideal);
      }
    }
    append_clifford_1q(c, clifford_1q_inverse(total), q);
  } else {
    const auto& G = Clifford2Group::instance();
    std::uniform_int_distribution<int> pick(0, static_cast<int>(G.size()) - 1);
    int total = G.find(Eigen::Matrix4cd::Identity());
    for (int j = 0; j < m; ++j) {
      int e = pick(rng);
      append_clifford_2q(c, e, qubits[0], qubits[1]);
      total = G.then(total, e);
      if (depol > 0) c.depol(qubits, depol);
      if (il) {
        c.append(il->gate);
        total = G.then(total, il->ideal);
      }
    }
    append_clifford_2q(c, G.inverse(total), qubits[0], qubits[1]);
  }
  c.measure(qubits);
  return c;
}

}  // namespace

// ---------------------------------------------------------------- RB

RbData rb_experiment(const Device& d, const std::vector<std::string>& qubits, const RbOptions& opt,
                     const std::optional<Interleave>& interleave, int k) {
  if (qubits.size() != 1 && qubits.size() != 2) throw ValidationError("rb_experiment: 1 or 2 qubits");
  if (opt.m_list.empty()) throw ValidationError("rb_experiment: empty m_list");
  if (opt.n_seq < 1) throw ValidationError("rb_experiment: n_seq must be positive");
  for (int m : opt.m_list)
    if (m < 0) throw ValidationError("rb_experiment: negative sequence length");

  const std::size_t nm = opt.m_list.size(), ns = static_cast<std::size_t>(opt.n_seq);
  ExecOptions exec = opt.exec;
  exec.qubits = qubits;
  LowerOptions lo;
  lo.preferred_holder = qubits[0];
  const std::uint64_t kk = static_cast<std::uint64_t>(static_cast<std::int64_t>(k) + (1LL << 32));

  auto survival = parallel_map<double>(nm * ns, [&](std::size_t t) {
    const std::size_t im = t / ns, is = t % ns;
    const int m = opt.m_list[im];
    Rng rng(derive(opt.seed, kk, static_cast<std::uint64_t>(m), is));
    Circuit logical = rb_sequence(qubits, m, interleave, opt.clifford_depol, rng);
    Circuit native = resolve_phases(lower_cz(logical, lo), d, opt.corrections);
    Simulator sim(d, native, exec);
    auto r = run_ensemble(sim, opt.trajectories, opt.shots, rng());
    if (opt.shots > 0) return static_cast<double>(r.counts[0]) / static_cast<double>(opt.shots);
    Eigen::VectorXd p = exec.noise.readout ? apply_tensor(r.probabilities, sim.assignment()) : r.probabilities;
    return p(0);
  });

  RbData out;
  out.dim = qubits.size() == 1 ? 2 : 4;
  for (std::size_t im = 0; im < nm; ++im) {
    RbPoint p;
    p.k = k;
    p.m = opt.m_list[im];
    p.survival.assign(survival.begin() + static_cast<long>(im * ns), survival.begin() + static_cast<long>((im + 1) * ns));
    p.mean = mean_of(p.survival);
    p.sem = sem_of(p.survival);
    out.points.push_back(std::move(p));
  }
  return out;
}

DecayFit fit_decay(const RbData& data) {
  std::vector<int> ks;
  for (const auto& p : data.points)
    if (std::find(ks.begin(), ks.end(), p.k) == ks.end()) ks.push_back(p.k);
  std::sort(ks.begin(), ks.end());
  if (ks.empty()) throw ValidationError("fit_decay: no data");
  for (int k : ks) {
    std::vector<int> ms;
    for (const auto& p : data.points)
      if (p.k == k && std::find(ms.begin(), ms.end(), p.m) == ms.end()) ms.push_back(p.m);
    if (ms.size() < 3) throw ValidationError("fit_decay: need at least 3 distinct m per curve");
  }
  const int nk = static_cast<int>(ks.size());
  const int npts = static_cast<int>(data.points.size());
  std::vector<int> curve(npts);
  for (int i = 0; i < npts; ++i)
    curve[i] = static_cast<int>(std::find(ks.begin(), ks.end(), data.points[i].k) - ks.begin());

  const double B0 = 1.0 / data.dim, A0 = 1.0 - B0;
  Eigen::VectorXd p0(2 + nk);
  p0(0) = A0;
  p0(1) = B0;
  for (int c = 0; c < nk; ++c) {
    // Initial p from the longest sequence of the curve.
    double guess = 0.99;
    int mmax = 0;
    for (int i = 0; i < npts; ++i)
      if (curve[i] == c && data.points[i].m > mmax) {
        mmax = data.points[i].m;
        double r = (data.points[i].mean - B0) / A0;
        if (r > 1e-3 && r < 1.0 && mmax > 0) guess = std::pow(r, 1.0 / mmax);
        if (r >= 1.0) guess = 1.0;
      }
    p0(2 + c) = std::clamp(guess, 0.5, 1.0);
  }
  auto resid = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd r(npts);
    for (int i = 0; i < npts; ++i) {
      const auto& pt = data.points[i];
      r(i) = q(0) * std::pow(q(2 + curve[i]), pt.m) + q(1) - pt.mean;
    }
    return r;
  };

  DecayFit out;
  out.dim = data.dim;
  out.reference_k = ks.front();
  out.fit = least_squares(resid, p0, npts);
  if (!out.fit.converged || !out.fit.residuals.allFinite())
    throw NumericalError("fit_decay: no convergence (" + out.fit.message + "), rss " + fmt(out.fit.rss));
  const auto& q = out.fit.params;
  Eigen::VectorXd err = out.fit.errors();
  out.A = q(0);
  out.B = q(1);
  out.A_err = err(0);
  out.B_err = err(1);
  for (int c = 0; c < nk; ++c) {
    out.p[ks[c]] = std::clamp(q(2 + c), 0.0, 1.0);
    out.p_err[ks[c]] = err(2 + c);
  }
  const double d = data.dim, f = (d - 1) / d;
  const double pr = q(2);
  for (int c = 1; c < nk; ++c) {
    const double pk = q(2 + c);
    const double ratio = pk / pr;
    out.fidelity[ks[c]] = 1.0 - (1.0 - ratio) * f;
    // Gradient of the ratio with respect to (p_ref, p_k).
    const double gr = -pk / (pr * pr), gk = 1.0 / pr;
    const auto& C = out.fit.covariance;
    double var = gr * gr * C(2, 2) + gk * gk * C(2 + c, 2 + c) + 2 * gr * gk * C(2, 2 + c);
    out.fidelity_err[ks[c]] = f * std::sqrt(std::max(0.0, var));
  }
  return out;
}

double QuadraticFidelityFit::at_err(double k) const {
  Eigen::Vector3d g(-k * k, -k, 1.0);
  return std::sqrt(std::max(0.0, static_cast<double>(g.transpose() * covariance * g)));
}

QuadraticFidelityFit fit_quadratic(const std::vector<double>& k, const std::vector<double>& f,
                                   std::optional<double> gamma_fixed) {
  const int n = static_cast<int>(k.size());
  if (n != static_cast<int>(f.size())) throw ValidationError("fit_quadratic: size mismatch");
  const int np = gamma_fixed ? 2 : 3;
  if (n < np) throw ValidationError("fit_quadratic: not enough k values");
  Eigen::MatrixXd X(n, np);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = -k[i] * k[i];
    X(i, 1) = -k[i];
    if (!gamma_fixed) X(i, 2) = 1.0;
    y(i) = f[i] - gamma_fixed.value_or(0.0);
  }
  FitResult r = linear_fit(X, y);
  QuadraticFidelityFit out;
  out.gamma_fixed = gamma_fixed.has_value();
  out.alpha = r.params(0);
  out.beta = r.params(1);
  out.gamma = gamma_fixed ? *gamma_fixed : r.params(2);
  out.covariance.topLeftCorner(np, np) = r.covariance;
  Eigen::Vector3d e = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  out.alpha_err = e(0);
  out.beta_err = e(1);
  out.gamma_err = e(2);
  return out;
}

IrbResult irb_move(const Device& d, const std::string& qubit, const std::vector<int>& k_list, const RbOptions& opt) {
  if (k_list.size() < 2) throw ValidationError("irb_move: need at least 2 k values");
  for (int k : k_list)
    if (k < 1) throw ValidationError("irb_move: k must be >= 1");
  RbOptions o = opt;
  o.exec.gates.guard = Policy::Record;
  o.exec.gates.overflow = Policy::Record;
  IrbResult out;
  out.data = rb_experiment(d, {qubit}, o, std::nullopt, 0);
  for (int k : k_list) {
    Interleave il;
    // MOVE^2 = Z in this frame; one VZ(k pi) closes the block so coherent
    // exchange-angle errors add up over the 2k MOVEs.
    for (int j = 0; j < 2 * k; ++j) il.gate.move(qubit);
    il.gate.vz(qubit, wrap_angle(k * kPi));
    auto part = rb_experiment(d, {qubit}, o, il, k);
    out.data.points.insert(out.data.points.end(), part.points.begin(), part.points.end());
  }
  out.decay = fit_decay(out.data);
  std::vector<double> ks, fs;
  for (int k : k_list) {
    ks.push_back(k);
    fs.push_back(out.decay.fidelity.at(k));
  }
  out.quadratic = fit_quadratic(ks, fs, 1.0);
  out.F = out.quadratic.at(1.0);
  out.F_err = out.quadratic.at_err(1.0);
  return out;
}

IrbResult irb_move_lcz(const Device& d, const std::string& move_qubit, const std::string& cz_qubit,
                       const std::vector<int>& l_list, const RbOptions& opt) {
  if (l_list.size() < 3) throw ValidationError("irb_move_lcz: need at least 3 l values");
  for (int l : l_list)
    if (l < 0) throw ValidationError("irb_move_lcz: l must be >= 0");
  if (move_qubit == cz_qubit) throw ValidationError("irb_move_lcz: qubits must differ");
  RbOptions o = opt;
  o.exec.gates.guard = Policy::Record;
  o.exec.gates.overflow = Policy::Record;
  const std::vector<std::string> qs{move_qubit, cz_qubit};
  const auto& G = Clifford2Group::instance();
  Eigen::Matrix4cd czm = Eigen::Matrix4cd::Identity();
  czm(3, 3) = -1;
  const int id = G.find(Eigen::Matrix4cd::Identity()), cz = G.find(czm);

  IrbResult out;
  out.data = rb_experiment(d, qs, o, std::nullopt, -1);
  for (int l : l_list) {
    Interleave il;
    il.gate.move(move_qubit);
    for (int j = 0; j < l; ++j) il.gate.cz(cz_qubit, kResonatorLabel);
    il.gate.move(move_qubit).vz(move_qubit, kPi);
    il.ideal = l % 2 ? cz : id;
    auto part = rb_experiment(d, qs, o, il, l);
    out.data.points.insert(out.data.points.end(), part.points.begin(), part.points.end());
  }
  out.decay = fit_decay(out.data);
  std::vector<double> ls, fs;
  for (int l : l_list) {
    ls.push_back(l);
    fs.push_back(out.decay.fidelity.at(l));
  }
  out.quadratic = fit_quadratic(ls, fs, std::nullopt);
  out.gamma_m = out.quadratic.gamma;
  out.gamma_m_err = out.quadratic.gamma_err;
  const double f1 = out.quadratic.at(1.0);
  out.F = f1 / out.gamma_m;
  // Gradient of f(1)/gamma with respect to (alpha, beta, gamma).
  Eigen::Vector3d g(-1.0 / out.gamma_m, -1.0 / out.gamma_m, 1.0 / out.gamma_m - f1 / (out.gamma_m * out.gamma_m));
  out.F_err = std::sqrt(std::max(0.0, static_cast<double>(g.transpose() * out.quadratic.covariance * g)));
  return out;
}

// ---------------------------------------------------------------- readout

Eigen::MatrixXd AssignmentMatrix::full() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Ones(1, 1);
  for (const auto& a : per_qubit) {
    Eigen::MatrixXd k(m.rows() * 2, m.cols() * 2);
    for (long i = 0; i < m.rows(); ++i)
      for (long j = 0; j < m.cols(); ++j) k.block(2 * i, 2 * j, 2, 2) = m(i, j) * a;
    m = k;
  }
  return m;
}

void AssignmentMatrix::check() const {
  for (const auto& a : per_qubit) {
    if ((a.array() < 0).any()) throw ValidationError("assignment matrix: negative entry");
    for (int j = 0; j < 2; ++j)
      if (std::abs(a.col(j).sum() - 1.0) > 1e-9) throw ValidationError("assignment matrix: column not stochastic");
  }
}

Mitigated mitigate_distribution(const Eigen::VectorXd& p, const AssignmentMatrix& a) {
  a.check();
  std::vector<Eigen::Matrix2d> inv;
  for (const auto& m : a.per_qubit) {
    if (std::abs(m.determinant()) < 1e-9) throw NumericalError("mitigation: singular assignment matrix");
    inv.push_back(m.inverse());
  }
  Mitigated out;
  out.quasi = apply_tensor(p, inv);
  out.clipped = out.quasi.cwiseMax(0.0);
  out.negative_mass = out.clipped.sum() - out.quasi.sum();
  double s = out.clipped.sum();
  if (s > 0) out.clipped /= s;
  return out;
}

Mitigated mitigate_counts(const std::vector<long>& counts, const AssignmentMatrix& a) {
  Eigen::VectorXd p(static_cast<long>(counts.size()));
  double total = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    p(static_cast<long>(i)) = static_cast<double>(counts[i]);
    total += static_cast<double>(counts[i]);
  }
  if (!(total > 0)) throw ValidationError("mitigate_counts: no counts");
  return mitigate_distribution(p / total, a);
}

// ---------------------------------------------------------------- MQC

double fourier_amplitude(const std::vector<double>& S, const std::vector<double>& phi, int N) {
  if (S.size() != phi.size() || S.empty()) throw ValidationError("fourier_amplitude: size mismatch");
  cplx acc = 0;
  for (std::size_t j = 0; j < S.size(); ++j) acc += S[j] * std::exp(kI * (N * phi[j]));
  return std::abs(acc) / static_cast<double>(S.size());
}

MqcResult mqc_fidelity(const Device& d, const Circuit& prep, const std::vector<std::string>& qubits,
                       const MqcOptions& opt) {
  const int N = static_cast<int>(qubits.size());
  if (N < 1) throw ValidationError("mqc: no qubits");
  for (const auto& in : prep.ins)
    if (in.op == Op::Measure) throw ValidationError("mqc: preparation must not measure");
  const int M = 2 * N + 2;
  MqcResult out;
  out.N = N;
  for (int j = 0; j < M; ++j) out.phi.push_back(j * kPi / (N + 1));

  ExecOptions exec = opt.exec;
  exec.qubits = qubits;
  Circuit inv = inverse(prep);
  std::vector<Circuit> settings;
  {
    Circuit pop = prep;
    pop.measure(qubits);
    settings.push_back(resolve_phases(pop, d, opt.corrections));
  }
  for (double ph : out.phi) {
    Circuit c = prep;
    for (const auto& q : qubits) c.vz(q, ph);
    c.append(inv);
    c.measure(qubits);
    settings.push_back(resolve_phases(c, d, opt.corrections));
  }
  const int per = std::max(1, opt.trajectories / static_cast<int>(settings.size()));

  AssignmentMatrix am;
  std::vector<Eigen::VectorXd> raw(settings.size()), mit(settings.size());
  for (std::size_t s = 0; s < settings.size(); ++s) {
    Simulator sim(d, settings[s], exec);
    if (am.per_qubit.empty()) {
      am.per_qubit = exec.noise.readout ? sim.assignment()
                                        : std::vector<Eigen::Matrix2d>(N, Eigen::Matrix2d::Identity());
    }
    auto r = run_ensemble(sim, per, opt.shots, derive(opt.seed, 7, s));
    if (opt.shots > 0) {
      Eigen::VectorXd p(static_cast<long>(r.counts.size()));
      for (std::size_t i = 0; i < r.counts.size(); ++i)
        p(static_cast<long>(i)) = static_cast<double>(r.counts[i]) / static_cast<double>(opt.shots);
      raw[s] = p;
    } else {
      raw[s] = apply_tensor(r.probabilities, am.per_qubit);
    }
    mit[s] = mitigate_distribution(raw[s], am).quasi;
  }

  auto terms = [&](const std::vector<Eigen::VectorXd>& ps) {
    MqcTerms t;
    t.P = ps[0](0) + ps[0](ps[0].size() - 1);
    for (std::size_t s = 1; s < ps.size(); ++s) t.S.push_back(ps[s](0));
    t.I_N = fourier_amplitude(t.S, out.phi, N);
    t.C = 2.0 * std::sqrt(t.I_N);
    t.F = 0.5 * (t.P + t.C);
    return t;
  };
  out.raw = terms(raw);
  out.mitigated = terms(mit);
  out.F = opt.mitigate ? out.mitigated.F : out.raw.F;
  return out;
}

MqcResult mqc_ghz_fidelity(const Device& d, int N, const std::string& move_qubit, const MqcOptions& opt) {
  auto qs = ghz_qubits(N, move_qubit);
  std::sort(qs.begin(), qs.end(), [](const std::string& a, const std::string& b) {
    return qubit_index(a) < qubit_index(b);
  });
  return mqc_fidelity(d, ghz_circuit(N, move_qubit), qs, opt);
}

// ---------------------------------------------------------------- Q-score

Graph erdos_renyi(int n, double p, Rng& rng) {
  if (n < 1) throw ValidationError("erdos_renyi: n must be positive");
  Graph g;
  g.n = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (uniform01(rng) < p) g.edges.emplace_back(i, j);
  return g;
}

Eigen::VectorXd cut_values(const Graph& g, bool virtual_node) {
  const int nf = virtual_node ? g.n - 1 : g.n;
  if (nf < 1 || nf > 24) throw ValidationError("cut_values: unsupported size");
  const long dim = 1L << nf;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(dim);
  for (long idx = 0; idx < dim; ++idx) {
    auto bit = [&](int v) { return v < nf ? (idx >> (nf - 1 - v)) & 1 : 0L; };
    int cut = 0;
    for (auto [a, b] : g.edges) cut += bit(a) != bit(b);
    c(idx) = cut;
  }
  return c;
}

int max_cut(const Graph& g) { return static_cast<int>(std::lround(cut_values(g).maxCoeff())); }

double qaoa_p1_expectation(const Eigen::VectorXd& cuts, int n_qubits, double gamma, double beta) {
  const long dim = cuts.size();
  Eigen::VectorXcd psi(dim);
  const double amp = 1.0 / std::sqrt(static_cast<double>(dim));
  for (long i = 0; i < dim; ++i) psi(i) = amp * std::exp(-kI * (gamma * cuts(i)));
  const double c = std::cos(beta), s = std::sin(beta);
  for (int q = 0; q < n_qubits; ++q) {
    const long bit = 1L << (n_qubits - 1 - q);
    for (long i = 0; i < dim; ++i) {
      if (i & bit) continue;
      cplx a = psi(i), b = psi(i | bit);
      psi(i) = c * a - kI * s * b;
      psi(i | bit) = -kI * s * a + c * b;
    }
  }
  return psi.cwiseAbs2().dot(cuts);
}

QaoaAngles qaoa_p1_angles(const Graph& g, int grid, bool virtual_node) {
  if (grid < 3) throw ValidationError("qaoa_p1_angles: grid too small");
  const Eigen::VectorXd cuts = cut_values(g, virtual_node);
  const int nq = virtual_node ? g.n - 1 : g.n;
  QaoaAngles best;
  best.expected = -1;
  const double dg = kTwoPi / grid, db = kPi / grid;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      double v = qaoa_p1_expectation(cuts, nq, i * dg, j * db);
      if (v > best.expected + 1e-12) best = {i * dg, j * db, v};
    }
  const int fine = 21;
  const QaoaAngles coarse = best;
  for (int i = 0; i < fine; ++i)
    for (int j = 0; j < fine; ++j) {
      double ga = coarse.gamma + dg * (2.0 * i / (fine - 1) - 1.0);
      double be = coarse.beta + db * (2.0 * j / (fine - 1) - 1.0);
      double v = qaoa_p1_expectation(cuts, nq, ga, be);
      if (v > best.expected + 1e-12) best = {ga, be, v};
    }
  return best;
}

Circuit qaoa_p1_circuit(const Graph& g, double gamma, double beta, bool virtual_node) {
  const int nq = virtual_node ? g.n - 1 : g.n;
  Circuit c;
  std::vector<std::string> qs;
  for (int i = 0; i < nq; ++i) qs.push_back(qubit_label(i + 1));
  for (const auto& q : qs) c.ry(q, kPi / 2);
  for (auto [a, b] : g.edges) {
    if (a < nq && b < nq) {
      append_zz(c, qs[a], qs[b], -gamma);
    } else {
      // The fixed vertex reads 0, so the edge term is (1 - Z) / 2.
      c.vz(qs[a < nq ? a : b], -gamma);
    }
  }
  for (const auto& q : qs) c.rx(q, 2 * beta);
  c.measure(qs);
  return c;
}

QscoreResult qscore(const Device& d, int n, const QscoreOptions& opt) {
  const int nq = opt.virtual_node ? n - 1 : n;
  if (nq < 1 || nq > static_cast<int>(d.qubit_ids().size()))
    throw ValidationError("qscore: problem size exceeds the qubit count");
  if (opt.n_graphs < 1) throw ValidationError("qscore: n_graphs must be positive");
  QscoreResult out;
  out.n = n;
  out.graphs = parallel_map<QscoreGraph>(static_cast<std::size_t>(opt.n_graphs), [&](std::size_t gi) {
    Rng rng = task_rng(derive(opt.seed, 11), gi);
    QscoreGraph rec;
    rec.index = static_cast<int>(gi);
    Graph g;
    for (;;) {
      g = erdos_renyi(n, 0.5, rng);
      rec.c_opt = max_cut(g);
      if (2 * rec.c_opt > static_cast<int>(g.edges.size())) break;
      ++rec.resampled;
    }
    rec.edges = static_cast<int>(g.edges.size());
    auto ang = qaoa_p1_angles(g, opt.grid, opt.virtual_node);
    rec.gamma = ang.gamma;
    rec.beta = ang.beta;
    rec.ideal = ang.expected;
    Circuit native = resolve_phases(lower_cz(qaoa_p1_circuit(g, ang.gamma, ang.beta, opt.virtual_node)), d);
    Simulator sim(d, native, opt.exec);
    auto r = run_ensemble(sim, opt.trajectories, opt.shots, rng());
    Eigen::VectorXd cuts = cut_values(g, opt.virtual_node);
    Eigen::VectorXd p;
    if (opt.shots > 0) {
      p.resize(static_cast<long>(r.counts.size()));
      for (std::size_t i = 0; i < r.counts.size(); ++i)
        p(static_cast<long>(i)) = static_cast<double>(r.counts[i]) / static_cast<double>(opt.shots);
    } else {
      p = opt.exec.noise.readout ? apply_tensor(r.probabilities, sim.assignment()) : r.probabilities;
    }
    rec.measured = p.dot(cuts);
    const double half = 0.5 * rec.edges;
    rec.ratio = (rec.measured - half) / (rec.c_opt - half);
    return rec;
  });
  std::vector<double> ratios;
  for (const auto& g : out.graphs) ratios.push_back(g.ratio);
  out.beta = mean_of(ratios);
  out.sem = sem_of(ratios);
  out.pass = out.beta > 0.2;
  return out;
}

// ---------------------------------------------------------------- TFIM

void append_zz(Circuit& c, const std::string& a, const std::string& b, double theta) {
  c.ry(b, kPi / 2);
  c.cz(a, b);
  c.rx(b, theta);
  c.cz(a, b);
  c.ry(b, -kPi / 2);
}

Eigen::MatrixXd tfim_hamiltonian(int n, double g) {
  if (n < 2 || n > 14) throw ValidationError("tfim: unsupported size");
  const long dim = 1L << n;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
  for (long idx = 0; idx < dim; ++idx) {
    auto z = [&](int q) { return (idx >> (n - 1 - q)) & 1 ? -1.0 : 1.0; };
    for (int q = 0; q < n; ++q) {
      H(idx, idx) -= z(q) * z((q + 1) % n);
      H(idx ^ (1L << (n - 1 - q)), idx) -= g;
    }
  }
  return H;
}

double tfim_ground_energy(int n, double g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tfim_hamiltonian(n, g), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

Eigen::VectorXcd tfim_qaoa_state(const TfimAnsatz& a) {
  const int n = a.n;
  const long dim = 1L << n;
  if (a.gamma.size() != a.beta.size()) throw ValidationError("tfim: angle count mismatch");
  Eigen::VectorXd zz(dim);
  for (long idx = 0; idx < dim; ++idx) {
    double s = 0;
    for (int q = 0; q < n; ++q) {
      int b1 = (idx >> (n - 1 - q)) & 1, b2 = (idx >> (n - 1 - (q + 1) % n)) & 1;
      s += b1 == b2 ? 1.0 : -1.0;
    }
    zz(idx) = s;
  }
  Eigen::VectorXcd psi = Eigen::VectorXcd::Constant(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  for (std::size_t l = 0; l < a.gamma.size(); ++l) {
    // exp(-i gamma H_zz) with H_zz = -sum ZZ
    for (long i = 0; i < dim; ++i) psi(i) *= std::exp(kI * (a.gamma[l] * zz(i)));
    // exp(-i beta H_x) with H_x = -g sum X
    const double c = std::cos(a.beta[l] * a.g), s = std::sin(a.beta[l] * a.g);
    for (int q = 0; q < n; ++q) {
      const long bit = 1L << (n - 1 - q);
      for (long i = 0; i < dim; ++i) {
        if (i & bit) continue;
        cplx x = psi(i), y = psi(i | bit);
        psi(i) = c * x + kI * s * y;
        psi(i | bit) = kI * s * x + c * y;
      }
    }
  }
  return psi;
}

double tfim_state_energy(const Eigen::VectorXcd& psi, int n, double g) {
  return (psi.adjoint() * tfim_hamiltonian(n, g).cast<cplx>() * psi)(0).real();
}

namespace {

// Downhill simplex on a smooth function.
Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                            double step, int max_iter, double tol) {
  const int n = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> x(n + 1, x0);
  std::vector<double> fx(n + 1);
  for (int i = 0; i < n; ++i) x[i + 1](i) += step;
  for (int i = 0; i <= n; ++i) fx[i] = f(x[i]);
  std::vector<int> order(n + 1);
  for (int it = 0; it < max_iter; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fx[a] < fx[b]; });
    const int best = order.front(), worst = order.back(), second = order[n - 1];
    if (std::abs(fx[worst] - fx[best]) < tol) break;
    Eigen::VectorXd cen = Eigen::VectorXd::Zero(n);
    for (int i = 0; i <= n; ++i)
      if (i != worst) cen += x[i] / n;
    Eigen::VectorXd xr = cen + (cen - x[worst]);
    double fr = f(xr);
    if (fr < fx[best]) {
      Eigen::VectorXd xe = cen + 2.0 * (cen - x[worst]);
      double fe = f(xe);
      if (fe < fr) {
        x[worst] = xe;
        fx[worst] = fe;
      } else {
        x[worst] = xr;
        fx[worst] = fr;
      }
    } else if (fr < fx[second]) {
      x[worst] = xr;
      fx[worst] = fr;
    } else {
      Eigen::VectorXd xc = fr < fx[worst] ? Eigen::VectorXd(cen + 0.5 * (xr - cen))
                                          : Eigen::VectorXd(cen + 0.5 * (x[worst] - cen));
      double fc = f(xc);
      if (fc < std::min(fr, fx[worst])) {
        x[worst] = xc;
        fx[worst] = fc;
      } else {
        for (int i = 0; i <= n; ++i) {
          if (i == best) continue;
          x[i] = x[best] + 0.5 * (x[i] - x[best]);
          fx[i] = f(x[i]);
        }
      }
    }
  }
  int b = static_cast<int>(std::min_element(fx.begin(), fx.end()) - fx.begin());
  return x[b];
}

}  // namespace

TfimAnsatz tfim_optimize(int n, double g, int p, std::uint64_t seed, int restarts) {
  if (p < 1) throw ValidationError("tfim_optimize: p must be positive");
  auto unpack = [&](const Eigen::VectorXd& v) {
    TfimAnsatz a;
    a.n = n;
    a.g = g;
    for (int l = 0; l < p; ++l) {
      a.gamma.push_back(v(2 * l));
      a.beta.push_back(v(2 * l + 1));
    }
    return a;
  };
  const Eigen::MatrixXcd H = tfim_hamiltonian(n, g).cast<cplx>();
  auto energy = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXcd psi = tfim_qaoa_state(unpack(v));
    return (psi.adjoint() * H * psi)(0).real();
  };
  auto starts = parallel_map<std::pair<double, Eigen::VectorXd>>(
      static_cast<std::size_t>(std::max(1, restarts)), [&](std::size_t r) {
        Eigen::VectorXd x0(2 * p);
        Rng rng = task_rng(derive(seed, 13), r);
        for (int l = 0; l < p; ++l) {
          // Linear ramp for the first start, random afterwards.
          double s = (l + 1.0) / (p + 1.0);
          x0(2 * l) = r == 0 ? 0.4 * s : 0.8 * uniform01(rng);
          x0(2 * l + 1) = r == 0 ? 0.4 * (1 - s) : 0.8 * uniform01(rng);
        }
        Eigen::VectorXd x = nelder_mead(energy, x0, 0.1, 6000, 1e-13);
        x = nelder_mead(energy, x, 0.02, 6000, 1e-14);
        return std::make_pair(energy(x), x);
      });
  std::size_t best = 0;
  for (std::size_t i = 1; i < starts.size(); ++i)
    if (starts[i].first < starts[best].first) best = i;
  TfimAnsatz a = unpack(starts[best].second);
  a.energy = starts[best].first;
  return a;
}

Circuit tfim_qaoa_circuit(const TfimAnsatz& a) {
  Circuit c;
  std::vector<std::string> qs;
  for (int i = 0; i < a.n; ++i) qs.push_back(qubit_label(i + 1));
  for (const auto& q : qs) c.ry(q, kPi / 2);
  for (std::size_t l = 0; l < a.gamma.size(); ++l) {
    for (int i = 0; i < a.n; ++i) append_zz(c, qs[i], qs[(i + 1) % a.n], -2.0 * a.gamma[l]);
    for (const auto& q : qs) c.rx(q, -2.0 * a.beta[l] * a.g);
  }
  return c;
}

double tfim_energy(const Eigen::VectorXd& pz, const Eigen::VectorXd& px, int n, double g) {
  const long dim = 1L << n;
  if (pz.size() != dim || px.size() != dim) throw ValidationError("tfim_energy: distribution size mismatch");
  double zz = 0, x = 0;
  for (long idx = 0; idx < dim; ++idx) {
    for (int q = 0; q < n; ++q) {
      int b1 = (idx >> (n - 1 - q)) & 1, b2 = (idx >> (n - 1 - (q + 1) % n)) & 1;
      zz += pz(idx) * (b1 == b2 ? 1.0 : -1.0);
      x += px(idx) * (b1 ? -1.0 : 1.0);
    }
  }
  return -g * x - zz;
}

double tfim_energy(const std::vector<long>& counts_z, const std::vector<long>& counts_x, int n, double g) {
  auto norm = [](const std::vector<long>& c) {
    Eigen::VectorXd p(static_cast<long>(c.size()));
    double t = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      p(static_cast<long>(i)) = static_cast<double>(c[i]);
      t += static_cast<double>(c[i]);
    }
    if (!(t > 0)) throw ValidationError("tfim_energy: both measurement bases need counts");
    return Eigen::VectorXd(p / t);
  };
  return tfim_energy(norm(counts_z), norm(counts_x), n, g);
}

ZneResult zne(const std::vector<double>& lambdas, const std::vector<double>& values) {
  const int n = static_cast<int>(lambdas.size());
  if (n != static_cast<int>(values.size()) || n < 2) throw ValidationError("zne: need matching lambda/value lists");
  ZneResult out;
  auto linear = [&](const std::string& why) {
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      X(i, 1) = lambdas[i];
      y(i) = values[i];
    }
    FitResult r = linear_fit(X, y);
    out.fallback = true;
    out.value = r.params(0);
    out.params = {r.params(0), r.params(1)};
    out.message = why;
    return out;
  };
  if (n < 3) return linear("fewer than 3 noise levels");

  // Start from the exact three-point solution on the first three levels when
  // they are equally spaced.
  std::vector<std::size_t> ord(n);
  std::iota(ord.begin(), ord.end(), 0);
  std::sort(ord.begin(), ord.end(), [&](auto a, auto b) { return lambdas[a] < lambdas[b]; });
  const double l1 = lambdas[ord[0]], l2 = lambdas[ord[1]], l3 = lambdas[ord[2]];
  const double v1 = values[ord[0]], v2 = values[ord[1]], v3 = values[ord[2]];
  double b = 0.5;
  if (std::abs((l2 - l1) - (l3 - l2)) < 1e-12 && v1 != v2) {
    double r = (v3 - v2) / (v2 - v1);
    if (r > 0 && r < 1) b = std::pow(r, 1.0 / (l2 - l1));
  }
  double a = (v2 - v1) / (std::pow(b, l2) - std::pow(b, l1));
  double vinf = v1 - a * std::pow(b, l1);
  Eigen::Vector3d p0(vinf, a, b);
  auto res = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) r(i) = p(0) + p(1) * std::pow(p(2), lambdas[i]) - values[i];
    return r;
  };
  FitResult fit = least_squares(res, p0, n);
  if (!fit.params.allFinite()) return linear("exponential fit diverged: " + fit.message);
  if (!(fit.params(2) > 0 && fit.params(2) < 1)) return linear("exponential fit has no decaying solution");
  // b -> 1 with a diverging amplitude is a straight line in disguise.
  if (fit.params(2) > 0.99) return linear("exponential fit degenerates to a line");
  out.value = fit.params(0) + fit.params(1);
  out.params = {fit.params(0), fit.params(1), fit.params(2)};
  out.message = fit.message;
  return out;
}

TfimZneResult tfim_zne(const Device& d, const TfimZneOptions& opt) {
  if (opt.lambdas.empty()) throw ValidationError("tfim_zne: no noise levels");
  TfimZneResult out;
  out.ansatz = tfim_optimize(opt.n, opt.g, opt.p, opt.seed);
  out.exact = tfim_ground_energy(opt.n, opt.g);
  const Circuit U = lower_cz(tfim_qaoa_circuit(out.ansatz));
  std::vector<std::string> qs;
  for (int i = 0; i < opt.n; ++i) qs.push_back(qubit_label(i + 1));
  out.counts = count_gates(resolve_phases(U, d));

  struct Pair {
    Circuit z, x;
  };
  auto circuits = [&](double lambda) {
    Circuit f = fold(U, lambda, &d);
    Pair p{f, f};
    p.z.measure(qs);
    for (const auto& q : qs) p.x.ry(q, -kPi / 2);
    p.x.measure(qs);
    return p;
  };
  auto energy = [&](const Pair& pc, double s, int T, std::uint64_t seed) {
    ExecOptions exec;
    exec.noise.depol_2q = s;
    exec.noise.depol_1q = s * opt.depol_ratio;
    // Pauli errors on the resonator break the MOVE precondition by design.
    exec.gates.guard = Policy::Record;
    exec.gates.overflow = Policy::Record;
    Simulator sz(d, pc.z, exec), sx(d, pc.x, exec);
    const int runs = sz.stochastic() ? T : 1;
    auto e = parallel_map<double>(static_cast<std::size_t>(runs), [&](std::size_t i) {
      Rng rz = task_rng(seed, 2 * i), rx = task_rng(seed, 2 * i + 1);
      return tfim_energy(sz.outcome_probabilities(sz.run(rz).psi), sx.outcome_probabilities(sx.run(rx).psi), opt.n,
                         opt.g);
    });
    return std::make_pair(mean_of(e), sem_of(e));
  };

  const Pair base = circuits(1.0);
  const double ideal = out.ansatz.energy;
  if (opt.depol_2q) {
    out.depol_2q = *opt.depol_2q;
  } else {
    // Bisection on the two-qubit depolarizing probability with common random
    // numbers, so the shortfall is monotone in the scan.
    const int T = std::clamp(opt.trajectories / 2, 50, 400);
    const std::uint64_t ts = derive(opt.seed, 17);
    auto shortfall = [&](double s) { return 1.0 - energy(base, s, T, ts).first / ideal; };
    double lo = 0, hi = 0.02;
    while (shortfall(hi) < opt.target_shortfall && hi < 0.5) hi *= 2;
    for (int it = 0; it < 14; ++it) {
      double mid = 0.5 * (lo + hi);
      (shortfall(mid) < opt.target_shortfall ? lo : hi) = mid;
    }
    out.depol_2q = 0.5 * (lo + hi);
  }
  out.depol_1q = out.depol_2q * opt.depol_ratio;
  // Common random numbers across noise levels: folded circuits share the
  // leading U, so the energy differences that drive the fit are correlated.
  for (std::size_t i = 0; i < opt.lambdas.size(); ++i) {
    double lam = opt.lambdas[i];
    auto [e, s] = energy(lam == 1.0 ? base : circuits(lam), out.depol_2q, opt.trajectories, derive(opt.seed, 19));
    out.lambdas.push_back(lam);
    out.energy.push_back(e);
    out.sem.push_back(s);
  }
  out.zne = zne(out.lambdas, out.energy);
  return out;
}

// ---------------------------------------------------------------- CSV

void write_rb_csv(std::ostream& os, const RbData& data) {
  os << "m,k,seq_mean,seq_sem\n";
  for (const auto& p : data.points) os << p.m << ',' << p.k << ',' << fmt(p.mean) << ',' << fmt(p.sem) << '\n';
}

void write_qscore_csv(std::ostream& os, const QscoreResult& r) {
  os << "graph,resampled,edges,c_opt,gamma,beta,ideal,measured,ratio\n";
  for (const auto& g : r.graphs)
    os << g.index << ',' << g.resampled << ',' << g.edges << ',' << g.c_opt << ',' << fmt(g.gamma) << ','
       << fmt(g.beta) << ',' << fmt(g.ideal) << ',' << fmt(g.measured) << ',' << fmt(g.ratio) << '\n';
}

void write_zne_csv(std::ostream& os, const TfimZneResult& r) {
  os << "lambda,energy,sem\n";
  for (std::size_t i = 0; i < r.lambdas.size(); ++i)
    os << fmt(r.lambdas[i]) << ',' << fmt(r.energy[i]) << ',' << fmt(r.sem[i]) << '\n';
}

void write_mqc_csv(std::ostream& os, const MqcResult& r) {
  os << "phi,S_raw,S_mitigated\n";
  for (std::size_t j = 0; j < r.phi.size(); ++j)
    os << fmt(r.phi[j]) << ',' << fmt(r.raw.S[j]) << ',' << fmt(r.mitigated.S[j]) << '\n';
}

}  // namespace starq
