#include "starq/fit.hpp"

#include <algorithm>
#include <cmath>
#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

namespace starq {

namespace {

struct Functor {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const ResidualFn* f;
  int m, n;
  int inputs() const { return n; }
  int values() const { return m; }
  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    r = (*f)(p);
    for (int i = 0; i < r.size(); ++i)
      if (!std::isfinite(r(i))) r(i) = 1e150;
    return 0;
  }
};

void finish(FitResult& out, const Eigen::MatrixXd& J) {
  out.rss = out.residuals.squaredNorm();
  const int n = static_cast<int>(out.params.size());
  out.dof = std::max(0, static_cast<int>(out.residuals.size()) - n);
  Eigen::MatrixXd JtJ = J.transpose() * J;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(JtJ);
  double s2 = out.dof > 0 ? out.rss / out.dof : 0.0;
  out.covariance = cod.pseudoInverse() * s2;
}

}  // namespace

FitResult least_squares(const ResidualFn& residuals, const Eigen::VectorXd& p0, int n_residuals) {
  const int n = static_cast<int>(p0.size());
  if (n_residuals < n) throw ValidationError("least_squares: fewer residuals than parameters");
  Functor fn{&residuals, n_residuals, n};
  Eigen::NumericalDiff<Functor> nd(fn);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<Functor>> lm(nd);
  lm.parameters.maxfev = 4000 * (n + 1);
  lm.parameters.xtol = 1e-12;
  lm.parameters.ftol = 1e-14;
  Eigen::VectorXd p = p0;
  auto status = lm.minimize(p);

  FitResult out;
  out.params = p;
  out.residuals = residuals(p);
  out.converged = status == Eigen::LevenbergMarquardtSpace::RelativeReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorAndReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::CosinusTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::FtolTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::XtolTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::GtolTooSmall;
  if (!out.params.allFinite() || !out.residuals.allFinite()) out.converged = false;
  out.message = "status " + std::to_string(static_cast<int>(status));
  Eigen::MatrixXd J(n_residuals, n);
  nd.df(p, J);
  finish(out, J);
  return out;
}

FitResult linear_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() < X.cols()) throw ValidationError("linear_fit: underdetermined");
  FitResult out;
  out.params = X.colPivHouseholderQr().solve(y);
  out.residuals = y - X * out.params;
  out.converged = out.params.allFinite();
  finish(out, X);
  return out;
}

FitResult fit_exponential(const std::vector<double>& x, const std::vector<double>& y, double p_guess) {
  const int m = static_cast<int>(x.size());
  double ymax = *std::max_element(y.begin(), y.end()), ymin = *std::min_element(y.begin(), y.end());
  Eigen::Vector3d p0(std::max(ymax - ymin, 0.1), p_guess, ymin);
  return least_squares(
      [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(m);
        for (int i = 0; i < m; ++i) r(i) = p(0) * std::pow(p(1), x[i]) + p(2) - y[i];
        return r;
      },
      p0, m);
}

FitResult fit_exp_decay(const std::vector<double>& x, const std::vector<double>& y, double T_guess) {
  const int m = static_cast<int>(x.size());
  Eigen::Vector3d p0(y.front() - y.back(), T_guess, y.back());
  return least_squares(
      [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(m);
        for (int i = 0; i < m; ++i) r(i) = p(0) * std::exp(-x[i] / p(1)) + p(2) - y[i];
        return r;
      },
      p0, m);
}

FitResult fit_damped_cosine(const std::vector<double>& x, const std::vector<double>& y, double T_guess,
                            double f_guess, double phi_guess) {
  const int m = static_cast<int>(x.size());
  double mean = 0;
  for (double v : y) mean += v / m;
  double amp = 0;
  for (double v : y) amp = std::max(amp, std::abs(v - mean));
  Eigen::VectorXd p0(5);
  p0 << amp, T_guess, f_guess, phi_guess, mean;
  return least_squares(
      [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(m);
        for (int i = 0; i < m; ++i)
          r(i) = p(0) * std::exp(-x[i] / p(1)) * std::cos(kTwoPi * p(2) * x[i] + p(3)) + p(4) - y[i];
        return r;
      },
      p0, m);
}

double dominant_frequency(const std::vector<double>& y, double dx, int pad) {
  const std::size_t n = y.size();
  if (n < 4) throw ValidationError("dominant_frequency: need at least 4 samples");
  double mean = 0;
  for (double v : y) mean += v / static_cast<double>(n);
  std::vector<double> buf(n * pad, 0.0);
  double spread = 0;
  for (std::size_t i = 0; i < n; ++i) {
    buf[i] = y[i] - mean;
    spread = std::max(spread, std::abs(buf[i]));
  }
  // Flat data: the spectrum is rounding noise, report no oscillation.
  if (spread < 1e-9) return 0.0;
  Eigen::FFT<double> fft;
  std::vector<cplx> spec;
  fft.fwd(spec, buf);
  const std::size_t N = buf.size();
  std::size_t best = 1;
  for (std::size_t k = 1; k <= N / 2; ++k)
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  double shift = 0;
  if (best > 0 && best < N / 2) {
    double a = std::abs(spec[best - 1]), b = std::abs(spec[best]), c = std::abs(spec[best + 1]);
    double den = a - 2 * b + c;
    if (den != 0) shift = 0.5 * (a - c) / den;
  }
  return (static_cast<double>(best) + shift) / (static_cast<double>(N) * dx);
}

}  // namespace starq
