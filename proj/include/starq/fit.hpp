#pragma once

#include <functional>
#include <string>
#include <vector>

#include "starq/common.hpp"

namespace starq {

struct FitResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;  // s^2 (J^T J)^-1 with s^2 = rss / dof
  Eigen::VectorXd residuals;
  double rss = 0.0;
  int dof = 0;
  bool converged = false;
  std::string message;

  Eigen::VectorXd errors() const { return covariance.diagonal().cwiseMax(0.0).cwiseSqrt(); }
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Levenberg-Marquardt with forward-difference Jacobian. Never throws on
// non-convergence; check `converged`.
FitResult least_squares(const ResidualFn& residuals, const Eigen::VectorXd& p0, int n_residuals);

// Ordinary linear least squares y ~ X b with covariance.
FitResult linear_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// y = A p^x + B
FitResult fit_exponential(const std::vector<double>& x, const std::vector<double>& y, double p_guess = 0.98);

// y = A exp(-x / T) + B
FitResult fit_exp_decay(const std::vector<double>& x, const std::vector<double>& y, double T_guess);

// y = A exp(-x / T) cos(2 pi f x + phi) + B
FitResult fit_damped_cosine(const std::vector<double>& x, const std::vector<double>& y, double T_guess,
                            double f_guess, double phi_guess = 0.0);

// Dominant frequency of uniformly sampled data (mean removed), using
// zero-padding and parabolic interpolation of the magnitude peak. Returns
// cycles per unit of the sample spacing `dx`.
double dominant_frequency(const std::vector<double>& y, double dx, int pad = 4);

}  // namespace starq
