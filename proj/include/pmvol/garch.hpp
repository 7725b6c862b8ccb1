#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "pmvol/error.hpp"
#include "pmvol/stats.hpp"

namespace pmvol {

/// Gaussian quasi-maximum-likelihood GARCH(1,1) estimate.
struct GarchFit {
  double omega = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double mean = 0.0;     // sample mean removed before fitting
  double loglik = 0.0;   // Gaussian log likelihood in the units of the input
  int iterations = 0;
  double gradient_norm = 0.0;

  [[nodiscard]] double persistence() const noexcept { return alpha + beta; }
  [[nodiscard]] double unconditional_variance() const noexcept { return omega / (1.0 - alpha - beta); }
};

struct GarchOptions {
  std::size_t min_observations = 200;
  double relative_tolerance = 1e-8;
  int max_iterations = 500;
};

namespace detail {

/// sigma2[t] = omega + alpha * eps[t-1]^2 + beta * sigma2[t-1], seeded at the
/// mean of eps^2.
inline std::vector<double> garch_recursion(double omega, double alpha, double beta, std::span<const double> eps) {
  std::vector<double> s2(eps.size());
  if (eps.empty()) return s2;
  double seed = 0.0;
  for (double e : eps) seed += e * e;
  seed /= static_cast<double>(eps.size());
  s2[0] = seed;
  for (std::size_t t = 1; t < eps.size(); ++t) s2[t] = omega + alpha * eps[t - 1] * eps[t - 1] + beta * s2[t - 1];
  return s2;
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Params {
  double omega, alpha, beta;
};

// omega = exp(u0); alpha + beta = logistic(u1); alpha share = logistic(u2).
inline Params unpack(const Eigen::Vector3d& u) {
  const double p = logistic(u[1]);
  const double a = logistic(u[2]);
  return {std::exp(u[0]), p * a, p * (1.0 - a)};
}

inline Eigen::Vector3d pack(double omega, double alpha, double beta) {
  const double p = alpha + beta;
  const double a = alpha / p;
  return {std::log(omega), std::log(p / (1.0 - p)), std::log(a / (1.0 - a))};
}

struct MinResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
};

template <class F>
Eigen::VectorXd numeric_gradient(F& f, const Eigen::VectorXd& x) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::fabs(x[i]));
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// BFGS with a finite-difference gradient and Armijo backtracking. Stops when
/// the relative change in the objective falls below `rel_tol`.
template <class F>
MinResult bfgs(F f, Eigen::VectorXd x, double rel_tol, int max_iter) {
  const auto n = x.size();
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  double fx = f(x);
  Eigen::VectorXd g = numeric_gradient(f, x);
  MinResult r;
  for (int it = 1; it <= max_iter; ++it) {
    r.iterations = it;
    Eigen::VectorXd dir = -hinv * g;
    if (g.dot(dir) >= 0.0) {
      hinv.setIdentity();
      dir = -g;
    }
    double step = 1.0, fnew = fx;
    Eigen::VectorXd xnew = x;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      xnew = x + step * dir;
      fnew = f(xnew);
      if (std::isfinite(fnew) && fnew <= fx + 1e-4 * step * g.dot(dir)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      r.converged = g.norm() < 1e-4;
      break;
    }
    const Eigen::VectorXd gnew = numeric_gradient(f, xnew);
    const Eigen::VectorXd s = xnew - x, y = gnew - g;
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd i = Eigen::MatrixXd::Identity(n, n);
      hinv = (i - rho * s * y.transpose()) * hinv * (i - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    const double change = std::fabs(fx - fnew) / std::max(std::fabs(fx), 1e-12);
    x = xnew;
    fx = fnew;
    g = gnew;
    if (change < rel_tol || g.norm() < 1e-9) {
      r.converged = true;
      break;
    }
  }
  r.x = x;
  r.value = fx;
  r.gradient_norm = g.norm();
  return r;
}

}  // namespace detail

/// Gaussian log likelihood of `eps` under the GARCH(1,1) recursion.
[[nodiscard]] inline double garch11_loglik(double omega, double alpha, double beta, std::span<const double> eps) {
  const auto s2 = detail::garch_recursion(omega, alpha, beta, eps);
  double ll = 0.0;
  for (std::size_t t = 0; t < eps.size(); ++t) {
    if (!(s2[t] > 0.0)) return -std::numeric_limits<double>::infinity();
    ll -= 0.5 * (std::log(2.0 * std::numbers::pi) + std::log(s2[t]) + eps[t] * eps[t] / s2[t]);
  }
  return ll;
}

[[nodiscard]] inline std::vector<double> demeaned(std::span<const double> returns, double mean) {
  std::vector<double> eps(returns.begin(), returns.end());
  for (auto& e : eps) e -= mean;
  return eps;
}

[[nodiscard]] inline GarchFit garch11_fit(std::span<const double> returns, const GarchOptions& opt = {}) {
  if (returns.size() < opt.min_observations)
    throw ValidationError("GARCH(1,1) needs at least " + std::to_string(opt.min_observations) + " returns, got " +
                          std::to_string(returns.size()));
  for (double r : returns)
    if (!std::isfinite(r)) throw ValidationError("GARCH(1,1) input contains a missing or non-finite return");

  GarchFit fit;
  fit.mean = stats::mean(returns);
  const auto eps = demeaned(returns, fit.mean);
  double var = 0.0;
  for (double e : eps) var += e * e;
  var /= static_cast<double>(eps.size());
  // a constant series leaves only rounding noise after demeaning
  if (!(var > 1e-20 * (1.0 + fit.mean * fit.mean))) throw ComputationError("GARCH(1,1) input has zero variance");

  // Optimise on unit-variance data; omega rescales by var afterwards.
  std::vector<double> z(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) z[i] = eps[i] / std::sqrt(var);
  const double n = static_cast<double>(z.size());
  auto objective = [&](const Eigen::VectorXd& u) {
    const auto p = detail::unpack(u);
    const double ll = garch11_loglik(p.omega, p.alpha, p.beta, z);
    return std::isfinite(ll) ? -ll / n : std::numeric_limits<double>::infinity();
  };

  constexpr std::array<std::array<double, 2>, 4> starts = {{{0.05, 0.90}, {0.10, 0.80}, {0.03, 0.50}, {0.15, 0.60}}};
  detail::MinResult best;
  bool have = false;
  for (const auto& s : starts) {
    const Eigen::Vector3d u0 = detail::pack(1.0 - s[0] - s[1], s[0], s[1]);
    auto r = detail::bfgs(objective, u0, opt.relative_tolerance, opt.max_iterations);
    if (!have || (r.converged && !best.converged) || (r.converged == best.converged && r.value < best.value)) {
      best = r;
      have = true;
    }
  }
  if (!best.converged)
    throw ComputationError("GARCH(1,1) optimiser did not converge (final gradient norm " +
                           std::to_string(best.gradient_norm) + ")");
  const auto p = detail::unpack(best.x);
  fit.omega = p.omega * var;
  fit.alpha = p.alpha;
  fit.beta = p.beta;
  fit.iterations = best.iterations;
  fit.gradient_norm = best.gradient_norm;
  if (!(fit.omega > 0.0) || fit.alpha < 0.0 || fit.beta < 0.0 || !(fit.alpha + fit.beta < 1.0))
    throw ComputationError("GARCH(1,1) optimum violates omega>0, alpha,beta>=0, alpha+beta<1");
  fit.loglik = garch11_loglik(fit.omega, fit.alpha, fit.beta, eps);
  return fit;
}

/// Conditional variance path for `returns` under `fit`. Element t is the
/// variance of return t given information through t-1; the final extra element
/// is the one-step-ahead forecast beyond the sample.
[[nodiscard]] inline std::vector<double> garch11_variance(const GarchFit& fit, std::span<const double> returns) {
  const auto eps = demeaned(returns, fit.mean);
  auto s2 = detail::garch_recursion(fit.omega, fit.alpha, fit.beta, eps);
  if (!eps.empty()) s2.push_back(fit.omega + fit.alpha * eps.back() * eps.back() + fit.beta * s2.back());
  return s2;
}

}  // namespace pmvol
