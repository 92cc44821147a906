#pragma once

// Small curve fits used by the analysis tables.

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

namespace distill::fit {

using Model = std::function<double(double x, const Eigen::VectorXd& params)>;

namespace detail {

struct Residuals {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  Model model;
  std::span<const double> xs;
  std::span<const double> ys;
  std::vector<double> sqrt_w;
  int n_params;

  int inputs() const { return n_params; }
  int values() const { return static_cast<int>(xs.size()); }
  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    for (std::size_t i = 0; i < xs.size(); ++i) r(static_cast<Eigen::Index>(i)) = sqrt_w[i] * (model(xs[i], p) - ys[i]);
    return 0;
  }
};

}  // namespace detail

// Weighted Levenberg-Marquardt least squares with a numerical Jacobian.
inline Eigen::VectorXd least_squares(const Model& model, std::span<const double> xs, std::span<const double> ys,
                                     std::span<const double> weights, Eigen::VectorXd initial) {
  if (xs.size() != ys.size() || (!weights.empty() && weights.size() != xs.size())) {
    throw std::invalid_argument("fit inputs have mismatched lengths");
  }
  if (xs.size() < static_cast<std::size_t>(initial.size())) throw std::invalid_argument("fewer points than parameters");
  detail::Residuals f{model, xs, ys, {}, static_cast<int>(initial.size())};
  f.sqrt_w.resize(xs.size(), 1.0);
  for (std::size_t i = 0; i < weights.size(); ++i) f.sqrt_w[i] = std::sqrt(weights[i]);
  Eigen::NumericalDiff<detail::Residuals> diff(f);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<detail::Residuals>> lm(diff);
  lm.parameters.maxfev = 4000;
  lm.parameters.xtol = 1e-12;
  lm.parameters.ftol = 1e-12;
  lm.minimize(initial);
  return initial;
}

struct ExponentialDecay {
  double amplitude;
  double tau;
};

// y = offset + amplitude * exp(-x / tau) with `offset` held fixed.
inline ExponentialDecay fit_exponential_decay(std::span<const double> xs, std::span<const double> ys,
                                              std::span<const double> weights, double offset) {
  // Seed from a log-linear fit of the points that sit clearly above the offset.
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = ys[i] - offset;
    if (d <= 0) continue;
    const double l = std::log(d);
    sx += xs[i]; sy += l; sxx += xs[i] * xs[i]; sxy += xs[i] * l; n += 1;
  }
  double slope = -1e-3, icpt = 0.0;
  if (n >= 2 && n * sxx - sx * sx > 0) {
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    icpt = (sy - slope * sx) / n;
  }
  Eigen::VectorXd p0(2);
  p0 << std::exp(icpt), slope < 0 ? -slope : 1e-3;
  // Parameterized by decay rate so that a flat curve (rate 0) is reachable.
  const Model m = [offset](double x, const Eigen::VectorXd& p) { return offset + p(0) * std::exp(-p(1) * x); };
  const auto p = least_squares(m, xs, ys, weights, p0);
  return {p(0), 1.0 / p(1)};
}

struct DampedCosine {
  double amplitude;
  double omega;  // rad per unit x
  double phase;
  double rate;   // exp(-rate x) envelope
};

// y = amplitude * exp(-rate x) * cos(omega x + phase). The frequency is seeded
// from a scan over (0, pi] so aliasing-free data with unit spacing is handled.
inline DampedCosine fit_damped_cosine(std::span<const double> xs, std::span<const double> ys) {
  double best_w = 0.1, best_res = std::numeric_limits<double>::infinity(), best_a = 1, best_b = 0;
  constexpr int kScan = 4000;
  for (int k = 1; k <= kScan; ++k) {
    const double w = std::numbers::pi * k / kScan;
    double cc = 0, ss = 0, cs = 0, yc = 0, ys_ = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double c = std::cos(w * xs[i]), s = std::sin(w * xs[i]);
      cc += c * c; ss += s * s; cs += c * s; yc += ys[i] * c; ys_ += ys[i] * s;
    }
    const double det = cc * ss - cs * cs;
    if (std::abs(det) < 1e-12) continue;
    const double a = (yc * ss - ys_ * cs) / det;
    const double b = (ys_ * cc - yc * cs) / det;
    double res = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double r = ys[i] - a * std::cos(w * xs[i]) - b * std::sin(w * xs[i]);
      res += r * r;
    }
    if (res < best_res) { best_res = res; best_w = w; best_a = a; best_b = b; }
  }
  Eigen::VectorXd p0(4);
  p0 << std::hypot(best_a, best_b), best_w, std::atan2(-best_b, best_a), 0.0;
  const Model m = [](double x, const Eigen::VectorXd& p) { return p(0) * std::exp(-p(3) * x) * std::cos(p(1) * x + p(2)); };
  const auto p = least_squares(m, xs, ys, {}, p0);
  DampedCosine out{p(0), p(1), p(2), p(3)};
  if (out.amplitude < 0) {
    out.amplitude = -out.amplitude;
    out.phase += std::numbers::pi;
  }
  return out;
}

struct Line {
  double slope;
  double intercept;
};

// Ordinary least-squares line through (log10 x, log10 y).
inline Line loglog_fit(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("log-log fit needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0 && ys[i] > 0)) throw std::invalid_argument("log-log fit needs positive data");
    const double lx = std::log10(xs[i]), ly = std::log10(ys[i]);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

}  // namespace distill::fit
