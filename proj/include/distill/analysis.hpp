#pragma once

// State and rate metrics: Bell fidelity from correlators, logarithmic
// negativity, ebit rates, the two-photon-coincidence baseline, correlator
// sampling and attempt-binned decay curves.

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "distill/fit.hpp"
#include "distill/protocol.hpp"
#include "distill/qstate.hpp"
#include "distill/rng.hpp"

namespace distill {

enum class BellTarget { psi_plus, psi_minus };

// F = (1 +- xx +- yy - zz) / 4. The raw value is returned; clamp only for display.
inline double bell_fidelity_from_paulis(double xx, double yy, double zz, BellTarget target = BellTarget::psi_plus) {
  for (double v : {xx, yy, zz}) {
    if (!(v >= -1.0 - tol::algebraic && v <= 1.0 + tol::algebraic)) {
      throw std::invalid_argument("Pauli correlator outside [-1, 1]");
    }
  }
  const double s = target == BellTarget::psi_plus ? 1.0 : -1.0;
  return (1.0 + s * xx + s * yy - zz) / 4.0;
}

// Partial transpose over the second qubit of a two-qubit state.
inline Matrix partial_transpose_b(const DensityMatrix& rho) {
  if (rho.n_qubits() != 2) throw std::invalid_argument("partial transpose defined here for two qubits");
  Matrix pt(4, 4);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int a2 = 0; a2 < 2; ++a2)
        for (int b2 = 0; b2 < 2; ++b2) pt(2 * a + b, 2 * a2 + b2) = rho(2 * a + b2, 2 * a2 + b);
  return pt;
}

// log2 || rho^{T_B} ||_1
inline double log_negativity(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(partial_transpose_b(rho), Eigen::EigenvaluesOnly);
  const double norm = solver.eigenvalues().cwiseAbs().sum();
  return std::max(0.0, std::log2(norm));
}

struct Correlators {
  double xx;
  double yy;
  double zz;

  double fidelity(BellTarget t = BellTarget::psi_plus) const { return bell_fidelity_from_paulis(xx, yy, zz, t); }
  bool operator==(const Correlators&) const = default;
};

inline Correlators correlators(const DensityMatrix& rho) {
  return {pauli_expectation(rho, "XX"), pauli_expectation(rho, "YY"), pauli_expectation(rho, "ZZ")};
}

// Mean of the aligned heralded memory states, or nullopt without heralds.
inline std::optional<DensityMatrix> mean_aligned_state(std::span<const TrialRecord> trials) {
  Matrix sum = Matrix::Zero(4, 4);
  std::size_t count = 0;
  for (const auto& t : trials) {
    if (!t.heralded) continue;
    sum += aligned_memory_state(*t.final_memory_state, *t.signatures).matrix();
    ++count;
  }
  if (count == 0) return std::nullopt;
  return DensityMatrix(2, sum / static_cast<double>(count), DensityMatrix::Unchecked{});
}

// ---------------------------------------------------------------------------
// Rates

struct RateEstimate {
  double nu = 0.0;   // successes per second
  double e_n = 0.0;  // logarithmic negativity of the delivered state
  double r = 0.0;    // ebits per second, nu * e_n
  double nu_stderr = 0.0;
  double e_n_stderr = 0.0;
  double r_stderr = 0.0;
};

namespace detail {

inline double sample_sd(double s, double s2, int n) {
  const double m = s / n;
  return std::sqrt(std::max(0.0, (s2 / n - m * m) * n / (n - 1.0)));
}

}  // namespace detail

// nu = heralded / total elapsed time over `trials`; E_N of `mean_state`.
// The error of nu is the delta-method error of the ratio estimator; E_N is
// bootstrapped over the heralded states of `state_trials` (`trials` when
// empty); the error of r is propagated from the two. Returns nullopt when nothing was heralded.
inline std::optional<RateEstimate> ebit_rate(std::span<const TrialRecord> trials, const DensityMatrix& mean_state,
                                             RandomStream& rng, int resamples = 1000,
                                             std::span<const TrialRecord> state_trials = {}) {
  if (trials.empty()) throw std::invalid_argument("ebit rate needs at least one trial");
  double total_time = 0.0;
  std::size_t heralded = 0;
  for (const auto& t : trials) {
    total_time += t.elapsed_time;
    heralded += t.heralded ? 1 : 0;
  }
  if (heralded == 0 || !(total_time > 0)) return std::nullopt;

  RateEstimate est;
  est.nu = static_cast<double>(heralded) / total_time;
  est.e_n = log_negativity(mean_state);
  est.r = est.nu * est.e_n;
  if (resamples <= 1) return est;

  // Delta-method error of the ratio sum(h) / sum(t). It matches a bootstrap
  // over trials for large samples and stays cheap at millions of trials.
  double var = 0;
  for (const auto& t : trials) {
    const double d = (t.heralded ? 1.0 : 0.0) - est.nu * t.elapsed_time;
    var += d * d;
  }
  est.nu_stderr = std::sqrt(var) / total_time;

  double s = 0, s2 = 0;
  if (state_trials.empty()) state_trials = trials;
  std::vector<Matrix> aligned;
  for (const auto& t : state_trials)
    if (t.heralded) aligned.push_back(aligned_memory_state(*t.final_memory_state, *t.signatures).matrix());
  if (!aligned.empty()) {
    for (int k = 0; k < resamples; ++k) {
      Matrix sum = Matrix::Zero(4, 4);
      for (std::size_t i = 0; i < aligned.size(); ++i) sum += aligned[rng.below(aligned.size())];
      const double en = log_negativity(DensityMatrix(2, sum / static_cast<double>(aligned.size()), DensityMatrix::Unchecked{}));
      s += en;
      s2 += en * en;
    }
    est.e_n_stderr = detail::sample_sd(s, s2, resamples);
  }
  est.r_stderr = std::hypot(est.e_n * est.nu_stderr, est.nu * est.e_n_stderr);
  return est;
}

struct BarrettKokEstimate {
  double per_round_success;
  RateEstimate rate;
};

// Two-photon-coincidence baseline: one round is two consecutive excitation
// attempts and succeeds with probability p_det^2 / 2. The delivered state is a
// |Psi> Bell state whose coherence is scaled by `visibility` (1 for the ideal
// variant), so E_N = log2(1 + V).
inline BarrettKokEstimate barrett_kok_rate(double p_det, double visibility, double attempt_duration) {
  if (!(p_det > 0.0 && p_det <= 1.0)) throw std::invalid_argument("p_det must lie in (0, 1]");
  if (!(visibility >= 0.0 && visibility <= 1.0)) throw std::invalid_argument("visibility must lie in [0, 1]");
  if (!(attempt_duration > 0.0)) throw std::invalid_argument("attempt duration must be > 0");
  BarrettKokEstimate out;
  out.per_round_success = p_det * p_det / 2.0;
  out.rate.nu = out.per_round_success / (2.0 * attempt_duration);
  // theta = 0 removes the separable admixture, leaving the bare |Psi> coherence.
  out.rate.e_n = log_negativity(raw_state(0.0, Sign::plus, 0.0, visibility));
  out.rate.r = out.rate.nu * out.rate.e_n;
  return out;
}

// ---------------------------------------------------------------------------
// Correlator sampling

struct CorrelatorEstimate {
  Correlators value;
  Correlators stderr_;
};

inline double correlator_stderr(double e, std::uint64_t shots) {
  return std::sqrt(std::max(0.0, 1.0 - e * e) / static_cast<double>(shots));
}

// Each correlator is a +-1 valued observable sampled `shots` times. With
// `analytic`, returns exact expectations and the stderr those would have.
inline CorrelatorEstimate tomography_sample(const DensityMatrix& rho, std::uint64_t shots, RandomStream& rng,
                                            bool analytic = false) {
  if (shots < 1) throw std::invalid_argument("shots must be >= 1");
  const Correlators exact = correlators(rho);
  auto sample = [&](double e) {
    if (analytic) return e;
    const double p_plus = std::clamp((1.0 + e) / 2.0, 0.0, 1.0);
    const auto k = rng.binomial(shots, p_plus);
    return 2.0 * static_cast<double>(k) / static_cast<double>(shots) - 1.0;
  };
  CorrelatorEstimate out;
  out.value = {sample(exact.xx), sample(exact.yy), sample(exact.zz)};
  out.stderr_ = {correlator_stderr(out.value.xx, shots), correlator_stderr(out.value.yy, shots),
                 correlator_stderr(out.value.zz, shots)};
  return out;
}

// ---------------------------------------------------------------------------
// Attempt binning

struct Bin {
  long long lo = 0;  // inclusive
  long long hi = 0;  // inclusive
  std::size_t count = 0;
  // Absent for empty bins.
  std::optional<Correlators> mean;
  std::optional<Correlators> stderr_;
  std::optional<double> fidelity;
  std::optional<double> fidelity_stderr;

  double center() const { return 0.5 * static_cast<double>(lo + hi); }
};

struct BinnedCurve {
  std::vector<Bin> bins;
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& b : bins) n += b.count;
    return n;
  }
};

// Groups heralded trials by step-3 attempt count into bins of `bin_width`
// starting at attempt 1 and covering up to `max_attempts`.
inline BinnedCurve bin_by_attempts(std::span<const TrialRecord> trials, long long bin_width, long long max_attempts) {
  if (bin_width < 1) throw std::invalid_argument("bin width must be >= 1");
  BinnedCurve curve;
  for (long long lo = 1; lo <= max_attempts; lo += bin_width) {
    Bin b;
    b.lo = lo;
    b.hi = std::min(lo + bin_width - 1, max_attempts);
    curve.bins.push_back(b);
  }
  struct Acc { double x = 0, x2 = 0, y = 0, y2 = 0, z = 0, z2 = 0, f = 0, f2 = 0; };
  std::vector<Acc> acc(curve.bins.size());
  bool any = false;
  for (const auto& t : trials) {
    if (!t.heralded) continue;
    any = true;
    if (t.n2 < 1 || t.n2 > max_attempts) throw std::out_of_range("heralded trial outside the binned attempt range");
    const auto idx = static_cast<std::size_t>((t.n2 - 1) / bin_width);
    const auto c = correlators(aligned_memory_state(*t.final_memory_state, *t.signatures));
    const double f = c.fidelity();
    auto& a = acc[idx];
    a.x += c.xx; a.x2 += c.xx * c.xx;
    a.y += c.yy; a.y2 += c.yy * c.yy;
    a.z += c.zz; a.z2 += c.zz * c.zz;
    a.f += f; a.f2 += f * f;
    ++curve.bins[idx].count;
  }
  if (!any) throw std::invalid_argument("no heralded trials to bin");
  for (std::size_t i = 0; i < curve.bins.size(); ++i) {
    auto& b = curve.bins[i];
    if (b.count == 0) continue;
    const double n = static_cast<double>(b.count);
    const auto& a = acc[i];
    auto se = [n](double s, double s2) {
      if (n < 2) return 0.0;
      const double m = s / n;
      return std::sqrt(std::max(0.0, (s2 / n - m * m) * n / (n - 1)) / n);
    };
    b.mean = Correlators{a.x / n, a.y / n, a.z / n};
    b.stderr_ = Correlators{se(a.x, a.x2), se(a.y, a.y2), se(a.z, a.z2)};
    b.fidelity = a.f / n;
    b.fidelity_stderr = se(a.f, a.f2);
  }
  return curve;
}

// Fits F(n) = 1/2 + A exp(-n / tau) to the occupied bins, weighted by counts.
inline fit::ExponentialDecay fit_fidelity_decay(const BinnedCurve& curve) {
  std::vector<double> xs, ys, ws;
  for (const auto& b : curve.bins) {
    if (!b.fidelity) continue;
    xs.push_back(b.center());
    ys.push_back(*b.fidelity);
    ws.push_back(static_cast<double>(b.count));
  }
  if (xs.size() < 2) throw std::invalid_argument("decay fit needs at least two occupied bins");
  return fit::fit_exponential_decay(xs, ys, ws, 0.5);
}

}  // namespace distill
