#pragma once

// Noise models for the two network nodes and the photonic link.

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "distill/errors.hpp"
#include "distill/qstate.hpp"
#include "distill/rng.hpp"

namespace distill {

using KrausSet = std::vector<Operator>;

struct NodeNoiseParams {
  double delta_omega = 2 * std::numbers::pi * 22.4e3;  // rad/s
  double phi_per_attempt = 0.3;                          // rad, deterministic memory phase per attempt
  double memory_one_over_e_attempts = 273.0;
  double decay_exponent = 1.0;
  double t2_star = 3.4e-3;  // s
  // Depolarizing probability of the whole local circuit of the node (swap plus
  // distillation gate), i.e. the quantity the local Bell-state benchmark measures.
  double local_gate_error = 4.0 / 75;
  double readout_fid_0 = 1.0;
  double readout_fid_1 = 1.0;

  void validate(const std::string& prefix = "node") const {
    auto unit = [&](double v, const char* name) {
      require(v >= 0.0 && v <= 1.0, "probability_in_unit_interval",
              prefix + "." + name + " must lie in [0, 1]");
    };
    unit(local_gate_error, "local_gate_error");
    unit(readout_fid_0, "readout_fid_0");
    unit(readout_fid_1, "readout_fid_1");
    // +inf switches storage decay off.
    require(memory_one_over_e_attempts > 0.0, "memory_one_over_e_attempts_positive",
            prefix + ".memory_one_over_e_attempts must be > 0");
    require(decay_exponent > 0.0 && decay_exponent <= 4.0, "decay_exponent_in_range",
            prefix + ".decay_exponent must lie in (0, 4]");
    require(t2_star > 0.0, "t2_star_positive", prefix + ".t2_star must be > 0");
    require(std::isfinite(delta_omega) && std::isfinite(phi_per_attempt), "finite_parameters",
            prefix + " phase parameters must be finite");
  }
};

// Node presets from the reported memory characterisation.
inline NodeNoiseParams node_a_defaults() {
  NodeNoiseParams p;
  p.delta_omega = 2 * std::numbers::pi * 22.4e3;
  p.phi_per_attempt = 0.3;  // placeholder: per-attempt phase is calibrated on the device
  p.memory_one_over_e_attempts = 273.0;
  p.t2_star = 3.4e-3;
  p.local_gate_error = 4.0 / 75;  // (1 - 0.96) * 4/3
  return p;
}

inline NodeNoiseParams node_b_defaults() {
  NodeNoiseParams p;
  p.delta_omega = 2 * std::numbers::pi * 26.6e3;
  p.phi_per_attempt = 0.45;  // placeholder
  p.memory_one_over_e_attempts = 272.0;
  p.t2_star = 16.2e-3;
  p.local_gate_error = 2.0 / 75;  // (1 - 0.98) * 4/3
  return p;
}

enum class CoherenceScaling { linear, sqrt };

struct PhotonicNoiseParams {
  double visibility = 0.73;
  double dark_count_fraction = 0.0;
  // rad, per raw state. Fitted so the default calibration distills to about
  // 0.65 at theta = pi/6; not an independently measured quantity.
  double phase_drift_sigma = 0.5;
  CoherenceScaling coherence_scaling = CoherenceScaling::linear;

  void validate() const {
    require(visibility >= 0.0 && visibility <= 1.0, "visibility_in_unit_interval",
            "photonics.visibility must lie in [0, 1]");
    require(dark_count_fraction >= 0.0 && dark_count_fraction < 1.0, "dark_count_fraction_below_one",
            "photonics.dark_count_fraction must lie in [0, 1)");
    require(phase_drift_sigma >= 0.0 && std::isfinite(phase_drift_sigma), "phase_drift_sigma_nonnegative",
            "photonics.phase_drift_sigma must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Kraus sets

// Off-diagonals scaled by (1 - lambda).
inline KrausSet dephasing_channel(double lambda) {
  require(lambda >= 0.0 && lambda <= 1.0, "dephasing_strength_in_unit_interval", "dephasing strength must lie in [0, 1]");
  return {Operator(1, std::sqrt(1.0 - lambda / 2) * gates::identity().matrix()),
          Operator(1, std::sqrt(lambda / 2) * gates::z().matrix())};
}

// rho -> (1 - p) rho + p I / 2^n, written as a Pauli-twirl Kraus set.
inline KrausSet depolarizing_channel(double p, int n_qubits) {
  require(p >= 0.0 && p <= 1.0, "depolarizing_probability_in_unit_interval", "depolarizing probability must lie in [0, 1]");
  if (n_qubits != 1 && n_qubits != 2) throw std::invalid_argument("depolarizing channel defined for 1 or 2 qubits");
  const std::array<GateMatrix, 4> paulis{gates::identity(), gates::x(), gates::y(), gates::z()};
  const double d2 = n_qubits == 1 ? 4.0 : 16.0;
  KrausSet ks;
  if (n_qubits == 1) {
    for (std::size_t a = 0; a < 4; ++a) {
      const double w = a == 0 ? 1.0 - p + p / d2 : p / d2;
      ks.emplace_back(1, std::sqrt(w) * paulis[a].matrix());
    }
  } else {
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) {
        const double w = (a == 0 && b == 0) ? 1.0 - p + p / d2 : p / d2;
        ks.emplace_back(2, std::sqrt(w) * gates::kron(paulis[a], paulis[b]).matrix());
      }
  }
  return ks;
}

// ---------------------------------------------------------------------------
// Direct appliers, equivalent to apply_kraus with the sets above.

inline DensityMatrix dephase(const DensityMatrix& rho, double lambda, int qubit) {
  require(lambda >= 0.0 && lambda <= 1.0, "dephasing_strength_in_unit_interval", "dephasing strength must lie in [0, 1]");
  if (qubit < 0 || qubit >= rho.n_qubits()) throw std::out_of_range("dephased qubit outside register");
  const std::size_t bit = std::size_t{1} << detail::bit_position(rho.n_qubits(), qubit);
  Matrix m = rho.matrix();
  for (std::size_t i = 0; i < rho.dim(); ++i)
    for (std::size_t j = 0; j < rho.dim(); ++j)
      if ((i & bit) != (j & bit)) m(i, j) *= (1.0 - lambda);
  return DensityMatrix(rho.n_qubits(), std::move(m), DensityMatrix::Unchecked{});
}

inline DensityMatrix depolarize(const DensityMatrix& rho, double p, std::span<const int> targets) {
  require(p >= 0.0 && p <= 1.0, "depolarizing_probability_in_unit_interval", "depolarizing probability must lie in [0, 1]");
  detail::check_targets(rho.n_qubits(), targets);
  if (p == 0.0) return rho;
  const int n = rho.n_qubits();
  std::size_t mask = 0;
  for (int t : targets) mask |= std::size_t{1} << detail::bit_position(n, t);
  const auto sub = detail::embed(n, targets).offsets;
  const double inv_d = 1.0 / static_cast<double>(sub.size());
  Matrix m = (1.0 - p) * rho.matrix();
  for (std::size_t i = 0; i < rho.dim(); ++i) {
    if (i & mask) continue;
    for (std::size_t j = 0; j < rho.dim(); ++j) {
      if (j & mask) continue;
      Complex reduced = 0;
      for (std::size_t s : sub) reduced += rho(i + s, j + s);
      for (std::size_t s : sub) m(i + s, j + s) += p * inv_d * reduced;
    }
  }
  return DensityMatrix(n, std::move(m), DensityMatrix::Unchecked{});
}

inline DensityMatrix depolarize(const DensityMatrix& rho, double p, std::initializer_list<int> targets) {
  return depolarize(rho, p, std::span<const int>(targets.begin(), targets.size()));
}

// ---------------------------------------------------------------------------
// Memory storage

// Dephasing strength after `n_attempts` entangling attempts:
// lambda(n) = 1 - exp(-(n / N0)^beta).
inline double memory_storage_decay(long long n_attempts, const NodeNoiseParams& p) {
  if (n_attempts < 0) throw std::invalid_argument("attempt count must be >= 0");
  if (n_attempts == 0) return 0.0;
  const double x = static_cast<double>(n_attempts) / p.memory_one_over_e_attempts;
  return -std::expm1(-std::pow(x, p.decay_exponent));
}

// Gaussian free-induction decay over wall time `seconds`.
inline double wall_time_dephasing(double seconds, const NodeNoiseParams& p) {
  if (seconds <= 0.0) return 0.0;
  const double x = seconds / p.t2_star;
  return -std::expm1(-x * x);
}

// ---------------------------------------------------------------------------
// Readout and photonics

inline int readout_error(int outcome, const NodeNoiseParams& p, RandomStream& rng) {
  if (outcome != 0 && outcome != 1) throw std::invalid_argument("outcome must be 0 or 1");
  const double fid = outcome == 0 ? p.readout_fid_0 : p.readout_fid_1;
  const bool flip = rng.uniform() >= fid;
  return flip ? 1 - outcome : outcome;
}

struct CoherenceFactor {
  double magnitude;
  double phase_jitter;
};

// Multiplier for the single-excitation coherence of one raw state.
inline CoherenceFactor raw_state_coherence_factor(const PhotonicNoiseParams& p, RandomStream& rng) {
  const double magnitude = p.coherence_scaling == CoherenceScaling::linear ? p.visibility : std::sqrt(p.visibility);
  // Always consume one normal draw so stream positions do not depend on sigma.
  const double jitter = p.phase_drift_sigma * rng.normal();
  return {magnitude, jitter};
}

}  // namespace distill
