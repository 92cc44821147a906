#pragma once

// Two-node distillation protocol on a four-qubit register laid out as
// (comm A, mem A, comm B, mem B):
//   1. herald a raw entangled state on the communication qubits,
//   2. swap it onto the memories (two conditional gates per node),
//   3. herald a second raw state while the memories are stored with phase feedback,
//   4. apply one conditional gate per node, read out both communication qubits.
// Readout (0, 0) heralds success.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>

#include "distill/channels.hpp"
#include "distill/errors.hpp"
#include "distill/qstate.hpp"
#include "distill/rng.hpp"

namespace distill {

namespace reg {
inline constexpr int comm_a = 0;
inline constexpr int mem_a = 1;
inline constexpr int comm_b = 2;
inline constexpr int mem_b = 3;
}  // namespace reg

enum class Node { A, B };

struct NodeQubits {
  int comm;
  int mem;
};

inline constexpr NodeQubits qubits_of(Node n) {
  return n == Node::A ? NodeQubits{reg::comm_a, reg::mem_a} : NodeQubits{reg::comm_b, reg::mem_b};
}

enum class Sign : int { plus = 1, minus = -1 };
enum class PairSign { same_detector, different_detector };
enum class SignaturePolicy { plus, minus, both };

inline char sign_char(Sign s) { return s == Sign::plus ? '+' : '-'; }

struct HeraldSignature {
  Sign first;
  Sign second;

  PairSign pair_sign() const { return first == second ? PairSign::same_detector : PairSign::different_detector; }
  // +1 for a |Psi+> output, -1 for |Psi->.
  int target_sign() const { return static_cast<int>(first) * static_cast<int>(second); }
};

// Number of conditional two-qubit gates each node executes per run: two for
// the swap, one for distillation. The node's local_gate_error is spread evenly
// over them.
inline constexpr int kConditionalGatesPerNode = 3;

inline double per_gate_error(double local_gate_error) {
  return -std::expm1(std::log1p(-local_gate_error) / kConditionalGatesPerNode);
}

struct ProtocolConfig {
  double theta = std::numbers::pi / 6;
  double p_det = 1e-3;
  long long n1_max = 1000;
  long long n2_max = 50;
  SignaturePolicy signature_policy = SignaturePolicy::both;
  NodeNoiseParams node_a = node_a_defaults();
  NodeNoiseParams node_b = node_b_defaults();
  PhotonicNoiseParams photonics{};
  double attempt_duration = 6e-6;      // s, placeholder
  double local_ops_duration = 500e-6;  // s, placeholder
  bool feedback = true;
  bool wall_time_dephasing = false;  // add T2* decay over n2 * attempt_duration

  double success_probability() const {
    const double s = std::sin(theta);
    return p_det * s * s;
  }

  const NodeNoiseParams& node(Node n) const { return n == Node::A ? node_a : node_b; }

  void validate() const {
    require(theta > 0.0 && theta <= std::numbers::pi / 2, "theta_in_range", "protocol.theta must lie in (0, pi/2]");
    require(p_det > 0.0 && p_det <= 1.0, "p_det_in_range", "protocol.p_det must lie in (0, 1]");
    require(n1_max >= 1, "n1_max_positive", "protocol.n1_max must be >= 1");
    require(n2_max >= 1, "n2_max_positive", "protocol.n2_max must be >= 1");
    require(attempt_duration > 0.0, "attempt_duration_positive", "protocol.attempt_duration must be > 0");
    require(local_ops_duration >= 0.0, "local_ops_duration_nonnegative", "protocol.local_ops_duration must be >= 0");
    node_a.validate("node_a");
    node_b.validate("node_b");
    photonics.validate();
  }

  // Every error source switched off.
  static ProtocolConfig ideal(double theta) {
    ProtocolConfig c;
    c.theta = theta;
    c.p_det = 1.0;
    for (NodeNoiseParams* n : {&c.node_a, &c.node_b}) {
      n->memory_one_over_e_attempts = std::numeric_limits<double>::infinity();
      n->local_gate_error = 0.0;
      n->readout_fid_0 = n->readout_fid_1 = 1.0;
    }
    c.photonics = PhotonicNoiseParams{1.0, 0.0, 0.0, CoherenceScaling::linear};
    return c;
  }
};

// Optical path phase of one protocol run, wrapped to [0, 2 pi).
struct PhaseEnvironment {
  double phi = 0.0;

  static PhaseEnvironment at(double phi) {
    double w = std::fmod(phi, 2 * std::numbers::pi);
    if (w < 0) w += 2 * std::numbers::pi;
    return {w};
  }
  static PhaseEnvironment sample(RandomStream& rng) { return at(2 * std::numbers::pi * rng.uniform()); }
};

enum class TrialStage { step1_exhausted, step3_exhausted, completed };

struct TrialRecord {
  std::uint64_t trial_id = 0;
  TrialStage stage = TrialStage::step1_exhausted;
  long long n1 = 0;  // attempts spent in step 1
  long long n2 = 0;  // attempts spent in step 3; the feedback count
  std::optional<HeraldSignature> signatures;
  std::optional<int> readout_a;
  std::optional<int> readout_b;
  bool heralded = false;
  std::optional<DensityMatrix> final_memory_state;  // (mem A, mem B), memory frame
  double elapsed_time = 0.0;
  double branch_probability = 0.0;  // Born probability of the true readout branch

  bool both_generated() const { return stage == TrialStage::completed; }
};

// ---------------------------------------------------------------------------
// Raw-state generation

// sin(theta)|0> - i cos(theta)|1>
inline PureState prepare_theta(double theta) {
  require(theta > 0.0 && theta <= std::numbers::pi / 2, "theta_in_range", "theta must lie in (0, pi/2]");
  return PureState::normalized(1, Vector{{Complex(std::sin(theta)), Complex(0, -std::cos(theta))}});
}

// cos^2(theta) |Psi_phase><Psi_phase| + sin^2(theta) |00><00|, with the
// single-excitation coherence scaled by `coherence`, then a `dark_fraction`
// admixture of the unheralded product-state populations.
inline DensityMatrix raw_state(double theta, Sign sign, double phase, double coherence = 1.0,
                               double dark_fraction = 0.0) {
  const double s2 = std::sin(theta) * std::sin(theta);
  const double c2 = std::cos(theta) * std::cos(theta);
  Matrix m = Matrix::Zero(4, 4);
  m(0, 0) = s2;
  m(1, 1) = c2 / 2;
  m(2, 2) = c2 / 2;
  m(1, 2) = c2 / 2 * static_cast<double>(sign) * coherence * std::polar(1.0, -phase);
  m(2, 1) = std::conj(m(1, 2));
  if (dark_fraction > 0.0) {
    Matrix dark = Matrix::Zero(4, 4);
    dark(0, 0) = s2 * s2;
    dark(1, 1) = s2 * c2;
    dark(2, 2) = c2 * s2;
    dark(3, 3) = c2 * c2;
    m = (1.0 - dark_fraction) * m + dark_fraction * dark;
  }
  return DensityMatrix(2, std::move(m), DensityMatrix::Unchecked{});
}

inline DensityMatrix generate_raw_state(const ProtocolConfig& cfg, const PhaseEnvironment& env, Sign sign,
                                        RandomStream& rng) {
  const auto factor = raw_state_coherence_factor(cfg.photonics, rng);
  return raw_state(cfg.theta, sign, env.phi + factor.phase_jitter, factor.magnitude,
                   cfg.photonics.dark_count_fraction);
}

// Attempt index (1-based) of the first success, or nullopt when `cap`
// attempts all fail.
inline std::optional<long long> sample_success(double p, long long cap, RandomStream& rng) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("success probability must lie in (0, 1]");
  if (cap < 1) throw std::invalid_argument("attempt cap must be >= 1");
  const double u = rng.uniform();
  if (p >= 1.0) return 1;
  const double n = std::ceil(std::log1p(-u) / std::log1p(-p));
  if (!(n <= static_cast<double>(cap))) return std::nullopt;
  return std::max(1LL, static_cast<long long>(n));
}

inline Sign draw_sign(SignaturePolicy policy, RandomStream& rng) {
  const double u = rng.uniform();
  switch (policy) {
    case SignaturePolicy::plus: return Sign::plus;
    case SignaturePolicy::minus: return Sign::minus;
    default: return u < 0.5 ? Sign::plus : Sign::minus;
  }
}

// ---------------------------------------------------------------------------
// Local gates

namespace local_gates {

// Swap gate 1: rotate the memory by +-pi/2 about Y depending on the
// communication qubit, taking |c>|0> to |c>H|c>.
inline GateMatrix swap_entangle() {
  return gates::controlled_pair(gates::ry(std::numbers::pi / 2), gates::ry(-std::numbers::pi / 2));
}

// |+><+| on the memory leaves the communication qubit alone, |-><-| flips it.
// Ordering (comm, mem).
inline GateMatrix memory_x_basis_controlled(bool flip_on_plus) {
  const Matrix plus = states::plus_x().amplitudes() * states::plus_x().amplitudes().adjoint();
  const Matrix minus = states::minus_x().amplitudes() * states::minus_x().amplitudes().adjoint();
  const Matrix& flip_proj = flip_on_plus ? plus : minus;
  const Matrix& keep_proj = flip_on_plus ? minus : plus;
  Matrix m = Matrix::Zero(4, 4);
  const Matrix x = gates::x().matrix();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      m.block(2 * i, 2 * j, 2, 2) = x(i, j) * flip_proj + (i == j ? 1.0 : 0.0) * keep_proj;
  return GateMatrix(2, std::move(m));
}

// Swap gate 2: disentangle the communication qubit, leaving it in |0>.
inline GateMatrix swap_disentangle() { return memory_x_basis_controlled(false); }

// Distillation gate: flip comm when the memory is |+>, then Z on the memory.
inline GateMatrix distill() {
  return gates::kron(gates::identity(), gates::z()) * memory_x_basis_controlled(true);
}

}  // namespace local_gates

inline DensityMatrix apply_noisy_gate(const DensityMatrix& rho, const GateMatrix& g, NodeQubits q,
                                      const NodeNoiseParams& noise) {
  const std::array<int, 2> t{q.comm, q.mem};
  const auto out = apply_gate(rho, g, t);
  return depolarize(out, per_gate_error(noise.local_gate_error), t);
}

// Moves the communication-qubit state onto the memory in the Hadamard frame.
// Requires the memory in |0>.
inline DensityMatrix swap_to_memory(const DensityMatrix& rho, NodeQubits q, const NodeNoiseParams& noise) {
  const std::array<int, 1> mem{q.mem};
  const auto reduced = partial_trace(rho, mem);
  if (reduced(0, 0).real() < 1.0 - tol::physical) throw std::logic_error("memory qubit not initialized to |0>");
  auto out = apply_noisy_gate(rho, local_gates::swap_entangle(), q, noise);
  return apply_noisy_gate(out, local_gates::swap_disentangle(), q, noise);
}

inline DensityMatrix swap_to_memory(const DensityMatrix& rho4, Node node, const NodeNoiseParams& noise) {
  if (rho4.n_qubits() != 4) throw std::invalid_argument("protocol register must hold 4 qubits");
  return swap_to_memory(rho4, qubits_of(node), noise);
}

// Per-attempt phase R_z(phi)^n, the compensating feedback rotation, then the
// attempt-count dephasing. `extra_lambda` composes an additional dephasing.
inline DensityMatrix store_memory(const DensityMatrix& rho, int mem, long long n_attempts,
                                  const NodeNoiseParams& p, bool feedback, double extra_lambda = 0.0) {
  if (n_attempts < 0) throw std::invalid_argument("attempt count must be >= 0");
  const std::array<int, 1> t{mem};
  const double accumulated = p.phi_per_attempt * static_cast<double>(n_attempts);
  auto out = apply_gate(rho, gates::rz(accumulated), t);
  if (feedback) out = apply_gate(out, gates::rz(-accumulated), t);
  const double lambda = 1.0 - (1.0 - memory_storage_decay(n_attempts, p)) * (1.0 - extra_lambda);
  return dephase(out, lambda, mem);
}

inline DensityMatrix storage_and_feedback(const DensityMatrix& rho4, long long n_attempts, const ProtocolConfig& cfg) {
  if (rho4.n_qubits() != 4) throw std::invalid_argument("protocol register must hold 4 qubits");
  const double t = static_cast<double>(n_attempts) * cfg.attempt_duration;
  auto out = rho4;
  for (Node n : {Node::A, Node::B}) {
    const auto& p = cfg.node(n);
    const double extra = cfg.wall_time_dephasing ? wall_time_dephasing(t, p) : 0.0;
    out = store_memory(out, qubits_of(n).mem, n_attempts, p, cfg.feedback, extra);
  }
  return out;
}

// Places a fresh two-qubit raw state on the communication qubits, discarding
// whatever they held.
inline DensityMatrix load_communication_pair(const DensityMatrix& rho4, const DensityMatrix& raw) {
  const auto memories = partial_trace(rho4, {reg::mem_a, reg::mem_b});
  return permute(tensor(raw, memories), {0, 2, 1, 3});
}

inline DensityMatrix initial_register(const DensityMatrix& raw) {
  return permute(tensor(raw, DensityMatrix::basis(2, 0)), {0, 2, 1, 3});
}

// Applies the distillation gates of both nodes.
inline DensityMatrix apply_distillation_gates(const DensityMatrix& rho4, const ProtocolConfig& cfg) {
  if (rho4.n_qubits() != 4) throw std::invalid_argument("protocol register must hold 4 qubits");
  auto out = apply_noisy_gate(rho4, local_gates::distill(), qubits_of(Node::A), cfg.node_a);
  return apply_noisy_gate(out, local_gates::distill(), qubits_of(Node::B), cfg.node_b);
}

struct DistillBranch {
  double probability;
  DensityMatrix memories;
};

// Exact readout branches (a, b) of a register that already went through the
// distillation gates, index 2a + b. Memory states are normalized; branches with
// vanishing probability carry the unnormalized zero projection.
inline std::array<DistillBranch, 4> distill_branches(const DensityMatrix& gated) {
  std::array<std::optional<DistillBranch>, 4> tmp;
  for (int a = 0; a < 2; ++a) {
    const auto pa = project_qubit(gated, reg::comm_a, a);
    for (int b = 0; b < 2; ++b) {
      const auto pb = project_qubit(pa.post, reg::comm_b, b);
      tmp[2 * a + b] = DistillBranch{pa.probability * pb.probability, partial_trace(pb.post, {reg::mem_a, reg::mem_b})};
    }
  }
  return {*tmp[0], *tmp[1], *tmp[2], *tmp[3]};
}

struct DistillOutcome {
  int readout_a;  // reported, after readout error
  int readout_b;
  int true_a;
  int true_b;
  DensityMatrix memories;  // conditioned on the true outcomes
  double branch_probability;

  bool heralded() const { return readout_a == 0 && readout_b == 0; }
};

inline DistillOutcome distill_step(const DensityMatrix& rho4, const ProtocolConfig& cfg, RandomStream& rng) {
  if (rho4.n_qubits() != 4) throw std::invalid_argument("protocol register must hold 4 qubits");
  const auto gated = apply_distillation_gates(rho4, cfg);
  auto ma = measure_qubit(gated, reg::comm_a, rng);
  auto mb = measure_qubit(ma.post, reg::comm_b, rng);
  const int ra = readout_error(ma.outcome, cfg.node_a, rng);
  const int rb = readout_error(mb.outcome, cfg.node_b, rng);
  return {ra, rb, ma.outcome, mb.outcome, partial_trace(mb.post, {reg::mem_a, reg::mem_b}),
          ma.probability * mb.probability};
}

// Attempt index of the first success conditioned on success within `cap`.
inline long long sample_success_within_cap(double p, long long cap, RandomStream& rng) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("success probability must lie in (0, 1]");
  if (cap < 1) throw std::invalid_argument("attempt cap must be >= 1");
  const double u = rng.uniform();
  if (p >= 1.0) return 1;
  const double p_cap = -std::expm1(static_cast<double>(cap) * std::log1p(-p));
  const double n = std::ceil(std::log1p(-u * p_cap) / std::log1p(-p));
  return std::clamp(static_cast<long long>(n), 1LL, cap);
}

// One protocol run with attempt counts drawn by `draw(cap)`, which returns
// nullopt when the cap is exhausted.
template <class Draw>
TrialRecord run_trial_with(const ProtocolConfig& cfg, RandomStream& rng, std::uint64_t trial_id, Draw&& draw) {
  TrialRecord rec;
  rec.trial_id = trial_id;
  const auto env = PhaseEnvironment::sample(rng);

  const std::optional<long long> n1 = draw(cfg.n1_max);
  if (!n1) {
    rec.stage = TrialStage::step1_exhausted;
    rec.n1 = cfg.n1_max;
    rec.elapsed_time = static_cast<double>(cfg.n1_max) * cfg.attempt_duration;
    return rec;
  }
  rec.n1 = *n1;
  const Sign sign1 = draw_sign(cfg.signature_policy, rng);
  const auto raw1 = generate_raw_state(cfg, env, sign1, rng);

  const std::optional<long long> n2 = draw(cfg.n2_max);
  if (!n2) {
    rec.stage = TrialStage::step3_exhausted;
    rec.n2 = cfg.n2_max;
    rec.elapsed_time = static_cast<double>(rec.n1 + cfg.n2_max) * cfg.attempt_duration;
    return rec;
  }
  rec.n2 = *n2;
  // The swap draws no randomness, so it is only simulated for runs that reach
  // distillation.
  auto rho = initial_register(raw1);
  rho = swap_to_memory(rho, Node::A, cfg.node_a);
  rho = swap_to_memory(rho, Node::B, cfg.node_b);
  rho = storage_and_feedback(rho, rec.n2, cfg);
  const Sign sign2 = draw_sign(cfg.signature_policy, rng);
  rho = load_communication_pair(rho, generate_raw_state(cfg, env, sign2, rng));

  auto out = distill_step(rho, cfg, rng);
  rec.stage = TrialStage::completed;
  rec.signatures = HeraldSignature{sign1, sign2};
  rec.readout_a = out.readout_a;
  rec.readout_b = out.readout_b;
  rec.heralded = out.heralded();
  rec.branch_probability = out.branch_probability;
  if (rec.heralded) rec.final_memory_state = std::move(out.memories);
  rec.elapsed_time = static_cast<double>(rec.n1 + rec.n2) * cfg.attempt_duration + cfg.local_ops_duration;
  return rec;
}

// One protocol run. Exhausting either attempt cap ends the run unheralded.
inline TrialRecord run_trial(const ProtocolConfig& cfg, RandomStream& rng, std::uint64_t trial_id = 0) {
  const double p = cfg.success_probability();
  return run_trial_with(cfg, rng, trial_id, [&](long long cap) { return sample_success(p, cap, rng); });
}

// One protocol run with both attempt counts conditioned on success within
// their caps, so the distillation step is always reached. The elapsed time
// covers only the successful runs.
inline TrialRecord run_completed_trial(const ProtocolConfig& cfg, RandomStream& rng, std::uint64_t trial_id = 0) {
  const double p = cfg.success_probability();
  return run_trial_with(cfg, rng, trial_id,
                        [&](long long cap) { return std::optional<long long>(sample_success_within_cap(p, cap, rng)); });
}

// ---------------------------------------------------------------------------
// Reference frames

// Removes the Hadamard byproduct the swap leaves on each memory.
inline DensityMatrix undo_memory_frame(const DensityMatrix& memories) {
  auto out = apply_gate(memories, gates::h(), {0});
  return apply_gate(out, gates::h(), {1});
}

// Memory state with the swap frame undone and a different-detector outcome
// rotated onto |Psi+>, so heralded states of both signatures can be averaged.
inline DensityMatrix aligned_memory_state(const DensityMatrix& memories, const HeraldSignature& sig) {
  auto out = undo_memory_frame(memories);
  if (sig.target_sign() < 0) out = apply_gate(out, gates::z(), {1});
  return out;
}

inline PureState herald_target(const HeraldSignature& sig) { return states::psi(sig.target_sign()); }

// ---------------------------------------------------------------------------
// Single-node benchmark: all local gates of one node used to prepare a
// communication-memory Bell state.

// (|0,+X> + |1,-X>) / sqrt(2), ordering (comm, mem).
inline PureState benchmark_target() {
  const double s = 0.5;
  return PureState(2, Vector{{Complex(s), Complex(s), Complex(s), Complex(-s)}});
}

inline DensityMatrix run_local_benchmark(const NodeNoiseParams& noise) {
  const NodeQubits q{0, 1};
  // Communication qubit in |+X>, memory initialized to |0>.
  auto rho = DensityMatrix(PureState(2, Vector{{Complex(std::numbers::sqrt2 / 2), Complex(0), Complex(std::numbers::sqrt2 / 2), Complex(0)}}));
  rho = swap_to_memory(rho, q, noise);
  return apply_noisy_gate(rho, local_gates::distill(), q, noise);
}

inline double local_benchmark_fidelity(const NodeNoiseParams& noise) {
  return fidelity_with_pure(run_local_benchmark(noise), benchmark_target());
}

// ---------------------------------------------------------------------------
// Modeled raw states with a known optical phase.

// Raw state on the communication qubits as generated.
inline double modeled_raw_comm_fidelity(const ProtocolConfig& cfg) {
  const double mag = cfg.photonics.coherence_scaling == CoherenceScaling::linear ? cfg.photonics.visibility
                                                                                  : std::sqrt(cfg.photonics.visibility);
  const auto raw = raw_state(cfg.theta, Sign::plus, 0.0, mag, cfg.photonics.dark_count_fraction);
  return fidelity_with_pure(raw, states::psi_plus());
}

// Raw state after the swap and `attempts` attempts of storage with feedback,
// evaluated in the unrotated frame.
inline DensityMatrix modeled_raw_memory_state(const ProtocolConfig& cfg, long long attempts) {
  const double mag = cfg.photonics.coherence_scaling == CoherenceScaling::linear ? cfg.photonics.visibility
                                                                                  : std::sqrt(cfg.photonics.visibility);
  auto rho = initial_register(raw_state(cfg.theta, Sign::plus, 0.0, mag, cfg.photonics.dark_count_fraction));
  rho = swap_to_memory(rho, Node::A, cfg.node_a);
  rho = swap_to_memory(rho, Node::B, cfg.node_b);
  rho = storage_and_feedback(rho, attempts, cfg);
  return undo_memory_frame(partial_trace(rho, {reg::mem_a, reg::mem_b}));
}

inline double modeled_raw_memory_fidelity(const ProtocolConfig& cfg, long long attempts) {
  return fidelity_with_pure(modeled_raw_memory_state(cfg, attempts), states::psi_plus());
}

// ---------------------------------------------------------------------------
// Trial-record rows

inline void write_trial_header(std::ostream& os, bool with_state) {
  os << "trial_id,n1,n2,sign1,sign2,readout_a,readout_b,heralded,elapsed_time";
  if (with_state) {
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) os << ",rho_re_" << r << c << ",rho_im_" << r << c;
  }
  os << '\n';
}

inline void write_trial_row(std::ostream& os, const TrialRecord& t, bool with_state) {
  auto opt_int = [&](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string("na"); };
  os << t.trial_id << ',' << t.n1 << ',' << t.n2 << ',';
  if (t.signatures) os << sign_char(t.signatures->first) << ',' << sign_char(t.signatures->second);
  else os << "na,na";
  os << ',' << opt_int(t.readout_a) << ',' << opt_int(t.readout_b) << ',' << (t.heralded ? 1 : 0) << ','
     << format_double(t.elapsed_time);
  if (with_state) {
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        if (t.final_memory_state) {
          const Complex v = (*t.final_memory_state)(r, c);
          os << ',' << format_double(v.real()) << ',' << format_double(v.imag());
        } else {
          os << ",na,na";
        }
      }
  }
  os << '\n';
}

}  // namespace distill
