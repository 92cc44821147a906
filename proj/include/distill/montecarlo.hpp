#pragma once

// Experiment orchestration: trial ensembles, the per-figure sweeps, gate-error
// calibration and event-rate estimation.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "distill/analysis.hpp"
#include "distill/channels.hpp"
#include "distill/errors.hpp"
#include "distill/fit.hpp"
#include "distill/protocol.hpp"
#include "distill/qstate.hpp"
#include "distill/rng.hpp"

namespace distill {

inline constexpr const char* kVersion = "distill 0.1.0";

struct ExperimentSpec {
  ProtocolConfig protocol;

  std::vector<double> theta_list{std::numbers::pi / 10, std::numbers::pi / 8, std::numbers::pi / 6,
                                 std::numbers::pi / 5, std::numbers::pi / 4};
  std::vector<long long> n2_max_list{50};
  std::vector<double> p_det_list{1e-4, 3e-4, 1e-3, 3e-3, 1e-2};
  long long memory_attempt_max = 500;
  long long memory_attempt_step = 25;
  std::uint64_t memory_shots = 800;  // per cardinal state per attempt count
  long long feedback_attempt_max = 300;
  std::uint64_t feedback_shots = 2000;

  long long bin_width = 5;
  int bootstrap_resamples = 1000;
  long long raw_reference_attempts = 25;

  double target_fidelity_a = 0.96;
  double target_fidelity_b = 0.98;

  std::size_t trials = 10000;
  // Unconditioned runs behind rate estimates. Runs that exhaust a cap skip the
  // state simulation, so these are cheap.
  std::size_t rate_trials = 1000000;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  unsigned threads = 0;  // 0: hardware concurrency
  bool include_states = false;

  void validate() const {
    protocol.validate();
    require(trials >= 1, "trials_positive", "experiment.trials must be >= 1");
    require(rate_trials >= 1, "trials_positive", "experiment.rate_trials must be >= 1");
    require(!theta_list.empty(), "sweep_nonempty", "sweep.theta_list_rad must not be empty");
    for (double t : theta_list)
      require(t > 0.0 && t <= std::numbers::pi / 2, "theta_in_range", "sweep.theta_list_rad entries must lie in (0, pi/2]");
    require(!n2_max_list.empty(), "sweep_nonempty", "sweep.n2_max_list must not be empty");
    for (long long n : n2_max_list) require(n >= 1, "n2_max_positive", "sweep.n2_max_list entries must be >= 1");
    require(!p_det_list.empty(), "sweep_nonempty", "sweep.p_det_list must not be empty");
    for (double p : p_det_list) require(p > 0.0 && p <= 1.0, "p_det_in_range", "sweep.p_det_list entries must lie in (0, 1]");
    require(memory_attempt_step >= 1 && memory_attempt_max >= 0, "memory_sweep_valid",
            "sweep.memory_attempt_step must be >= 1 and sweep.memory_attempt_max >= 0");
    require(memory_shots >= 1 && feedback_shots >= 1, "shots_positive", "shot counts must be >= 1");
    require(feedback_attempt_max >= 1, "feedback_sweep_valid", "sweep.feedback_attempt_max must be >= 1");
    require(bin_width >= 1, "bin_width_positive", "analysis.bin_width must be >= 1");
    require(bootstrap_resamples >= 0, "bootstrap_resamples_nonnegative", "analysis.bootstrap_resamples must be >= 0");
    require(raw_reference_attempts >= 0, "raw_reference_attempts_nonnegative", "analysis.raw_reference_attempts must be >= 0");
    for (double f : {target_fidelity_a, target_fidelity_b})
      require(f > 0.25 && f <= 1.0, "target_fidelity_reachable", "calibrate.target_fidelity_* must lie in (0.25, 1]");
  }
};

// ---------------------------------------------------------------------------
// Parallel execution. Work items are indexed; results land in fixed slots so
// the schedule cannot change the output.

template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

enum class FigureMode : std::uint64_t {
  simulate = 1,
  memory_lifetime = 2,  // storage of the six cardinal states
  feedback = 3,         // <X> with and without phase feedback
  theta_sweep = 4,      // distilled fidelity vs theta
  state_decay = 5,      // fidelity binned by step-3 attempts
  ebit_rate = 6,
  rate_scaling = 7,
};

inline std::uint64_t point_key(FigureMode mode, std::uint64_t index) {
  return (static_cast<std::uint64_t>(mode) << 40) | index;
}

// How trials are drawn. `completed_only` conditions both attempt counts on
// success within their caps, so every trial reaches the distillation step; use
// it for state statistics, and `unconditioned` for rates.
enum class TrialSampling { unconditioned, completed_only };

// Trials are grouped into fixed chunks that share one random stream keyed by
// (seed, key, chunk) and run in order. Results depend on neither the thread
// count nor the schedule.
inline constexpr std::size_t kTrialsPerStream = 256;

template <class Fn>
void for_each_trial_stream(std::size_t trials, std::uint64_t seed, std::uint64_t key, unsigned threads, Fn&& fn) {
  const std::size_t chunks = (trials + kTrialsPerStream - 1) / kTrialsPerStream;
  parallel_for(chunks, threads, [&](std::size_t c) {
    RandomStream rng(seed, key, c);
    const std::size_t end = std::min(trials, (c + 1) * kTrialsPerStream);
    for (std::size_t i = c * kTrialsPerStream; i < end; ++i) fn(i, rng);
  });
}

inline std::vector<TrialRecord> run_trials(const ProtocolConfig& cfg, std::size_t trials, std::uint64_t seed,
                                           std::uint64_t key, TrialSampling sampling, unsigned threads = 0) {
  cfg.validate();
  std::vector<TrialRecord> out(trials);
  for_each_trial_stream(trials, seed, key, threads, [&](std::size_t i, RandomStream& rng) {
    out[i] = sampling == TrialSampling::completed_only ? run_completed_trial(cfg, rng, i) : run_trial(cfg, rng, i);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Aggregates

struct PointAggregate {
  double axis_value = 0.0;
  std::size_t trials = 0;
  std::size_t both_generated = 0;
  std::size_t heralded = 0;
  double total_time = 0.0;
  std::optional<Correlators> correlators;  // of the mean aligned heralded state
  std::optional<double> fidelity;
  std::optional<double> fidelity_stderr;
  std::optional<double> e_n;

  bool operator==(const PointAggregate&) const = default;
};

inline PointAggregate aggregate(double axis_value, std::span<const TrialRecord> trials) {
  PointAggregate a;
  a.axis_value = axis_value;
  a.trials = trials.size();
  double f_sum = 0, f_sum2 = 0;
  for (const auto& t : trials) {
    a.total_time += t.elapsed_time;
    a.both_generated += t.both_generated() ? 1 : 0;
    if (t.heralded) {
      ++a.heralded;
      const double f = fidelity_with_pure(aligned_memory_state(*t.final_memory_state, *t.signatures), states::psi_plus());
      f_sum += f;
      f_sum2 += f * f;
    }
  }
  if (const auto mean = mean_aligned_state(trials)) {
    a.correlators = correlators(*mean);
    a.fidelity = fidelity_with_pure(*mean, states::psi_plus());
    const double n = static_cast<double>(a.heralded);
    const double m = f_sum / n;
    a.fidelity_stderr = n > 1 ? std::sqrt(std::max(0.0, (f_sum2 / n - m * m) * n / (n - 1)) / n) : 0.0;
    a.e_n = log_negativity(*mean);
  }
  return a;
}

// ---------------------------------------------------------------------------
// Result tables

struct Table {
  std::string name;  // file stem
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) {
    if (row.size() != columns.size()) throw std::logic_error("table row width mismatch in " + name);
    rows.push_back(std::move(row));
  }
};

inline std::string fmt(double v) { return std::isnan(v) ? "nan" : format_double(v); }
inline std::string fmt(std::optional<double> v) { return v ? fmt(*v) : "nan"; }
inline std::string fmt_int(long long v) { return std::to_string(v); }

struct ResultSet {
  FigureMode mode = FigureMode::simulate;
  std::vector<PointAggregate> points;
  std::vector<Table> tables;
  std::vector<std::vector<TrialRecord>> trial_rows;  // per point, when retained

  const Table& table(const std::string& name) const {
    for (const auto& t : tables)
      if (t.name == name) return t;
    throw std::out_of_range("no table named " + name);
  }
};

// ---------------------------------------------------------------------------
// Calibration

struct GateCalibration {
  double local_gate_error;
  double benchmark_fidelity;
};

// Inverts F = 1 - 3p/4 of the single-node benchmark and checks the result by
// simulating the benchmark circuit.
inline GateCalibration calibrate_gate_error(double target_fidelity) {
  require(target_fidelity > 0.25 && target_fidelity <= 1.0, "target_fidelity_reachable",
          "benchmark fidelity target must lie in (0.25, 1]");
  NodeNoiseParams node;
  node.local_gate_error = std::clamp((1.0 - target_fidelity) * 4.0 / 3.0, 0.0, 1.0);
  const double simulated = local_benchmark_fidelity(node);
  if (std::abs(simulated - target_fidelity) > 1e-6) {
    throw std::runtime_error("benchmark simulation does not reproduce the calibration target");
  }
  return {node.local_gate_error, simulated};
}

// ---------------------------------------------------------------------------
// Event rates

struct EventRate {
  double rate = 0.0;  // per second
  double stderr_ = 0.0;
  std::size_t events = 0;
  double total_time = 0.0;
};

// Ratio estimator sum(e) / sum(t) with its delta-method standard error.
inline EventRate ratio_rate(std::span<const double> events, std::span<const double> times) {
  EventRate out;
  double se = 0, st = 0;
  for (std::size_t i = 0; i < events.size(); ++i) { se += events[i]; st += times[i]; }
  out.events = static_cast<std::size_t>(se);
  out.total_time = st;
  if (!(st > 0)) return out;
  out.rate = se / st;
  double var = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const double d = events[i] - out.rate * times[i];
    var += d * d;
  }
  out.stderr_ = std::sqrt(var) / st;
  return out;
}

// Rate of runs in which both raw states were generated. Only attempt counts
// are sampled; no quantum state is simulated.
inline EventRate estimate_event_rate(const ProtocolConfig& cfg, std::size_t trials, std::uint64_t seed,
                                     std::uint64_t key = point_key(FigureMode::rate_scaling, 0)) {
  cfg.validate();
  const double p = cfg.success_probability();
  std::vector<double> events(trials), times(trials);
  for_each_trial_stream(trials, seed, key, 1, [&](std::size_t i, RandomStream& rng) {
    const auto n1 = sample_success(p, cfg.n1_max, rng);
    if (!n1) {
      times[i] = static_cast<double>(cfg.n1_max) * cfg.attempt_duration;
      return;
    }
    const auto n2 = sample_success(p, cfg.n2_max, rng);
    if (!n2) {
      times[i] = static_cast<double>(*n1 + cfg.n2_max) * cfg.attempt_duration;
      return;
    }
    events[i] = 1.0;
    times[i] = static_cast<double>(*n1 + *n2) * cfg.attempt_duration + cfg.local_ops_duration;
  });
  return ratio_rate(events, times);
}

inline EventRate estimate_event_rate(const ExperimentSpec& spec) {
  return estimate_event_rate(spec.protocol, spec.trials, spec.seed);
}

inline EventRate heralded_rate(std::span<const TrialRecord> trials) {
  std::vector<double> e(trials.size()), t(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    e[i] = trials[i].heralded ? 1.0 : 0.0;
    t[i] = trials[i].elapsed_time;
  }
  return ratio_rate(e, t);
}

// ---------------------------------------------------------------------------
// Memory storage experiments (single node, memory only)

enum class CardinalState { zero, one, plus_x, minus_x, plus_y, minus_y };

inline constexpr std::array<CardinalState, 6> kCardinalStates{CardinalState::zero,   CardinalState::one,
                                                              CardinalState::plus_x, CardinalState::minus_x,
                                                              CardinalState::plus_y, CardinalState::minus_y};

inline const char* name_of(CardinalState s) {
  switch (s) {
    case CardinalState::zero: return "0";
    case CardinalState::one: return "1";
    case CardinalState::plus_x: return "+X";
    case CardinalState::minus_x: return "-X";
    case CardinalState::plus_y: return "+Y";
    default: return "-Y";
  }
}

inline bool is_superposition(CardinalState s) { return s != CardinalState::zero && s != CardinalState::one; }

inline PureState cardinal_state(CardinalState s) {
  switch (s) {
    case CardinalState::zero: return states::zero();
    case CardinalState::one: return states::one();
    case CardinalState::plus_x: return states::plus_x();
    case CardinalState::minus_x: return states::minus_x();
    case CardinalState::plus_y: return states::plus_y();
    default: return states::minus_y();
  }
}

// The Pauli read back for a cardinal state and the sign it should have.
inline std::pair<const char*, double> relevant_observable(CardinalState s) {
  switch (s) {
    case CardinalState::zero: return {"Z", 1.0};
    case CardinalState::one: return {"Z", -1.0};
    case CardinalState::plus_x: return {"X", 1.0};
    case CardinalState::minus_x: return {"X", -1.0};
    case CardinalState::plus_y: return {"Y", 1.0};
    default: return {"Y", -1.0};
  }
}

// Memory initialized in `s`, stored for `attempts`, read back in its basis.
inline double stored_expectation(CardinalState s, long long attempts, const NodeNoiseParams& node, bool feedback) {
  const auto rho = store_memory(DensityMatrix(cardinal_state(s)), 0, attempts, node, feedback);
  return pauli_expectation(rho, relevant_observable(s).first);
}

// Shot-sampled expectation of a +-1 observable read through a node's readout.
inline double sample_expectation(double exact, std::uint64_t shots, const NodeNoiseParams& node, RandomStream& rng) {
  const double p_plus = std::clamp((1.0 + exact) / 2.0, 0.0, 1.0);
  std::uint64_t plus = 0;
  for (std::uint64_t k = 0; k < shots; ++k) {
    const int bit = rng.uniform() < p_plus ? 0 : 1;  // 0 <-> eigenvalue +1
    plus += readout_error(bit, node, rng) == 0 ? 1 : 0;
  }
  return 2.0 * static_cast<double>(plus) / static_cast<double>(shots) - 1.0;
}

namespace detail {

inline std::string mode_label(FigureMode mode) {
  switch (mode) {
    case FigureMode::simulate: return "simulate";
    case FigureMode::memory_lifetime: return "memory_lifetime";
    case FigureMode::feedback: return "feedback";
    case FigureMode::theta_sweep: return "theta_sweep";
    case FigureMode::state_decay: return "state_decay";
    case FigureMode::ebit_rate: return "ebit_rate";
    default: return "rate_scaling";
  }
}

inline ResultSet memory_lifetime(const ExperimentSpec& spec) {
  ResultSet rs;
  rs.mode = FigureMode::memory_lifetime;
  Table detail{"fig3c_memory_states", {"node", "attempts", "state", "fidelity", "fidelity_stderr"}, {}};
  Table summary{"fig3c_memory_lifetime",
                {"node", "attempts", "superposition_fidelity", "superposition_stderr", "eigenstate_fidelity",
                 "eigenstate_stderr"},
                {}};
  Table fits{"fig3c_fit", {"node", "fitted_one_over_e_attempts", "configured_one_over_e_attempts", "fit_amplitude",
                           "min_eigenstate_fidelity"}, {}};
  std::vector<long long> grid;
  for (long long n = 0; n <= spec.memory_attempt_max; n += spec.memory_attempt_step) grid.push_back(n);

  for (Node node : {Node::A, Node::B}) {
    const auto& params = spec.protocol.node(node);
    const char* label = node == Node::A ? "A" : "B";
    std::vector<double> xs, ys, ws;
    double min_eigen = 1.0;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      const long long n = grid[gi];
      double sup = 0, eig = 0;
      for (std::size_t si = 0; si < kCardinalStates.size(); ++si) {
        const auto s = kCardinalStates[si];
        RandomStream rng(spec.seed, point_key(FigureMode::memory_lifetime, (node == Node::A ? 0 : 1) * 1'000'000 + gi * 16 + si));
        const double exact = stored_expectation(s, n, params, spec.protocol.feedback);
        const double measured = sample_expectation(exact, spec.memory_shots, params, rng);
        const double f = 0.5 * (1.0 + relevant_observable(s).second * measured);
        const double se = 0.5 * correlator_stderr(measured, spec.memory_shots);
        detail.add({label, fmt_int(n), name_of(s), fmt(f), fmt(se)});
        (is_superposition(s) ? sup : eig) += f;
      }
      sup /= 4.0;
      eig /= 2.0;
      min_eigen = std::min(min_eigen, eig);
      // Standard error of the state-averaged fidelity from binomial shot noise.
      const double sup_se = std::sqrt(std::max(0.0, sup * (1 - sup)) / (4.0 * static_cast<double>(spec.memory_shots)));
      const double eig_se = std::sqrt(std::max(0.0, eig * (1 - eig)) / (2.0 * static_cast<double>(spec.memory_shots)));
      summary.add({label, fmt_int(n), fmt(sup), fmt(sup_se), fmt(eig), fmt(eig_se)});
      xs.push_back(static_cast<double>(n));
      ys.push_back(sup);
      ws.push_back(1.0 / std::max(sup_se * sup_se, 1e-12));
    }
    const auto decay = fit::fit_exponential_decay(xs, ys, ws, 0.5);
    fits.add({label, fmt(decay.tau), fmt(params.memory_one_over_e_attempts), fmt(decay.amplitude), fmt(min_eigen)});
  }
  rs.tables = {std::move(summary), std::move(detail), std::move(fits)};
  return rs;
}

inline ResultSet feedback_experiment(const ExperimentSpec& spec) {
  ResultSet rs;
  rs.mode = FigureMode::feedback;
  Table curve{"fig3b_feedback", {"node", "feedback", "attempts", "x_expectation", "x_stderr", "x_exact"}, {}};
  Table fits{"fig3b_fit", {"node", "feedback", "fitted_phase_per_attempt_rad", "configured_phase_per_attempt_rad",
                           "fitted_amplitude", "max_exact_deviation"}, {}};
  for (Node node : {Node::A, Node::B}) {
    const auto& params = spec.protocol.node(node);
    const char* label = node == Node::A ? "A" : "B";
    for (int fb = 0; fb < 2; ++fb) {
      std::vector<double> xs, ys;
      double max_dev = 0.0;
      for (long long n = 0; n <= spec.feedback_attempt_max; ++n) {
        RandomStream rng(spec.seed, point_key(FigureMode::feedback, static_cast<std::uint64_t>((node == Node::A ? 0 : 2) + fb) * 1'000'000 + n));
        const double exact = stored_expectation(CardinalState::plus_x, n, params, fb == 1);
        const double measured = sample_expectation(exact, spec.feedback_shots, params, rng);
        curve.add({label, fmt_int(fb), fmt_int(n), fmt(measured), fmt(correlator_stderr(measured, spec.feedback_shots)),
                   fmt(exact)});
        xs.push_back(static_cast<double>(n));
        ys.push_back(measured);
        const double envelope = 1.0 - memory_storage_decay(n, params);
        max_dev = std::max(max_dev, std::abs(exact - envelope));
      }
      const auto f = fit::fit_damped_cosine(xs, ys);
      fits.add({label, fmt_int(fb), fmt(f.omega), fmt(std::remainder(params.phi_per_attempt, 2 * std::numbers::pi)),
                fmt(f.amplitude), fmt(max_dev)});
    }
  }
  rs.tables = {std::move(curve), std::move(fits)};
  return rs;
}

inline PointAggregate run_point(const ProtocolConfig& cfg, const ExperimentSpec& spec, FigureMode mode,
                                std::uint64_t index, TrialSampling sampling, ResultSet& rs, bool keep_rows) {
  auto trials = run_trials(cfg, spec.trials, spec.seed, point_key(mode, index), sampling, spec.threads);
  auto agg = aggregate(0.0, trials);
  if (keep_rows) rs.trial_rows.push_back(std::move(trials));
  return agg;
}

inline ResultSet theta_sweep(const ExperimentSpec& spec, bool keep_rows) {
  ResultSet rs;
  rs.mode = FigureMode::theta_sweep;
  Table t{"fig4b_theta_sweep",
          {"theta_rad", "n2_max", "trials", "heralded", "fidelity", "fidelity_stderr", "xx", "yy", "zz",
           "raw_memory_fidelity_min", "raw_memory_fidelity_ref", "raw_memory_fidelity_max", "raw_comm_fidelity"},
          {}};
  std::uint64_t index = 0;
  for (long long n2_max : spec.n2_max_list) {
    for (double theta : spec.theta_list) {
      ProtocolConfig cfg = spec.protocol;
      cfg.theta = theta;
      cfg.n2_max = n2_max;
      auto agg = run_point(cfg, spec, FigureMode::theta_sweep, index++, TrialSampling::completed_only, rs, keep_rows);
      agg.axis_value = theta;
      const auto c = agg.correlators;
      t.add({fmt(theta), fmt_int(n2_max), fmt_int(static_cast<long long>(agg.trials)),
             fmt_int(static_cast<long long>(agg.heralded)), fmt(agg.fidelity), fmt(agg.fidelity_stderr),
             fmt(c ? std::optional(c->xx) : std::nullopt), fmt(c ? std::optional(c->yy) : std::nullopt),
             fmt(c ? std::optional(c->zz) : std::nullopt), fmt(modeled_raw_memory_fidelity(cfg, 0)),
             fmt(modeled_raw_memory_fidelity(cfg, spec.raw_reference_attempts)),
             fmt(modeled_raw_memory_fidelity(cfg, n2_max)), fmt(modeled_raw_comm_fidelity(cfg))});
      rs.points.push_back(agg);
    }
  }
  rs.tables.push_back(std::move(t));
  return rs;
}

inline Table binned_table(const BinnedCurve& curve) {
  Table t{"fig4c_state_decay",
          {"bin_lo", "bin_hi", "count", "fidelity", "fidelity_stderr", "xx", "xx_stderr", "yy", "yy_stderr", "zz",
           "zz_stderr"},
          {}};
  for (const auto& b : curve.bins) {
    auto get = [](const std::optional<Correlators>& c, double Correlators::*m) {
      return c ? std::optional<double>((*c).*m) : std::nullopt;
    };
    t.add({fmt_int(b.lo), fmt_int(b.hi), fmt_int(static_cast<long long>(b.count)), fmt(b.fidelity),
           fmt(b.fidelity_stderr), fmt(get(b.mean, &Correlators::xx)), fmt(get(b.stderr_, &Correlators::xx)),
           fmt(get(b.mean, &Correlators::yy)), fmt(get(b.stderr_, &Correlators::yy)),
           fmt(get(b.mean, &Correlators::zz)), fmt(get(b.stderr_, &Correlators::zz))});
  }
  return t;
}

inline ResultSet state_decay(const ExperimentSpec& spec, bool keep_rows) {
  ResultSet rs;
  rs.mode = FigureMode::state_decay;
  auto trials = run_trials(spec.protocol, spec.trials, spec.seed, point_key(FigureMode::state_decay, 0),
                           TrialSampling::completed_only, spec.threads);
  auto agg = aggregate(spec.protocol.theta, trials);
  rs.points.push_back(agg);
  if (agg.heralded > 0) {
    const auto curve = bin_by_attempts(trials, spec.bin_width, spec.protocol.n2_max);
    rs.tables.push_back(binned_table(curve));
  }
  if (keep_rows) rs.trial_rows.push_back(std::move(trials));
  return rs;
}

inline ResultSet simulate(const ExperimentSpec& spec, bool keep_rows) {
  ResultSet rs;
  rs.mode = FigureMode::simulate;
  auto trials = run_trials(spec.protocol, spec.trials, spec.seed, point_key(FigureMode::simulate, 0),
                           TrialSampling::unconditioned, spec.threads);
  auto agg = aggregate(spec.protocol.theta, trials);
  Table summary{"summary", {"theta_rad", "trials", "both_generated", "heralded", "total_time_s", "heralded_rate_hz",
                            "heralded_rate_stderr", "fidelity", "fidelity_stderr", "e_n"}, {}};
  const auto hr = heralded_rate(trials);
  summary.add({fmt(spec.protocol.theta), fmt_int(static_cast<long long>(agg.trials)),
               fmt_int(static_cast<long long>(agg.both_generated)), fmt_int(static_cast<long long>(agg.heralded)),
               fmt(agg.total_time), fmt(hr.rate), fmt(hr.stderr_), fmt(agg.fidelity), fmt(agg.fidelity_stderr),
               fmt(agg.e_n)});
  rs.tables.push_back(std::move(summary));
  rs.points.push_back(agg);
  rs.trial_rows.push_back(std::move(trials));
  if (!keep_rows) rs.trial_rows.clear();
  return rs;
}

inline ResultSet ebit_sweep(const ExperimentSpec& spec, bool keep_rows) {
  ResultSet rs;
  rs.mode = FigureMode::ebit_rate;
  Table t{"fig5_ebit_rate",
          {"theta_rad", "trials", "heralded", "nu_hz", "nu_stderr", "e_n", "e_n_stderr", "r_ebit_hz", "r_stderr",
           "bk_ideal_r_ebit_hz", "bk_visibility_r_ebit_hz"},
          {}};
  const auto& cfg0 = spec.protocol;
  const auto bk_ideal = barrett_kok_rate(cfg0.p_det, 1.0, cfg0.attempt_duration);
  const auto bk_vis = barrett_kok_rate(cfg0.p_det, cfg0.photonics.visibility, cfg0.attempt_duration);
  std::uint64_t index = 0;
  for (double theta : spec.theta_list) {
    ProtocolConfig cfg = cfg0;
    cfg.theta = theta;
    const std::uint64_t i = index++;
    auto timing = run_trials(cfg, spec.rate_trials, spec.seed, point_key(FigureMode::ebit_rate, 2 * i),
                             TrialSampling::unconditioned, spec.threads);
    auto states = run_trials(cfg, spec.trials, spec.seed, point_key(FigureMode::ebit_rate, 2 * i + 1),
                             TrialSampling::completed_only, spec.threads);
    auto agg = aggregate(theta, timing);
    const auto mean = mean_aligned_state(states);
    RandomStream boot(spec.seed, point_key(FigureMode::ebit_rate, 2 * i), ~0ULL);
    std::optional<RateEstimate> rate;
    if (mean) rate = ebit_rate(timing, *mean, boot, spec.bootstrap_resamples, states);
    auto opt = [&](double RateEstimate::*m) { return rate ? std::optional<double>((*rate).*m) : std::nullopt; };
    t.add({fmt(theta), fmt_int(static_cast<long long>(agg.trials)), fmt_int(static_cast<long long>(agg.heralded)),
           fmt(opt(&RateEstimate::nu)), fmt(opt(&RateEstimate::nu_stderr)), fmt(opt(&RateEstimate::e_n)),
           fmt(opt(&RateEstimate::e_n_stderr)), fmt(opt(&RateEstimate::r)), fmt(opt(&RateEstimate::r_stderr)),
           fmt(bk_ideal.rate.r), fmt(bk_vis.rate.r)});
    agg.axis_value = theta;
    rs.points.push_back(agg);
    if (keep_rows) rs.trial_rows.push_back(std::move(timing));
  }
  rs.tables.push_back(std::move(t));
  return rs;
}

// Attempt caps large enough that no run exhausts them at the swept p_det.
inline constexpr long long kUncappedAttempts = 1'000'000'000;

inline ResultSet rate_scaling(const ExperimentSpec& spec, bool keep_rows) {
  ResultSet rs;
  rs.mode = FigureMode::rate_scaling;
  Table t{"fig5_rate_scaling",
          {"p_det", "event_rate_hz", "event_rate_stderr", "heralded_rate_hz", "heralded_rate_stderr",
           "ideal_uncapped_heralded_rate_hz", "ideal_uncapped_heralded_rate_stderr", "bk_rate_hz"},
          {}};
  std::uint64_t index = 0;
  for (double p_det : spec.p_det_list) {
    ProtocolConfig cfg = spec.protocol;
    cfg.p_det = p_det;
    const std::uint64_t i = index++;
    const auto ev = estimate_event_rate(cfg, spec.rate_trials, spec.seed, point_key(FigureMode::rate_scaling, 3 * i));
    auto trials = run_trials(cfg, spec.rate_trials, spec.seed, point_key(FigureMode::rate_scaling, 3 * i + 1),
                             TrialSampling::unconditioned, spec.threads);
    const auto hr = heralded_rate(trials);

    // Linear scaling only holds without the caps and noise.
    ProtocolConfig ideal = ProtocolConfig::ideal(cfg.theta);
    ideal.p_det = p_det;
    ideal.n1_max = ideal.n2_max = kUncappedAttempts;
    ideal.attempt_duration = cfg.attempt_duration;
    ideal.local_ops_duration = cfg.local_ops_duration;
    const auto ideal_trials = run_trials(ideal, spec.trials, spec.seed, point_key(FigureMode::rate_scaling, 3 * i + 2),
                                         TrialSampling::unconditioned, spec.threads);
    const auto ideal_hr = heralded_rate(ideal_trials);

    const auto bk = barrett_kok_rate(p_det, 1.0, cfg.attempt_duration);
    t.add({fmt(p_det), fmt(ev.rate), fmt(ev.stderr_), fmt(hr.rate), fmt(hr.stderr_), fmt(ideal_hr.rate),
           fmt(ideal_hr.stderr_), fmt(bk.rate.nu)});
    rs.points.push_back(aggregate(p_det, trials));
    if (keep_rows) rs.trial_rows.push_back(std::move(trials));
  }
  rs.tables.push_back(std::move(t));
  return rs;
}

}  // namespace detail

// Runs the sweep behind one figure panel. Deterministic for a fixed spec.
inline ResultSet run_figure_sweep(const ExperimentSpec& spec, FigureMode mode, bool keep_rows = false) {
  spec.validate();
  switch (mode) {
    case FigureMode::memory_lifetime: return detail::memory_lifetime(spec);
    case FigureMode::feedback: return detail::feedback_experiment(spec);
    case FigureMode::theta_sweep: return detail::theta_sweep(spec, keep_rows);
    case FigureMode::state_decay: return detail::state_decay(spec, keep_rows);
    case FigureMode::ebit_rate: return detail::ebit_sweep(spec, keep_rows);
    case FigureMode::rate_scaling: return detail::rate_scaling(spec, keep_rows);
    default: return detail::simulate(spec, keep_rows);
  }
}

inline std::string mode_name(FigureMode mode) { return detail::mode_label(mode); }

}  // namespace distill
