#pragma once

// Command-line front end. Every subcommand loads a config, applies flag
// overrides, runs, and writes its tables into the output directory only after
// all of them have been computed.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "distill/analysis.hpp"
#include "distill/config.hpp"
#include "distill/montecarlo.hpp"
#include "distill/protocol.hpp"

namespace distill::cli {

enum ExitCode : int { ok = 0, usage_error = 2, runtime_error = 3 };

struct OutputFile {
  std::string name;
  std::string contents;
};

inline std::string csv_escape(const std::string& v) {
  if (v.find_first_of(",\"\n") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::string render_table(const Table& t, const ExperimentSpec& spec, const std::string& mode) {
  std::ostringstream os;
  os << "# mode=" << mode << " config_hash=" << config_hash(spec) << " seed=" << spec.seed << '\n';
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_escape(row[i]);
    os << '\n';
  }
  return os.str();
}

inline std::string render_trials(std::span<const TrialRecord> trials, const ExperimentSpec& spec) {
  std::ostringstream os;
  os << "# mode=simulate config_hash=" << config_hash(spec) << " seed=" << spec.seed << '\n';
  write_trial_header(os, spec.include_states);
  for (const auto& t : trials) write_trial_row(os, t, spec.include_states);
  return os.str();
}

// Writes each file to a temporary name first, then renames them all into place.
inline void commit_outputs(const std::filesystem::path& dir, const std::vector<OutputFile>& files) {
  std::filesystem::create_directories(dir);
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> staged;
  for (const auto& f : files) {
    const auto final_path = dir / f.name;
    auto tmp = final_path;
    tmp += ".tmp";
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << f.contents;
    out.close();
    if (!out) throw std::runtime_error("failed to write " + tmp.string());
    staged.emplace_back(tmp, final_path);
  }
  for (const auto& [tmp, final_path] : staged) std::filesystem::rename(tmp, final_path);
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> trials;
  bool quiet = false;
};

struct Context {
  ExperimentSpec spec;
  Options opts;
  std::ostream& out;

  void say(const std::string& line) const {
    if (!opts.quiet) out << line << '\n';
  }
};

inline std::string manifest(const ExperimentSpec& spec, const std::string& command, double seconds) {
  return emit_manifest(spec, {"command = " + command, "wall_time_s = " + format_double(seconds)});
}

inline void add_tables(std::vector<OutputFile>& files, const ResultSet& rs, const ExperimentSpec& spec) {
  for (const auto& t : rs.tables) files.push_back({t.name + ".csv", render_table(t, spec, mode_name(rs.mode))});
}

inline std::vector<OutputFile> cmd_simulate(const Context& ctx) {
  const auto& spec = ctx.spec;
  std::vector<OutputFile> files;
  const auto sim = run_figure_sweep(spec, FigureMode::simulate, true);
  add_tables(files, sim, spec);
  files.push_back({"trials.csv", render_trials(sim.trial_rows.front(), spec)});
  const auto& p = sim.points.front();
  ctx.say("simulate: " + std::to_string(p.trials) + " trials, " + std::to_string(p.both_generated) +
          " reached distillation, " + std::to_string(p.heralded) + " heralded");

  const auto decay = run_figure_sweep(spec, FigureMode::state_decay, true);
  add_tables(files, decay, spec);
  if (!decay.tables.empty()) {
    const auto curve = bin_by_attempts(decay.trial_rows.front(), spec.bin_width, spec.protocol.n2_max);
    Table fit_table{"fig4c_fit", {"fitted_one_over_e_attempts", "amplitude", "heralded"}, {}};
    try {
      const auto f = fit_fidelity_decay(curve);
      fit_table.add({fmt(f.tau), fmt(f.amplitude), fmt_int(static_cast<long long>(curve.total()))});
    } catch (const std::invalid_argument&) {
      fit_table.add({"nan", "nan", fmt_int(static_cast<long long>(curve.total()))});
    }
    files.push_back({"fig4c_fit.csv", render_table(fit_table, spec, mode_name(FigureMode::state_decay))});
    const auto& d = decay.points.front();
    if (d.fidelity) ctx.say("distilled fidelity (completed runs): " + format_double(*d.fidelity));
  }
  return files;
}

inline std::vector<OutputFile> cmd_sweep_theta(const Context& ctx) {
  std::vector<OutputFile> files;
  const auto rs = run_figure_sweep(ctx.spec, FigureMode::theta_sweep, false);
  add_tables(files, rs, ctx.spec);
  for (const auto& p : rs.points)
    ctx.say("theta=" + format_double(p.axis_value) + " fidelity=" + fmt(p.fidelity) + " heralded=" + std::to_string(p.heralded));
  return files;
}

inline std::vector<OutputFile> cmd_memory_decay(const Context& ctx) {
  std::vector<OutputFile> files;
  const auto life = run_figure_sweep(ctx.spec, FigureMode::memory_lifetime, false);
  const auto fb = run_figure_sweep(ctx.spec, FigureMode::feedback, false);
  add_tables(files, life, ctx.spec);
  add_tables(files, fb, ctx.spec);
  for (const auto& row : life.table("fig3c_fit").rows)
    ctx.say("node " + row[0] + ": fitted 1/e attempts " + row[1] + " (configured " + row[2] + ")");
  return files;
}

inline std::vector<OutputFile> cmd_ebit_rate(const Context& ctx) {
  std::vector<OutputFile> files;
  const auto rates = run_figure_sweep(ctx.spec, FigureMode::ebit_rate, false);
  const auto scaling = run_figure_sweep(ctx.spec, FigureMode::rate_scaling, false);
  add_tables(files, rates, ctx.spec);
  add_tables(files, scaling, ctx.spec);
  for (const auto& row : rates.table("fig5_ebit_rate").rows)
    ctx.say("theta=" + row[0] + " r_ebit=" + row[7] + " Hz (two-photon baseline " + row[9] + " Hz)");
  return files;
}

inline std::vector<OutputFile> cmd_calibrate(const Context& ctx) {
  auto spec = ctx.spec;
  Table t{"calibration", {"node", "target_fidelity", "local_gate_error", "per_gate_error", "benchmark_fidelity"}, {}};
  for (auto [label, target, node] : {std::tuple{"A", spec.target_fidelity_a, &spec.protocol.node_a},
                                     std::tuple{"B", spec.target_fidelity_b, &spec.protocol.node_b}}) {
    const auto cal = calibrate_gate_error(target);
    node->local_gate_error = cal.local_gate_error;
    t.add({label, fmt(target), fmt(cal.local_gate_error), fmt(per_gate_error(cal.local_gate_error)),
           fmt(cal.benchmark_fidelity)});
    ctx.say(std::string("node ") + label + ": local_gate_error = " + format_double(cal.local_gate_error));
  }
  return {{"calibration.csv", render_table(t, ctx.spec, "calibrate")},
          {"calibrated.cfg", emit_manifest(spec, {"gate errors calibrated to the benchmark targets"})}};
}

struct Check {
  std::string name;
  bool passed;
  std::string detail;
};

// Fast self-consistency checks at the configured parameters.
inline std::vector<Check> validation_suite(const ExperimentSpec& spec) {
  std::vector<Check> checks;
  const auto& cfg = spec.protocol;
  auto add = [&](std::string name, bool ok, std::string detail) { checks.push_back({std::move(name), ok, std::move(detail)}); };

  double worst = 0;
  for (const auto& node : {cfg.node_a, cfg.node_b}) {
    worst = std::max(worst, kraus_completeness_error(dephasing_channel(memory_storage_decay(cfg.n2_max, node))));
    const auto dep = depolarizing_channel(per_gate_error(node.local_gate_error), 2);
    worst = std::max(worst, kraus_completeness_error(dep));
  }
  add("kraus_completeness", worst < tol::physical, "max error " + format_double(worst));

  bool monotone = true;
  for (const auto& node : {cfg.node_a, cfg.node_b})
    for (long long n = 0; n < 2000; ++n)
      monotone = monotone && memory_storage_decay(n + 1, node) >= memory_storage_decay(n, node);
  add("storage_decay_monotone", monotone, "n in [0, 2000]");

  const auto ideal = ProtocolConfig::ideal(cfg.theta);
  double ideal_dev = 0;
  for (Sign s1 : {Sign::plus, Sign::minus})
    for (Sign s2 : {Sign::plus, Sign::minus})
      for (double phi : {0.0, 1.1, 4.0}) {
        auto rho = initial_register(raw_state(cfg.theta, s1, phi));
        rho = swap_to_memory(rho, Node::A, ideal.node_a);
        rho = swap_to_memory(rho, Node::B, ideal.node_b);
        rho = load_communication_pair(rho, raw_state(cfg.theta, s2, phi));
        const auto br = distill_branches(apply_distillation_gates(rho, ideal));
        const auto aligned = aligned_memory_state(br[0].memories, {s1, s2});
        ideal_dev = std::max(ideal_dev, 1.0 - fidelity_with_pure(aligned, states::psi_plus()));
      }
  add("ideal_distilled_fidelity", ideal_dev < 1e-9, "max 1-F " + format_double(ideal_dev));

  double sum_dev = 0;
  for (const ProtocolConfig* c : {&ideal, &cfg}) {
    auto rho = initial_register(raw_state(c->theta, Sign::plus, 0.7, c->photonics.visibility));
    rho = swap_to_memory(rho, Node::A, c->node_a);
    rho = swap_to_memory(rho, Node::B, c->node_b);
    rho = storage_and_feedback(rho, c->n2_max, *c);
    rho = load_communication_pair(rho, raw_state(c->theta, Sign::minus, 0.7, c->photonics.visibility));
    double total = 0;
    for (const auto& b : distill_branches(apply_distillation_gates(rho, *c))) total += b.probability;
    sum_dev = std::max(sum_dev, std::abs(total - 1.0));
  }
  add("branch_probabilities_sum_to_one", sum_dev < tol::physical, "max deviation " + format_double(sum_dev));

  // Checked without storage: memory dephasing acts as a bit flip in the raw
  // frame and lets a flipped |00> admixture pick up the optical phase.
  double phase_dev = 0;
  {
    auto run = [&](double phi) {
      auto rho = initial_register(raw_state(cfg.theta, Sign::plus, phi, cfg.photonics.visibility));
      rho = swap_to_memory(rho, Node::A, cfg.node_a);
      rho = swap_to_memory(rho, Node::B, cfg.node_b);
      rho = load_communication_pair(rho, raw_state(cfg.theta, Sign::plus, phi, cfg.photonics.visibility));
      const auto out = distill_branches(apply_distillation_gates(rho, cfg))[0].memories;
      return fidelity_with_pure(aligned_memory_state(out, {Sign::plus, Sign::plus}), states::psi_plus());
    };
    const double ref = run(0.0);
    for (double phi : {0.4, 2.0, 5.5}) phase_dev = std::max(phase_dev, std::abs(run(phi) - ref));
  }
  add("correlated_phase_immunity", phase_dev < 1e-9, "max |delta F| " + format_double(phase_dev));

  double bench_dev = 0;
  for (const auto& node : {cfg.node_a, cfg.node_b})
    bench_dev = std::max(bench_dev, std::abs(local_benchmark_fidelity(node) - (1.0 - 0.75 * node.local_gate_error)));
  add("benchmark_fidelity_model", bench_dev < 1e-9, "max deviation " + format_double(bench_dev));

  RandomStream rng(spec.seed, 0xfeedULL);
  double fid_dev = 0, en_dev = 0;
  for (int k = 0; k < 20; ++k) {
    const auto rho = states::random_mixed(2, rng);
    const auto c = correlators(rho);
    fid_dev = std::max(fid_dev, std::abs(c.fidelity() - fidelity_with_pure(rho, states::psi_plus())));
    const auto u = gates::ry(rng.uniform() * 6.0) * gates::rz(rng.uniform() * 6.0);
    const auto v = gates::rx(rng.uniform() * 6.0) * gates::rz(rng.uniform() * 6.0);
    const auto rotated = apply_gate(apply_gate(rho, u, {0}), v, {1});
    en_dev = std::max(en_dev, std::abs(log_negativity(rotated) - log_negativity(rho)));
  }
  add("bell_fidelity_from_correlators", fid_dev < 1e-12, "max deviation " + format_double(fid_dev));
  add("negativity_local_unitary_invariance", en_dev < 1e-9, "max deviation " + format_double(en_dev));
  return checks;
}

inline int cmd_validate(const Context& ctx) {
  const auto checks = validation_suite(ctx.spec);
  std::size_t passed = 0;
  for (const auto& c : checks) {
    passed += c.passed ? 1 : 0;
    ctx.say(std::string(c.passed ? "PASS " : "FAIL ") + c.name + " (" + c.detail + ")");
  }
  ctx.out << "validate: " << passed << "/" << checks.size() << " checks passed\n";
  return passed == checks.size() ? ExitCode::ok : ExitCode::runtime_error;
}

inline void print_error(std::ostream& err, const std::string& kind, const std::string& detail) {
  err << "error kind=" << kind << ' ' << detail << '\n';
}

// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entanglement distillation simulator", "distill"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  Options opts;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t trials = 0;
  app.add_option("--config", opts.config_path, "Configuration file")->required();
  auto* seed_opt = app.add_option("--seed", seed, "Override experiment.seed");
  auto* out_opt = app.add_option("--out", out_dir, "Override experiment.output_dir");
  auto* trials_opt = app.add_option("--trials", trials, "Override experiment.trials")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", opts.quiet, "Only print errors and final summaries");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "Run trials at the configured point"},
      {"sweep-theta", "Distilled fidelity across the theta list"},
      {"memory-decay", "Memory storage and phase feedback experiments"},
      {"ebit-rate", "Ebit rate per theta and event-rate scaling with p_det"},
      {"calibrate", "Gate error from the local benchmark fidelity targets"},
      {"validate", "Self-consistency checks at the configured parameters"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return ExitCode::ok;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return ExitCode::ok;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", "message=" + quote(e.what()));
    return ExitCode::usage_error;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  ExperimentSpec spec;
  try {
    spec = load_config(opts.config_path);
    if (*seed_opt) spec.seed = seed;
    if (*out_opt) spec.output_dir = out_dir;
    if (*trials_opt) spec.trials = trials;
    spec.validate();
  } catch (const ConfigError& e) {
    print_error(err, "config", "path=" + quote(e.source()) + " line=" + std::to_string(e.line()) + " key=" +
                                   quote(e.key()) + " invariant=" + e.invariant() + " message=" + quote(e.message()));
    return ExitCode::usage_error;
  } catch (const InvariantError& e) {
    print_error(err, "config", "path=" + quote(opts.config_path) + " invariant=" + e.invariant() + " message=" + quote(e.what()));
    return ExitCode::usage_error;
  }

  Context ctx{spec, opts, out};
  try {
    const auto start = std::chrono::steady_clock::now();
    if (command == "validate") return cmd_validate(ctx);
    std::vector<OutputFile> files;
    if (command == "simulate") files = cmd_simulate(ctx);
    else if (command == "sweep-theta") files = cmd_sweep_theta(ctx);
    else if (command == "memory-decay") files = cmd_memory_decay(ctx);
    else if (command == "ebit-rate") files = cmd_ebit_rate(ctx);
    else files = cmd_calibrate(ctx);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    files.push_back({"manifest.txt", manifest(spec, command, seconds)});
    commit_outputs(spec.output_dir, files);
    ctx.say("wrote " + std::to_string(files.size()) + " files to " + spec.output_dir);
    return ExitCode::ok;
  } catch (const InvariantError& e) {
    print_error(err, "invariant", "invariant=" + e.invariant() + " message=" + quote(e.what()));
    return ExitCode::runtime_error;
  } catch (const std::exception& e) {
    print_error(err, "runtime", "message=" + quote(e.what()));
    return ExitCode::runtime_error;
  }
}

}  // namespace distill::cli
