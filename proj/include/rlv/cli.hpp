#pragma once

// Command-line front end. Every subcommand is a plain function returning an
// exit code so the whole surface can be driven in-process by tests.

#include <rlv/plot_data.hpp>
#include <rlv/synthetic_aero.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace rlv::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kNotConverged = 3, kFailure = 4 };

struct Streams {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
};

namespace detail {

// Input, schema and configuration problems are the caller's to fix (2);
// anything else escaping a solve is an internal failure (4).
inline int classify(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const IoError*>(&e) ||
      dynamic_cast<const DataError*>(&e) || dynamic_cast<const InvalidInput*>(&e))
    return kUsage;
  return kFailure;
}

template <class F> int guarded(Streams s, const char* cmd, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    s.err << cmd << ": error: " << e.what() << '\n';
    return classify(e);
  }
}

inline ScenarioConfig load_with_threads(const std::string& path, int threads) {
  ScenarioConfig c = load_scenario(path);
  if (threads > 0) {
    c.threads = threads;
    c.discretization.threads = threads;
    c.reach.threads = threads;
  }
  return c;
}

inline std::filesystem::path archive_dir_for(const std::filesystem::path& reach_out) {
  return reach_out.parent_path() / (reach_out.stem().string() + "_archive");
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct FitTablesArgs {
  std::string input, output, report;
};

inline int cmd_fit_tables(const FitTablesArgs& a, Streams s = {}) {
  return detail::guarded(s, "fit-tables", [&] {
    IngestResult r = ingest_sweeps(a.input);
    save_aero_database(r.db, a.output);
    json rep = {{"kind", "fit-report"},
                {"tool_version", kToolVersion},
                {"input", a.input},
                {"rows_accepted", r.report.accepted},
                {"rows_rejected", r.report.rejected},
                {"polar_lin", rlv::detail::grid_to_json(r.db.polar_lin)},
                {"polar_cst", rlv::detail::grid_to_json(r.db.polar_cst)}};
    const std::string rp = a.report.empty() ? a.output + ".report.json" : a.report;
    write_json(rep, rp);
    s.out << "fit-tables: " << r.report.accepted << " rows, " << r.report.rejected.size() << " rejected -> "
          << a.output << '\n';
    for (const auto& line : r.report.rejected) s.err << "  rejected " << line << '\n';
    return int(kOk);
  });
}

struct GenSweepsArgs {
  std::string output;
};

inline int cmd_gen_sweeps(const GenSweepsArgs& a, Streams s = {}) {
  return detail::guarded(s, "gen-sweeps", [&] {
    const auto rows = generate_sweep_rows(SyntheticAero{});
    const auto parent = std::filesystem::path(a.output).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(a.output, std::ios::binary);
    if (!out) throw IoError("cannot write " + a.output);
    write_sweep_csv(out, rows);
    if (!out) throw IoError("write failed: " + a.output);
    s.out << "gen-sweeps: " << rows.size() << " rows -> " << a.output << '\n';
    return int(kOk);
  });
}

struct InitConfigArgs {
  std::string output, aerodb;
};

inline int cmd_init_config(const InitConfigArgs& a, Streams s = {}) {
  return detail::guarded(s, "init-config", [&] {
    ScenarioConfig c;
    c.aerodb_path = a.aerodb;
    c.validate();
    write_json(scenario_to_json(c), a.output);
    s.out << "init-config: reference scenario -> " << a.output << '\n';
    return int(kOk);
  });
}

struct OptimizeArgs {
  std::string config, objective = "min-fuel", out, report;
  int threads = 0;  // 0 keeps the config value
};

inline std::optional<Objective> parse_objective(const std::string& s) {
  if (s == "min-fuel") return Objective::min_fuel();
  if (s == "min-time") return Objective::min_time();
  return std::nullopt;
}

inline int cmd_optimize(const OptimizeArgs& a, Streams s = {}) {
  const auto obj = parse_objective(a.objective);
  if (!obj) {
    s.err << "optimize: unknown objective '" << a.objective << "' (expected min-fuel or min-time)\n";
    return kUsage;
  }
  return detail::guarded(s, "optimize", [&] {
    const ScenarioConfig c = detail::load_with_threads(a.config, a.threads);
    const std::string hash = config_hash(c);
    const Scenario sc = build_scenario(c);
    ScpSolver solver(sc.transcription, c.problem, c.scp);
    const ScpIterate init = solver.zero_control_guess(c.guess_tau_a_s, c.guess_tau_p_s);
    const ScpResult r = solver.solve(init, *obj);
    write_json(trajectory_to_json(r, *sc.transcription, c.problem, *obj, hash), a.out);
    if (!a.report.empty()) write_json(report_to_json(r.report, hash), a.report);
    const DilatedTime d = sc.transcription->dilation_seconds(r.best.traj);
    s.out << "optimize: " << to_string(r.report.status) << " after " << r.report.iterations
          << " iterations, violation " << r.eval.max_violation() << ", flight time " << d.tau_a + d.tau_p
          << " s, final mass " << r.best.traj.X.back()[kIdxM] * c.discretization.scales.mass << " kg\n";
    switch (r.report.status) {
      case SolveStatus::Converged: return int(kOk);
      case SolveStatus::MaxIterations: return int(kNotConverged);
      case SolveStatus::SolverFailure: break;
    }
    s.err << "optimize: " << r.report.message << '\n';
    return int(kFailure);
  });
}

struct ReachArgs {
  std::string config, init, out, resume, checkpoint;
  std::optional<int> iters, checkpoint_every, batch;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool quiet = false;
};

// Writes the reach document and one trajectory document per archive entry.
inline void write_reach_outputs(const ReachState& st, const Transcription& tr, const std::string& hash,
                                const std::string& out) {
  const auto dir = detail::archive_dir_for(out);
  std::filesystem::create_directories(dir);
  for (const auto& e : st.archive)
    write_json(archive_entry_to_json(e, hash, &tr), (dir / ("traj_" + std::to_string(e.key) + ".json")).string());
  json j = reach_to_json(st, hash);
  j["archive_dir"] = dir.filename().string();
  write_json(j, out);
}

inline int cmd_reach(const ReachArgs& a, Streams s = {}) {
  return detail::guarded(s, "reach", [&]() -> int {
    ScenarioConfig c = detail::load_with_threads(a.config, a.threads);
    // Hash of the file as written, so command-line overrides do not orphan
    // the initializer or a checkpoint.
    const std::string hash = config_hash(c);
    if (a.iters) c.reach.iters = *a.iters;
    if (a.seed) c.reach.seed = *a.seed;
    if (a.checkpoint_every) c.reach.checkpoint_every = *a.checkpoint_every;
    if (a.batch) c.reach.batch = *a.batch;
    c.validate();
    const Scenario sc = build_scenario(c);
    ReachRunner runner(sc.transcription, c.problem, c.reach);

    ReachState st;
    if (!a.resume.empty()) {
      const json ck = read_json(a.resume);
      if (ck.value("config_hash", "") != hash)
        throw ConfigError("checkpoint " + a.resume + " was written under a different configuration");
      st = checkpoint_from_json(ck);
      if (st.seed != c.reach.seed) throw ConfigError("checkpoint seed differs from the requested seed");
    } else {
      if (a.init.empty()) throw ConfigError("reach: --init is required unless --resume is given");
      const TrajectoryDoc d = trajectory_from_json(read_json(a.init));
      if (d.config_hash != hash)
        s.err << "reach: warning: " << a.init << " was solved under config " << d.config_hash << ", not " << hash
              << '\n';
      if (d.status != to_string(SolveStatus::Converged)) {
        s.err << "reach: initial trajectory status is '" << d.status << "', need converged\n";
        return int(kNotConverged);
      }
      ScpResult init;
      init.best = d.iterate;
      init.report.status = SolveStatus::Converged;
      if (static_cast<int>(init.best.traj.X.size()) != sc.transcription->N())
        throw DataError("reach: initial trajectory node count differs from the configuration");
      st = runner.init_polytope(init);
    }

    const std::string ckpt = a.checkpoint.empty() ? a.out + ".checkpoint.json" : a.checkpoint;
    auto on_ckpt = [&](const ReachState& x) { write_json(checkpoint_to_json(x, hash), ckpt); };
    auto on_progress = [&](const ReachState& x, const ExpansionAttempt& at) {
      if (a.quiet) return;
      s.err << "reach: " << at.index + 1 << "/" << c.reach.iters << " " << to_string(at.status)
            << " mu=" << at.mu_m << " m volume=" << x.hull.volume() << " m^3 (" << at.wall_s << " s)\n";
    };
    runner.run(st, c.reach.iters, on_ckpt, on_progress);
    write_reach_outputs(st, *sc.transcription, hash, a.out);
    s.out << "reach: " << st.attempts.size() << " attempts, " << st.count(AttemptStatus::Accepted)
          << " accepted, " << st.hull.vertices().size() << " vertices, volume " << st.hull.volume() << " m^3\n";
    return int(kOk);
  });
}

struct EmitPlotsArgs {
  std::string in, out;
};

inline int cmd_emit_plots(const EmitPlotsArgs& a, Streams s = {}) {
  return detail::guarded(s, "emit-plots", [&] {
    const json doc = read_json(a.in);
    const std::string kind = doc.is_object() ? doc.value("kind", "") : "";
    std::vector<std::string> files;
    if (kind == "trajectory") {
      files = emit_trajectory_plots(doc, a.out);
    } else if (kind == "reach") {
      const auto base = std::filesystem::path(a.in).parent_path();
      const auto dir = doc.contains("archive_dir") ? base / doc.at("archive_dir").get<std::string>()
                                                   : detail::archive_dir_for(a.in);
      files = emit_reach_plots(doc, dir, a.out);
    } else {
      throw DataError("emit-plots: " + a.in + " is neither a trajectory nor a reach document");
    }
    s.out << "emit-plots: " << files.size() << " files -> " << a.out << '\n';
    return int(kOk);
  });
}

// ---------------------------------------------------------------------------

inline int run(std::vector<std::string> args, Streams s = {}) {
  CLI::App app{"Two-phase descent optimization and ignition reachability", "rlvreach"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Cap on worker threads (0 keeps the config value)")
      ->check(CLI::NonNegativeNumber);

  FitTablesArgs fit;
  auto* c_fit = app.add_subcommand("fit-tables", "Build an aero database from sweep CSV");
  c_fit->add_option("--input", fit.input, "Sweep CSV")->required();
  c_fit->add_option("--output", fit.output, "Database JSON")->required();
  c_fit->add_option("--report", fit.report, "Ingestion report JSON (default <output>.report.json)");

  GenSweepsArgs gen;
  auto* c_gen = app.add_subcommand("gen-sweeps", "Write sweeps from the analytic synthetic model");
  c_gen->add_option("--output", gen.output, "Sweep CSV")->required();

  InitConfigArgs ic;
  auto* c_ic = app.add_subcommand("init-config", "Write the reference scenario configuration");
  c_ic->add_option("--output", ic.output, "Scenario JSON")->required();
  c_ic->add_option("--aerodb", ic.aerodb, "Aero database path, relative to the config file")->required();

  OptimizeArgs opt;
  auto* c_opt = app.add_subcommand("optimize", "Solve the min-fuel or min-time descent");
  c_opt->add_option("--config", opt.config, "Scenario JSON")->required();
  c_opt->add_option("--objective", opt.objective, "min-fuel or min-time");
  c_opt->add_option("--out", opt.out, "Trajectory JSON")->required();
  c_opt->add_option("--report", opt.report, "Solve report JSON");

  ReachArgs rch;
  auto* c_r = app.add_subcommand("reach", "Grow the ignition-point reachable set");
  c_r->add_option("--config", rch.config, "Scenario JSON")->required();
  c_r->add_option("--init", rch.init, "Converged min-fuel trajectory JSON");
  c_r->add_option("--iters", rch.iters, "Total expansion attempts")->check(CLI::NonNegativeNumber);
  c_r->add_option("--seed", rch.seed, "Random seed");
  c_r->add_option("--out", rch.out, "Reach JSON")->required();
  c_r->add_option("--checkpoint-every", rch.checkpoint_every, "Checkpoint period in attempts")
      ->check(CLI::NonNegativeNumber);
  c_r->add_option("--checkpoint", rch.checkpoint, "Checkpoint path (default <out>.checkpoint.json)");
  c_r->add_option("--resume", rch.resume, "Resume from a checkpoint");
  c_r->add_option("--batch", rch.batch, "Attempts solved per hull snapshot")->check(CLI::PositiveNumber);
  c_r->add_flag("--quiet", rch.quiet, "No per-attempt progress");

  EmitPlotsArgs ep;
  auto* c_ep = app.add_subcommand("emit-plots", "Write plot-ready CSV from a trajectory or reach document");
  c_ep->add_option("--in", ep.in, "Trajectory or reach JSON")->required();
  c_ep->add_option("--out", ep.out, "Output directory")->required();

  std::vector<const char*> argv{"rlvreach"};
  for (const auto& x : args) argv.push_back(x.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    s.out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    s.out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::Success&) {
    return kOk;
  } catch (const CLI::ParseError& e) {
    s.err << "rlvreach: " << e.what() << '\n';
    return kUsage;
  }

  if (*c_fit) return cmd_fit_tables(fit, s);
  if (*c_gen) return cmd_gen_sweeps(gen, s);
  if (*c_ic) return cmd_init_config(ic, s);
  if (*c_opt) {
    opt.threads = threads;
    return cmd_optimize(opt, s);
  }
  if (*c_r) {
    rch.threads = threads;
    return cmd_reach(rch, s);
  }
  if (*c_ep) return cmd_emit_plots(ep, s);
  return kUsage;
}

}  // namespace rlv::cli
