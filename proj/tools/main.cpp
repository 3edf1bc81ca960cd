// qfilt: conditional dynamics of a driven cavity mode under continuous
// observation of its output channel.
//
// Subcommands:
//   master           deterministic evolution of the average state
//   trajectory       one conditional trajectory (counting/heterodyne/diffusion)
//   ensemble         trajectory ensemble with deterministic statistics
//   validate         ensemble mean against the average-state evolution
//   eps-convergence  scaled jump record against the diffusion limit
//
// Exit codes: 0 pass, 1 validation fail, 2 config error, 3 inconclusive,
// 4 numerical abort.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include <CLI11.hpp>

#include "qfilt/config.hpp"
#include "qfilt/diffusion.hpp"
#include "qfilt/heterodyne.hpp"
#include "qfilt/io.hpp"

namespace fs = std::filesystem;
using namespace qfilt;

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> out_dir;
    std::optional<std::string> unraveling;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_unraveling) {
    cmd->add_option("--config", f.config_path, "JSON config file")->required();
    cmd->add_option("--seed", f.seed, "override run.seed");
    cmd->add_option("--workers", f.workers,
                    "worker threads (default: config, then QFILT_WORKERS, "
                    "then hardware)");
    cmd->add_option("--out", f.out_dir, "override output.dir");
    if (with_unraveling) {
        cmd->add_option("--unraveling", f.unraveling, "override run.unraveling")
            ->check(CLI::IsMember({"counting", "heterodyne", "diffusion"}));
    }
}

RunConfig load_and_override(const CommonFlags& f) {
    RunConfig cfg = load_config(f.config_path);
    if (f.seed) cfg.seed = *f.seed;
    if (f.out_dir) cfg.output.dir = *f.out_dir;
    if (f.unraveling) {
        if (*f.unraveling == "counting") {
            cfg.unraveling = Unraveling::counting;
        } else if (*f.unraveling == "heterodyne") {
            cfg.unraveling = Unraveling::heterodyne;
        } else {
            cfg.unraveling = Unraveling::diffusion;
        }
    }
    return cfg;
}

fs::path prepare_out_dir(const RunConfig& cfg) {
    fs::path dir = cfg.output.dir;
    fs::create_directories(dir);
    return dir;
}

fs::path out_file(const fs::path& dir, const RunConfig& cfg,
                  const std::string& suffix) {
    return dir / (cfg.output.prefix + suffix);
}

int cmd_master(RunConfig cfg) {
    const MasterRun run =
        integrate_master(cfg.model, cfg.t_final, cfg.dt, cfg.sample_stride);
    const std::vector<SampleRow> rows = master_series(run);
    const fs::path dir = prepare_out_dir(cfg);
    if (cfg.output.csv) {
        write_series_csv(out_file(dir, cfg, "_master.csv").string(), rows);
    }
    write_manifest(out_file(dir, cfg, "_manifest.json").string(), cfg, "master");

    const SampleRow& last = rows.back();
    std::cout << "master: " << rows.size() << " samples to t = "
              << format_double(last.t) << ", final <n> = "
              << format_double(last.n) << ", purity = "
              << format_double(last.purity) << "\n";
    if (run.diag.dt_guard_warning) {
        std::cout << "warning: dt is coarse for the model rates; results may "
                     "carry visible integration error\n";
    }
    std::cout << "diagnostics: trace defect <= "
              << format_double(run.diag.max_trace_defect)
              << ", min eigenvalue = "
              << format_double(run.diag.min_eigenvalue) << ", renorms = "
              << run.diag.renorm_events << ", leak warnings = "
              << run.diag.leak_warnings << "\n";
    return 0;
}

int cmd_trajectory(RunConfig cfg) {
    TrajectoryParams tp;
    tp.t_final = cfg.t_final;
    tp.dt = cfg.dt;
    tp.base_seed = cfg.seed;
    tp.trajectory_index = 0;
    tp.method = cfg.method;
    tp.sample_stride = cfg.sample_stride;

    const fs::path dir = prepare_out_dir(cfg);
    const std::string series = out_file(dir, cfg, "_trajectory.csv").string();
    const std::string record = out_file(dir, cfg, "_record.jsonl").string();

    if (cfg.unraveling == Unraveling::diffusion) {
        const DiffusionTrajectory tr = simulate_diffusion(cfg.model, tp);
        if (cfg.output.csv) write_series_csv(series, tr.samples);
        if (cfg.output.jsonl) write_noise_record_jsonl(record, tr, cfg.dt);
        std::cout << "diffusion trajectory: " << tr.w_increments.size()
                  << " steps, final <n> = "
                  << format_double(tr.samples.back().n) << "\n";
    } else {
        const JumpTrajectory tr =
            cfg.unraveling == Unraveling::heterodyne
                ? simulate_heterodyne(cfg.model, tp)
                : simulate_counting(cfg.model, tp);
        if (cfg.output.csv) write_series_csv(series, tr.samples);
        if (cfg.output.jsonl) write_jump_record_jsonl(record, tr, cfg.dt);
        std::cout << to_string(cfg.unraveling) << " trajectory: "
                  << tr.record.jump_times.size() << " jumps, final <n> = "
                  << format_double(tr.samples.back().n) << "\n";
        if (tr.diag.guard_warnings > 0) {
            std::cout << "warning: jump probability per step exceeded 0.1 ("
                      << tr.diag.guard_warnings << " steps); shrink dt\n";
        }
    }
    write_manifest(out_file(dir, cfg, "_manifest.json").string(), cfg,
                   "trajectory");
    return 0;
}

void print_ensemble_summary(const EnsembleStats& stats) {
    std::cout << "ensemble: " << stats.n_completed << "/" << stats.n_requested
              << " trajectories (" << to_string(stats.unraveling) << "), "
              << stats.n_batches << " batches\n";
    if (stats.unraveling != Unraveling::diffusion) {
        std::cout << "jump count: mean = " << format_double(stats.mean_count)
                  << ", variance = " << format_double(stats.count_variance)
                  << "\n";
    }
    if (stats.has_w_moments) {
        std::cout << "noise record per unit time: mean = "
                  << format_double(stats.w_mean_rate)
                  << ", variance = " << format_double(stats.w_var_rate)
                  << "\n";
    }
}

int cmd_ensemble(RunConfig cfg, int workers) {
    const EnsembleStats stats = run_ensemble(cfg.ensemble_spec(), workers);
    const fs::path dir = prepare_out_dir(cfg);
    if (cfg.output.csv) {
        write_series_csv(out_file(dir, cfg, "_mean.csv").string(),
                         ensemble_mean_series(stats));
    }
    if (cfg.output.jsonl) {
        write_ensemble_stats_jsonl(out_file(dir, cfg, "_stats.jsonl").string(),
                                   stats);
    }
    write_manifest(out_file(dir, cfg, "_manifest.json").string(), cfg,
                   "ensemble");
    print_ensemble_summary(stats);
    return 0;
}

int cmd_validate(RunConfig cfg, int workers) {
    EnsembleSpec spec = cfg.ensemble_spec();
    spec.accumulate_mean_state = true;
    cfg.accumulate_mean_state = true;  // manifest echoes what actually ran
    const EnsembleStats stats = run_ensemble(spec, workers);
    const MasterRun reference =
        integrate_master(cfg.model, cfg.t_final, cfg.dt, cfg.sample_stride);
    const ValidationReport report = validate_against_master(stats, reference);

    const fs::path dir = prepare_out_dir(cfg);
    if (cfg.output.csv) {
        write_series_csv(out_file(dir, cfg, "_mean.csv").string(),
                         ensemble_mean_series(stats));
        write_series_csv(out_file(dir, cfg, "_reference.csv").string(),
                         master_series(reference));
    }
    if (cfg.output.jsonl) {
        write_ensemble_stats_jsonl(out_file(dir, cfg, "_stats.jsonl").string(),
                                   stats);
    }
    write_validation_json(out_file(dir, cfg, "_validation.json").string(),
                          report);
    write_manifest(out_file(dir, cfg, "_manifest.json").string(), cfg,
                   "validate");

    print_ensemble_summary(stats);
    std::cout << "max trace distance to reference = "
              << format_double(report.max_trace_distance) << " at t = "
              << format_double(report.t_at_max) << " (bound "
              << format_double(report.bound) << ", worst |z| = "
              << format_double(report.max_abs_z) << ")\n";
    if (!report.conclusive) {
        std::cout << "validation: INCONCLUSIVE (bound too loose at n = "
                  << report.n_completed << ")\n";
        return 3;
    }
    if (!report.pass) {
        std::cout << "validation: FAIL\n";
        return 1;
    }
    std::cout << "validation: PASS\n";
    return 0;
}

int cmd_eps_convergence(RunConfig cfg, int workers) {
    EpsConvergenceOptions options;
    options.n_traj = cfg.n_traj;
    options.t_final = cfg.t_final;
    options.base_seed = cfg.seed;
    options.workers = workers;
    const EpsConvergenceReport report =
        epsilon_convergence(cfg.model, cfg.eps_list, options);

    const fs::path dir = prepare_out_dir(cfg);
    if (cfg.output.jsonl) {
        write_eps_report_jsonl(out_file(dir, cfg, "_eps.jsonl").string(),
                               report);
    }
    write_manifest(out_file(dir, cfg, "_manifest.json").string(), cfg,
                   "eps-convergence");

    for (const EpsConvergenceEntry& e : report.entries) {
        std::cout << "eps = " << format_double(e.eps)
                  << ": max deviation = " << format_double(e.max_deviation)
                  << " (se " << format_double(e.se_at_max)
                  << "), record variance per unit time = "
                  << format_double(e.w_var_rate) << "\n";
    }
    if (!report.resolvable) {
        std::cout << "eps-convergence: INCONCLUSIVE (deviations below the "
                     "statistical floor at n_traj = "
                  << report.n_traj << ")\n";
        return 3;
    }
    if (!report.monotone_within_2se) {
        std::cout << "eps-convergence: FAIL (deviation does not shrink with "
                     "eps within two standard errors)\n";
        return 1;
    }
    std::cout << "eps-convergence: PASS\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Conditional dynamics of a driven cavity mode under continuous "
        "observation"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);

    CommonFlags f;
    CLI::App* c_master =
        app.add_subcommand("master", "deterministic average-state evolution");
    add_common(c_master, f, false);
    CLI::App* c_traj =
        app.add_subcommand("trajectory", "one conditional trajectory");
    add_common(c_traj, f, true);
    CLI::App* c_ens =
        app.add_subcommand("ensemble", "trajectory ensemble statistics");
    add_common(c_ens, f, true);
    CLI::App* c_val = app.add_subcommand(
        "validate", "ensemble mean vs average-state evolution");
    add_common(c_val, f, true);
    CLI::App* c_eps = app.add_subcommand(
        "eps-convergence", "scaled jump record vs diffusion limit");
    add_common(c_eps, f, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = load_and_override(f);
        if (app.got_subcommand(c_master)) return cmd_master(std::move(cfg));
        if (app.got_subcommand(c_traj)) return cmd_trajectory(std::move(cfg));
        const int workers = resolve_workers(f.workers, cfg.workers);
        cfg.workers = workers;
        if (app.got_subcommand(c_ens)) return cmd_ensemble(std::move(cfg), workers);
        if (app.got_subcommand(c_val)) return cmd_validate(std::move(cfg), workers);
        return cmd_eps_convergence(std::move(cfg), workers);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const NumericalAbort& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
