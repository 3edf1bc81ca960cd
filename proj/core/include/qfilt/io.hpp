// Structured output: observable series as CSV (header row, fixed column
// order t,re_b,im_b,n,purity,defect, floats printed with 17 significant
// digits so the text round-trips to the same doubles), everything else as
// JSON lines with one object per grid sample or per summary. Writers are
// pure functions of their inputs — identical inputs give identical bytes.

#pragma once

#include <string>
#include <vector>

#include "qfilt/config.hpp"
#include "qfilt/counting.hpp"
#include "qfilt/diffusion.hpp"
#include "qfilt/ensemble.hpp"
#include "qfilt/master.hpp"

namespace qfilt {

// Library version baked in at build time.
std::string version_string();

// Shortest text that parses back to exactly x (printf %.17g).
std::string format_double(double x);

void write_series_csv(const std::string& path,
                      const std::vector<SampleRow>& rows);

// Observable rows derived from a deterministic density-matrix run
// (defect column = per-sample trace defect).
std::vector<SampleRow> master_series(const MasterRun& run);

// Per-sample ensemble means shaped as a series (purity column = mean purity,
// defect column = 0).
std::vector<SampleRow> ensemble_mean_series(const EnsembleStats& stats);

// Records: one summary object per trajectory.
void write_jump_record_jsonl(const std::string& path,
                             const JumpTrajectory& traj, double dt);
void write_noise_record_jsonl(const std::string& path,
                              const DiffusionTrajectory& traj, double dt);

// Ensemble statistics: one object per grid sample, then one summary object.
void write_ensemble_stats_jsonl(const std::string& path,
                                const EnsembleStats& stats);

void write_validation_json(const std::string& path,
                           const ValidationReport& report);

// One object per eps entry, then the baseline/summary object.
void write_eps_report_jsonl(const std::string& path,
                            const EpsConvergenceReport& report);

// Fully resolved config plus a "meta" section (version, subcommand). The
// manifest is itself a valid config file: re-running from it reproduces the
// outputs byte for byte.
void write_manifest(const std::string& path, const RunConfig& config,
                    const std::string& command);

}  // namespace qfilt
