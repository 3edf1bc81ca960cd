#include "qfilt/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace qfilt {

namespace {

using json = nlohmann::ordered_json;

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    return out;
}

void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
}

json diag_json(const TrajectoryDiag& d) {
    json j;
    j["max_defect"] = d.max_defect;
    j["max_top_population"] = d.max_top_population;
    j["leak_warnings"] = d.leak_warnings;
    j["guard_warnings"] = d.guard_warnings;
    j["min_eigenvalue"] = d.min_eigenvalue;
    return j;
}

json mean_se_json(const MeanWithSe& v) {
    json j;
    j["mean"] = v.mean;
    j["se"] = v.se;  // serialized as null when undefined (NaN)
    return j;
}

}  // namespace

std::string version_string() {
#ifdef QFILT_VERSION
    return QFILT_VERSION;
#else
    return "unknown";
#endif
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_series_csv(const std::string& path,
                      const std::vector<SampleRow>& rows) {
    std::ofstream out = open_out(path);
    out << "t,re_b,im_b,n,purity,defect\n";
    for (const SampleRow& r : rows) {
        out << format_double(r.t) << ',' << format_double(r.re_b) << ','
            << format_double(r.im_b) << ',' << format_double(r.n) << ','
            << format_double(r.purity) << ',' << format_double(r.defect)
            << '\n';
    }
    finish(out, path);
}

std::vector<SampleRow> master_series(const MasterRun& run) {
    std::vector<SampleRow> rows;
    rows.reserve(run.states.size());
    for (std::size_t s = 0; s < run.states.size(); ++s) {
        const DensityMatrix& sigma = run.states[s];
        const int dim = int(sigma.rows());
        Complex mb = 0.0;
        for (int i = 0; i + 1 < dim; ++i) {
            mb += std::sqrt(double(i + 1)) * sigma(i + 1, i);
        }
        double mn = 0.0;
        for (int i = 0; i < dim; ++i) mn += double(i) * sigma(i, i).real();
        SampleRow row;
        row.t = run.grid[s];
        row.re_b = mb.real();
        row.im_b = mb.imag();
        row.n = mn;
        row.purity = purity(sigma);
        row.defect = trace_defect(sigma);
        rows.push_back(row);
    }
    return rows;
}

std::vector<SampleRow> ensemble_mean_series(const EnsembleStats& stats) {
    std::vector<SampleRow> rows;
    rows.reserve(stats.obs.size());
    for (const EnsembleSampleStats& e : stats.obs) {
        SampleRow row;
        row.t = e.t;
        row.re_b = e.re_b.mean;
        row.im_b = e.im_b.mean;
        row.n = e.n.mean;
        row.purity = e.mean_purity;
        row.defect = 0.0;
        rows.push_back(row);
    }
    return rows;
}

void write_jump_record_jsonl(const std::string& path,
                             const JumpTrajectory& traj, double dt) {
    std::ofstream out = open_out(path);
    json j;
    j["type"] = "jump_record";
    j["base_seed"] = traj.base_seed;
    j["trajectory_index"] = traj.trajectory_index;
    j["method"] = traj.method == JumpMethod::waiting_time ? "waiting_time"
                                                          : "euler_bernoulli";
    j["dt"] = dt;
    if (traj.record.epsilon) {
        j["epsilon"] = *traj.record.epsilon;
    } else {
        j["epsilon"] = nullptr;
    }
    j["n_jumps"] = traj.record.jump_times.size();
    j["jump_times"] = traj.record.jump_times;
    out << j.dump() << '\n';
    finish(out, path);
}

void write_noise_record_jsonl(const std::string& path,
                              const DiffusionTrajectory& traj, double dt) {
    std::ofstream out = open_out(path);
    json j;
    j["type"] = "noise_record";
    j["base_seed"] = traj.base_seed;
    j["trajectory_index"] = traj.trajectory_index;
    j["dt"] = dt;
    j["n_steps"] = traj.w_increments.size();
    j["w_increments"] = traj.w_increments;
    out << j.dump() << '\n';
    finish(out, path);
}

void write_ensemble_stats_jsonl(const std::string& path,
                                const EnsembleStats& stats) {
    std::ofstream out = open_out(path);
    for (const EnsembleSampleStats& e : stats.obs) {
        json j;
        j["t"] = e.t;
        j["re_b"] = mean_se_json(e.re_b);
        j["im_b"] = mean_se_json(e.im_b);
        j["n"] = mean_se_json(e.n);
        j["purity"] = e.mean_purity;
        out << j.dump() << '\n';
    }
    json s;
    s["type"] = "summary";
    s["unraveling"] = to_string(stats.unraveling);
    s["dt"] = stats.dt;
    s["n_requested"] = stats.n_requested;
    s["n_completed"] = stats.n_completed;
    s["n_aborted"] = stats.n_aborted;
    s["n_batches"] = stats.n_batches;
    if (stats.unraveling != Unraveling::diffusion) {
        s["mean_count"] = stats.mean_count;
        s["count_variance"] = stats.count_variance;
        s["count_histogram"] = stats.count_histogram;
    }
    s["has_w_moments"] = stats.has_w_moments;
    if (stats.has_w_moments) {
        s["w_mean_rate"] = stats.w_mean_rate;
        s["w_var_rate"] = stats.w_var_rate;
    }
    s["diag"] = diag_json(stats.diag);
    out << s.dump() << '\n';
    finish(out, path);
}

void write_validation_json(const std::string& path,
                           const ValidationReport& report) {
    std::ofstream out = open_out(path);
    json j;
    j["pass"] = report.pass;
    j["conclusive"] = report.conclusive;
    j["bound"] = report.bound;
    j["max_trace_distance"] = report.max_trace_distance;
    j["t_at_max"] = report.t_at_max;
    j["max_abs_z"] = report.max_abs_z;
    j["n_completed"] = report.n_completed;
    j["trace_distances"] = report.trace_distances;
    out << j.dump(2) << '\n';
    finish(out, path);
}

void write_eps_report_jsonl(const std::string& path,
                            const EpsConvergenceReport& report) {
    std::ofstream out = open_out(path);
    for (const EpsConvergenceEntry& e : report.entries) {
        json j;
        j["type"] = "eps_entry";
        j["eps"] = e.eps;
        j["dt"] = e.dt;
        j["max_deviation"] = e.max_deviation;
        j["se_at_max"] = e.se_at_max;
        j["w_mean_rate"] = e.w_mean_rate;
        j["w_var_rate"] = e.w_var_rate;
        j["mean_x"] = e.mean_x;
        j["se_x"] = e.se_x;
        j["mean_n"] = e.mean_n;
        j["se_n"] = e.se_n;
        out << j.dump() << '\n';
    }
    json b;
    b["type"] = "diffusion_baseline";
    b["dt"] = report.diffusion_dt;
    b["grid"] = report.grid;
    b["mean_x"] = report.diff_mean_x;
    b["se_x"] = report.diff_se_x;
    b["mean_n"] = report.diff_mean_n;
    b["se_n"] = report.diff_se_n;
    out << b.dump() << '\n';
    json s;
    s["type"] = "summary";
    s["n_traj"] = report.n_traj;
    s["resolvable"] = report.resolvable;
    s["monotone_within_2se"] = report.monotone_within_2se;
    out << s.dump() << '\n';
    finish(out, path);
}

void write_manifest(const std::string& path, const RunConfig& config,
                    const std::string& command) {
    const json resolved = json::parse(emit_config(config));
    json root;
    json meta;
    meta["version"] = version_string();
    meta["command"] = command;
    root["meta"] = std::move(meta);
    for (const auto& [key, value] : resolved.items()) {
        root[key] = value;
    }
    std::ofstream out = open_out(path);
    out << root.dump(2) << '\n';
    finish(out, path);
}

}  // namespace qfilt
