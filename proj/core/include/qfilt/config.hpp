// Run configuration: one JSON object with sections model / drive / lo / run /
// output (exact key names in docs/config-schema.md). Parsing is strict —
// unknown keys and type mismatches are rejected with the offending path in
// the message — and emit_config() writes the fully resolved form (every
// default filled in), so parse(emit(c)) == c and a manifest can be fed back
// in as a config file.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qfilt/ensemble.hpp"

namespace qfilt {

// Malformed or inconsistent configuration; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Initial-state selector, retained as written (building the state vector is
// lossy, which would break config round-tripping).
struct InitialSpec {
    enum class Kind { vacuum, fock, coherent, thermal };
    Kind kind = Kind::vacuum;
    int fock_n = 0;        // Kind::fock
    Complex beta = 0.0;    // Kind::coherent
    double mean_n = 0.0;   // Kind::thermal
    InitialState build(FockCutoff cutoff) const;
};

struct OutputSpec {
    std::string dir = "out";
    std::string prefix = "run";
    bool csv = true;    // observable series files
    bool jsonl = true;  // record / stats / report files
};

struct RunConfig {
    SystemModel model;  // model.initial already built from `initial`
    InitialSpec initial;
    Unraveling unraveling = Unraveling::counting;
    JumpMethod method = JumpMethod::euler_bernoulli;
    double t_final = 1.0;
    double dt = 1e-3;
    std::int64_t n_traj = 100;
    int sample_stride = 1;
    std::uint64_t seed = 0;
    int workers = 0;  // 0 = not fixed by the config; see resolve_workers
    bool accumulate_mean_state = false;
    std::vector<double> eps_list = {0.4, 0.2, 0.1, 0.05};  // eps-convergence
    OutputSpec output;

    // Assemble the ensemble spec this config describes.
    EnsembleSpec ensemble_spec() const;
};

// Parse from JSON text / file. Throws ConfigError with the dotted key path of
// the first problem. A top-level "meta" section (as written into manifests)
// is accepted and ignored.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical fully-resolved JSON (sections in fixed order, all defaults
// materialized). parse_config(emit_config(c)) reproduces c exactly.
std::string emit_config(const RunConfig& config);

// Worker-count resolution: command-line flag, then config, then the
// QFILT_WORKERS environment variable, then the hardware thread count.
int resolve_workers(std::optional<int> flag_value, int config_value);

}  // namespace qfilt
