#include "qfilt/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>
#include <utility>

#include <json.hpp>

namespace qfilt {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config: " + path + ": " + what);
}

// Strict accessor for one JSON object: every key must be looked up exactly
// once, and finish() rejects whatever was not consumed, naming it.
class Section {
  public:
    Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) fail(path_, "expected an object");
    }

    const json* find(const std::string& key) {
        consumed_.push_back(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    template <typename T>
    T get(const std::string& key, const char* type_name) {
        const json* v = find(key);
        if (!v) fail(path_ + "." + key, "missing required key");
        return cast<T>(*v, path_ + "." + key, type_name);
    }

    template <typename T>
    T get_or(const std::string& key, T fallback, const char* type_name) {
        const json* v = find(key);
        if (!v) return fallback;
        return cast<T>(*v, path_ + "." + key, type_name);
    }

    void finish() {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (std::find(consumed_.begin(), consumed_.end(), it.key()) ==
                consumed_.end()) {
                fail(path_ + "." + it.key(), "unknown key");
            }
        }
    }

    const std::string& path() const { return path_; }

  private:
    template <typename T>
    static T cast(const json& v, const std::string& path, const char* type_name) {
        if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) fail(path, std::string("expected ") + type_name);
            return v.get<double>();
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) fail(path, std::string("expected ") + type_name);
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) fail(path, std::string("expected ") + type_name);
            return v.get<std::string>();
        } else {
            static_assert(std::is_integral_v<T>);
            if (v.is_number_unsigned()) {
                const std::uint64_t x = v.get<std::uint64_t>();
                if (!std::in_range<T>(x)) fail(path, "value out of range");
                return T(x);
            }
            if (v.is_number_integer()) {
                const std::int64_t x = v.get<std::int64_t>();
                if (!std::in_range<T>(x)) fail(path, "value out of range");
                return T(x);
            }
            fail(path, std::string("expected ") + type_name);
        }
    }

    const json& obj_;
    std::string path_;
    std::vector<std::string> consumed_;
};

InitialSpec parse_initial(const json& v, const std::string& path) {
    Section sec(v, path);
    const std::string type = sec.get<std::string>("type", "string");
    InitialSpec spec;
    if (type == "vacuum") {
        spec.kind = InitialSpec::Kind::vacuum;
    } else if (type == "fock") {
        spec.kind = InitialSpec::Kind::fock;
        spec.fock_n = sec.get<int>("n", "integer");
    } else if (type == "coherent") {
        spec.kind = InitialSpec::Kind::coherent;
        spec.beta = Complex(sec.get_or<double>("beta_re", 0.0, "number"),
                            sec.get_or<double>("beta_im", 0.0, "number"));
    } else if (type == "thermal") {
        spec.kind = InitialSpec::Kind::thermal;
        spec.mean_n = sec.get<double>("mean_n", "number");
    } else {
        fail(path + ".type",
             "must be one of vacuum, fock, coherent, thermal (got \"" + type +
                 "\")");
    }
    sec.finish();
    return spec;
}

json emit_initial(const InitialSpec& spec) {
    json v;
    switch (spec.kind) {
        case InitialSpec::Kind::vacuum:
            v["type"] = "vacuum";
            break;
        case InitialSpec::Kind::fock:
            v["type"] = "fock";
            v["n"] = spec.fock_n;
            break;
        case InitialSpec::Kind::coherent:
            v["type"] = "coherent";
            v["beta_re"] = spec.beta.real();
            v["beta_im"] = spec.beta.imag();
            break;
        case InitialSpec::Kind::thermal:
            v["type"] = "thermal";
            v["mean_n"] = spec.mean_n;
            break;
    }
    return v;
}

Unraveling parse_unraveling_name(const std::string& name, const std::string& path) {
    if (name == "counting") return Unraveling::counting;
    if (name == "heterodyne") return Unraveling::heterodyne;
    if (name == "diffusion") return Unraveling::diffusion;
    fail(path, "must be one of counting, heterodyne, diffusion (got \"" + name +
                   "\")");
}

JumpMethod parse_method_name(const std::string& name, const std::string& path) {
    if (name == "euler_bernoulli") return JumpMethod::euler_bernoulli;
    if (name == "waiting_time") return JumpMethod::waiting_time;
    fail(path, "must be euler_bernoulli or waiting_time (got \"" + name + "\")");
}

}  // namespace

InitialState InitialSpec::build(FockCutoff cutoff) const {
    try {
        switch (kind) {
            case Kind::vacuum:
                return vacuum_state(cutoff);
            case Kind::fock:
                return fock_state(cutoff, fock_n);
            case Kind::coherent:
                return coherent_state(cutoff, beta);
            case Kind::thermal:
                return thermal_state(cutoff, mean_n);
        }
        throw std::logic_error("unreachable");
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: model.initial: ") + e.what());
    }
}

EnsembleSpec RunConfig::ensemble_spec() const {
    EnsembleSpec spec;
    spec.model = model;
    spec.unraveling = unraveling;
    spec.method = method;
    spec.n_traj = n_traj;
    spec.t_final = t_final;
    spec.dt = dt;
    spec.sample_stride = sample_stride;
    spec.base_seed = seed;
    spec.accumulate_mean_state = accumulate_mean_state;
    return spec;
}

RunConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: not valid JSON: ") + e.what());
    }
    Section top(root, "config");
    RunConfig cfg;

    {
        const json* v = top.find("model");
        if (!v) fail("config.model", "missing required section");
        Section sec(*v, "model");
        const int dim = sec.get<int>("dim", "integer");
        if (dim < 2) fail("model.dim", "must be >= 2");
        cfg.model.cutoff = FockCutoff(dim);
        cfg.model.omega = sec.get<double>("omega", "number");
        cfg.model.mu = sec.get<double>("mu", "number");
        if (const json* in = sec.find("initial")) {
            cfg.initial = parse_initial(*in, "model.initial");
        }
        sec.finish();
    }
    {
        const json* v = top.find("drive");
        if (!v) fail("config.drive", "missing required section");
        Section sec(*v, "drive");
        cfg.model.drive.lambda = sec.get<double>("lambda", "number");
        // The drive defaults to resonance with the cavity.
        cfg.model.drive.omega_f =
            sec.get_or<double>("omega_f", cfg.model.omega, "number");
        cfg.model.drive.phi = sec.get_or<double>("phi", 0.0, "number");
        sec.finish();
    }
    if (const json* v = top.find("lo")) {
        Section sec(*v, "lo");
        cfg.model.lo.enabled = sec.get_or<bool>("enabled", false, "boolean");
        if (cfg.model.lo.enabled) {
            cfg.model.lo.epsilon = sec.get<double>("epsilon", "number");
        } else {
            cfg.model.lo.epsilon =
                sec.get_or<double>("epsilon", 1.0, "number");
        }
        cfg.model.lo.theta = sec.get_or<double>("theta", 0.0, "number");
        cfg.model.lo.omega_r = sec.get_or<double>("omega_r", 0.0, "number");
        sec.finish();
    }
    bool dt_given = false;
    if (const json* v = top.find("run")) {
        Section sec(*v, "run");
        cfg.t_final = sec.get_or<double>("t_final", 1.0, "number");
        if (const json* d = sec.find("dt")) {
            if (!d->is_number()) fail("run.dt", "expected number");
            cfg.dt = d->get<double>();
            dt_given = true;
        }
        cfg.n_traj = sec.get_or<std::int64_t>("n_traj", 100, "integer");
        cfg.sample_stride = sec.get_or<int>("sample_stride", 1, "integer");
        cfg.seed = sec.get_or<std::uint64_t>("seed", 0, "integer");
        cfg.workers = sec.get_or<int>("workers", 0, "integer");
        cfg.unraveling = parse_unraveling_name(
            sec.get_or<std::string>("unraveling", "counting", "string"),
            "run.unraveling");
        cfg.method = parse_method_name(
            sec.get_or<std::string>("method", "euler_bernoulli", "string"),
            "run.method");
        cfg.accumulate_mean_state =
            sec.get_or<bool>("accumulate_mean_state", false, "boolean");
        if (const json* e = sec.find("eps_list")) {
            if (!e->is_array() || e->empty()) {
                fail("run.eps_list", "expected a non-empty array of numbers");
            }
            cfg.eps_list.clear();
            for (std::size_t i = 0; i < e->size(); ++i) {
                const json& x = (*e)[i];
                if (!x.is_number()) {
                    fail("run.eps_list[" + std::to_string(i) + "]",
                         "expected number");
                }
                cfg.eps_list.push_back(x.get<double>());
            }
        }
        sec.finish();
    }
    if (const json* v = top.find("output")) {
        Section sec(*v, "output");
        cfg.output.dir = sec.get_or<std::string>("dir", "out", "string");
        cfg.output.prefix = sec.get_or<std::string>("prefix", "run", "string");
        if (const json* f = sec.find("formats")) {
            if (!f->is_array()) fail("output.formats", "expected an array");
            cfg.output.csv = false;
            cfg.output.jsonl = false;
            for (const json& x : *f) {
                if (!x.is_string()) fail("output.formats", "expected strings");
                const std::string s = x.get<std::string>();
                if (s == "csv") {
                    cfg.output.csv = true;
                } else if (s == "jsonl") {
                    cfg.output.jsonl = true;
                } else {
                    fail("output.formats",
                         "entries must be \"csv\" or \"jsonl\" (got \"" + s +
                             "\")");
                }
            }
        }
        sec.finish();
    }
    // Manifests carry a "meta" section (version, command line); accept it so
    // a manifest is itself a valid config.
    top.find("meta");
    top.finish();

    // Defaults that depend on other fields: the step for jump unravelings
    // with the oscillator on must resolve the O(1/eps) shifted intensity.
    if (!dt_given) {
        cfg.dt = (cfg.model.lo.enabled &&
                  cfg.unraveling != Unraveling::diffusion)
                     ? cfg.model.lo.epsilon * cfg.model.lo.epsilon / 20.0
                     : 1e-3;
    }

    // Semantic validation, reported as config errors naming the field.
    try {
        cfg.model.initial = cfg.initial.build(cfg.model.cutoff);
        cfg.model.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!(cfg.t_final > 0.0)) fail("run.t_final", "must be > 0");
    if (!(cfg.dt > 0.0)) fail("run.dt", "must be > 0");
    if (cfg.n_traj < 1) fail("run.n_traj", "must be >= 1");
    if (cfg.sample_stride < 1) fail("run.sample_stride", "must be >= 1");
    if (cfg.workers < 0) fail("run.workers", "must be >= 0");
    for (double eps : cfg.eps_list) {
        if (!(eps > 0.0)) fail("run.eps_list", "entries must be > 0");
    }
    const double n_float = cfg.t_final / cfg.dt;
    if (std::abs(n_float - std::llround(n_float)) >
        1e-9 * std::max(1.0, n_float)) {
        fail("run.dt", "t_final must be an integer multiple of dt");
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string emit_config(const RunConfig& config) {
    json root;
    json& model = root["model"];
    model["dim"] = config.model.dim();
    model["omega"] = config.model.omega;
    model["mu"] = config.model.mu;
    model["initial"] = emit_initial(config.initial);
    json& drive = root["drive"];
    drive["lambda"] = config.model.drive.lambda;
    drive["omega_f"] = config.model.drive.omega_f;
    drive["phi"] = config.model.drive.phi;
    json& lo = root["lo"];
    lo["enabled"] = config.model.lo.enabled;
    lo["epsilon"] = config.model.lo.epsilon;
    lo["theta"] = config.model.lo.theta;
    lo["omega_r"] = config.model.lo.omega_r;
    json& run = root["run"];
    run["t_final"] = config.t_final;
    run["dt"] = config.dt;
    run["n_traj"] = config.n_traj;
    run["sample_stride"] = config.sample_stride;
    run["seed"] = config.seed;
    run["workers"] = config.workers;
    run["unraveling"] = to_string(config.unraveling);
    run["method"] = config.method == JumpMethod::waiting_time
                        ? "waiting_time"
                        : "euler_bernoulli";
    run["accumulate_mean_state"] = config.accumulate_mean_state;
    run["eps_list"] = config.eps_list;
    json& output = root["output"];
    output["dir"] = config.output.dir;
    output["prefix"] = config.output.prefix;
    json formats = json::array();
    if (config.output.csv) formats.push_back("csv");
    if (config.output.jsonl) formats.push_back("jsonl");
    output["formats"] = std::move(formats);
    return root.dump(2) + "\n";
}

int resolve_workers(std::optional<int> flag_value, int config_value) {
    if (flag_value) {
        if (*flag_value < 1) {
            throw ConfigError("config: --workers must be >= 1");
        }
        return *flag_value;
    }
    if (config_value >= 1) return config_value;
    if (const char* env = std::getenv("QFILT_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) {
            throw ConfigError(
                "config: QFILT_WORKERS must be a positive integer (got \"" +
                std::string(env) + "\")");
        }
        return int(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? int(hw) : 1;
}

}  // namespace qfilt
