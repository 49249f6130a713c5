#include "langevin/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

#include "langevin/channel_io.hpp"
#include "langevin/parallel.hpp"
#include "langevin/rng.hpp"
#include "langevin/score.hpp"

namespace langevin {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(value, &pos);
        if (pos != value.size() || !std::isfinite(d)) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "': expected a number, got '" + value + "'");
    }
}

long long to_integer(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "': expected an integer, got '" + value + "'");
    }
}

int to_int(const std::string& key, const std::string& value) {
    const long long v = to_integer(key, value);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        throw ConfigError("'" + key + "': out of range");
    return static_cast<int>(v);
}

std::uint64_t to_unsigned(const std::string& key, const std::string& value) {
    const long long v = to_integer(key, value);
    if (v < 0) throw ConfigError("'" + key + "': must be nonnegative");
    return static_cast<std::uint64_t>(v);
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw ConfigError("'" + key + "': expected a boolean, got '" + value + "'");
}

std::vector<double> to_doubles(const std::string& key, const std::string& value) {
    std::vector<double> out;
    for (const auto& item : split_list(value)) out.push_back(to_double(key, item));
    return out;
}

template <typename Fn>
auto rethrow_as_config(const std::string& key, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("'" + key + "': " + e.what());
    }
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
    static const std::vector<std::pair<std::string, Setter>> table = {
        {"task", [](auto& c, auto& k, auto& v) { c.task = rethrow_as_config(k, [&] { return parse_task(v); }); }},
        {"seed", [](auto& c, auto& k, auto& v) { c.seed = to_unsigned(k, v); }},
        {"out", [](auto& c, auto&, auto& v) { c.out = v; }},
        {"threads", [](auto& c, auto& k, auto& v) { c.threads = static_cast<unsigned>(to_unsigned(k, v)); }},

        {"model.n_r", [](auto& c, auto& k, auto& v) { c.n_r = to_int(k, v); }},
        {"model.n_u", [](auto& c, auto& k, auto& v) { c.n_u = to_int(k, v); }},
        {"model.rho", [](auto& c, auto& k, auto& v) { c.rho = to_double(k, v); }},
        {"model.channel",
         [](auto& c, auto& k, auto& v) { c.channel = rethrow_as_config(k, [&] { return parse_channel_model(v); }); }},
        {"model.constellation", [](auto& c, auto&, auto& v) { c.constellation = v; }},

        {"sampler.order", [](auto& c, auto& k, auto& v) { c.params.order = to_int(k, v); }},
        {"sampler.scheme", [](auto& c, auto&, auto& v) { c.scheme = v; }},
        {"sampler.L", [](auto& c, auto& k, auto& v) { c.schedule.levels = to_int(k, v); }},
        {"sampler.sigma1", [](auto& c, auto& k, auto& v) { c.schedule.sigma1 = to_double(k, v); }},
        {"sampler.sigmaL", [](auto& c, auto& k, auto& v) { c.schedule.sigmaL = to_double(k, v); }},
        {"sampler.eps0", [](auto& c, auto& k, auto& v) { c.schedule.eps0 = to_double(k, v); }},
        {"sampler.T", [](auto& c, auto& k, auto& v) { c.schedule.t_inner = to_int(k, v); }},
        {"sampler.tau", [](auto& c, auto& k, auto& v) { c.schedule.tau = to_double(k, v); }},
        {"sampler.gamma", [](auto& c, auto& k, auto& v) { c.params.gamma = to_double(k, v); }},
        {"sampler.lambda", [](auto& c, auto& k, auto& v) { c.params.lambda = to_double(k, v); }},
        {"sampler.alpha", [](auto& c, auto& k, auto& v) { c.params.alpha = to_double(k, v); }},
        {"sampler.U", [](auto& c, auto& k, auto& v) { c.trajectories = to_int(k, v); }},
        {"sampler.mass_mode",
         [](auto& c, auto& k, auto& v) { c.schedule.mass = rethrow_as_config(k, [&] { return MassMode::parse(v); }); }},
        {"sampler.precond",
         [](auto& c, auto& k, auto& v) {
             c.schedule.precond = rethrow_as_config(k, [&] { return parse_precond_mode(v); });
         }},
        {"sampler.step_rule",
         [](auto& c, auto& k, auto& v) {
             c.schedule.step_rule = rethrow_as_config(k, [&] { return parse_step_rule(v); });
         }},
        {"sampler.max_iterations",
         [](auto& c, auto& k, auto& v) {
             const long long n = to_integer(k, v);
             if (n < 0)
                 c.schedule.max_total_iterations.reset();
             else
                 c.schedule.max_total_iterations = static_cast<long>(n);
         }},

        {"sweep.snr_db", [](auto& c, auto& k, auto& v) { c.snr_db = to_doubles(k, v); }},
        {"sweep.n_channels", [](auto& c, auto& k, auto& v) { c.n_channels = to_int(k, v); }},
        {"sweep.symbols_per_channel", [](auto& c, auto& k, auto& v) { c.symbols_per_channel = to_int(k, v); }},
        {"sweep.methods", [](auto& c, auto&, auto& v) { c.methods = split_list(v); }},
        {"sweep.amortized", [](auto& c, auto& k, auto& v) { c.amortized = to_bool(k, v); }},
        {"sweep.timing", [](auto& c, auto& k, auto& v) { c.timing = to_bool(k, v); }},
        {"sweep.ml_max_candidates", [](auto& c, auto& k, auto& v) { c.ml_max_candidates = to_unsigned(k, v); }},
        {"sweep.save_channels", [](auto& c, auto&, auto& v) { c.save_channels = v; }},

        {"stationary.lambda", [](auto& c, auto& k, auto& v) { c.stationary.lambda = to_doubles(k, v); }},
        {"stationary.c", [](auto& c, auto& k, auto& v) { c.stationary.c = to_doubles(k, v); }},
        {"stationary.m",
         [](auto& c, auto& k, auto& v) {
             c.stationary.m = v == "spectral" ? std::vector<double>{} : to_doubles(k, v);
         }},
        {"stationary.tau", [](auto& c, auto& k, auto& v) { c.stationary.tau = to_double(k, v); }},
        {"stationary.eps", [](auto& c, auto& k, auto& v) { c.stationary.eps = to_double(k, v); }},
        {"stationary.steps", [](auto& c, auto& k, auto& v) { c.stationary.steps = static_cast<long>(to_integer(k, v)); }},
        {"stationary.burn_in",
         [](auto& c, auto& k, auto& v) { c.stationary.burn_in = static_cast<long>(to_integer(k, v)); }},
        {"stationary.batches",
         [](auto& c, auto& k, auto& v) { c.stationary.batches = static_cast<long>(to_integer(k, v)); }},
        {"stationary.tolerance", [](auto& c, auto& k, auto& v) { c.stationary.tolerance = to_double(k, v); }},
        {"stationary.schemes", [](auto& c, auto&, auto& v) { c.stationary.schemes = split_list(v); }},

        {"channel_toy.n_r", [](auto& c, auto& k, auto& v) { c.channel_toy.n_r = to_int(k, v); }},
        {"channel_toy.n_u", [](auto& c, auto& k, auto& v) { c.channel_toy.n_u = to_int(k, v); }},
        {"channel_toy.alpha_p", [](auto& c, auto& k, auto& v) { c.channel_toy.alpha_p = to_double(k, v); }},
        {"channel_toy.snr_db", [](auto& c, auto& k, auto& v) { c.channel_toy.snr_db = to_doubles(k, v); }},
        {"channel_toy.prior_var", [](auto& c, auto& k, auto& v) { c.channel_toy.prior_var = to_double(k, v); }},
        {"channel_toy.instances", [](auto& c, auto& k, auto& v) { c.channel_toy.instances = to_int(k, v); }},
        {"channel_toy.schemes", [](auto& c, auto&, auto& v) { c.channel_toy.schemes = split_list(v); }},

        {"fdt.configs", [](auto& c, auto& k, auto& v) { c.fdt.configs = to_int(k, v); }},
        {"fdt.draws", [](auto& c, auto& k, auto& v) { c.fdt.draws = static_cast<long>(to_integer(k, v)); }},
        {"fdt.dt", [](auto& c, auto& k, auto& v) { c.fdt.dt = to_double(k, v); }},
        {"fdt.dim", [](auto& c, auto& k, auto& v) { c.fdt.dim = to_int(k, v); }},
    };
    return table;
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

int scheme_order(const std::string& scheme) {
    if (scheme == "ULA") return 1;
    if (scheme == "ABO" || scheme == "BAOAB") return 2;
    if (scheme == "BCOABC" || scheme == "(BC)OA(BC)" || scheme == "BACOCAB") return 3;
    return scheme.find('C') != std::string::npos ? 3 : 2;
}

double db(double linear) { return 10.0 * std::log10(linear); }

// Two-sided standard normal quantile by bisection on erfc.
double normal_quantile_two_sided(double alpha) {
    double lo = 0.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (std::erfc(mid / std::sqrt(2.0)) > alpha)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
    KeyValues kv;
    std::stringstream ss(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line.erase(comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        kv.values_[section.empty() ? key : section + "." + key] = trim(line.substr(eq + 1));
    }
    return kv;
}

KeyValues KeyValues::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

void KeyValues::set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + assignment + "'");
    values_[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

void KeyValues::merge(const KeyValues& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
}

Task parse_task(const std::string& text) {
    if (text == "detect-sweep") return Task::DetectSweep;
    if (text == "stationary-test") return Task::StationaryTest;
    if (text == "channel-toy") return Task::ChannelToy;
    if (text == "fdt-test") return Task::FdtTest;
    throw ConfigError("unknown task '" + text + "'");
}

std::string to_string(Task task) {
    switch (task) {
        case Task::DetectSweep: return "detect-sweep";
        case Task::StationaryTest: return "stationary-test";
        case Task::ChannelToy: return "channel-toy";
        case Task::FdtTest: return "fdt-test";
    }
    return "?";
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& [k, _] : setters()) out.push_back(k);
    return out;
}

ExperimentConfig make_config(const KeyValues& kv) {
    ExperimentConfig config;
    // The preset goes first so explicit keys override it.
    const auto& values = kv.values();
    if (auto it = values.find("preset"); it != values.end()) {
        for (const auto& name : split_list(it->second)) config = apply_preset(name, config);
    }
    for (const auto& [key, value] : values) {
        if (key == "preset") continue;
        const auto& table = setters();
        auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == key; });
        if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
        it->second(config, key, value);
    }
    config.validate();
    return config;
}

void ExperimentConfig::validate() const {
    auto wrap = [](auto&& fn) { rethrow_as_config("config", fn); };
    wrap([&] {
        params.validate();
        return 0;
    });
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (n_r < 1 || n_u < 1) throw ConfigError("model.n_r and model.n_u must be >= 1");
    if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("model.rho must lie in [0, 1)");
    rethrow_as_config("model.constellation", [&] { return make_constellation(constellation); });
    if (trajectories < 1) throw ConfigError("sampler.U must be >= 1");
    if (schedule.levels < 1) throw ConfigError("sampler.L must be >= 1");
    if (schedule.t_inner < 0) throw ConfigError("sampler.T must be >= 0");
    if (!(schedule.tau > 0.0)) throw ConfigError("sampler.tau must be > 0");
    if (!(schedule.eps0 > 0.0)) throw ConfigError("sampler.eps0 must be > 0");
    if (!(schedule.sigma1 > 0.0 && schedule.sigmaL > 0.0) ||
        (schedule.levels > 1 && !(schedule.sigma1 > schedule.sigmaL)))
        throw ConfigError("sampler: need sigma1 > sigmaL > 0");
    if (!scheme.empty()) rethrow_as_config("sampler.scheme", [&] { return compile_scheme(scheme, params.order); });
    switch (task) {
        case Task::DetectSweep:
            if (snr_db.empty()) throw ConfigError("sweep.snr_db must not be empty");
            if (n_channels < 0 || symbols_per_channel < 0) throw ConfigError("sweep counts must be >= 0");
            if (methods.empty()) throw ConfigError("sweep.methods must not be empty");
            for (const auto& m : methods) parse_method(m, *this);
            break;
        case Task::StationaryTest: {
            const auto d = stationary.lambda.size();
            if (d == 0 || stationary.c.size() != d || (!stationary.m.empty() && stationary.m.size() != d))
                throw ConfigError("stationary: lambda, c and m must have equal lengths");
            for (double v : stationary.lambda)
                if (!(v > 0.0)) throw ConfigError("stationary.lambda entries must be > 0");
            for (double v : stationary.c)
                if (!(v > 0.0)) throw ConfigError("stationary.c entries must be > 0");
            for (double v : stationary.m)
                if (!(v > 0.0)) throw ConfigError("stationary.m entries must be > 0");
            if (!(stationary.eps > 0.0) || !(stationary.tau > 0.0)) throw ConfigError("stationary: eps, tau must be > 0");
            if (stationary.steps < 2 || stationary.burn_in >= stationary.steps || stationary.batches < 2)
                throw ConfigError("stationary: need steps > burn_in and batches >= 2");
            if (stationary.schemes.empty()) throw ConfigError("stationary.schemes must not be empty");
            for (const auto& s : stationary.schemes) {
                if (scheme_order(s) < 2) throw ConfigError("stationary.schemes: '" + s + "' has no momentum");
                rethrow_as_config("stationary.schemes", [&] { return compile_scheme(s, scheme_order(s)); });
            }
            break;
        }
        case Task::ChannelToy:
            if (!(channel_toy.alpha_p > 0.0 && channel_toy.alpha_p <= 1.0))
                throw ConfigError("channel_toy.alpha_p must lie in (0, 1]");
            if (channel_toy.n_r < 1 || channel_toy.n_u < 1 || channel_toy.instances < 1)
                throw ConfigError("channel_toy sizes must be >= 1");
            if (channel_toy.snr_db.empty() || channel_toy.schemes.empty())
                throw ConfigError("channel_toy.snr_db and channel_toy.schemes must not be empty");
            if (!(channel_toy.prior_var > 0.0)) throw ConfigError("channel_toy.prior_var must be > 0");
            for (const auto& s : channel_toy.schemes)
                rethrow_as_config("channel_toy.schemes", [&] { return compile_scheme(s, scheme_order(s)); });
            break;
        case Task::FdtTest:
            if (fdt.configs < 1 || fdt.draws < 2 || fdt.dim < 1 || !(fdt.dt > 0.0))
                throw ConfigError("fdt: configs, draws, dim and dt must be positive");
            break;
    }
}

PresetValues preset_values(const std::string& method, int levels) {
    const bool small = levels == 5;
    if (levels != 5 && levels != 10 && levels != 20)
        throw ConfigError("no preset for L = " + std::to_string(levels) + " (expected 5, 10 or 20)");
    PresetValues p;
    p.levels = levels;
    p.sigma1 = small ? 0.4 : 1.0;
    p.sigmaL = small ? 0.02 : 0.01;
    p.t_inner = small ? 30 : 70;
    if (method == "overdamped" || method == "underdamped") {
        p.order = method == "overdamped" ? 1 : 2;
        p.eps0 = small ? 6e-4 : 3e-5;
        p.tau = small ? 0.01 : 0.5;
    } else if (method == "third") {
        p.order = 3;
        p.eps0 = small ? 2.2e-4 : 5e-5;
        p.tau = small ? 0.023 : 0.084;
    } else {
        throw ConfigError("unknown preset method '" + method + "' (expected overdamped, underdamped or third)");
    }
    return p;
}

ExperimentConfig run_table1_preset(const std::string& method, int levels, ExperimentConfig config) {
    const PresetValues p = preset_values(method, levels);
    config.params.order = p.order;
    config.scheme = default_scheme(p.order);
    config.schedule.levels = p.levels;
    config.schedule.sigma1 = p.sigma1;
    config.schedule.sigmaL = p.sigmaL;
    config.schedule.eps0 = p.eps0;
    config.schedule.t_inner = p.t_inner;
    config.schedule.tau = p.tau;
    config.schedule.step_rule = StepRule::Detection;
    return config;
}

std::vector<NamedPreset> list_presets() {
    std::vector<NamedPreset> out;
    for (const char* m : {"overdamped", "underdamped", "third"})
        for (int l : {5, 10, 20}) {
            const PresetValues p = preset_values(m, l);
            std::ostringstream os;
            os << "order " << p.order << ", L=" << p.levels << ", sigma1=" << p.sigma1 << ", sigmaL=" << p.sigmaL
               << ", eps0=" << p.eps0 << ", T=" << p.t_inner << ", tau=" << p.tau;
            out.push_back({std::string(m) + "-L" + std::to_string(l), os.str()});
        }
    out.push_back({"coherence-block", "symbols_per_channel=1000, amortized SVD timing"});
    return out;
}

ExperimentConfig apply_preset(const std::string& name, ExperimentConfig config) {
    if (name == "coherence-block") {
        config.symbols_per_channel = 1000;
        config.amortized = true;
        return config;
    }
    const auto dash = name.rfind("-L");
    if (dash == std::string::npos) throw ConfigError("unknown preset '" + name + "'");
    int levels = 0;
    try {
        std::size_t pos = 0;
        levels = std::stoi(name.substr(dash + 2), &pos);
        if (dash + 2 + pos != name.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw ConfigError("unknown preset '" + name + "'");
    }
    return run_table1_preset(name.substr(0, dash), levels, std::move(config));
}

std::string results_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    os << "task,snr_db,method,scheme,L,T,U,n_symbols,errors,ser_or_nmse,wall_ns_per_symbol,seed,"
          "wall_ns_per_symbol_incl_setup\n";
    for (const auto& r : rows) {
        os << csv_field(r.task) << ',' << format_double(r.snr_db) << ',' << csv_field(r.method) << ','
           << csv_field(r.scheme) << ',' << r.levels << ',' << r.t_inner << ',' << r.trajectories << ',' << r.n_symbols
           << ',' << r.errors << ',' << format_double(r.ser_or_nmse) << ',' << format_double(r.wall_ns_per_symbol)
           << ',' << r.seed << ',' << format_double(r.wall_ns_per_symbol_incl_setup) << '\n';
    }
    return os.str();
}

void emit_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << results_csv(rows);
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

MethodSpec parse_method(const std::string& text, const ExperimentConfig& config) {
    MethodSpec m;
    m.label = text;
    if (text == "mmse") return m;
    if (text == "vblast") {
        m.kind = MethodSpec::Kind::Vblast;
        return m;
    }
    if (text == "ml") {
        m.kind = MethodSpec::Kind::Ml;
        return m;
    }
    m.kind = MethodSpec::Kind::Langevin;
    ExperimentConfig base = config;
    if (text != "langevin") {
        const auto colon = text.find(':');
        if (colon == std::string::npos) throw ConfigError("unknown method '" + text + "'");
        int levels = 0;
        try {
            std::size_t pos = 0;
            levels = std::stoi(text.substr(colon + 1), &pos);
            if (colon + 1 + pos != text.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError("method '" + text + "': expected <name>:<L>");
        }
        base = run_table1_preset(text.substr(0, colon), levels, config);
    }
    m.detector.schedule = base.schedule;
    m.detector.params = base.params;
    m.detector.scheme = base.scheme.empty() ? default_scheme(base.params.order) : base.scheme;
    m.detector.trajectories = static_cast<std::size_t>(base.trajectories);
    rethrow_as_config("method '" + text + "'", [&] { return compile_scheme(m.detector.scheme, m.detector.params.order); });
    return m;
}

SweepOutcome run_detect_sweep(const ExperimentConfig& config) {
    config.validate();
    const Constellation constellation = make_constellation(config.constellation);
    const ChannelSpec spec{config.n_r, config.n_u, config.rho, config.channel};
    spec.validate();
    std::vector<MethodSpec> methods;
    for (const auto& m : config.methods) methods.push_back(parse_method(m, config));
    for (const auto& m : methods) {
        if (m.kind != MethodSpec::Kind::Ml) continue;
        double count = std::pow(static_cast<double>(constellation.points.size()), 2.0 * config.n_u);
        if (count > static_cast<double>(config.ml_max_candidates))
            throw ConfigError("ml oracle: search space exceeds sweep.ml_max_candidates");
    }

    using clock = std::chrono::steady_clock;
    const std::size_t n_snr = config.snr_db.size();
    const auto n_ch = static_cast<std::size_t>(config.n_channels);
    const auto n_sym = static_cast<std::size_t>(config.symbols_per_channel);
    const std::size_t n_methods = methods.size();
    const unsigned threads = std::max(1U, config.threads);

    // Phase 1: channels and their SVDs.
    struct ChannelSlot {
        ComplexMatrix hbar;
        std::optional<ForwardModel> model;
        std::int64_t setup_ns = 0;
    };
    std::vector<ChannelSlot> channels(n_snr * n_ch);
    parallel_for(channels.size(), threads, [&](std::size_t i) {
        const std::size_t k = i / n_ch, c = i % n_ch;
        const auto start = clock::now();
        Rng rng(derive_seed(config.seed, {k, c}));
        channels[i].hbar = sample_channel(spec, rng);
        const double sigma0 = sigma0_from_snr(db_to_linear(config.snr_db[k]), spec, constellation) / std::sqrt(2.0);
        channels[i].model.emplace(complex_to_real(channels[i].hbar), Eigen::VectorXd::Zero(2 * config.n_r), sigma0);
        channels[i].setup_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - start).count();
    });
    if (!config.save_channels.empty()) {
        std::vector<ComplexMatrix> all;
        for (const auto& ch : channels) all.push_back(ch.hbar);
        const auto& path = config.save_channels;
        if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0)
            write_channels_csv(path, all);
        else
            write_channels_binary(path, all);
    }

    // Phase 2: one unit per (snr, channel, symbol vector).
    struct UnitResult {
        std::vector<std::uint32_t> errors;
        std::vector<std::int64_t> ns;
    };
    std::vector<UnitResult> units(n_snr * n_ch * n_sym);
    parallel_for(units.size(), threads, [&](std::size_t i) {
        const std::size_t k = i / (n_ch * n_sym), c = (i / n_sym) % n_ch, s = i % n_sym;
        const ChannelSlot& slot = channels[k * n_ch + c];
        Rng rng(derive_seed(config.seed, {k, c, s}));
        const Eigen::VectorXd x = random_symbols(config.n_u, constellation, rng);
        const ForwardModel model = slot.model->with_observation(apply_forward(*slot.model, x, rng));
        UnitResult& out = units[i];
        out.errors.resize(n_methods);
        out.ns.resize(n_methods);
        for (std::size_t m = 0; m < n_methods; ++m) {
            const auto start = clock::now();
            Eigen::VectorXd xhat;
            switch (methods[m].kind) {
                case MethodSpec::Kind::Mmse: xhat = mmse_detect(model, constellation, constellation.energy); break;
                case MethodSpec::Kind::Vblast: xhat = vblast_detect(model, constellation); break;
                case MethodSpec::Kind::Ml: xhat = ml_oracle(model, constellation, config.ml_max_candidates); break;
                case MethodSpec::Kind::Langevin:
                    xhat = langevin_detect(model, constellation, methods[m].detector,
                                           derive_seed(config.seed, {k, c, s, 1000 + m}))
                               .xhat;
                    break;
            }
            out.ns[m] = std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - start).count();
            out.errors[m] = static_cast<std::uint32_t>(count_symbol_errors(xhat, x).errors);
        }
    });

    SweepOutcome outcome;
    outcome.vector_errors.assign(n_snr, std::vector<std::vector<std::uint32_t>>(n_methods));
    for (std::size_t k = 0; k < n_snr; ++k) {
        std::int64_t setup_ns = 0;
        for (std::size_t c = 0; c < n_ch; ++c) setup_ns += channels[k * n_ch + c].setup_ns;
        for (std::size_t m = 0; m < n_methods; ++m) {
            ResultRow row;
            row.task = "detect-sweep";
            row.snr_db = config.snr_db[k];
            row.method = methods[m].label;
            row.seed = config.seed;
            if (methods[m].kind == MethodSpec::Kind::Langevin) {
                row.scheme = methods[m].detector.scheme;
                row.levels = methods[m].detector.schedule.levels;
                row.t_inner = methods[m].detector.schedule.t_inner;
                row.trajectories = static_cast<int>(methods[m].detector.trajectories);
            }
            std::int64_t ns = 0;
            auto& per_vector = outcome.vector_errors[k][m];
            for (std::size_t c = 0; c < n_ch; ++c)
                for (std::size_t s = 0; s < n_sym; ++s) {
                    const UnitResult& u = units[(k * n_ch + c) * n_sym + s];
                    per_vector.push_back(u.errors[m]);
                    row.errors += u.errors[m];
                    ns += u.ns[m];
                }
            row.n_symbols = static_cast<std::uint64_t>(n_ch * n_sym) * static_cast<std::uint64_t>(config.n_u);
            row.ser_or_nmse = row.n_symbols == 0 ? 0.0 : static_cast<double>(row.errors) / row.n_symbols;
            if (config.timing && row.n_symbols > 0) {
                const double per = static_cast<double>(row.n_symbols);
                const double incl = static_cast<double>(ns + setup_ns) / per;
                row.wall_ns_per_symbol = config.amortized ? static_cast<double>(ns) / per : incl;
                row.wall_ns_per_symbol_incl_setup = incl;
            }
            outcome.rows.push_back(row);
        }
    }
    if (n_ch * n_sym == 0) outcome.rows.clear();
    return outcome;
}

std::vector<CheckRow> run_stationary_test(const ExperimentConfig& config) {
    config.validate();
    const auto& st = config.stationary;
    const auto d = static_cast<Eigen::Index>(st.lambda.size());
    const Eigen::MatrixXd lambda = Eigen::Map<const Eigen::VectorXd>(st.lambda.data(), d).asDiagonal();
    const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(st.c.data(), d);
    auto mass_for = [&](const Eigen::VectorXd& precond) -> Eigen::VectorXd {
        if (!st.m.empty()) return Eigen::Map<const Eigen::VectorXd>(st.m.data(), d);
        return mass_from_preconditioner(precond, config.params.gamma);
    };
    const long burn = st.burn_in >= 0 ? st.burn_in : st.steps / 5;

    // Two runs per scheme: the configured C and C = I.
    struct Job {
        std::size_t scheme;
        bool identity;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < st.schemes.size(); ++s) {
        jobs.push_back({s, false});
        jobs.push_back({s, true});
    }
    std::vector<StationaryReport> reports(jobs.size());
    parallel_for(jobs.size(), std::max(1U, config.threads), [&](std::size_t j) {
        StationaryConfig sc;
        sc.params = config.params;
        sc.params.order = scheme_order(st.schemes[jobs[j].scheme]);
        sc.scheme = st.schemes[jobs[j].scheme];
        sc.c = jobs[j].identity ? Eigen::VectorXd::Ones(d) : c;
        sc.m = mass_for(sc.c);
        sc.tau = st.tau;
        sc.eps = st.eps;
        sc.n_steps = st.steps;
        sc.burn_in = burn;
        sc.batches = st.batches;
        sc.tolerance = st.tolerance;
        Rng rng(derive_seed(config.seed, {jobs[j].scheme, jobs[j].identity ? 1U : 0U}));
        reports[j] = sample_stationary(sc, lambda, rng);
    });

    // Bonferroni over the d(d+1)/2 distinct covariance entries at 1% overall.
    const double z_crit = normal_quantile_two_sided(0.01 / static_cast<double>(d * (d + 1) / 2));
    std::vector<CheckRow> rows;
    for (std::size_t j = 0; j < jobs.size(); j += 2) {
        const std::string name = st.schemes[jobs[j].scheme];
        for (std::size_t which : {j, j + 1}) {
            const std::string tag = name + (jobs[which].identity ? "[C=I]" : "");
            const StationaryReport& r = reports[which];
            rows.push_back({tag + ".x_cov_rel_err", r.x.frobenius_rel_err, 0.0, r.x.tolerance, r.x.pass});
            rows.push_back({tag + ".v_cov_rel_err", r.v.frobenius_rel_err, 0.0, r.v.tolerance, r.v.pass});
            if (r.z) rows.push_back({tag + ".z_cov_rel_err", r.z->frobenius_rel_err, 0.0, r.z->tolerance, r.z->pass});
        }
        const MomentReport& a = reports[j].x;
        const MomentReport& b = reports[j + 1].x;
        double worst = 0.0;
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index q = r; q < d; ++q) {
                const double se = std::hypot(a.cov_stderr(r, q), b.cov_stderr(r, q));
                worst = std::max(worst, std::abs(a.covariance(r, q) - b.covariance(r, q)) / se);
            }
        rows.push_back({name + ".precond_invariance_z", worst, 0.0, z_crit, worst <= z_crit});
    }
    return rows;
}

std::vector<CheckRow> run_fdt_test(const ExperimentConfig& config) {
    config.validate();
    const auto& f = config.fdt;
    const std::size_t n = static_cast<std::size_t>(f.configs);
    std::vector<FdtReport> reports(2 * n);
    parallel_for(reports.size(), std::max(1U, config.threads), [&](std::size_t i) {
        const int order = i < n ? 2 : 3;
        Rng rng(derive_seed(config.seed, {static_cast<std::uint64_t>(order), i % n}));
        DynamicsParams p;
        p.order = order;
        // Rates keep alpha * 10 dt <= 1 so the lag-10 autocorrelation stays
        // well above its sampling error.
        const double rate_hi = std::min(5.0, 0.1 / f.dt);
        const double rate_lo = std::min(0.2, 0.4 * rate_hi);
        p.gamma = rate_lo + (rate_hi - rate_lo) * rng.uniform();
        p.alpha = rate_lo + (rate_hi - rate_lo) * rng.uniform();
        p.lambda = 0.1 + 2.9 * rng.uniform();
        const double tau = 0.01 + 1.99 * rng.uniform();
        Eigen::VectorXd m(f.dim);
        for (Eigen::Index j = 0; j < m.size(); ++j) m[j] = std::exp(std::log(0.1) + std::log(100.0) * rng.uniform());
        reports[i] = fdt_check(p, m, tau, f.dt, f.draws, rng);
    });
    std::vector<CheckRow> rows;
    for (std::size_t i = 0; i < reports.size(); ++i)
        for (auto row : reports[i].checks) {
            row.test = "cfg" + std::to_string(i % n) + "." + row.test;
            rows.push_back(std::move(row));
        }
    return rows;
}

std::vector<ResultRow> run_channel_toy(const ExperimentConfig& config) {
    config.validate();
    const auto& ct = config.channel_toy;
    const std::size_t n_snr = ct.snr_db.size();
    const auto n_inst = static_cast<std::size_t>(ct.instances);
    const std::size_t n_schemes = ct.schemes.size();
    std::vector<ChannelToyResult> results(n_snr * n_schemes * n_inst);
    parallel_for(results.size(), std::max(1U, config.threads), [&](std::size_t i) {
        const std::size_t k = i / (n_schemes * n_inst), s = (i / n_inst) % n_schemes, r = i % n_inst;
        ChannelToyConfig tc;
        tc.n_r = ct.n_r;
        tc.n_u = ct.n_u;
        tc.alpha_p = ct.alpha_p;
        tc.snr_db = ct.snr_db[k];
        tc.prior_var = ct.prior_var;
        tc.schedule = config.schedule;
        tc.params = config.params;
        tc.params.order = scheme_order(ct.schemes[s]);
        tc.scheme = ct.schemes[s];
        // Same instance for every scheme.
        Rng rng(derive_seed(config.seed, {k, r}));
        results[i] = gaussian_channel_toy(tc, rng);
    });
    std::vector<ResultRow> rows;
    for (std::size_t k = 0; k < n_snr; ++k) {
        double mmse_sum = 0.0;
        for (std::size_t s = 0; s < n_schemes; ++s) {
            ResultRow row;
            row.task = "channel-toy";
            row.snr_db = ct.snr_db[k];
            row.method = "langevin";
            row.scheme = ct.schemes[s];
            row.levels = config.schedule.levels;
            row.t_inner = config.schedule.t_inner;
            row.trajectories = 1;
            row.n_symbols = n_inst;
            row.seed = config.seed;
            double sum = 0.0;
            for (std::size_t r = 0; r < n_inst; ++r) {
                const auto& res = results[(k * n_schemes + s) * n_inst + r];
                if (res.diverged)
                    ++row.errors;
                else
                    sum += std::pow(10.0, res.nmse_db / 10.0);
                if (s == 0) mmse_sum += std::pow(10.0, res.mmse_nmse_db / 10.0);
            }
            const std::uint64_t ok = row.n_symbols - row.errors;
            row.ser_or_nmse = ok == 0 ? std::numeric_limits<double>::infinity() : db(sum / static_cast<double>(ok));
            rows.push_back(row);
        }
        ResultRow ref;
        ref.task = "channel-toy";
        ref.snr_db = ct.snr_db[k];
        ref.method = "mmse-analytic";
        ref.n_symbols = n_inst;
        ref.seed = config.seed;
        ref.ser_or_nmse = db(mmse_sum / static_cast<double>(n_inst));
        rows.push_back(ref);
    }
    return rows;
}

}  // namespace langevin
