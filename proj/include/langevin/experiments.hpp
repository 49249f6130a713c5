#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "langevin/detect.hpp"
#include "langevin/model.hpp"
#include "langevin/schedule.hpp"
#include "langevin/verify.hpp"

namespace langevin {

/// Bad key, bad value or inconsistent settings. The CLI maps it to exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raw `section.key -> value` settings. Keys before the first [section] are
/// top-level and carry no prefix.
class KeyValues {
public:
    /// `key = value` lines, `[section]` headers, `#` or `;` comments.
    static KeyValues parse(const std::string& text);
    static KeyValues load(const std::string& path);

    /// "section.key=value" or "key=value".
    void set_assignment(const std::string& assignment);
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void merge(const KeyValues& other);

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

enum class Task { DetectSweep, StationaryTest, ChannelToy, FdtTest };

Task parse_task(const std::string& text);
std::string to_string(Task task);

struct StationarySettings {
    std::vector<double> lambda{1.0, 4.0};  // diagonal of the quadratic potential
    std::vector<double> c{2.0, 0.5};
    std::vector<double> m;  // empty: (gamma^2 / 4) C^{-1}
    double tau = 1.0;
    double eps = 0.01;
    long steps = 1250000;
    long burn_in = -1;  // negative: 20% of steps
    long batches = 100;
    double tolerance = 0.05;
    std::vector<std::string> schemes{"BAOAB", "BACOCAB"};
};

struct ChannelToySettings {
    int n_r = 16;
    int n_u = 32;
    double alpha_p = 0.6;
    std::vector<double> snr_db{10.0};
    double prior_var = 0.5;
    int instances = 20;
    std::vector<std::string> schemes{"BAOAB"};
};

struct FdtSettings {
    int configs = 20;  // random (gamma, alpha, lambda, tau) draws per order
    long draws = 100000;
    double dt = 0.05;
    int dim = 2;
};

struct ExperimentConfig {
    Task task = Task::DetectSweep;
    std::uint64_t seed = 1;
    std::string out;
    unsigned threads = 1;

    // model
    int n_r = 64;
    int n_u = 32;
    double rho = 0.6;
    ChannelModel channel = ChannelModel::KroneckerExponential;
    std::string constellation = "QAM16";

    // sampler
    DynamicsParams params;
    std::string scheme;  // empty: default for the order
    ScheduleConfig schedule;
    int trajectories = 20;

    // sweep
    std::vector<double> snr_db{16.0};
    int n_channels = 10;
    int symbols_per_channel = 100;
    std::vector<std::string> methods{"langevin", "mmse"};
    bool amortized = true;
    bool timing = false;
    std::uint64_t ml_max_candidates = 1000000;
    std::string save_channels;  // optional path, .csv or binary

    StationarySettings stationary;
    ChannelToySettings channel_toy;
    FdtSettings fdt;

    void validate() const;
};

/// Applies settings on top of defaults. Throws ConfigError on unknown keys or
/// malformed values.
ExperimentConfig make_config(const KeyValues& kv);

/// Every key accepted by make_config, in `section.key` form.
std::vector<std::string> config_keys();

struct PresetValues {
    int order = 2;
    int levels = 5;
    double sigma1 = 0.4;
    double sigmaL = 0.02;
    double eps0 = 6e-4;
    int t_inner = 30;
    double tau = 0.01;
};

/// Hyper-parameter table for method in {overdamped, underdamped, third} and
/// L in {5, 10, 20}. Throws ConfigError for other pairs.
PresetValues preset_values(const std::string& method, int levels);

/// `config` with order, L, sigma1, sigmaL, eps0, T, tau and the default scheme
/// set from preset_values.
ExperimentConfig run_table1_preset(const std::string& method, int levels, ExperimentConfig config = {});

struct NamedPreset {
    std::string name;
    std::string description;
};

/// "overdamped-L5", ..., "third-L20" and "coherence-block".
std::vector<NamedPreset> list_presets();
ExperimentConfig apply_preset(const std::string& name, ExperimentConfig config);

struct ResultRow {
    std::string task;
    double snr_db = 0.0;
    std::string method;
    std::string scheme;
    int levels = 0;
    int t_inner = 0;
    int trajectories = 0;
    std::uint64_t n_symbols = 0;
    std::uint64_t errors = 0;
    double ser_or_nmse = 0.0;
    double wall_ns_per_symbol = 0.0;
    std::uint64_t seed = 0;
    double wall_ns_per_symbol_incl_setup = 0.0;
};

/// RFC 4180, header line first, 17 significant digits.
std::string results_csv(const std::vector<ResultRow>& rows);
void emit_csv(const std::vector<ResultRow>& rows, const std::string& path);

/// One detector column of a sweep.
struct MethodSpec {
    enum class Kind { Langevin, Mmse, Vblast, Ml } kind = Kind::Mmse;
    std::string label;
    LangevinDetector detector;  // Langevin only
};

/// "langevin" (the [sampler] settings), "overdamped:L", "underdamped:L",
/// "third:L" (table presets over the [sampler] gamma, lambda, alpha, U,
/// mass and pre-conditioner settings), "mmse", "vblast", "ml".
MethodSpec parse_method(const std::string& text, const ExperimentConfig& config);

/// Error counts per (snr, method) plus per-vector counts for paired analyses.
struct SweepOutcome {
    std::vector<ResultRow> rows;  // snr-major, then method order
    // errors[snr][method][vector], vectors ordered by (channel, symbol)
    std::vector<std::vector<std::vector<std::uint32_t>>> vector_errors;
};

/// Channel c at SNR index k uses derive_seed(seed, {k, c}); symbol vector s
/// uses derive_seed(seed, {k, c, s}) for data and noise and
/// derive_seed(seed, {k, c, s, 1000 + method}) for the sampler. Output does
/// not depend on config.threads apart from the timing columns, which are zero
/// unless config.timing is set.
SweepOutcome run_detect_sweep(const ExperimentConfig& config);

/// One row per (scheme, variable) plus pre-conditioning comparison rows.
std::vector<CheckRow> run_stationary_test(const ExperimentConfig& config);

/// Per-order randomized grids of fdt_check.
std::vector<CheckRow> run_fdt_test(const ExperimentConfig& config);

/// NMSE rows per (snr, scheme) and for the closed-form estimator.
std::vector<ResultRow> run_channel_toy(const ExperimentConfig& config);

}  // namespace langevin
