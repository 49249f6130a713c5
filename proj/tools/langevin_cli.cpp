#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "langevin/experiments.hpp"
#include "langevin/sampler.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kDivergence = 3;

struct CommonOptions {
    std::string config;
    std::string preset;
    std::string out;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    bool timing = false;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "key = value config file");
    cmd->add_option("--preset", o.preset, "named preset (see `preset --list`)");
    cmd->add_option("--seed", o.seed, "experiment seed");
    cmd->add_option("--out", o.out, "CSV output path (default: stdout)");
    cmd->add_option("--threads", o.threads, "worker threads");
    cmd->add_option("--set", o.overrides, "section.key=value override")->take_all();
}

langevin::ExperimentConfig build_config(const CommonOptions& o, const std::string& task, CLI::App* cmd) {
    langevin::KeyValues kv;
    if (!o.config.empty()) kv = langevin::KeyValues::load(o.config);
    kv.set("task", task);
    if (!o.preset.empty()) kv.set("preset", o.preset);
    for (const auto& a : o.overrides) kv.set_assignment(a);
    if (cmd->count("--seed")) kv.set("seed", std::to_string(o.seed));
    if (cmd->count("--out")) kv.set("out", o.out);
    if (cmd->count("--threads")) kv.set("threads", std::to_string(o.threads));
    if (o.timing) kv.set("sweep.timing", "true");
    return langevin::make_config(kv);
}

void write_output(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

int failed_checks(const std::vector<langevin::CheckRow>& rows) {
    int failed = 0;
    for (const auto& r : rows) {
        std::cerr << (r.pass ? "PASS " : "FAIL ") << r.test << " statistic=" << r.statistic
                  << " tolerance=" << r.tolerance << '\n';
        if (!r.pass) ++failed;
    }
    return failed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Annealed Langevin samplers for linear inverse problems and MIMO detection"};
    app.require_subcommand(1);

    CommonOptions sweep_opts, stat_opts, toy_opts, fdt_opts;
    auto* sweep = app.add_subcommand("detect-sweep", "SER against SNR for the configured detectors");
    add_common(sweep, sweep_opts);
    sweep->add_flag("--timing", sweep_opts.timing, "fill the wall-time columns (non-deterministic)");
    auto* stationary = app.add_subcommand("stationary-test", "moments on a quadratic target against Gibbs values");
    add_common(stationary, stat_opts);
    auto* toy = app.add_subcommand("channel-toy", "Gaussian-prior channel estimation against the closed form");
    add_common(toy, toy_opts);
    auto* fdt = app.add_subcommand("fdt-test", "OU sub-step noise and autocorrelation checks");
    add_common(fdt, fdt_opts);
    auto* preset = app.add_subcommand("preset", "named hyper-parameter presets");
    bool list = false;
    preset->add_flag("--list", list, "print all presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (preset->parsed()) {
            for (const auto& p : langevin::list_presets()) std::cout << p.name << '\t' << p.description << '\n';
            return 0;
        }
        if (sweep->parsed()) {
            const auto config = build_config(sweep_opts, "detect-sweep", sweep);
            const auto outcome = langevin::run_detect_sweep(config);
            for (const auto& r : outcome.rows)
                std::cerr << "snr=" << r.snr_db << " dB " << r.method << ": SER " << r.ser_or_nmse << " (" << r.errors
                          << "/" << r.n_symbols << ")\n";
            write_output(langevin::results_csv(outcome.rows), config.out);
            return 0;
        }
        if (stationary->parsed()) {
            const auto config = build_config(stat_opts, "stationary-test", stationary);
            const auto rows = langevin::run_stationary_test(config);
            write_output(langevin::verification_csv(rows), config.out);
            return failed_checks(rows) == 0 ? 0 : 1;
        }
        if (toy->parsed()) {
            const auto config = build_config(toy_opts, "channel-toy", toy);
            const auto rows = langevin::run_channel_toy(config);
            bool diverged = false;
            for (const auto& r : rows) {
                std::cerr << "snr=" << r.snr_db << " dB " << r.method << (r.scheme.empty() ? "" : " " + r.scheme)
                          << ": NMSE " << r.ser_or_nmse << " dB";
                if (r.errors > 0) std::cerr << " (" << r.errors << " diverged)";
                std::cerr << '\n';
                diverged = diverged || r.errors == r.n_symbols;
            }
            write_output(langevin::results_csv(rows), config.out);
            return diverged ? kDivergence : 0;
        }
        if (fdt->parsed()) {
            const auto config = build_config(fdt_opts, "fdt-test", fdt);
            const auto rows = langevin::run_fdt_test(config);
            write_output(langevin::verification_csv(rows), config.out);
            return failed_checks(rows) == 0 ? 0 : 1;
        }
    } catch (const langevin::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const langevin::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return kDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
