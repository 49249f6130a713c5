#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "langevin/detect.hpp"
#include "langevin/experiments.hpp"
#include "langevin/model.hpp"
#include "langevin/schedule.hpp"
#include "langevin/score.hpp"

namespace py = pybind11;
using namespace langevin;

namespace {

ExperimentConfig parse_config(const std::string& text, const std::map<std::string, std::string>& overrides) {
    KeyValues kv = KeyValues::parse(text);
    for (const auto& [k, v] : overrides) kv.set(k, v);
    return make_config(kv);
}

std::string run_task(const std::string& text, const std::map<std::string, std::string>& overrides) {
    const ExperimentConfig c = parse_config(text, overrides);
    py::gil_scoped_release release;
    switch (c.task) {
        case Task::DetectSweep: return results_csv(run_detect_sweep(c).rows);
        case Task::StationaryTest: return verification_csv(run_stationary_test(c));
        case Task::ChannelToy: return results_csv(run_channel_toy(c));
        case Task::FdtTest: return verification_csv(run_fdt_test(c));
    }
    return {};
}

Eigen::VectorXd detect(const Eigen::MatrixXd& h, const Eigen::VectorXd& y, double sigma0,
                       const std::string& constellation, const std::string& method, std::uint64_t seed,
                       int trajectories, unsigned threads) {
    const Constellation c = make_constellation(constellation);
    const ForwardModel model(h, y, sigma0);
    ExperimentConfig cfg;
    cfg.trajectories = trajectories;
    const MethodSpec spec = parse_method(method, cfg);
    py::gil_scoped_release release;
    switch (spec.kind) {
        case MethodSpec::Kind::Langevin: return langevin_detect(model, c, spec.detector, seed, threads).xhat;
        case MethodSpec::Kind::Mmse: return mmse_detect(model, c, c.energy);
        case MethodSpec::Kind::Vblast: return vblast_detect(model, c);
        case MethodSpec::Kind::Ml: return ml_oracle(model, c);
    }
    return {};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Annealed Langevin samplers for MIMO detection and linear inverse problems";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

    m.def("constellation_points", [](const std::string& name) { return make_constellation(name).points; },
          py::arg("name"), "Real-axis levels of QPSK, QAM16 or QAM64 (unit average complex energy).");
    m.def("complex_to_real", py::overload_cast<const ComplexMatrix&>(&complex_to_real), py::arg("h"));
    m.def("sigma0_from_snr",
          [](double snr_db, int n_r, int n_u, const std::string& constellation) {
              return sigma0_from_snr(db_to_linear(snr_db), ChannelSpec{n_r, n_u, 0.0, ChannelModel::IidRayleigh},
                                     make_constellation(constellation));
          },
          py::arg("snr_db"), py::arg("n_r"), py::arg("n_u"), py::arg("constellation") = "QAM16",
          "Complex noise std for the given SNR in dB.");

    m.def("geometric_sigmas", &geometric_sigmas, py::arg("sigma1"), py::arg("sigmaL"), py::arg("levels"));
    m.def("detection_step_sizes", &detection_step_sizes, py::arg("eps0"), py::arg("sigmas"));
    m.def("estimation_step_sizes", &estimation_step_sizes, py::arg("eps0"), py::arg("sigmas"));
    m.def("spectral_preconditioner", &spectral_preconditioner, py::arg("sigma_l"), py::arg("sigma0"), py::arg("s"),
          py::arg("dim"));
    m.def("mass_from_preconditioner", &mass_from_preconditioner, py::arg("c"), py::arg("gamma"));
    m.def("critical_mass", &critical_mass, py::arg("c"), py::arg("gamma"));

    m.def("spectral_likelihood_score", &spectral_likelihood_score, py::arg("chi"), py::arg("eta"), py::arg("s"),
          py::arg("sigma0"), py::arg("sigma_l"));
    m.def("tweedie_prior_score",
          [](const Eigen::VectorXd& x, double sigma_l, const std::string& constellation) {
              return tweedie_prior_score(x, sigma_l, make_constellation(constellation));
          },
          py::arg("x"), py::arg("sigma_l"), py::arg("constellation") = "QAM16");

    m.def("preset_values",
          [](const std::string& method, int levels) {
              const PresetValues p = preset_values(method, levels);
              py::dict d;
              d["order"] = p.order;
              d["L"] = p.levels;
              d["sigma1"] = p.sigma1;
              d["sigmaL"] = p.sigmaL;
              d["eps0"] = p.eps0;
              d["T"] = p.t_inner;
              d["tau"] = p.tau;
              return d;
          },
          py::arg("method"), py::arg("levels"));
    m.def("list_presets", [] {
        std::vector<std::string> names;
        for (const auto& p : list_presets()) names.push_back(p.name);
        return names;
    });

    m.def("detect", &detect, py::arg("h"), py::arg("y"), py::arg("sigma0"), py::arg("constellation") = "QAM16",
          py::arg("method") = "third:5", py::arg("seed") = 0, py::arg("trajectories") = 20, py::arg("threads") = 1,
          "Detect one real-valued symbol vector. `sigma0` is the per-real-dimension noise std; `method` takes the "
          "sweep syntax (overdamped:L, underdamped:L, third:L, mmse, vblast, ml).");
    m.def("symbol_error_rate", &symbol_error_rate, py::arg("decisions"), py::arg("truths"));

    m.def("run", &run_task, py::arg("config"), py::arg("overrides") = std::map<std::string, std::string>{},
          "Run the task named in a key = value config text and return its CSV.");
    m.def("config_keys", &config_keys);
}
