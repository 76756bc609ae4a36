#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "otafl/baselines.hpp"
#include "otafl/bound_eval.hpp"
#include "otafl/harness.hpp"
#include "otafl/sca_designer.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace otafl;

namespace {

// Structured results cross the boundary as JSON text; the Python layer decodes them.
NetworkConfig network_from(const std::string& text) {
    const json j = json::parse(text);
    NetworkConfig c;
    c.lambda = j.at("lambda").get<std::vector<double>>();
    c.e_s = j.value("e_s", 1.0);
    c.n0 = j.value("n0", 0.0);
    c.d = j.value("d", std::size_t{1});
    c.g_max = j.value("g_max", 1.0);
    c.validate();
    return c;
}

json design_json(const PowerControlDesign& d) {
    return {{"gamma", d.gamma}, {"alpha_m", d.alpha_m}, {"p", d.p}, {"alpha", d.alpha}};
}

ExperimentConfig config_from(const std::string& text) {
    try {
        return config_from_json(json::parse(text, nullptr, true, true));
    } catch (const json::exception& e) {
        throw ConfigError(e.what());
    }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Over-the-air federated learning simulator core";
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def("pathloss_gain", &pathloss_gain, py::arg("distance_m"), py::arg("exponent"), py::arg("pl0_db"));
    m.def("truncation_probability", &truncation_probability, py::arg("gamma"), py::arg("lambda_"), py::arg("g_max"),
          py::arg("d"), py::arg("e_s"));
    m.def("alpha_m", &alpha_m, py::arg("gamma"), py::arg("lambda_"), py::arg("g_max"), py::arg("d"), py::arg("e_s"));
    m.def("gamma_max", &gamma_max, py::arg("lambda_"), py::arg("g_max"), py::arg("d"), py::arg("e_s"));
    m.def("alpha_max", &alpha_max, py::arg("lambda_"), py::arg("g_max"), py::arg("d"), py::arg("e_s"));
    m.def("sample_fading",
          [](const std::vector<double>& lambda, std::uint64_t seed, std::uint64_t round) {
              return sample_fading(lambda, seed, round).h;
          },
          py::arg("lambda_"), py::arg("seed"), py::arg("round"));
    m.def("bias_term", [](const std::vector<double>& p, double kappa, std::size_t n) { return bias_term(p, kappa, n); },
          py::arg("p"), py::arg("kappa"), py::arg("n"));

    m.def("_make_design",
          [](const std::vector<double>& gamma, const std::string& network) {
              return design_json(make_design(gamma, network_from(network))).dump();
          });
    m.def("_zeta",
          [](const std::vector<double>& gamma, const std::string& network, const std::vector<double>& sigma) {
              const NetworkConfig cfg = network_from(network);
              return to_json(zeta(make_design(gamma, cfg), sigma, cfg)).dump();
          });
    m.def("_lcpc", [](const std::string& network) {
        const NetworkConfig cfg = network_from(network);
        return design_json(baselines::lcpc(cfg.lambda, cfg)).dump();
    });
    m.def("_sca_design", [](const std::string& problem) {
        const sca::DesignProblem p = sca::problem_from_json(json::parse(problem));
        py::gil_scoped_release release;
        return sca::to_json(sca::sca_loop(p), p).dump();
    });

    m.def("_validate_config", [](const std::string& text) { return to_json(config_from(text)).dump(); });
    m.def("_config_hash", [](const std::string& text) { return config_hash(config_from(text)); });
    m.def("_run", [](const std::string& text, const std::filesystem::path& out_dir, bool overwrite) {
        const ExperimentConfig cfg = config_from(text);
        RunOptions opts;
        opts.overwrite = overwrite;
        opts.keep_records = false;
        py::gil_scoped_release release;
        const RunSummary s = run_experiment(cfg, out_dir, opts);
        return s.meta.dump();
    });
    m.def("_design", [](const std::string& text) {
        const ExperimentConfig cfg = config_from(text);
        py::gil_scoped_release release;
        return design_prescalers(cfg).dump();
    });
    m.def("_report", [](const std::vector<std::filesystem::path>& files, const std::filesystem::path& out_dir,
                        double target) {
        ReportOptions opts;
        opts.target_accuracy = target;
        return report(files, out_dir, opts).dump();
    });
    m.def("_grid_eta", [](const std::string& text, const std::filesystem::path& out_dir) {
        const ExperimentConfig cfg = config_from(text);
        py::gil_scoped_release release;
        return grid_eta(cfg, out_dir).dump();
    });
}
