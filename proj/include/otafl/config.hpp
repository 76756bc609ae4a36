#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otafl/dataset.hpp"
#include "otafl/learner.hpp"

namespace otafl {

/// Raised for anything wrong with a user-supplied configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& all_schemes() {
    static const std::vector<std::string> names{"ideal_fedavg", "opc",         "sca",           "lcpc",
                                                "vanilla",      "bb_interior", "bb_alternative"};
    return names;
}

struct DatasetConfig {
    std::string kind = "synthetic";  ///< synthetic | csv | idx
    std::string path;                ///< csv file, or idx image file
    std::string labels_path;         ///< idx label file
    SyntheticSpec synthetic;
    double test_fraction = 0.2;
    int labels_per_device = 2;
    std::uint64_t partition_seed = 11;
};

enum class KappaMode { Estimate, WorstCase, Value };

struct ScaParams {
    std::size_t max_iters = 100;
    double rel_tol = 1e-6;
    double tolerance = 1e-8;
};

/// Every knob of an experiment. Defaults reproduce the reference deployment
/// (N = 10, r_max = 1750 m, exponent 2.2, 50 dB at 1 m, 1 MHz, -173 dBm/Hz,
/// 0 dBm, G_max = 10) on the desk-scale synthetic task.
struct ExperimentConfig {
    std::size_t n_devices = 10;
    double r_max_m = 1750.0;
    std::uint64_t deployment_seed = 3;
    double pathloss_exponent = 2.2;
    double pl0_db = 50.0;
    double bandwidth_hz = 1e6;
    double noise_psd_dbm_hz = -173.0;
    double ptx_dbm = 0.0;
    double g_max = 10.0;

    double eta = 0.1;
    /// Per-scheme step sizes from the grid search; schemes not listed use `eta`.
    std::map<std::string, double> eta_by_scheme;
    std::optional<double> lipschitz;  ///< defaults to 1 / eta_for("sca")
    std::size_t t_rounds = 200;
    std::size_t batch_size = 0;       ///< 0 means full batch
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> schemes;

    ScaParams sca;
    DatasetConfig dataset;
    ModelSpec model;
    std::uint64_t init_seed = 5;

    KappaMode kappa_mode = KappaMode::Estimate;
    double kappa_value = 0.0;

    double r_in_fraction = 0.6;
    std::optional<std::vector<double>> lambda_override;
    std::vector<double> eta_grid;
    double target_accuracy = 0.8;
    std::size_t threads = 1;

    ExperimentConfig();

    double eta_for(const std::string& scheme) const {
        const auto it = eta_by_scheme.find(scheme);
        return it == eta_by_scheme.end() ? eta : it->second;
    }
    double lipschitz_value() const { return lipschitz.value_or(1.0 / eta_for("sca")); }
    /// Throws ConfigError on any invalid field.
    void validate() const;
};

/// Parses and validates; unknown keys are rejected so typos do not go unnoticed.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& c);

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

}  // namespace otafl
