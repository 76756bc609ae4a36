#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otafl/baselines.hpp"
#include "otafl/bound_eval.hpp"
#include "otafl/channel_model.hpp"
#include "otafl/config.hpp"
#include "otafl/dataset.hpp"
#include "otafl/learner.hpp"
#include "otafl/sca_designer.hpp"

namespace otafl {

/// Everything shared by the cells of one experiment. Built once, read-only afterwards.
struct Environment {
    ExperimentConfig config;
    Deployment deployment;
    NetworkConfig network;
    Dataset test;
    std::vector<Dataset> devices;
    ModelSpec model;
    Vector w0;
    double kappa = 0.0;
    std::vector<double> sigma;  ///< per-device mini-batch std at w0 (empty for full batch)
    double lipschitz = 0.0;
    double initial_gap = 0.0;  ///< max_m f_m(w0), the loss floor being 0

    double init_term_for(const std::string& scheme) const {
        return init_term_from_gap(initial_gap, config.eta_for(scheme), config.t_rounds);
    }
    sca::DesignProblem problem;
    std::optional<sca::ScaResult> sca;
    std::optional<PowerControlDesign> lcpc;
};

struct EnvironmentOptions {
    bool design_sca = true;
    bool design_lcpc = true;
};

Environment build_environment(const ExperimentConfig& config, const EnvironmentOptions& options = {});

/// Only designs the schemes listed in the config actually need.
Environment build_environment_for_schemes(const ExperimentConfig& config);

struct CellResult {
    std::string scheme;
    std::uint64_t seed = 0;
    std::vector<nlohmann::json> records;   ///< rounds 0..T
    std::vector<std::string> channel_checksums;  ///< one per training round
    double final_accuracy = 0.0;
    double final_loss = 0.0;
    double stationarity = 0.0;  ///< (1/T) sum_{t<T} ||grad F(w_t)||^2
    bool diverged = false;
};

/// One scheme trained for T rounds under seed-specific fading, noise and batches.
CellResult run_cell(const Environment& env, const std::string& scheme, std::uint64_t seed);

/// FNV-1a over the raw bytes of the fading draw.
std::string channel_checksum(const FadingDraw& fading);

struct RunSummary {
    std::vector<CellResult> cells;
    std::vector<std::string> failures;  ///< "scheme/seed: message"
    nlohmann::json meta;
};

struct RunOptions {
    bool overwrite = false;   ///< allow replacing metrics from an earlier run
    bool keep_records = true; ///< keep per-round records in memory after writing
};

/// Runs every scheme x seed cell on a bounded worker pool. When out_dir is
/// non-empty, writes metrics/<scheme>__seed<k>.ndjson per cell, the merged
/// metrics.ndjson, summary.csv and run_meta.json. A failing cell is reported
/// in `failures` without stopping the others.
RunSummary run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                          const RunOptions& options = {});

/// SCA design for the configured deployment, as written by the `design` command.
nlohmann::json design_prescalers(const ExperimentConfig& config);

struct ReportOptions {
    double target_accuracy = 0.8;
};

/// Reads NDJSON metric files and writes series/<scheme>__<metric>.csv,
/// final.csv and rounds_to_target.csv into out_dir. Returns the final table.
/// Throws ConfigError if the records come from different configurations.
nlohmann::json report(const std::vector<std::filesystem::path>& metric_files, const std::filesystem::path& out_dir,
                      const ReportOptions& options = {});

/// Trains every scheme for every eta of the grid. Reports the best eta of each
/// scheme (highest mean final test accuracy over seeds) and the best common eta.
nlohmann::json grid_eta(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Sample mean and standard deviation (n - 1); std is 0 for a single value.
struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
    std::size_t n = 0;
};
MeanStd mean_std(const std::vector<double>& values);

}  // namespace otafl
