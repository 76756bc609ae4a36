#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "otafl/config.hpp"
#include "otafl/harness.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// "3", "0-19" and "1,4,7-9" are all accepted.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    for (const auto& part : split(text, ',')) {
        const auto dash = part.find('-');
        try {
            if (dash == std::string::npos) {
                seeds.push_back(std::stoull(part));
            } else {
                const auto lo = std::stoull(part.substr(0, dash));
                const auto hi = std::stoull(part.substr(dash + 1));
                if (hi < lo) throw otafl::ConfigError("empty seed range '" + part + "'");
                for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
            }
        } catch (const std::logic_error&) {
            throw otafl::ConfigError("bad --seeds entry '" + part + "'");
        }
    }
    if (seeds.empty()) throw otafl::ConfigError("--seeds is empty");
    return seeds;
}

struct Common {
    std::string config_path;
    std::string seeds;
    std::string schemes;
    std::string out_dir = "otafl_out";
    std::size_t threads = 0;
};

void add_common(CLI::App* cmd, Common& c, bool with_run_flags) {
    cmd->add_option("--config", c.config_path, "experiment config (JSON); defaults are used when omitted");
    cmd->add_option("--out-dir", c.out_dir, "output directory")->capture_default_str();
    if (with_run_flags) {
        cmd->add_option("--seeds", c.seeds, "seed list, e.g. 0-19 or 1,2,5");
        cmd->add_option("--schemes", c.schemes, "comma-separated scheme names");
        cmd->add_option("--threads", c.threads, "worker threads");
    }
}

otafl::ExperimentConfig resolve(const Common& c) {
    otafl::ExperimentConfig cfg = c.config_path.empty() ? otafl::ExperimentConfig{} : otafl::load_config(c.config_path);
    if (!c.seeds.empty()) cfg.seeds = parse_seeds(c.seeds);
    if (!c.schemes.empty()) cfg.schemes = split(c.schemes, ',');
    if (c.threads > 0) cfg.threads = c.threads;
    cfg.validate();
    return cfg;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Over-the-air federated learning simulator"};
    app.require_subcommand(1);

    Common run_opts, design_opts, grid_opts, validate_opts;
    bool overwrite = false;
    auto* run = app.add_subcommand("run", "train every scheme x seed and write metrics");
    add_common(run, run_opts, true);
    run->add_flag("--overwrite", overwrite, "replace metrics of an earlier run in --out-dir");

    auto* design = app.add_subcommand("design", "compute the SCA pre-scaler design");
    add_common(design, design_opts, false);

    std::vector<std::string> report_inputs;
    std::string report_out = "otafl_report";
    double target = -1.0;
    auto* rep = app.add_subcommand("report", "aggregate metrics files into series and tables");
    rep->add_option("inputs", report_inputs, "metrics files or run directories")->required();
    rep->add_option("--out-dir", report_out, "output directory")->capture_default_str();
    rep->add_option("--target", target, "test-accuracy target for rounds-to-target (default 0.8)");

    auto* grid = app.add_subcommand("grid-eta", "grid search over step sizes, per scheme and common");
    add_common(grid, grid_opts, true);

    auto* validate = app.add_subcommand("validate-config", "check a config file and print it with defaults filled in");
    add_common(validate, validate_opts, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*run) {
            const auto cfg = resolve(run_opts);
            otafl::RunOptions opts;
            opts.overwrite = overwrite;
            const auto summary = otafl::run_experiment(cfg, run_opts.out_dir, opts);
            std::cout << "wrote " << summary.cells.size() << " cells to " << run_opts.out_dir << '\n';
            for (const auto& f : summary.failures) std::cerr << "cell failed: " << f << '\n';
            if (!summary.failures.empty()) return kRuntimeError;
        } else if (*design) {
            const auto cfg = resolve(design_opts);
            const auto out = otafl::design_prescalers(cfg);
            const fs::path path = fs::path(design_opts.out_dir) / "design.json";
            write_json(path, out);
            std::cout << "wrote " << path.string() << '\n';
        } else if (*rep) {
            std::vector<fs::path> files;
            for (const auto& in : report_inputs) {
                const fs::path p(in);
                if (fs::is_directory(p)) {
                    const auto merged = p / "metrics.ndjson";
                    if (!fs::exists(merged)) throw otafl::ConfigError("no metrics.ndjson in " + p.string());
                    files.push_back(merged);
                } else {
                    files.push_back(p);
                }
            }
            otafl::ReportOptions opts;
            if (target > 0.0) opts.target_accuracy = target;
            const auto table = otafl::report(files, report_out, opts);
            std::cout << table.dump(2) << '\n';
        } else if (*grid) {
            const auto cfg = resolve(grid_opts);
            const auto out = otafl::grid_eta(cfg, grid_opts.out_dir);
            std::cout << "best eta per scheme " << out["best_eta_by_scheme"].dump() << "\nbest common eta "
                      << out["best_common_eta"] << "\nwrote " << (fs::path(grid_opts.out_dir) / "grid_eta.json").string()
                      << '\n';
        } else if (*validate) {
            const auto cfg = resolve(validate_opts);
            std::cout << otafl::to_json(cfg).dump(2) << "\nconfig_hash " << otafl::config_hash(cfg) << '\n';
        }
    } catch (const otafl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kOk;
}
