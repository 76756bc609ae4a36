#include "otafl/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace otafl {

namespace {

using json = nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

std::string kappa_mode_name(KappaMode m) {
    switch (m) {
        case KappaMode::Estimate: return "estimate";
        case KappaMode::WorstCase: return "worst_case";
        case KappaMode::Value: return "value";
    }
    return "estimate";
}

}  // namespace

ExperimentConfig::ExperimentConfig() : schemes(all_schemes()) {
    for (std::uint64_t s = 0; s < 20; ++s) seeds.push_back(s);
    for (double e : {0.02, 0.03, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0}) eta_grid.push_back(e);
    // Best constant step of each scheme on the default experiment (grid-eta over 20 seeds).
    eta_by_scheme = {{"ideal_fedavg", 0.3}, {"opc", 0.2},         {"sca", 0.1},           {"lcpc", 0.1},
                     {"vanilla", 0.03},     {"bb_interior", 0.1}, {"bb_alternative", 0.1}};
}

void ExperimentConfig::validate() const {
    require(n_devices >= 1, "n_devices must be >= 1");
    require(r_max_m > 1.0, "r_max_m must exceed the 1 m reference distance");
    require(pathloss_exponent >= 0.0, "pathloss.exponent must be non-negative");
    require(bandwidth_hz > 0.0, "bandwidth_hz must be positive");
    require(std::isfinite(noise_psd_dbm_hz) && std::isfinite(ptx_dbm), "power levels must be finite");
    require(g_max > 0.0, "g_max must be positive");
    require(eta > 0.0, "eta must be positive");
    for (const auto& [name, e] : eta_by_scheme) {
        require(std::find(all_schemes().begin(), all_schemes().end(), name) != all_schemes().end(),
                "eta_by_scheme names unknown scheme '" + name + "'");
        require(e > 0.0, "eta_by_scheme." + name + " must be positive");
    }
    require(!lipschitz || *lipschitz > 0.0, "L must be positive");
    require(t_rounds >= 1, "t_rounds must be >= 1");
    require(!seeds.empty(), "seeds must not be empty");
    require(!schemes.empty(), "schemes must not be empty");
    const auto& known = all_schemes();
    std::set<std::string> seen;
    for (const auto& s : schemes) {
        require(std::find(known.begin(), known.end(), s) != known.end(), "unknown scheme '" + s + "'");
        require(seen.insert(s).second, "scheme '" + s + "' listed twice");
    }
    require(sca.max_iters >= 1 && sca.rel_tol > 0.0 && sca.tolerance > 0.0, "sca parameters must be positive");
    require(dataset.kind == "synthetic" || dataset.kind == "csv" || dataset.kind == "idx",
            "dataset.kind must be synthetic, csv or idx");
    require(dataset.kind == "synthetic" || !dataset.path.empty(), "dataset.path required for file datasets");
    require(dataset.kind != "idx" || !dataset.labels_path.empty(), "dataset.labels_path required for idx");
    require(dataset.test_fraction >= 0.0 && dataset.test_fraction < 1.0, "dataset.test_fraction must be in [0, 1)");
    require(dataset.labels_per_device >= 1, "dataset.labels_per_device must be >= 1");
    require(dataset.synthetic.classes >= 2 && dataset.synthetic.features >= 1 &&
                dataset.synthetic.samples_per_class >= 1 && dataset.synthetic.separation > 0.0,
            "dataset.synthetic parameters must be positive");
    require(model.hidden >= 0 && model.l2 >= 0.0, "model.hidden and model.l2 must be non-negative");
    require(kappa_mode != KappaMode::Value || kappa_value >= 0.0, "kappa value must be non-negative");
    require(r_in_fraction > 0.0, "bb_fl.r_in_fraction must be positive");
    if (lambda_override) {
        require(lambda_override->size() == n_devices, "lambda_override needs one entry per device");
        for (double l : *lambda_override) require(l > 0.0 && std::isfinite(l), "lambda_override entries must be positive");
    }
    for (double e : eta_grid) require(e > 0.0, "eta_grid entries must be positive");
    require(target_accuracy > 0.0 && target_accuracy <= 1.0, "target_accuracy must be in (0, 1]");
    require(threads >= 1, "threads must be >= 1");
}

ExperimentConfig config_from_json(const json& j) {
    reject_unknown(j,
                   {"n_devices", "r_max_m", "deployment_seed", "pathloss", "bandwidth_hz", "noise_psd_dbm_hz",
                    "ptx_dbm", "g_max", "eta", "eta_by_scheme", "L", "t_rounds", "batch_size", "seeds", "schemes", "sca", "dataset",
                    "model", "init_seed", "kappa", "bb_fl", "lambda_override", "eta_grid", "target_accuracy",
                    "threads"},
                   "config");
    ExperimentConfig c;
    read(j, "n_devices", c.n_devices, "config");
    read(j, "r_max_m", c.r_max_m, "config");
    read(j, "deployment_seed", c.deployment_seed, "config");
    if (j.contains("pathloss")) {
        const auto& p = j.at("pathloss");
        reject_unknown(p, {"exponent", "pl0_db"}, "pathloss");
        read(p, "exponent", c.pathloss_exponent, "pathloss");
        read(p, "pl0_db", c.pl0_db, "pathloss");
    }
    read(j, "bandwidth_hz", c.bandwidth_hz, "config");
    read(j, "noise_psd_dbm_hz", c.noise_psd_dbm_hz, "config");
    read(j, "ptx_dbm", c.ptx_dbm, "config");
    read(j, "g_max", c.g_max, "config");
    read(j, "eta", c.eta, "config");
    read(j, "eta_by_scheme", c.eta_by_scheme, "config");
    if (j.contains("L") && !j.at("L").is_null()) {
        double l = 0.0;
        read(j, "L", l, "config");
        c.lipschitz = l;
    }
    read(j, "t_rounds", c.t_rounds, "config");
    read(j, "batch_size", c.batch_size, "config");
    read(j, "seeds", c.seeds, "config");
    read(j, "schemes", c.schemes, "config");
    if (j.contains("sca")) {
        const auto& s = j.at("sca");
        reject_unknown(s, {"max_iters", "rel_tol", "tolerance"}, "sca");
        read(s, "max_iters", c.sca.max_iters, "sca");
        read(s, "rel_tol", c.sca.rel_tol, "sca");
        read(s, "tolerance", c.sca.tolerance, "sca");
    }
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        reject_unknown(d,
                       {"kind", "path", "labels_path", "classes", "features", "samples_per_class", "separation",
                        "seed", "test_fraction", "labels_per_device", "partition_seed"},
                       "dataset");
        read(d, "kind", c.dataset.kind, "dataset");
        read(d, "path", c.dataset.path, "dataset");
        read(d, "labels_path", c.dataset.labels_path, "dataset");
        read(d, "classes", c.dataset.synthetic.classes, "dataset");
        read(d, "features", c.dataset.synthetic.features, "dataset");
        read(d, "samples_per_class", c.dataset.synthetic.samples_per_class, "dataset");
        read(d, "separation", c.dataset.synthetic.separation, "dataset");
        read(d, "seed", c.dataset.synthetic.seed, "dataset");
        read(d, "test_fraction", c.dataset.test_fraction, "dataset");
        read(d, "labels_per_device", c.dataset.labels_per_device, "dataset");
        read(d, "partition_seed", c.dataset.partition_seed, "dataset");
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        reject_unknown(m, {"hidden", "l2"}, "model");
        read(m, "hidden", c.model.hidden, "model");
        read(m, "l2", c.model.l2, "model");
    }
    read(j, "init_seed", c.init_seed, "config");
    if (j.contains("kappa")) {
        const auto& k = j.at("kappa");
        if (k.is_number()) {
            c.kappa_mode = KappaMode::Value;
            c.kappa_value = k.get<double>();
        } else if (k.is_string()) {
            const auto s = k.get<std::string>();
            if (s == "estimate") {
                c.kappa_mode = KappaMode::Estimate;
            } else if (s == "worst_case") {
                c.kappa_mode = KappaMode::WorstCase;
            } else {
                throw ConfigError("kappa must be \"estimate\", \"worst_case\" or a number");
            }
        } else {
            throw ConfigError("kappa must be \"estimate\", \"worst_case\" or a number");
        }
    }
    if (j.contains("bb_fl")) {
        const auto& b = j.at("bb_fl");
        reject_unknown(b, {"r_in_fraction"}, "bb_fl");
        read(b, "r_in_fraction", c.r_in_fraction, "bb_fl");
    }
    if (j.contains("lambda_override") && !j.at("lambda_override").is_null()) {
        std::vector<double> l;
        read(j, "lambda_override", l, "config");
        c.lambda_override = l;
    }
    read(j, "eta_grid", c.eta_grid, "config");
    read(j, "target_accuracy", c.target_accuracy, "config");
    read(j, "threads", c.threads, "config");
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

json to_json(const ExperimentConfig& c) {
    json j{{"n_devices", c.n_devices},
           {"r_max_m", c.r_max_m},
           {"deployment_seed", c.deployment_seed},
           {"pathloss", {{"exponent", c.pathloss_exponent}, {"pl0_db", c.pl0_db}}},
           {"bandwidth_hz", c.bandwidth_hz},
           {"noise_psd_dbm_hz", c.noise_psd_dbm_hz},
           {"ptx_dbm", c.ptx_dbm},
           {"g_max", c.g_max},
           {"eta", c.eta},
           {"eta_by_scheme", c.eta_by_scheme},
           {"L", c.lipschitz ? json(*c.lipschitz) : json(nullptr)},
           {"t_rounds", c.t_rounds},
           {"batch_size", c.batch_size},
           {"seeds", c.seeds},
           {"schemes", c.schemes},
           {"sca", {{"max_iters", c.sca.max_iters}, {"rel_tol", c.sca.rel_tol}, {"tolerance", c.sca.tolerance}}},
           {"dataset",
            {{"kind", c.dataset.kind},
             {"path", c.dataset.path},
             {"labels_path", c.dataset.labels_path},
             {"classes", c.dataset.synthetic.classes},
             {"features", c.dataset.synthetic.features},
             {"samples_per_class", c.dataset.synthetic.samples_per_class},
             {"separation", c.dataset.synthetic.separation},
             {"seed", c.dataset.synthetic.seed},
             {"test_fraction", c.dataset.test_fraction},
             {"labels_per_device", c.dataset.labels_per_device},
             {"partition_seed", c.dataset.partition_seed}}},
           {"model", {{"hidden", c.model.hidden}, {"l2", c.model.l2}}},
           {"init_seed", c.init_seed},
           {"bb_fl", {{"r_in_fraction", c.r_in_fraction}}},
           {"lambda_override", c.lambda_override ? json(*c.lambda_override) : json(nullptr)},
           {"eta_grid", c.eta_grid},
           {"target_accuracy", c.target_accuracy},
           {"threads", c.threads}};
    if (c.kappa_mode == KappaMode::Value) {
        j["kappa"] = c.kappa_value;
    } else {
        j["kappa"] = kappa_mode_name(c.kappa_mode);
    }
    return j;
}

std::string config_hash(const ExperimentConfig& c) {
    json j = to_json(c);
    // Execution-only knobs do not change results.
    j.erase("threads");
    const std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace otafl
