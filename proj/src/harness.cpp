#include "otafl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace otafl {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

Dataset load_pooled(const DatasetConfig& ds) {
    if (ds.kind == "csv") return load_csv(ds.path);
    if (ds.kind == "idx") return load_idx(ds.path, ds.labels_path);
    return make_synthetic(ds.synthetic);
}

std::vector<double> estimate_sigma(const ModelSpec& spec, const Vector& w, const std::vector<Dataset>& devices,
                                   std::size_t batch_size, double g_max, std::uint64_t seed) {
    // Spread of the clipped mini-batch gradient around its own mean, measured at w0.
    constexpr std::size_t kDraws = 64;
    std::vector<double> sigma(devices.size(), 0.0);
    for (std::size_t m = 0; m < devices.size(); ++m) {
        const auto& ds = devices[m];
        if (batch_size == 0 || batch_size >= ds.size()) continue;
        std::vector<Vector> draws;
        Vector mean = Vector::Zero(w.size());
        for (std::size_t k = 0; k < kDraws; ++k) {
            draws.push_back(local_gradient(spec, w, ds, batch_size, g_max, seed, k));
            mean += draws.back();
        }
        mean /= static_cast<double>(kDraws);
        double v = 0.0;
        for (const auto& g : draws) v += (g - mean).squaredNorm();
        sigma[m] = std::sqrt(v / static_cast<double>(kDraws - 1));
    }
    return sigma;
}

bool wants(const ExperimentConfig& c, const std::string& scheme) {
    return std::find(c.schemes.begin(), c.schemes.end(), scheme) != c.schemes.end();
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json zeta_json(const BoundReport& b) {
    return json{{"transmission", b.transmission_variance},
                {"minibatch", b.minibatch_variance},
                {"noise", b.receiver_noise},
                {"zeta", b.zeta}};
}

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string cell_file_name(const std::string& scheme, std::uint64_t seed) {
    return scheme + "__seed" + std::to_string(seed) + ".ndjson";
}

std::string fmt(double v) {
    if (!std::isfinite(v)) return "nan";
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

}  // namespace

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd r;
    r.n = values.size();
    if (values.empty()) return r;
    double s = 0.0;
    for (double v : values) s += v;
    r.mean = s / static_cast<double>(r.n);
    if (r.n > 1) {
        double q = 0.0;
        for (double v : values) q += (v - r.mean) * (v - r.mean);
        r.std = std::sqrt(q / static_cast<double>(r.n - 1));
    }
    return r;
}

std::string channel_checksum(const FadingDraw& fading) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& c : fading.h) {
        const double parts[2] = {c.real(), c.imag()};
        const auto* bytes = reinterpret_cast<const unsigned char*>(parts);
        for (std::size_t i = 0; i < sizeof parts; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    }
    return hex64(h);
}

Environment build_environment(const ExperimentConfig& config, const EnvironmentOptions& options) {
    config.validate();
    Environment env;
    env.config = config;
    env.deployment = sample_deployment(config.n_devices, config.r_max_m, config.deployment_seed);

    std::vector<double> lambda;
    if (config.lambda_override) {
        lambda = *config.lambda_override;
    } else {
        const auto gains = pathloss_gains(env.deployment, config.pathloss_exponent, config.pl0_db);
        lambda.assign(gains.values().begin(), gains.values().end());
    }

    const Dataset pooled = load_pooled(config.dataset);
    auto split = split_train_test(pooled, config.dataset.test_fraction, config.dataset.partition_seed);
    env.test = std::move(split.test);
    env.devices = partition_noniid(split.train, config.n_devices, config.dataset.labels_per_device,
                                   config.dataset.partition_seed);
    if (config.batch_size > 0) {
        for (const auto& ds : env.devices) {
            if (config.batch_size > ds.size()) throw ConfigError("batch_size exceeds the per-device dataset size");
        }
    }

    env.model = config.model;
    env.model.input_dim = static_cast<int>(pooled.feature_dim());
    env.model.classes = pooled.num_classes;
    env.w0 = init_params(env.model, config.init_seed);

    env.network.lambda = lambda;
    env.network.e_s = energy_per_sample(config.ptx_dbm, config.bandwidth_hz);
    env.network.n0 = noise_psd_watts(config.noise_psd_dbm_hz);
    env.network.d = env.model.param_count();
    env.network.g_max = config.g_max;
    env.network.validate();

    switch (config.kappa_mode) {
        case KappaMode::Estimate: env.kappa = estimate_kappa(env.model, env.w0, env.devices, config.g_max); break;
        case KappaMode::WorstCase: env.kappa = 2.0 * config.g_max; break;
        case KappaMode::Value: env.kappa = config.kappa_value; break;
    }
    if (config.batch_size > 0) {
        env.sigma = estimate_sigma(env.model, env.w0, env.devices, config.batch_size, config.g_max, config.init_seed);
    }
    env.lipschitz = config.lipschitz_value();
    for (const auto& ds : env.devices) env.initial_gap = std::max(env.initial_gap, loss_value(env.model, env.w0, ds));

    env.problem.lambda = lambda;
    env.problem.g_max = config.g_max;
    env.problem.d = env.network.d;
    env.problem.e_s = env.network.e_s;
    env.problem.n0 = env.network.n0;
    env.problem.eta = config.eta_for("sca");
    env.problem.lipschitz = env.lipschitz;
    env.problem.kappa = env.kappa;
    env.problem.sigma = env.sigma;

    if (options.design_sca) {
        sca::ScaOptions opts;
        opts.max_iters = config.sca.max_iters;
        opts.rel_tol = config.sca.rel_tol;
        opts.solver.tolerance = config.sca.tolerance;
        env.sca = sca::sca_loop(env.problem, std::nullopt, opts);
    }
    if (options.design_lcpc) env.lcpc = baselines::lcpc(lambda, env.network);
    return env;
}

Environment build_environment_for_schemes(const ExperimentConfig& config) {
    EnvironmentOptions opts;
    opts.design_sca = wants(config, "sca");
    opts.design_lcpc = wants(config, "lcpc");
    return build_environment(config, opts);
}

CellResult run_cell(const Environment& env, const std::string& scheme, std::uint64_t seed) {
    const auto& cfg = env.config;
    const auto& net = env.network;
    const std::size_t n = env.devices.size();
    const auto d = static_cast<Eigen::Index>(net.d);
    const std::string hash = config_hash(cfg);
    const double r_in = cfg.r_in_fraction * cfg.r_max_m;

    const PowerControlDesign* fixed = nullptr;
    if (scheme == "sca") {
        if (!env.sca) throw std::logic_error("environment built without an SCA design");
        fixed = &env.sca->design;
    } else if (scheme == "lcpc") {
        if (!env.lcpc) throw std::logic_error("environment built without an LCPC design");
        fixed = &*env.lcpc;
    } else if (std::find(all_schemes().begin(), all_schemes().end(), scheme) == all_schemes().end()) {
        throw ConfigError("unknown scheme '" + scheme + "'");
    }
    std::optional<BoundReport> fixed_bound;
    const double eta = cfg.eta_for(scheme);
    if (fixed) fixed_bound = full_bound(*fixed, env.sigma, net, env.kappa, eta, env.lipschitz, env.init_term_for(scheme));

    CellResult out;
    out.scheme = scheme;
    out.seed = seed;
    Vector w = env.w0;
    GradMatrix grads(static_cast<Eigen::Index>(n), d);
    double grad_sum = 0.0;

    for (std::size_t t = 0; t <= cfg.t_rounds; ++t) {
        // Metrics at w_t, from full local losses and gradients.
        Vector grad_f = Vector::Zero(d);
        double loss = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            LossGrad lg = loss_and_gradient(env.model, w, env.devices[m]);
            loss += lg.loss;
            grad_f += lg.grad;
            if (cfg.batch_size == 0) {
                clip_to_norm(lg.grad, cfg.g_max);
                grads.row(static_cast<Eigen::Index>(m)) = lg.grad.transpose();
            }
        }
        loss /= static_cast<double>(n);
        grad_f /= static_cast<double>(n);
        const double grad_sq = grad_f.squaredNorm();
        const double acc = accuracy(env.model, w, env.test);
        const bool finite = std::isfinite(loss) && std::isfinite(grad_sq) && w.allFinite();
        if (!finite) out.diverged = true;

        json rec{{"scheme", scheme},
                 {"seed", seed},
                 {"round", t},
                 {"test_accuracy", acc},
                 {"global_loss", finite_or_null(loss)},
                 {"grad_norm_sq", finite_or_null(grad_sq)},
                 {"zeta_components", nullptr},
                 {"bias_term", nullptr},
                 {"active_count", nullptr},
                 {"channel_checksum", nullptr},
                 {"config_hash", hash}};

        if (t == cfg.t_rounds) {
            out.final_accuracy = acc;
            out.final_loss = loss;
            out.records.push_back(std::move(rec));
            break;
        }
        grad_sum += grad_sq;

        if (cfg.batch_size > 0) {
            for (std::size_t m = 0; m < n; ++m) {
                grads.row(static_cast<Eigen::Index>(m)) =
                    local_gradient(env.model, w, env.devices[m], cfg.batch_size, cfg.g_max, seed, t).transpose();
            }
        }

        const FadingDraw fading = sample_fading(net.lambda, seed, t);
        const std::string checksum = channel_checksum(fading);
        out.channel_checksums.push_back(checksum);
        rec["channel_checksum"] = checksum;

        Vector g_hat;
        if (scheme == "ideal_fedavg") {
            g_hat = grads.colwise().mean().transpose();
            rec["active_count"] = n;
            rec["zeta_components"] = zeta_json(BoundReport{});
            rec["bias_term"] = 0.0;
        } else {
            const auto noise = sample_noise(net.n0, net.d, seed, t);
            GradientEstimate est;
            if (fixed) {
                est = ota_round(grads, *fixed, fading, noise, net);
                rec["zeta_components"] = zeta_json(*fixed_bound);
                rec["bias_term"] = fixed_bound->bias_term;
            } else if (scheme == "vanilla" || scheme == "opc") {
                const auto decision =
                    scheme == "vanilla" ? baselines::vanilla_ota(fading.h, net) : baselines::opc_ota(fading.h, net);
                est = baselines::apply_decision(decision, grads, fading, noise, net);
            } else {
                const auto policy =
                    scheme == "bb_interior" ? baselines::BbPolicy::Interior : baselines::BbPolicy::Alternative;
                const auto decision = baselines::bb_fl(policy, t, env.deployment, net, r_in, seed);
                est = baselines::apply_bb(decision, grads, fading, noise);
                const auto z = zeta(decision.design, {}, decision.sub_config);
                rec["zeta_components"] = zeta_json(z);
                // Bias against the uniform average over all N devices.
                std::vector<double> p(n, 0.0);
                for (std::size_t i = 0; i < decision.active.size(); ++i) p[decision.active[i]] = decision.design.p[i];
                rec["bias_term"] = bias_term(p, env.kappa, n);
            }
            g_hat = std::move(est.g_hat);
            rec["active_count"] = est.active_count();
        }
        out.records.push_back(std::move(rec));
        if (finite) w = sgd_step(w, g_hat, eta);
    }
    out.stationarity = grad_sum / static_cast<double>(cfg.t_rounds);
    if (out.diverged) out.stationarity = std::numeric_limits<double>::infinity();
    return out;
}

namespace {

json environment_meta(const Environment& env) {
    json positions = json::array();
    for (const auto& p : env.deployment.positions) positions.push_back({p[0], p[1]});
    json meta{{"config", to_json(env.config)},
              {"config_hash", config_hash(env.config)},
              {"deployment_seed", env.config.deployment_seed},
              {"positions_m", positions},
              {"lambda", env.network.lambda},
              {"e_s", env.network.e_s},
              {"n0", env.network.n0},
              {"d", env.network.d},
              {"kappa", env.kappa},
              {"sigma", env.sigma},
              {"L", env.lipschitz},
              {"initial_gap", env.initial_gap},
              {"partition", partition_manifest(env.devices)},
              {"surrogate_schemes", {"opc", "lcpc"}}};
    if (env.sca) {
        meta["sca"] = sca::to_json(*env.sca, env.problem);
        meta["sca"]["bound"] = to_json(full_bound(env.sca->design, env.sigma, env.network, env.kappa,
                                                  env.config.eta_for("sca"), env.lipschitz, env.init_term_for("sca")));
    }
    if (env.lcpc) {
        meta["lcpc"] = {{"gamma", env.lcpc->gamma.empty() ? 0.0 : env.lcpc->gamma.front()},
                        {"p", env.lcpc->p},
                        {"alpha", env.lcpc->alpha},
                        {"bound", to_json(full_bound(*env.lcpc, env.sigma, env.network, env.kappa,
                                                     env.config.eta_for("lcpc"), env.lipschitz,
                                                     env.init_term_for("lcpc")))}};
    }
    return meta;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string ndjson(const std::vector<json>& records) {
    std::string s;
    for (const auto& r : records) {
        s += r.dump();
        s += '\n';
    }
    return s;
}

std::optional<double> rounds_to_target(const CellResult& cell, double target) {
    for (const auto& r : cell.records) {
        if (r["test_accuracy"].get<double>() >= target) return r["round"].get<double>();
    }
    return std::nullopt;
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& config, const fs::path& out_dir, const RunOptions& options) {
    config.validate();
    if (!out_dir.empty()) {
        fs::create_directories(out_dir / "metrics");
        const bool existing = fs::exists(out_dir / "metrics.ndjson") || !fs::is_empty(out_dir / "metrics");
        if (existing && !options.overwrite) {
            throw std::runtime_error("output directory " + out_dir.string() +
                                     " already holds metrics; pass --overwrite or choose another --out-dir");
        }
        if (existing) {
            fs::remove_all(out_dir / "metrics");
            fs::create_directories(out_dir / "metrics");
            fs::remove(out_dir / "metrics.ndjson");
        }
    }

    const Environment env = build_environment_for_schemes(config);

    struct Task {
        std::string scheme;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const auto& s : config.schemes) {
        for (auto seed : config.seeds) tasks.push_back({s, seed});
    }

    std::vector<std::optional<CellResult>> results(tasks.size());
    std::vector<std::string> errors(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                CellResult cell = run_cell(env, tasks[i].scheme, tasks[i].seed);
                if (!out_dir.empty()) {
                    write_text(out_dir / "metrics" / cell_file_name(cell.scheme, cell.seed), ndjson(cell.records));
                }
                if (!options.keep_records) cell.records.erase(cell.records.begin(), cell.records.end() - 1);
                results[i] = std::move(cell);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const std::size_t n_threads = std::min<std::size_t>(std::max<std::size_t>(config.threads, 1), tasks.size());
    std::vector<std::thread> pool;
    for (std::size_t k = 1; k < n_threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    RunSummary summary;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (results[i]) {
            summary.cells.push_back(std::move(*results[i]));
        } else {
            summary.failures.push_back(tasks[i].scheme + "/seed" + std::to_string(tasks[i].seed) + ": " + errors[i]);
        }
    }

    // Shared channel draws: every scheme of a seed must have seen the same fading.
    std::map<std::uint64_t, const CellResult*> reference;
    json crn = json::object();
    bool crn_ok = true;
    for (const auto& cell : summary.cells) {
        auto [it, inserted] = reference.emplace(cell.seed, &cell);
        if (!inserted && it->second->channel_checksums != cell.channel_checksums) crn_ok = false;
    }
    crn["verified"] = crn_ok;
    crn["seeds"] = reference.size();

    summary.meta = environment_meta(env);
    summary.meta["common_random_numbers"] = crn;
    summary.meta["failures"] = summary.failures;
    json cells = json::array();
    for (const auto& c : summary.cells) {
        cells.push_back({{"scheme", c.scheme},
                         {"seed", c.seed},
                         {"final_accuracy", c.final_accuracy},
                         {"final_loss", finite_or_null(c.final_loss)},
                         {"stationarity", finite_or_null(c.stationarity)},
                         {"diverged", c.diverged}});
    }
    summary.meta["cells"] = cells;

    if (!out_dir.empty()) {
        // Merge in config order; read back from the per-cell files so the
        // merged log is exactly their concatenation.
        std::ofstream merged(out_dir / "metrics.ndjson", std::ios::binary | std::ios::trunc);
        for (const auto& cell : summary.cells) {
            std::ifstream in(out_dir / "metrics" / cell_file_name(cell.scheme, cell.seed), std::ios::binary);
            merged << in.rdbuf();
        }

        std::ostringstream csv;
        csv << "scheme,seeds,final_accuracy_mean,final_accuracy_std,final_loss_mean,final_loss_std,"
               "stationarity_mean,stationarity_std,rounds_to_target_mean,reached_target,diverged\n";
        for (const auto& s : config.schemes) {
            std::vector<double> acc, loss, stat, rtt;
            std::size_t diverged = 0;
            for (const auto& c : summary.cells) {
                if (c.scheme != s) continue;
                acc.push_back(c.final_accuracy);
                loss.push_back(c.final_loss);
                stat.push_back(c.stationarity);
                if (c.diverged) ++diverged;
                if (options.keep_records) {
                    if (auto r = rounds_to_target(c, config.target_accuracy)) rtt.push_back(*r);
                }
            }
            if (acc.empty()) continue;
            const auto a = mean_std(acc), l = mean_std(loss), st = mean_std(stat), r = mean_std(rtt);
            csv << s << ',' << a.n << ',' << fmt(a.mean) << ',' << fmt(a.std) << ',' << fmt(l.mean) << ','
                << fmt(l.std) << ',' << fmt(st.mean) << ',' << fmt(st.std) << ','
                << (rtt.empty() ? std::string("nan") : fmt(r.mean)) << ',' << rtt.size() << ',' << diverged << '\n';
        }
        write_text(out_dir / "summary.csv", csv.str());
        write_text(out_dir / "run_meta.json", summary.meta.dump(2) + "\n");
    }
    return summary;
}

json design_prescalers(const ExperimentConfig& config) {
    EnvironmentOptions opts;
    opts.design_lcpc = false;
    const Environment env = build_environment(config, opts);
    json out = sca::to_json(*env.sca, env.problem);
    out["problem"] = sca::to_json(env.problem);
    out["deployment_seed"] = config.deployment_seed;
    out["config_hash"] = config_hash(config);
    return out;
}

json report(const std::vector<fs::path>& metric_files, const fs::path& out_dir, const ReportOptions& options) {
    if (metric_files.empty()) throw ConfigError("report needs at least one metrics file");
    // scheme -> seed -> round -> record
    std::map<std::string, std::map<std::uint64_t, std::map<std::size_t, json>>> data;
    std::set<std::string> hashes;
    std::vector<std::string> scheme_order;
    for (const auto& path : metric_files) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open metrics file " + path.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json r;
            try {
                r = json::parse(line);
            } catch (const json::parse_error& e) {
                throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
            hashes.insert(r.value("config_hash", std::string("unknown")));
            const auto scheme = r.at("scheme").get<std::string>();
            if (!data.count(scheme)) scheme_order.push_back(scheme);
            auto& slot = data[scheme][r.at("seed").get<std::uint64_t>()];
            const auto round = r.at("round").get<std::size_t>();
            if (slot.count(round)) continue;  // same cell listed twice (per-cell file and merged log)
            slot[round] = std::move(r);
        }
    }
    if (hashes.size() > 1) throw ConfigError("metrics files come from different configurations");

    fs::create_directories(out_dir / "series");
    const std::vector<std::string> metrics{"test_accuracy", "global_loss", "grad_norm_sq"};
    json table = json::array();
    std::ostringstream final_csv, rtt_csv;
    final_csv << "scheme,seeds,final_accuracy_mean,final_accuracy_std,final_accuracy_se\n";
    rtt_csv << "scheme,target,rounds_mean,rounds_std,reached,seeds\n";
    for (const auto& scheme : scheme_order) {
        const auto& seeds = data[scheme];
        for (const auto& metric : metrics) {
            std::map<std::size_t, std::vector<double>> by_round;
            for (const auto& [seed, rounds] : seeds) {
                for (const auto& [round, r] : rounds) {
                    const auto& v = r.at(metric);
                    by_round[round].push_back(v.is_null() ? std::nan("") : v.get<double>());
                }
            }
            std::ostringstream csv;
            csv << "round,mean,std,n\n";
            for (const auto& [round, vals] : by_round) {
                const auto ms = mean_std(vals);
                csv << round << ',' << fmt(ms.mean) << ',' << fmt(ms.std) << ',' << ms.n << '\n';
            }
            write_text(out_dir / "series" / (scheme + "__" + metric + ".csv"), csv.str());
        }

        std::vector<double> finals, reached;
        for (const auto& [seed, rounds] : seeds) {
            if (rounds.empty()) continue;
            finals.push_back(rounds.rbegin()->second.at("test_accuracy").get<double>());
            for (const auto& [round, r] : rounds) {
                if (r.at("test_accuracy").get<double>() >= options.target_accuracy) {
                    reached.push_back(static_cast<double>(round));
                    break;
                }
            }
        }
        const auto f = mean_std(finals);
        const auto rt = mean_std(reached);
        const double se = f.n > 0 ? f.std / std::sqrt(static_cast<double>(f.n)) : 0.0;
        final_csv << scheme << ',' << f.n << ',' << fmt(f.mean) << ',' << fmt(f.std) << ',' << fmt(se) << '\n';
        rtt_csv << scheme << ',' << fmt(options.target_accuracy) << ','
                << (reached.empty() ? std::string("nan") : fmt(rt.mean)) << ','
                << (reached.empty() ? std::string("nan") : fmt(rt.std)) << ',' << reached.size() << ',' << f.n
                << '\n';
        table.push_back({{"scheme", scheme},
                         {"seeds", f.n},
                         {"final_accuracy_mean", f.mean},
                         {"final_accuracy_std", f.std},
                         {"final_accuracy_se", se},
                         {"rounds_to_target_mean", reached.empty() ? json(nullptr) : json(rt.mean)},
                         {"reached_target", reached.size()}});
    }
    write_text(out_dir / "final.csv", final_csv.str());
    write_text(out_dir / "rounds_to_target.csv", rtt_csv.str());
    return table;
}

json grid_eta(const ExperimentConfig& config, const fs::path& out_dir) {
    config.validate();
    if (config.eta_grid.empty()) throw ConfigError("eta_grid is empty");
    json rows = json::array();
    std::map<std::string, std::pair<double, double>> best;  // scheme -> (accuracy, eta)
    double best_eta = config.eta_grid.front();
    double best_score = -1.0;
    for (double eta : config.eta_grid) {
        ExperimentConfig c = config;
        c.eta = eta;
        c.eta_by_scheme.clear();
        c.lipschitz.reset();
        RunOptions opts;
        opts.keep_records = false;
        const auto summary = run_experiment(c, {}, opts);
        if (!summary.failures.empty()) throw std::runtime_error("grid cell failed: " + summary.failures.front());
        double score = 0.0;
        for (const auto& s : c.schemes) {
            std::vector<double> acc, loss;
            std::size_t diverged = 0;
            for (const auto& cell : summary.cells) {
                if (cell.scheme != s) continue;
                acc.push_back(cell.final_accuracy);
                loss.push_back(cell.final_loss);
                diverged += cell.diverged ? 1 : 0;
            }
            const auto a = mean_std(acc), l = mean_std(loss);
            score += a.mean / static_cast<double>(c.schemes.size());
            auto it = best.find(s);
            if (it == best.end() || a.mean > it->second.first) best[s] = {a.mean, eta};
            rows.push_back({{"eta", eta},
                            {"scheme", s},
                            {"final_accuracy_mean", a.mean},
                            {"final_accuracy_std", a.std},
                            {"final_loss_mean", finite_or_null(l.mean)},
                            {"diverged", diverged}});
        }
        if (score > best_score) {
            best_score = score;
            best_eta = eta;
        }
    }
    json per_scheme = json::object();
    for (const auto& s : config.schemes) per_scheme[s] = best[s].second;
    json patch{{"eta_by_scheme", per_scheme}};
    if (best.count("sca")) patch["L"] = 1.0 / best["sca"].second;
    json out{{"grid", config.eta_grid},
             {"rows", rows},
             {"best_eta_by_scheme", per_scheme},
             {"best_common_eta", best_eta},
             {"best_common_mean_accuracy", best_score},
             {"config_patch", patch},
             {"config_hash", config_hash(config)}};
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_text(out_dir / "grid_eta.json", out.dump(2) + "\n");
    }
    return out;
}

}  // namespace otafl
