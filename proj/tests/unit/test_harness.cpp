#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "otafl/harness.hpp"

using namespace otafl;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.n_devices = 4;
    c.t_rounds = 6;
    c.seeds = {0, 1};
    c.dataset.synthetic.classes = 4;
    c.dataset.synthetic.features = 5;
    c.dataset.synthetic.samples_per_class = 20;
    c.model.hidden = 6;
    c.threads = 2;
    c.sca.max_iters = 30;
    return c;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("otafl_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("mean and standard deviation") {
    CHECK(mean_std({}).n == 0);
    const auto one = mean_std({0.7});
    CHECK(one.mean == 0.7);
    CHECK(one.std == 0.0);
    const auto same = mean_std({0.3, 0.3, 0.3});
    CHECK(same.std == 0.0);
    const auto two = mean_std({1.0, 3.0});
    CHECK(two.mean == 2.0);
    CHECK(two.std == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("runs are reproducible byte for byte") {
    const auto cfg = small_config();
    const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
    const auto ra = run_experiment(cfg, a);
    auto single = cfg;
    single.threads = 1;
    const auto rb = run_experiment(single, b);
    CHECK(ra.failures.empty());
    CHECK(rb.failures.empty());
    CHECK(ra.cells.size() == cfg.seeds.size() * cfg.schemes.size());
    CHECK(slurp(a / "metrics.ndjson") == slurp(b / "metrics.ndjson"));
    CHECK(!slurp(a / "metrics.ndjson").empty());
    CHECK(ra.meta["common_random_numbers"]["verified"].get<bool>());
    CHECK(fs::exists(a / "summary.csv"));
    CHECK(fs::exists(a / "run_meta.json"));

    // An existing run is not silently replaced.
    CHECK_THROWS(run_experiment(cfg, a));
    RunOptions over;
    over.overwrite = true;
    CHECK_NOTHROW(run_experiment(cfg, a, over));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("every scheme of a seed sees the same channels") {
    const auto env = build_environment(small_config());
    for (std::uint64_t seed : {0u, 5u}) {
        const auto ref = run_cell(env, "ideal_fedavg", seed).channel_checksums;
        CHECK(ref.size() == 6);
        for (const auto& s : all_schemes()) CHECK(run_cell(env, s, seed).channel_checksums == ref);
    }
    CHECK_THROWS_AS(run_cell(env, "nope", 0), ConfigError);
}

TEST_CASE("noiseless training at a small step decreases the loss") {
    auto cfg = small_config();
    cfg.t_rounds = 20;
    cfg.eta = 0.02;
    const auto env = build_environment(cfg, {false, false});
    const auto cell = run_cell(env, "ideal_fedavg", 0);
    REQUIRE(cell.records.size() == 21);
    for (std::size_t t = 1; t < cell.records.size(); ++t) {
        CHECK(cell.records[t]["global_loss"].get<double>() <= cell.records[t - 1]["global_loss"].get<double>());
    }
    CHECK_FALSE(cell.diverged);
}

TEST_CASE("report aggregates seeds and refuses mixed configurations") {
    auto cfg = small_config();
    cfg.schemes = {"ideal_fedavg", "sca"};
    const fs::path run = fresh_dir("rep_run"), out = fresh_dir("rep_out");
    run_experiment(cfg, run);
    const auto table = report({run / "metrics.ndjson"}, out);
    REQUIRE(table.size() == 2);
    // Ideal aggregation has no randomness, so seeds agree exactly.
    CHECK(table[0]["scheme"] == "ideal_fedavg");
    CHECK(table[0]["final_accuracy_std"].get<double>() == 0.0);
    CHECK(table[0]["seeds"].get<int>() == 2);
    CHECK(fs::exists(out / "final.csv"));
    CHECK(fs::exists(out / "series" / "sca__test_accuracy.csv"));

    const auto one_seed = report({run / "metrics" / "sca__seed1.ndjson"}, fresh_dir("rep_one"));
    CHECK(one_seed[0]["final_accuracy_std"].get<double>() == 0.0);

    auto other = cfg;
    other.t_rounds = 5;
    const fs::path run2 = fresh_dir("rep_run2");
    run_experiment(other, run2);
    CHECK_THROWS_AS(report({run / "metrics.ndjson", run2 / "metrics.ndjson"}, out), ConfigError);
    for (const auto& p : {run, out, run2}) fs::remove_all(p);
    fs::remove_all(fresh_dir("rep_one"));
}

TEST_CASE("homogeneous channels give uniform designed weights") {
    auto cfg = small_config();
    cfg.lambda_override = std::vector<double>(4, 1e-9);
    const auto design = design_prescalers(cfg);
    for (const auto& p : design["design"]["p"]) CHECK(std::abs(p.get<double>() - 0.25) <= 1e-5);
    CHECK(design["config_hash"] == config_hash(cfg));
}
