#include <doctest.h>

#include <cmath>

#include "otafl/bound_eval.hpp"
#include "otafl/rng.hpp"

using namespace otafl;

namespace {

NetworkConfig config(std::vector<double> lambda, double n0, std::size_t d = 100) {
    NetworkConfig c;
    c.lambda = std::move(lambda);
    c.e_s = 1.0;
    c.n0 = n0;
    c.d = d;
    c.g_max = 10.0;
    return c;
}

}  // namespace

TEST_CASE("bias term arithmetic") {
    const std::vector<double> p{1.0, 0.0};
    CHECK(bias_term(p, 1.0, 2) == 2.0);
    const std::vector<double> u(7, 1.0 / 7.0);
    CHECK(bias_term(u, 3.0, 7) == 0.0);
    const std::vector<double> q{0.1, 0.6, 0.3};
    CHECK(bias_term(q, 2.0, 3) == doctest::Approx(4.0 * bias_term(q, 1.0, 3)).epsilon(1e-15));
}

TEST_CASE("bias term curvature on the simplex is 4 N kappa^2") {
    const std::size_t n = 5;
    const double kappa = 1.7;
    RngStream rng(2, Purpose::Experiment, 0, 0);
    for (int k = 0; k < 20; ++k) {
        std::vector<double> p(n), v(n);
        double sp = 0.0, sv = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            sp += (p[m] = rng.uniform());
            sv += (v[m] = rng.normal());
        }
        double vv = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            p[m] /= sp;
            v[m] -= sv / n;
            vv += v[m] * v[m];
        }
        const double h = 1e-3;
        std::vector<double> plus(n), minus(n);
        for (std::size_t m = 0; m < n; ++m) {
            plus[m] = p[m] + h * v[m];
            minus[m] = p[m] - h * v[m];
        }
        const double second = (bias_term(plus, kappa, n) - 2 * bias_term(p, kappa, n) + bias_term(minus, kappa, n)) /
                              (h * h);
        CHECK(second == doctest::Approx(4.0 * n * kappa * kappa * vv).epsilon(1e-6));
        CHECK(bias_term(p, kappa, n) >= 0.0);
    }
}

TEST_CASE("no-truncation limit with no noise has zero variance proxy") {
    // Huge Lambda: E[chi] = 1, alpha_m = gamma_m, so p_m gamma_m / alpha = p_m^2.
    const auto cfg = config({1e30, 1e30, 1e30}, 0.0);
    const auto design = make_design(std::vector<double>{0.2, 0.5, 0.3}, cfg);
    const auto r = zeta(design, {}, cfg);
    CHECK(r.zeta == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
}

TEST_CASE("single-device variance proxy") {
    const auto cfg = config({0.8}, 0.02);
    const auto design = make_design(std::vector<double>{0.4}, cfg);
    const double gamma = 0.4;
    const double alpha = gamma * std::exp(-gamma * gamma * 100.0 / (100.0 * 0.8));
    const double expected = 100.0 * (gamma / alpha - 1.0) + 100.0 * 0.02 / (alpha * alpha);
    CHECK(zeta(design, {}, cfg).zeta == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("receiver noise scales as 1/alpha^2 and vanishes with N0") {
    const auto cfg = config({1.0, 0.5}, 0.1);
    const auto design = make_design(std::vector<double>{0.3, 0.2}, cfg);
    const auto r = zeta(design, {}, cfg);
    CHECK(r.receiver_noise * design.alpha * design.alpha == doctest::Approx(100.0 * 0.1).epsilon(1e-14));
    double prev = r.zeta;
    for (double n0 : {0.05, 0.01, 0.001, 0.0}) {
        const auto c = config({1.0, 0.5}, n0);
        const double z = zeta(make_design(std::vector<double>{0.3, 0.2}, c), {}, c).zeta;
        CHECK(z < prev);
        prev = z;
    }
}

TEST_CASE("mini-batch term") {
    const auto cfg = config({1.0, 1.0}, 0.0);
    const auto design = make_design(std::vector<double>{0.3, 0.3}, cfg);
    const std::vector<double> sigma{2.0, 4.0};
    CHECK(zeta(design, sigma, cfg).minibatch_variance == doctest::Approx(0.25 * 4 + 0.25 * 16).epsilon(1e-15));
}

TEST_CASE("initialization term") {
    CHECK(init_term_from_gap(2.5, 0.1, 200) == doctest::Approx(4 * 2.5 / (0.1 * 200)).epsilon(1e-15));
    CHECK(init_term_from_gap(2.5, 0.1, 400) == doctest::Approx(0.5 * init_term_from_gap(2.5, 0.1, 200)));
    CHECK(init_term_from_gap(2.5, 0.1, 1'000'000'000) < 1e-6);

    ModelSpec spec;
    spec.hidden = 0;
    spec.input_dim = 2;
    spec.classes = 2;
    spec.l2 = 0.0;
    Dataset a, b;
    a.features = Eigen::MatrixXd::Zero(1, 2);
    a.labels = {0};
    a.num_classes = 2;
    b = a;
    b.labels = {1};
    Vector w = Vector::Zero(6);
    w[4] = 1.0;  // bias favours class 0
    const std::vector<Dataset> ds{a, b};
    const double fb = std::log(1 + std::exp(1.0));  // loss of the disfavoured label
    CHECK(init_term(spec, w, ds, 0.5, 10) == doctest::Approx(4 * fb / 5.0).epsilon(1e-14));
}

TEST_CASE("stationarity metric") {
    const std::vector<Vector> zeros(4, Vector::Zero(3));
    CHECK(stationarity_metric(zeros) == 0.0);
    Vector g(2);
    g << 3, 4;
    CHECK(stationarity_metric(std::vector<Vector>{g}) == 25.0);
    const std::vector<double> norms{1.0, 2.0, 6.0};
    CHECK(stationarity_metric_from_norms(norms) == 3.0);
}

TEST_CASE("full bound composition and monotonicity in T") {
    const auto cfg = config({1.0, 0.2}, 0.01);
    const auto design = make_design(std::vector<double>{0.3, 0.1}, cfg);
    const auto z = zeta(design, {}, cfg);
    const double init = init_term_from_gap(2.0, 0.1, 100);
    const auto r = full_bound(design, {}, cfg, 0.7, 0.1, 5.0, init);
    CHECK(r.total_bound == doctest::Approx(init + 2 * 0.1 * 5.0 * z.zeta + bias_term(design.p, 0.7, 2)).epsilon(1e-15));
    double prev = r.total_bound;
    for (std::size_t t : {200u, 400u, 1000u}) {
        const double next = full_bound(design, {}, cfg, 0.7, 0.1, 5.0, init_term_from_gap(2.0, 0.1, t)).total_bound;
        CHECK(next <= prev);
        prev = next;
    }
    CHECK(to_json(r)["total_bound"].get<double>() == r.total_bound);
}

TEST_CASE("zeta rejects a non-positive post-scaler") {
    PowerControlDesign d;
    d.gamma = {1.0};
    d.p = {1.0};
    d.alpha_m = {0.0};
    d.alpha = 0.0;
    CHECK_THROWS_AS(zeta(d, {}, config({1.0}, 0.0)), std::domain_error);
}
