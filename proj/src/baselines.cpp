#include "otafl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>

#include "otafl/bound_eval.hpp"
#include "otafl/rng.hpp"

namespace otafl::baselines {

std::vector<double> worst_case_energy(const PolicyDecision& decision, const NetworkConfig& config) {
    std::vector<double> e(decision.device_scale.size(), 0.0);
    for (std::size_t m = 0; m < e.size(); ++m) {
        if (!decision.participation_mask[m]) continue;
        e[m] = std::norm(decision.device_scale[m]) * config.g_max * config.g_max / static_cast<double>(config.d);
    }
    return e;
}

bool respects_energy_budget(const PolicyDecision& decision, const NetworkConfig& config) {
    for (double e : worst_case_energy(decision, config)) {
        if (e > config.e_s * (1.0 + 1e-9)) return false;
    }
    return true;
}

GradientEstimate apply_decision(const PolicyDecision& decision, const GradMatrix& local_grads,
                                const FadingDraw& fading, std::span<const std::complex<double>> noise,
                                const NetworkConfig& config) {
    const Eigen::Index d = local_grads.cols();
    GradientEstimate est;
    est.active_mask = decision.participation_mask;
    est.signal_part = Vector::Zero(d);
    for (Eigen::Index m = 0; m < local_grads.rows(); ++m) {
        const auto mi = static_cast<std::size_t>(m);
        if (!decision.participation_mask[mi]) continue;
        const std::complex<double> c = fading.h[mi] * decision.device_scale[mi];
        const auto g = local_grads.row(m);
        // Complex gain on the symbol (g[2k] + j g[2k+1]).
        for (Eigen::Index k = 0; k < d; k += 2) {
            const double re = g[k];
            const double im = (k + 1 < d) ? g[k + 1] : 0.0;
            est.signal_part[k] += c.real() * re - c.imag() * im;
            if (k + 1 < d) est.signal_part[k + 1] += c.imag() * re + c.real() * im;
        }
    }
    est.signal_part /= decision.post_scaler;
    est.noise_part = embed_noise(noise, config.d) / decision.post_scaler;
    est.g_hat = est.signal_part + est.noise_part;
    return est;
}

std::vector<double> max_amplitudes(std::span<const std::complex<double>> h, const NetworkConfig& config) {
    const double k = std::sqrt(static_cast<double>(config.d) * config.e_s) / config.g_max;
    std::vector<double> c(h.size());
    for (std::size_t m = 0; m < h.size(); ++m) c[m] = std::abs(h[m]) * k;
    return c;
}

PolicyDecision vanilla_ota(std::span<const std::complex<double>> h, const NetworkConfig& config) {
    const std::size_t n = h.size();
    PolicyDecision dec;
    dec.device_scale.assign(n, {0.0, 0.0});
    dec.participation_mask.assign(n, 0);
    const auto c = max_amplitudes(h, config);
    const double common = *std::min_element(c.begin(), c.end());
    if (!(common > 0.0)) return dec;
    for (std::size_t m = 0; m < n; ++m) {
        dec.device_scale[m] = common / h[m];
        dec.participation_mask[m] = 1;
    }
    dec.post_scaler = static_cast<double>(n) * common;
    return dec;
}

double aggregation_mse(std::span<const double> amplitudes, double target, const NetworkConfig& config) {
    const double n = static_cast<double>(amplitudes.size());
    const double g2 = config.g_max * config.g_max;
    double bias = 0.0;
    for (double c : amplitudes) bias += (c - target) * (c - target);
    return (g2 * bias + 0.5 * static_cast<double>(config.d) * config.n0) / (n * n * target * target);
}

PolicyDecision opc_ota(std::span<const std::complex<double>> h, const NetworkConfig& config) {
    const std::size_t n = h.size();
    const auto c_max = max_amplitudes(h, config);
    std::vector<double> sorted = c_max;
    std::sort(sorted.begin(), sorted.end());
    const double g2 = config.g_max * config.g_max;
    const double noise = 0.5 * static_cast<double>(config.d) * config.n0;

    auto mse_at = [&](double a) {
        std::vector<double> eff(n);
        for (std::size_t m = 0; m < n; ++m) eff[m] = std::min(c_max[m], a);
        return aggregation_mse(eff, a, config);
    };

    // With x = 1/a and the k weakest devices at full power, the MSE is the
    // quadratic G^2 sum_{i<k} (c_i x - 1)^2 + noise x^2 (over N^2), valid for
    // a in [c_(k), c_(k+1)]. Minimize on each interval and keep the best.
    double best_a = 0.0;
    double best_mse = std::numeric_limits<double>::infinity();
    double sum_c = 0.0, sum_c2 = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        if (k > 0) {
            sum_c += sorted[k - 1];
            sum_c2 += sorted[k - 1] * sorted[k - 1];
        }
        const double a_lo = (k == 0) ? 0.0 : sorted[k - 1];
        const double a_hi = (k == n) ? std::numeric_limits<double>::infinity() : sorted[k];
        if (!(a_hi > 0.0)) continue;
        double a;
        const double denom = g2 * sum_c2 + noise;
        if (k == 0 || !(sum_c > 0.0)) {
            a = a_hi;  // MSE decreases in a when nobody is power limited
        } else {
            const double x_star = denom > 0.0 ? g2 * sum_c / denom : std::numeric_limits<double>::infinity();
            a = std::clamp(1.0 / x_star, a_lo, a_hi);
        }
        if (!(a > 0.0) || !std::isfinite(a)) continue;
        const double v = mse_at(a);
        if (v < best_mse) {
            best_mse = v;
            best_a = a;
        }
    }

    PolicyDecision dec;
    dec.device_scale.assign(n, {0.0, 0.0});
    dec.participation_mask.assign(n, 0);
    if (!(best_a > 0.0)) return dec;
    for (std::size_t m = 0; m < n; ++m) {
        const double amp = std::min(c_max[m], best_a);
        if (amp > 0.0) {
            dec.device_scale[m] = amp / h[m];
            dec.participation_mask[m] = 1;
        }
    }
    dec.post_scaler = static_cast<double>(n) * best_a;
    return dec;
}

PowerControlDesign lcpc(std::span<const double> lambda, const NetworkConfig& config) {
    NetworkConfig cfg = config;
    cfg.lambda.assign(lambda.begin(), lambda.end());
    cfg.validate();
    double hi = 0.0;
    for (double l : lambda) hi = std::max(hi, gamma_max(l, cfg.g_max, cfg.d, cfg.e_s));

    auto objective = [&](double gamma) {
        if (!(gamma > 0.0)) return std::numeric_limits<double>::infinity();
        const std::vector<double> g(lambda.size(), gamma);
        const PowerControlDesign design = make_design(g, cfg);
        return zeta(design, {}, cfg).zeta;
    };

    // Log-spaced scan to locate the basin, then Brent refinement in the
    // neighbouring cells.
    constexpr int kScan = 400;
    const double lo = hi * 1e-6;
    std::vector<double> grid(kScan);
    for (int i = 0; i < kScan; ++i) grid[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (kScan - 1));
    int best = 0;
    double best_v = objective(grid[0]);
    for (int i = 1; i < kScan; ++i) {
        const double v = objective(grid[i]);
        if (v < best_v) {
            best_v = v;
            best = i;
        }
    }
    const double a = grid[std::max(best - 1, 0)];
    const double b = grid[std::min(best + 1, kScan - 1)];
    std::uintmax_t iters = 200;
    const auto [g_opt, v_opt] = boost::math::tools::brent_find_minima(objective, a, b, 52, iters);
    const double gamma = v_opt <= best_v ? g_opt : grid[best];
    return make_design(std::vector<double>(lambda.size(), gamma), cfg);
}

std::vector<std::uint8_t> interior_set(const Deployment& deployment, double r_in) {
    std::vector<std::uint8_t> s(deployment.size(), 0);
    for (std::size_t m = 0; m < deployment.size(); ++m) s[m] = deployment.distance(m) <= r_in ? 1 : 0;
    return s;
}

BbDecision bb_fl(BbPolicy policy, std::uint64_t round, const Deployment& deployment, const NetworkConfig& config,
                 double r_in, std::uint64_t seed, double full_probability) {
    config.validate();
    const std::size_t n = config.n_devices();
    if (deployment.size() != n) throw std::invalid_argument("deployment and network sizes differ");
    BbDecision dec;
    bool full = policy == BbPolicy::Full;
    if (policy == BbPolicy::Alternative) {
        RngStream coin(seed, Purpose::Scheduler, round, 0);
        full = coin.uniform() < full_probability;
    }
    dec.scheduled = full ? std::vector<std::uint8_t>(n, 1) : interior_set(deployment, r_in);
    if (std::none_of(dec.scheduled.begin(), dec.scheduled.end(), [](auto s) { return s != 0; })) {
        dec.scheduled.assign(n, 1);
        dec.fell_back = true;
        full = true;
    }
    dec.full_set = full || std::all_of(dec.scheduled.begin(), dec.scheduled.end(), [](auto s) { return s != 0; });
    dec.sub_config = config;
    dec.sub_config.lambda.clear();
    std::vector<double> gamma;
    for (std::size_t m = 0; m < n; ++m) {
        if (!dec.scheduled[m]) continue;
        dec.active.push_back(m);
        dec.sub_config.lambda.push_back(config.lambda[m]);
        gamma.push_back(gamma_max(config.lambda[m], config.g_max, config.d, config.e_s));
    }
    dec.design = make_design(gamma, dec.sub_config);
    return dec;
}

GradientEstimate apply_bb(const BbDecision& decision, const GradMatrix& local_grads, const FadingDraw& fading,
                          std::span<const std::complex<double>> noise) {
    const auto k = static_cast<Eigen::Index>(decision.active.size());
    GradMatrix sub(k, local_grads.cols());
    FadingDraw sub_fading;
    sub_fading.round_index = fading.round_index;
    for (Eigen::Index i = 0; i < k; ++i) {
        const std::size_t m = decision.active[static_cast<std::size_t>(i)];
        sub.row(i) = local_grads.row(static_cast<Eigen::Index>(m));
        sub_fading.h.push_back(fading.h[m]);
    }
    GradientEstimate est = ota_round(sub, decision.design, sub_fading, noise, decision.sub_config);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(local_grads.rows()), 0);
    for (std::size_t i = 0; i < decision.active.size(); ++i) mask[decision.active[i]] = est.active_mask[i];
    est.active_mask = std::move(mask);
    return est;
}

Vector ideal_fedavg(const ModelSpec& spec, std::span<const Dataset> datasets, const Vector& w, double eta,
                    double g_max) {
    return sgd_step(w, global_gradient(spec, w, datasets, g_max), eta);
}

}  // namespace otafl::baselines
