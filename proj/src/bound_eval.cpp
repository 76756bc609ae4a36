#include "otafl/bound_eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace otafl {

BoundReport zeta(const PowerControlDesign& design, std::span<const double> sigma, const NetworkConfig& config) {
    if (!(design.alpha > 0.0)) throw std::domain_error("post-scaler alpha must be positive");
    if (!sigma.empty() && sigma.size() != design.size()) throw std::invalid_argument("one sigma per device required");
    BoundReport r;
    for (std::size_t m = 0; m < design.size(); ++m) {
        const double p = design.p[m];
        r.transmission_variance += p * design.gamma[m] / design.alpha - p * p;
        if (!sigma.empty()) {
            if (sigma[m] < 0.0) throw std::invalid_argument("sigma must be non-negative");
            r.minibatch_variance += p * p * sigma[m] * sigma[m];
        }
    }
    // gamma_m >= alpha_m = alpha p_m makes every summand >= 0; clamp rounding noise.
    r.transmission_variance = std::max(r.transmission_variance, 0.0);
    r.receiver_noise = static_cast<double>(config.d) * config.n0 / (design.alpha * design.alpha);
    r.zeta = config.g_max * config.g_max * r.transmission_variance + r.minibatch_variance + r.receiver_noise;
    return r;
}

double bias_term(std::span<const double> p, double kappa, std::size_t n) {
    if (p.size() != n || n == 0) throw std::invalid_argument("bias_term needs one weight per device");
    const double u = 1.0 / static_cast<double>(n);
    double s = 0.0;
    for (double pm : p) s += (pm - u) * (pm - u);
    return 2.0 * static_cast<double>(n) * kappa * kappa * s;
}

double init_term_from_gap(double max_gap, double eta, std::size_t t_rounds) {
    if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
    if (t_rounds == 0) throw std::invalid_argument("T must be at least 1");
    return 4.0 * max_gap / (eta * static_cast<double>(t_rounds));
}

double init_term(const ModelSpec& spec, const Vector& w0, std::span<const Dataset> datasets, double eta,
                 std::size_t t_rounds) {
    double gap = 0.0;
    for (const auto& ds : datasets) gap = std::max(gap, loss_value(spec, w0, ds));
    return init_term_from_gap(gap, eta, t_rounds);
}

double stationarity_metric(std::span<const Vector> gradient_trace) {
    if (gradient_trace.empty()) throw std::invalid_argument("empty gradient trace");
    double s = 0.0;
    for (const auto& g : gradient_trace) s += g.squaredNorm();
    return s / static_cast<double>(gradient_trace.size());
}

double stationarity_metric_from_norms(std::span<const double> squared_norms) {
    if (squared_norms.empty()) throw std::invalid_argument("empty gradient trace");
    double s = 0.0;
    for (double v : squared_norms) s += v;
    return s / static_cast<double>(squared_norms.size());
}

BoundReport full_bound(const PowerControlDesign& design, std::span<const double> sigma, const NetworkConfig& config,
                       double kappa, double eta, double lipschitz, double init) {
    BoundReport r = zeta(design, sigma, config);
    r.bias_term = bias_term(design.p, kappa, design.size());
    r.init_term = init;
    r.total_bound = r.init_term + 2.0 * eta * lipschitz * r.zeta + r.bias_term;
    return r;
}

nlohmann::json to_json(const BoundReport& r) {
    return {{"transmission_variance", r.transmission_variance},
            {"minibatch_variance", r.minibatch_variance},
            {"receiver_noise", r.receiver_noise},
            {"zeta", r.zeta},
            {"bias_term", r.bias_term},
            {"init_term", r.init_term},
            {"total_bound", r.total_bound}};
}

}  // namespace otafl
