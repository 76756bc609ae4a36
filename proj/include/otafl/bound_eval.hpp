#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "otafl/channel_model.hpp"
#include "otafl/dataset.hpp"
#include "otafl/learner.hpp"
#include "otafl/ota_link.hpp"

namespace otafl {

/// Terms of the stationarity bound
///   (1/T) sum E||grad F(w_t)||^2 <= init_term + 2 eta L zeta + bias_term,
/// with zeta = G^2 * transmission_variance + minibatch_variance + receiver_noise.
struct BoundReport {
    double transmission_variance = 0.0;  ///< sum_m (p_m gamma_m / alpha - p_m^2), before the G^2 factor
    double minibatch_variance = 0.0;     ///< sum_m p_m^2 sigma_m^2
    double receiver_noise = 0.0;         ///< d N0 / alpha^2
    double zeta = 0.0;
    double bias_term = 0.0;
    double init_term = 0.0;
    double total_bound = 0.0;
};

/// Variance proxy of the OTA gradient estimate. `sigma` may be empty (all zero).
BoundReport zeta(const PowerControlDesign& design, std::span<const double> sigma, const NetworkConfig& config);

/// 2 N kappa^2 sum (p_m - 1/N)^2.
double bias_term(std::span<const double> p, double kappa, std::size_t n);

/// 4 max_m (f_m(w0) - f_inf) / (eta T) with f_inf = 0 (the loss is non-negative).
double init_term(const ModelSpec& spec, const Vector& w0, std::span<const Dataset> datasets, double eta,
                 std::size_t t_rounds);
double init_term_from_gap(double max_gap, double eta, std::size_t t_rounds);

/// (1/T) sum_t ||grad F(w_t)||^2.
double stationarity_metric(std::span<const Vector> gradient_trace);
double stationarity_metric_from_norms(std::span<const double> squared_norms);

/// Every term of the bound for one design.
BoundReport full_bound(const PowerControlDesign& design, std::span<const double> sigma, const NetworkConfig& config,
                       double kappa, double eta, double lipschitz, double init);

nlohmann::json to_json(const BoundReport& report);

}  // namespace otafl
