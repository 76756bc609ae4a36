#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "otafl/channel_model.hpp"
#include "otafl/types.hpp"

namespace otafl {

/// Pre-scalers and the statistics they induce.
///
/// alpha_m[m] = gamma_m E[chi_m], alpha = sum alpha_m, p_m = alpha_m / alpha.
struct PowerControlDesign {
    std::vector<double> gamma;
    std::vector<double> alpha_m;
    std::vector<double> p;
    double alpha = 0.0;

    std::size_t size() const noexcept { return gamma.size(); }
};

/// Throws std::domain_error if any gamma_m <= 0.
PowerControlDesign make_design(std::span<const double> gamma, const NetworkConfig& config);

/// Transmit decision chi = 1 iff |h| >= G gamma / sqrt(d E_s), inclusive at the threshold.
bool transmit_indicator(std::complex<double> h, double gamma, const NetworkConfig& config);

/// ||x||^2 / d for a device that inverts h with pre-scaler gamma; 0 when silent.
double transmit_energy(std::complex<double> h, double gamma, double grad_norm, const NetworkConfig& config);

/// Real-embedded receiver output after post-scaling.
struct GradientEstimate {
    Vector g_hat;
    Vector signal_part;
    Vector noise_part;
    std::vector<std::uint8_t> active_mask;

    int active_count() const noexcept;
};

/// Two consecutive real entries per complex symbol; trailing pad dropped.
Vector embed_noise(std::span<const std::complex<double>> noise, std::size_t d);

/// One OTA upload. Rows of local_grads must satisfy ||g_m|| <= G_max
/// (std::invalid_argument otherwise). noise holds complex_symbols(d) samples.
GradientEstimate ota_round(const GradMatrix& local_grads, const PowerControlDesign& design,
                           const FadingDraw& fading, std::span<const std::complex<double>> noise,
                           const NetworkConfig& config);

struct EmpiricalMoments {
    Vector mean;
    double variance = 0.0;  ///< sample estimate of E||g_hat - E g_hat||^2
    Vector mean_std_error;  ///< per-component standard error of the mean
    std::size_t trials = 0;
};

/// Monte-Carlo moments of g_hat over fading and noise at fixed gradients.
/// Trial k uses round index k of the given seed.
EmpiricalMoments empirical_moments(const PowerControlDesign& design, const NetworkConfig& config,
                                   const GradMatrix& local_grads, std::size_t n_trials, std::uint64_t seed);

}  // namespace otafl
