#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "otafl/channel_model.hpp"
#include "otafl/dataset.hpp"
#include "otafl/learner.hpp"
#include "otafl/ota_link.hpp"

namespace otafl::baselines {

/// Per-round decision of a scheme that uses global instantaneous CSI.
/// Device m sends device_scale[m] * g_m; the PS divides by post_scaler.
struct PolicyDecision {
    std::vector<std::complex<double>> device_scale;
    double post_scaler = 1.0;
    std::vector<std::uint8_t> participation_mask;
};

/// Worst-case (||g|| = G_max) per-sample energy of each device.
std::vector<double> worst_case_energy(const PolicyDecision& decision, const NetworkConfig& config);
bool respects_energy_budget(const PolicyDecision& decision, const NetworkConfig& config);

/// Receiver output for a decision, same embedding as ota_link::ota_round.
GradientEstimate apply_decision(const PolicyDecision& decision, const GradMatrix& local_grads,
                                const FadingDraw& fading, std::span<const std::complex<double>> noise,
                                const NetworkConfig& config);

/// Zero-bias channel inversion limited by the weakest |h| this round.
/// A zero channel makes the round degenerate: everyone silent, post-scaler 1.
PolicyDecision vanilla_ota(std::span<const std::complex<double>> h, const NetworkConfig& config);

/// Worst-case MSE proxy of a received amplitude profile against the uniform
/// average: [G^2 sum (c_m - a)^2 + d N0 / 2] / (N a)^2, with c_m the effective
/// (phase-aligned) amplitude of device m and N a the post-scaler.
double aggregation_mse(std::span<const double> amplitudes, double target, const NetworkConfig& config);

/// Per-round MSE-optimal power control (reconstruction surrogate): devices that
/// can reach the common target invert to it, the rest transmit at full energy.
/// The target is found by scanning the N+1 active-set intervals exactly.
PolicyDecision opc_ota(std::span<const std::complex<double>> h, const NetworkConfig& config);

/// Largest amplitude each device can deliver this round: |h| sqrt(d E_s) / G.
std::vector<double> max_amplitudes(std::span<const std::complex<double>> h, const NetworkConfig& config);

/// Common pre-scaler for every device chosen to minimize zeta (kappa ignored),
/// searched over [0, max_m gamma_max,m].
PowerControlDesign lcpc(std::span<const double> lambda, const NetworkConfig& config);

enum class BbPolicy { Interior, Alternative, Full };

struct BbDecision {
    std::vector<std::uint8_t> scheduled;
    std::vector<std::size_t> active;   ///< indices of scheduled devices
    PowerControlDesign design;         ///< over the scheduled devices only, gamma_m = gamma_max,m
    NetworkConfig sub_config;          ///< network restricted to the scheduled devices
    bool full_set = false;
    bool fell_back = false;            ///< interior set was empty
};

/// Devices within r_in of the PS.
std::vector<std::uint8_t> interior_set(const Deployment& deployment, double r_in);

/// Distance-based scheduling. Alternative flips a coin per round from the
/// (seed, Scheduler, round) stream; full_probability = 1 forces the full set.
BbDecision bb_fl(BbPolicy policy, std::uint64_t round, const Deployment& deployment, const NetworkConfig& config,
                 double r_in, std::uint64_t seed, double full_probability = 0.5);

/// Truncated-inversion round restricted to the scheduled devices.
GradientEstimate apply_bb(const BbDecision& decision, const GradMatrix& local_grads, const FadingDraw& fading,
                          std::span<const std::complex<double>> noise);

/// Noiseless uniform aggregation step w - eta * global_gradient(w).
Vector ideal_fedavg(const ModelSpec& spec, std::span<const Dataset> datasets, const Vector& w, double eta,
                    double g_max);

}  // namespace otafl::baselines
