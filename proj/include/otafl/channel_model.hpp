#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace otafl {

using Point2 = std::array<double, 2>;

/// Device positions around the parameter server, in meters.
struct Deployment {
    std::vector<Point2> positions;
    Point2 ps_position{0.0, 0.0};
    double r_max = 0.0;

    std::size_t size() const noexcept { return positions.size(); }
    double distance(std::size_t m) const;
    /// Throws std::invalid_argument if empty or any device is outside r_max.
    void validate() const;
};

/// Uniform deployment in a disk of radius r_max. Positions closer than the
/// 1 m reference distance are redrawn.
Deployment sample_deployment(std::size_t n_devices, double r_max, std::uint64_t seed);

/// Average channel gains Lambda_m (linear power ratio). Fixed for the whole run.
class LargeScaleGains {
public:
    explicit LargeScaleGains(std::vector<double> lambda);

    std::span<const double> values() const noexcept { return lambda_; }
    double operator[](std::size_t m) const { return lambda_.at(m); }
    std::size_t size() const noexcept { return lambda_.size(); }

private:
    std::vector<double> lambda_;
};

/// Log-distance path loss with a 1 m reference distance.
LargeScaleGains pathloss_gains(const Deployment& deployment, double exponent, double pl0_db);
double pathloss_gain(double distance_m, double exponent, double pl0_db);

struct FadingDraw {
    std::vector<std::complex<double>> h;
    std::uint64_t round_index = 0;
};

/// h_{m,t} ~ CN(0, Lambda_m); each (seed, round, device) triple owns its own stream.
FadingDraw sample_fading(std::span<const double> lambda, std::uint64_t seed, std::uint64_t round);
std::complex<double> sample_fading_coefficient(double lambda, std::uint64_t seed, std::uint64_t round,
                                               std::uint64_t device);

/// Number of complex channel uses needed for a d-dimensional real vector
/// (two real entries per complex symbol).
constexpr std::size_t complex_symbols(std::size_t d) noexcept { return (d + 1) / 2; }

/// Receiver noise for one round: complex_symbols(d) draws of CN(0, n0).
std::vector<std::complex<double>> sample_noise(double n0, std::size_t d, std::uint64_t seed,
                                               std::uint64_t round);

/// Static system parameters shared by every power-control scheme.
struct NetworkConfig {
    std::vector<double> lambda;  ///< Lambda_m per device
    double e_s = 1.0;            ///< per-sample energy budget
    double n0 = 0.0;             ///< receiver noise variance per complex sample
    std::size_t d = 1;           ///< gradient dimension
    double g_max = 1.0;          ///< gradient norm bound (clip level)

    std::size_t n_devices() const noexcept { return lambda.size(); }
    void validate() const;
};

/// Energy per channel use for a transmitter at ptx_dbm signalling at bandwidth_hz (joules).
double energy_per_sample(double ptx_dbm, double bandwidth_hz);
/// Noise spectral density in W/Hz (equivalently joules per channel use).
double noise_psd_watts(double noise_psd_dbm_hz);

/// Channel magnitude a device needs before it may transmit with pre-scaler gamma.
double truncation_threshold(double gamma, double g_max, std::size_t d, double e_s);

/// E[chi] = P(|h| >= threshold) = exp(-gamma^2 G^2 / (d Lambda E_s)).
double truncation_probability(double gamma, double lambda, double g_max, std::size_t d, double e_s);

/// alpha_m = gamma * E[chi]; quasi-concave in gamma, peaking at gamma_max.
double alpha_m(double gamma, double lambda, double g_max, std::size_t d, double e_s);

/// sqrt(d Lambda E_s / (2 G^2)), the maximizer of alpha_m.
double gamma_max(double lambda, double g_max, std::size_t d, double e_s);

/// sqrt(d Lambda E_s / (2 e G^2)), the maximum of alpha_m.
double alpha_max(double lambda, double g_max, std::size_t d, double e_s);

}  // namespace otafl
