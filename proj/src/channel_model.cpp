#include "otafl/channel_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "otafl/rng.hpp"

namespace otafl {

namespace {

constexpr double kReferenceDistance = 1.0;

void check_truncation_args(double gamma, double lambda, std::size_t d, double e_s) {
    if (!(lambda > 0.0)) throw std::domain_error("channel gain lambda must be positive");
    if (!(e_s > 0.0)) throw std::domain_error("energy budget e_s must be positive");
    if (d == 0) throw std::domain_error("dimension d must be at least 1");
    if (gamma < 0.0) throw std::domain_error("pre-scaler gamma must be non-negative");
}

}  // namespace

double Deployment::distance(std::size_t m) const {
    const auto& p = positions.at(m);
    return std::hypot(p[0] - ps_position[0], p[1] - ps_position[1]);
}

void Deployment::validate() const {
    if (positions.empty()) throw std::invalid_argument("deployment has no devices");
    for (std::size_t m = 0; m < positions.size(); ++m) {
        if (distance(m) > r_max * (1.0 + 1e-12)) {
            throw std::invalid_argument("device " + std::to_string(m) + " lies outside r_max");
        }
    }
}

Deployment sample_deployment(std::size_t n_devices, double r_max, std::uint64_t seed) {
    if (n_devices == 0) throw std::invalid_argument("deployment needs at least one device");
    if (!(r_max > kReferenceDistance)) throw std::invalid_argument("r_max must exceed the 1 m reference distance");
    Deployment dep;
    dep.r_max = r_max;
    dep.positions.reserve(n_devices);
    for (std::size_t m = 0; m < n_devices; ++m) {
        RngStream rng(seed, Purpose::Deployment, 0, m);
        for (;;) {
            const double r = r_max * std::sqrt(rng.uniform());
            const double theta = 2.0 * std::numbers::pi * rng.uniform();
            if (r < kReferenceDistance) continue;
            dep.positions.push_back({r * std::cos(theta), r * std::sin(theta)});
            break;
        }
    }
    return dep;
}

LargeScaleGains::LargeScaleGains(std::vector<double> lambda) : lambda_(std::move(lambda)) {
    if (lambda_.empty()) throw std::invalid_argument("no devices");
    for (double l : lambda_) {
        if (!(l > 0.0) || !std::isfinite(l)) throw std::invalid_argument("channel gains must be positive and finite");
    }
}

double pathloss_gain(double distance_m, double exponent, double pl0_db) {
    if (!(distance_m >= kReferenceDistance)) {
        throw std::invalid_argument("device closer than the 1 m reference distance");
    }
    const double loss_db = pl0_db + 10.0 * exponent * std::log10(distance_m);
    return std::pow(10.0, -loss_db / 10.0);
}

LargeScaleGains pathloss_gains(const Deployment& deployment, double exponent, double pl0_db) {
    deployment.validate();
    std::vector<double> lambda(deployment.size());
    for (std::size_t m = 0; m < deployment.size(); ++m) {
        lambda[m] = pathloss_gain(deployment.distance(m), exponent, pl0_db);
    }
    return LargeScaleGains(std::move(lambda));
}

std::complex<double> sample_fading_coefficient(double lambda, std::uint64_t seed, std::uint64_t round,
                                               std::uint64_t device) {
    if (lambda <= 0.0) return {0.0, 0.0};
    RngStream rng(seed, Purpose::Fading, round, device);
    return rng.complex_normal(lambda);
}

FadingDraw sample_fading(std::span<const double> lambda, std::uint64_t seed, std::uint64_t round) {
    FadingDraw draw;
    draw.round_index = round;
    draw.h.resize(lambda.size());
    for (std::size_t m = 0; m < lambda.size(); ++m) {
        draw.h[m] = sample_fading_coefficient(lambda[m], seed, round, m);
    }
    return draw;
}

std::vector<std::complex<double>> sample_noise(double n0, std::size_t d, std::uint64_t seed, std::uint64_t round) {
    if (n0 < 0.0) throw std::domain_error("noise variance must be non-negative");
    std::vector<std::complex<double>> z(complex_symbols(d));
    if (n0 == 0.0) return z;
    RngStream rng(seed, Purpose::Noise, round, 0);
    for (auto& v : z) v = rng.complex_normal(n0);
    return z;
}

void NetworkConfig::validate() const {
    if (lambda.empty()) throw std::invalid_argument("network has no devices");
    for (double l : lambda) {
        if (!(l > 0.0) || !std::isfinite(l)) throw std::invalid_argument("channel gains must be positive");
    }
    if (!(e_s > 0.0)) throw std::invalid_argument("e_s must be positive");
    if (!(n0 >= 0.0)) throw std::invalid_argument("n0 must be non-negative");
    if (d == 0) throw std::invalid_argument("d must be at least 1");
    if (!(g_max > 0.0)) throw std::invalid_argument("g_max must be positive");
}

double energy_per_sample(double ptx_dbm, double bandwidth_hz) {
    if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    return std::pow(10.0, (ptx_dbm - 30.0) / 10.0) / bandwidth_hz;
}

double noise_psd_watts(double noise_psd_dbm_hz) { return std::pow(10.0, (noise_psd_dbm_hz - 30.0) / 10.0); }

double truncation_threshold(double gamma, double g_max, std::size_t d, double e_s) {
    return g_max * gamma / std::sqrt(static_cast<double>(d) * e_s);
}

double truncation_probability(double gamma, double lambda, double g_max, std::size_t d, double e_s) {
    check_truncation_args(gamma, lambda, d, e_s);
    return std::exp(-gamma * gamma * g_max * g_max / (static_cast<double>(d) * lambda * e_s));
}

double alpha_m(double gamma, double lambda, double g_max, std::size_t d, double e_s) {
    return gamma * truncation_probability(gamma, lambda, g_max, d, e_s);
}

double gamma_max(double lambda, double g_max, std::size_t d, double e_s) {
    check_truncation_args(0.0, lambda, d, e_s);
    return std::sqrt(static_cast<double>(d) * lambda * e_s / (2.0 * g_max * g_max));
}

double alpha_max(double lambda, double g_max, std::size_t d, double e_s) {
    check_truncation_args(0.0, lambda, d, e_s);
    return std::sqrt(static_cast<double>(d) * lambda * e_s / (2.0 * std::numbers::e * g_max * g_max));
}

}  // namespace otafl
