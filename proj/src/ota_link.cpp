#include "otafl/ota_link.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace otafl {

PowerControlDesign make_design(std::span<const double> gamma, const NetworkConfig& config) {
    config.validate();
    if (gamma.size() != config.n_devices()) {
        throw std::invalid_argument("design has " + std::to_string(gamma.size()) + " pre-scalers for " +
                                    std::to_string(config.n_devices()) + " devices");
    }
    PowerControlDesign design;
    design.gamma.assign(gamma.begin(), gamma.end());
    design.alpha_m.resize(gamma.size());
    design.p.resize(gamma.size());
    for (std::size_t m = 0; m < gamma.size(); ++m) {
        if (!(gamma[m] > 0.0) || !std::isfinite(gamma[m])) {
            throw std::domain_error("pre-scaler gamma_" + std::to_string(m) + " must be positive");
        }
        design.alpha_m[m] = alpha_m(gamma[m], config.lambda[m], config.g_max, config.d, config.e_s);
        design.alpha += design.alpha_m[m];
    }
    if (!(design.alpha > 0.0)) throw std::domain_error("post-scaler underflowed to zero");
    for (std::size_t m = 0; m < gamma.size(); ++m) design.p[m] = design.alpha_m[m] / design.alpha;
    return design;
}

bool transmit_indicator(std::complex<double> h, double gamma, const NetworkConfig& config) {
    return std::abs(h) >= truncation_threshold(gamma, config.g_max, config.d, config.e_s);
}

double transmit_energy(std::complex<double> h, double gamma, double grad_norm, const NetworkConfig& config) {
    if (!transmit_indicator(h, gamma, config)) return 0.0;
    if (gamma == 0.0) return 0.0;
    const double amp = gamma * grad_norm / std::abs(h);
    return amp * amp / static_cast<double>(config.d);
}

int GradientEstimate::active_count() const noexcept {
    int n = 0;
    for (auto a : active_mask) n += a;
    return n;
}

Vector embed_noise(std::span<const std::complex<double>> noise, std::size_t d) {
    if (noise.size() < complex_symbols(d)) throw std::invalid_argument("noise draw shorter than d/2 symbols");
    Vector out(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
        const auto& s = noise[i / 2];
        out[static_cast<Eigen::Index>(i)] = (i % 2 == 0) ? s.real() : s.imag();
    }
    return out;
}

GradientEstimate ota_round(const GradMatrix& local_grads, const PowerControlDesign& design,
                           const FadingDraw& fading, std::span<const std::complex<double>> noise,
                           const NetworkConfig& config) {
    const auto n = static_cast<Eigen::Index>(design.size());
    if (local_grads.rows() != n || fading.h.size() != design.size()) {
        throw std::invalid_argument("device count mismatch in ota_round");
    }
    if (local_grads.cols() != static_cast<Eigen::Index>(config.d)) {
        throw std::invalid_argument("gradient dimension does not match config.d");
    }
    GradientEstimate est;
    est.active_mask.assign(design.size(), 0);
    est.signal_part = Vector::Zero(local_grads.cols());
    for (Eigen::Index m = 0; m < n; ++m) {
        const double norm = local_grads.row(m).norm();
        if (norm > config.g_max * (1.0 + 1e-12)) {
            throw std::invalid_argument("local gradient " + std::to_string(m) + " exceeds G_max (norm " +
                                        std::to_string(norm) + ")");
        }
        const auto mi = static_cast<std::size_t>(m);
        if (transmit_indicator(fading.h[mi], design.gamma[mi], config)) {
            est.active_mask[mi] = 1;
            // x = gamma g / h goes through h: the received contribution is gamma g.
            est.signal_part.noalias() += design.gamma[mi] * local_grads.row(m).transpose();
        }
    }
    est.signal_part /= design.alpha;
    est.noise_part = embed_noise(noise, config.d) / design.alpha;
    est.g_hat = est.signal_part + est.noise_part;
    return est;
}

EmpiricalMoments empirical_moments(const PowerControlDesign& design, const NetworkConfig& config,
                                   const GradMatrix& local_grads, std::size_t n_trials, std::uint64_t seed) {
    if (n_trials == 0) throw std::invalid_argument("n_trials must be at least 1");
    const Eigen::Index d = local_grads.cols();
    Vector mean = Vector::Zero(d);
    Vector m2 = Vector::Zero(d);
    for (std::size_t k = 0; k < n_trials; ++k) {
        const auto fading = sample_fading(config.lambda, seed, k);
        const auto noise = sample_noise(config.n0, config.d, seed, k);
        const auto est = ota_round(local_grads, design, fading, noise, config);
        const Vector delta = est.g_hat - mean;
        mean += delta / static_cast<double>(k + 1);
        m2.array() += delta.array() * (est.g_hat - mean).array();
    }
    EmpiricalMoments out;
    out.trials = n_trials;
    out.mean = mean;
    if (n_trials > 1) {
        const Vector var = m2 / static_cast<double>(n_trials - 1);
        out.variance = var.sum();
        out.mean_std_error = (var / static_cast<double>(n_trials)).cwiseSqrt();
    } else {
        out.mean_std_error = Vector::Zero(d);
    }
    return out;
}

}  // namespace otafl
