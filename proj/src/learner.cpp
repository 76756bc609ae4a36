#include "otafl/learner.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "otafl/rng.hpp"

namespace otafl {

namespace {

using ConstMap = Eigen::Map<const Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using Map = Eigen::Map<Eigen::MatrixXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

void check_inputs(const ModelSpec& spec, const Vector& w, const Dataset& data) {
    if (static_cast<std::size_t>(w.size()) != spec.param_count()) {
        throw std::invalid_argument("parameter vector has " + std::to_string(w.size()) + " entries, model needs " +
                                    std::to_string(spec.param_count()));
    }
    if (data.feature_dim() != spec.input_dim) throw std::invalid_argument("feature dimension does not match model");
    if (data.size() == 0) throw std::invalid_argument("empty dataset");
}

Eigen::MatrixXd gather(const Dataset& data, std::span<const std::size_t> rows) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), data.features.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        x.row(static_cast<Eigen::Index>(k)) = data.features.row(static_cast<Eigen::Index>(rows[k]));
    }
    return x;
}

struct Forward {
    Eigen::MatrixXd pre_activation;  // empty for the linear model
    Eigen::MatrixXd hidden;
    Eigen::MatrixXd logits;
};

Forward forward(const ModelSpec& spec, const Vector& w, const Eigen::MatrixXd& x) {
    const Eigen::Index in = spec.input_dim, h = spec.hidden, c = spec.classes;
    Forward f;
    if (h > 0) {
        ConstMap w1(w.data(), h, in);
        ConstVecMap b1(w.data() + h * in, h);
        ConstMap w2(w.data() + h * in + h, c, h);
        ConstVecMap b2(w.data() + h * in + h + c * h, c);
        f.pre_activation = (x * w1.transpose()).rowwise() + b1.transpose();
        f.hidden = f.pre_activation.cwiseMax(0.0);
        f.logits = (f.hidden * w2.transpose()).rowwise() + b2.transpose();
    } else {
        ConstMap w1(w.data(), c, in);
        ConstVecMap b1(w.data() + c * in, c);
        f.logits = (x * w1.transpose()).rowwise() + b1.transpose();
    }
    return f;
}

/// Row-wise log-sum-exp.
Eigen::VectorXd log_normalizer(const Eigen::MatrixXd& z) {
    const Eigen::VectorXd mx = z.rowwise().maxCoeff();
    return mx.array() + ((z.colwise() - mx).array().exp().rowwise().sum()).log();
}

}  // namespace

std::size_t ModelSpec::param_count() const noexcept {
    const auto in = static_cast<std::size_t>(input_dim);
    const auto h = static_cast<std::size_t>(hidden);
    const auto c = static_cast<std::size_t>(classes);
    if (h == 0) return c * in + c;
    return h * in + h + c * h + c;
}

LossGrad loss_and_gradient(const ModelSpec& spec, const Vector& w, const Dataset& data,
                           std::span<const std::size_t> rows) {
    check_inputs(spec, w, data);
    std::vector<std::size_t> all;
    if (rows.empty()) {
        all.resize(data.size());
        std::iota(all.begin(), all.end(), 0);
        rows = all;
    }
    const Eigen::MatrixXd x = gather(data, rows);
    const Forward f = forward(spec, w, x);
    const Eigen::VectorXd lse = log_normalizer(f.logits);
    const auto b = static_cast<double>(rows.size());

    Eigen::MatrixXd dz = (f.logits.colwise() - lse).array().exp();
    double ce = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const int y = data.labels[rows[k]];
        if (y < 0 || y >= spec.classes) throw std::invalid_argument("label outside model classes");
        const auto i = static_cast<Eigen::Index>(k);
        ce += lse[i] - f.logits(i, y);
        dz(i, y) -= 1.0;
    }
    dz /= b;

    LossGrad out;
    out.loss = ce / b + 0.5 * spec.l2 * w.squaredNorm();
    out.grad = spec.l2 * w;
    const Eigen::Index in = spec.input_dim, h = spec.hidden, c = spec.classes;
    if (h > 0) {
        ConstMap w2(w.data() + h * in + h, c, h);
        Map gw1(out.grad.data(), h, in);
        VecMap gb1(out.grad.data() + h * in, h);
        Map gw2(out.grad.data() + h * in + h, c, h);
        VecMap gb2(out.grad.data() + h * in + h + c * h, c);
        gw2.noalias() += dz.transpose() * f.hidden;
        gb2 += dz.colwise().sum().transpose();
        const Eigen::MatrixXd da = ((dz * w2).array() * (f.pre_activation.array() > 0.0).cast<double>()).matrix();
        gw1.noalias() += da.transpose() * x;
        gb1 += da.colwise().sum().transpose();
    } else {
        Map gw(out.grad.data(), c, in);
        VecMap gb(out.grad.data() + c * in, c);
        gw.noalias() += dz.transpose() * x;
        gb += dz.colwise().sum().transpose();
    }
    return out;
}

double loss_value(const ModelSpec& spec, const Vector& w, const Dataset& data) {
    check_inputs(spec, w, data);
    const Forward f = forward(spec, w, data.features);
    const Eigen::VectorXd lse = log_normalizer(f.logits);
    double ce = 0.0;
    for (std::size_t k = 0; k < data.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        ce += lse[i] - f.logits(i, data.labels[k]);
    }
    return ce / static_cast<double>(data.size()) + 0.5 * spec.l2 * w.squaredNorm();
}

double accuracy(const ModelSpec& spec, const Vector& w, const Dataset& data) {
    check_inputs(spec, w, data);
    const Forward f = forward(spec, w, data.features);
    std::size_t hits = 0;
    for (std::size_t k = 0; k < data.size(); ++k) {
        Eigen::Index best = 0;
        const auto row = f.logits.row(static_cast<Eigen::Index>(k));
        // NaN logits never win, so a diverged model scores as wrong.
        if (!row.allFinite()) continue;
        row.maxCoeff(&best);
        if (best == data.labels[k]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

Vector init_params(const ModelSpec& spec, std::uint64_t seed) {
    Vector w = Vector::Zero(static_cast<Eigen::Index>(spec.param_count()));
    RngStream rng(seed, Purpose::Init, 0, 0);
    const Eigen::Index in = spec.input_dim, h = spec.hidden, c = spec.classes;
    if (h > 0) {
        const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
        const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
        for (Eigen::Index i = 0; i < h * in; ++i) w[i] = s1 * rng.normal();
        for (Eigen::Index i = 0; i < c * h; ++i) w[h * in + h + i] = s2 * rng.normal();
    } else {
        const double s = 1.0 / std::sqrt(static_cast<double>(in));
        for (Eigen::Index i = 0; i < c * in; ++i) w[i] = s * rng.normal();
    }
    return w;
}

void clip_to_norm(Vector& v, double limit) {
    const double n = v.norm();
    if (n > limit) v *= limit / n;
}

std::vector<std::size_t> draw_minibatch(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed,
                                        std::uint64_t round, std::uint64_t device) {
    if (dataset_size == 0) throw std::invalid_argument("empty dataset");
    if (batch_size < 1 || batch_size > dataset_size) throw std::invalid_argument("batch_size must be in [1, D]");
    std::vector<std::size_t> idx(dataset_size);
    std::iota(idx.begin(), idx.end(), 0);
    if (batch_size == dataset_size) return idx;
    RngStream rng(seed, Purpose::Minibatch, round, device);
    for (std::size_t i = 0; i < batch_size; ++i) {
        const std::size_t j = i + rng.below(dataset_size - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(batch_size);
    return idx;
}

Vector local_gradient(const ModelSpec& spec, const Vector& w, const Dataset& data, std::size_t batch_size,
                      double g_max, std::uint64_t seed, std::uint64_t round) {
    const auto device = static_cast<std::uint64_t>(data.owner < 0 ? 0 : data.owner);
    const auto rows = draw_minibatch(data.size(), batch_size, seed, round, device);
    Vector g = loss_and_gradient(spec, w, data, rows).grad;
    clip_to_norm(g, g_max);
    return g;
}

Vector full_gradient(const ModelSpec& spec, const Vector& w, const Dataset& data) {
    return loss_and_gradient(spec, w, data).grad;
}

Vector global_gradient(const ModelSpec& spec, const Vector& w, std::span<const Dataset> datasets, double g_max) {
    if (datasets.empty()) throw std::invalid_argument("no datasets");
    Vector sum = Vector::Zero(w.size());
    for (const auto& ds : datasets) {
        Vector g = full_gradient(spec, w, ds);
        clip_to_norm(g, g_max);
        sum += g;
    }
    return sum / static_cast<double>(datasets.size());
}

Vector objective_gradient(const ModelSpec& spec, const Vector& w, std::span<const Dataset> datasets) {
    if (datasets.empty()) throw std::invalid_argument("no datasets");
    Vector sum = Vector::Zero(w.size());
    for (const auto& ds : datasets) sum += full_gradient(spec, w, ds);
    return sum / static_cast<double>(datasets.size());
}

Vector sgd_step(const Vector& w, const Vector& estimate, double eta) {
    if (!(eta > 0.0)) throw std::invalid_argument("stepsize must be positive");
    return w - eta * estimate;
}

double objective_value(const ModelSpec& spec, const Vector& w, std::span<const Dataset> datasets,
                       std::span<const double> weights) {
    if (datasets.empty()) throw std::invalid_argument("no datasets");
    if (!weights.empty()) {
        if (weights.size() != datasets.size()) throw std::invalid_argument("one weight per device required");
        double total = 0.0;
        for (double p : weights) {
            if (p < -1e-9 || p > 1.0 + 1e-9) throw std::invalid_argument("weights must lie in [0, 1]");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("weights must sum to one");
    }
    const double uniform = 1.0 / static_cast<double>(datasets.size());
    double f = 0.0;
    for (std::size_t m = 0; m < datasets.size(); ++m) {
        f += (weights.empty() ? uniform : weights[m]) * loss_value(spec, w, datasets[m]);
    }
    return f;
}

double kappa_from_gradients(const GradMatrix& grads) {
    if (grads.rows() == 0) throw std::invalid_argument("no gradients");
    const Eigen::RowVectorXd mean = grads.colwise().mean();
    return std::sqrt((grads.rowwise() - mean).rowwise().squaredNorm().mean());
}

double estimate_kappa(const ModelSpec& spec, const Vector& w_ref, std::span<const Dataset> datasets, double g_max) {
    GradMatrix grads(static_cast<Eigen::Index>(datasets.size()), w_ref.size());
    for (std::size_t m = 0; m < datasets.size(); ++m) {
        Vector g = full_gradient(spec, w_ref, datasets[m]);
        clip_to_norm(g, g_max);
        grads.row(static_cast<Eigen::Index>(m)) = g.transpose();
    }
    return kappa_from_gradients(grads);
}

}  // namespace otafl
