#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "otafl/dataset.hpp"
#include "otafl/types.hpp"

namespace otafl {

/// Softmax classifier with an optional ReLU hidden layer, trained with
/// L2-regularized cross-entropy: phi(w, xi) = CE(w, xi) + (l2 / 2) ||w||^2.
///
/// Parameter layout (column-major blocks): W1 [hidden x input], b1 [hidden],
/// W2 [classes x hidden], b2 [classes]. With hidden == 0 the model is a
/// linear softmax: W [classes x input], b [classes].
struct ModelSpec {
    int input_dim = 20;
    int hidden = 32;
    int classes = 10;
    double l2 = 0.01;

    std::size_t param_count() const noexcept;
};

struct LossGrad {
    double loss = 0.0;
    Vector grad;
};

/// Mean loss and gradient over the given rows (all rows when `rows` is empty).
LossGrad loss_and_gradient(const ModelSpec& spec, const Vector& w, const Dataset& data,
                           std::span<const std::size_t> rows = {});
double loss_value(const ModelSpec& spec, const Vector& w, const Dataset& data);
double accuracy(const ModelSpec& spec, const Vector& w, const Dataset& data);

/// Gaussian weights with standard deviation 1/sqrt(fan_in), zero biases.
Vector init_params(const ModelSpec& spec, std::uint64_t seed);

/// Scales v down to norm `limit` when it exceeds it.
void clip_to_norm(Vector& v, double limit);

/// Mini-batch of `batch_size` rows drawn without replacement from the stream
/// (seed, Minibatch, round, device). A full batch returns every row in order.
std::vector<std::size_t> draw_minibatch(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed,
                                        std::uint64_t round, std::uint64_t device);

/// Clipped mini-batch gradient g_{m,t}.
Vector local_gradient(const ModelSpec& spec, const Vector& w, const Dataset& data, std::size_t batch_size,
                      double g_max, std::uint64_t seed, std::uint64_t round);

/// Unclipped full-batch gradient of f_m.
Vector full_gradient(const ModelSpec& spec, const Vector& w, const Dataset& data);

/// Uniform average of clipped full-batch local gradients (the Ideal-FedAvg direction).
Vector global_gradient(const ModelSpec& spec, const Vector& w, std::span<const Dataset> datasets, double g_max);

/// grad F(w) = (1/N) sum grad f_m(w), unclipped.
Vector objective_gradient(const ModelSpec& spec, const Vector& w, std::span<const Dataset> datasets);

Vector sgd_step(const Vector& w, const Vector& estimate, double eta);

/// sum_m weights_m f_m(w); empty weights means uniform. Throws std::invalid_argument
/// when weights are off the simplex by more than 1e-9.
double objective_value(const ModelSpec& spec, const Vector& w, std::span<const Dataset> datasets,
                       std::span<const double> weights = {});

/// sqrt((1/N) sum ||g_m - mean g||^2) over the rows of `grads`.
double kappa_from_gradients(const GradMatrix& grads);

/// Data-heterogeneity estimate at w_ref from clipped full-batch local gradients.
double estimate_kappa(const ModelSpec& spec, const Vector& w_ref, std::span<const Dataset> datasets, double g_max);

}  // namespace otafl
