#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otafl/bound_eval.hpp"
#include "otafl/channel_model.hpp"
#include "otafl/ota_link.hpp"
#include "otafl/types.hpp"

namespace otafl::sca {

/// Coefficients of the pre-scaler design problem
///   min 2 eta L zeta + 2 N kappa^2 sum (p_m - 1/N)^2.
struct DesignProblem {
    std::vector<double> lambda;
    double g_max = 10.0;
    std::size_t d = 1;
    double e_s = 1.0;
    double n0 = 0.0;
    double eta = 1.0;
    double lipschitz = 1.0;
    double kappa = 0.0;
    std::vector<double> sigma;  ///< empty means all zero

    std::size_t n() const noexcept { return lambda.size(); }
    NetworkConfig network() const;
    void validate() const;
};

struct Limits {
    std::vector<double> gamma_max;
    std::vector<double> alpha_max;
};

Limits closed_form_limits(const DesignProblem& problem);

/// Point in the coupled variables (gamma, p, alpha), physical units.
struct Anchor {
    std::vector<double> gamma;
    std::vector<double> p;
    double alpha = 0.0;
};

struct ScaState {
    Anchor anchor;
    Anchor iterate;
    std::vector<double> z;                ///< epigraph variables of the last subproblem
    std::vector<double> objective_trace;  ///< P1 values at accepted (exactly coupled) points
    std::size_t iteration = 0;
    bool converged = false;
    std::vector<std::size_t> floored_devices;  ///< devices whose p sits at the solver floor
};

struct FeasibilityCertificate {
    std::vector<double> coupling_residual;  ///< |alpha_m(gamma_m) - alpha p_m| / (alpha p_m)
    double simplex_residual = 0.0;
    std::vector<std::string> box_violations;
    double max_residual = 0.0;
    bool accepted = false;
};

/// Lower bound on p_m inside the solver (log surrogates need p > 0).
inline constexpr double kProbabilityFloor = 1e-9;

/// Convexified subproblem around an anchor.
///
/// Solved in normalized units u = gamma / s, a = alpha / s with
/// s = sqrt(d E_s Lambda_ref) / G_max, Lambda_ref = max Lambda; every constraint
/// is invariant under this rescaling. Variable order: u[0..N), p[0..N), z[0..N), a.
class Subproblem {
public:
    Subproblem(const DesignProblem& problem, const Anchor& anchor);

    std::size_t n() const noexcept { return n_; }
    std::size_t dim() const noexcept { return 3 * n_ + 1; }
    std::size_t constraint_count() const noexcept { return 5 * n_; }
    double scale() const noexcept { return scale_; }

    /// Objective of the surrogate (half the P1 objective at the anchor).
    double objective(const Vector& x) const;
    Vector objective_gradient(const Vector& x) const;
    Eigen::MatrixXd objective_hessian(const Vector& x) const;

    /// f_i(x) <= 0 form; blocks of N: epigraph, coupling, u <= u_max, alpha cap, p floor.
    Vector constraints(const Vector& x) const;
    /// Rows are constraint gradients.
    Eigen::MatrixXd constraint_jacobian(const Vector& x) const;
    /// sum_i w_i * hess f_i(x).
    Eigen::MatrixXd weighted_constraint_hessian(const Vector& x, const Vector& w) const;
    /// Open domain of the log terms: u > 0, z > 0, a > 0.
    bool in_domain(const Vector& x) const;
    bool strictly_feasible(const Vector& x) const;

    /// Anchor in normalized coordinates, with z tight.
    Vector anchor_point() const;
    /// Strictly feasible start derived from the anchor; throws std::domain_error
    /// if the anchor sits on the boundary.
    Vector strict_start() const;

    Vector to_normalized(const Anchor& a, const std::vector<double>& z) const;
    Anchor to_physical(const Vector& x) const;

    const std::vector<double>& u_max() const noexcept { return u_max_; }
    const std::vector<double>& a_max() const noexcept { return a_max_; }
    const std::vector<double>& curvature() const noexcept { return curv_; }
    double noise_coefficient() const noexcept { return nu_; }

private:
    std::size_t n_;
    double scale_;
    double eta_l_, g2_, n_kappa2_, nu_;
    std::vector<double> sigma2_, curv_, u_max_, a_max_;
    std::vector<double> u_bar_, p_bar_;
    double a_bar_;
};

Subproblem build_subproblem(const ScaState& state, const DesignProblem& problem);

struct SolverOptions {
    double tolerance = 1e-8;        ///< relative duality-gap target
    std::size_t max_newton = 200;   ///< Newton steps per barrier stage
    double armijo = 0.3;
    double backtrack = 0.8;
    double mu0 = 1.0;
    double mu_factor = 10.0;
};

struct SolveResult {
    Vector x;
    double objective = 0.0;
    double gap = 0.0;
    std::size_t newton_steps = 0;
    bool converged = false;
};

/// Log-barrier interior-point method with equality-constrained Newton steps.
SolveResult solve_subproblem(const Subproblem& program, const SolverOptions& options = {});
SolveResult solve_subproblem(const Subproblem& program, const Vector& start, const SolverOptions& options = {});

/// Smaller root of gamma exp(-gamma^2 G^2 / (d Lambda E_s)) = target on [0, gamma_max].
/// Throws std::domain_error when target exceeds alpha_max.
double gamma_from_alpha(double target, double lambda, const DesignProblem& problem);

/// 2 eta L zeta + 2 N kappa^2 sum (p - 1/N)^2.
double evaluate_p1(const PowerControlDesign& design, const DesignProblem& problem);

/// Zero-bias starting point: p = 1/N, alpha = 0.9 N min alpha_max.
Anchor default_anchor(const DesignProblem& problem);

FeasibilityCertificate certify(const Anchor& point, const DesignProblem& problem, double tolerance = 1e-6);

struct ScaOptions {
    std::size_t max_iters = 100;
    double rel_tol = 1e-6;
    SolverOptions solver;
};

struct ScaResult {
    PowerControlDesign design;
    ScaState state;
    FeasibilityCertificate certificate;
};

ScaResult sca_loop(const DesignProblem& problem, std::optional<ScaState> init = std::nullopt,
                   const ScaOptions& options = {});

nlohmann::json to_json(const DesignProblem& problem);
DesignProblem problem_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScaResult& result, const DesignProblem& problem);

}  // namespace otafl::sca
