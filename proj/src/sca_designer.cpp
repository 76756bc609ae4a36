#include "otafl/sca_designer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/math/tools/roots.hpp>

namespace otafl::sca {

namespace {

constexpr double kRootTolerance = 1e-12;  // absolute, normalized units

double normalization_scale(const DesignProblem& problem, double lambda_ref) {
    return std::sqrt(static_cast<double>(problem.d) * problem.e_s * lambda_ref) / problem.g_max;
}

double max_lambda(const DesignProblem& problem) {
    return *std::max_element(problem.lambda.begin(), problem.lambda.end());
}

}  // namespace

NetworkConfig DesignProblem::network() const {
    NetworkConfig cfg;
    cfg.lambda = lambda;
    cfg.e_s = e_s;
    cfg.n0 = n0;
    cfg.d = d;
    cfg.g_max = g_max;
    return cfg;
}

void DesignProblem::validate() const {
    network().validate();
    if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
    if (!(lipschitz > 0.0)) throw std::invalid_argument("L must be positive");
    if (!(kappa >= 0.0)) throw std::invalid_argument("kappa must be non-negative");
    if (!sigma.empty() && sigma.size() != lambda.size()) throw std::invalid_argument("one sigma per device required");
    for (double s : sigma) {
        if (!(s >= 0.0)) throw std::invalid_argument("sigma must be non-negative");
    }
}

Limits closed_form_limits(const DesignProblem& problem) {
    problem.validate();
    Limits lim;
    for (double l : problem.lambda) {
        lim.gamma_max.push_back(gamma_max(l, problem.g_max, problem.d, problem.e_s));
        lim.alpha_max.push_back(alpha_max(l, problem.g_max, problem.d, problem.e_s));
    }
    return lim;
}

// ---------------------------------------------------------------------------
// Subproblem

Subproblem::Subproblem(const DesignProblem& problem, const Anchor& anchor) : n_(problem.n()) {
    problem.validate();
    if (anchor.gamma.size() != n_ || anchor.p.size() != n_) throw std::invalid_argument("anchor size mismatch");
    const double lambda_ref = max_lambda(problem);
    scale_ = normalization_scale(problem, lambda_ref);
    eta_l_ = problem.eta * problem.lipschitz;
    g2_ = problem.g_max * problem.g_max;
    n_kappa2_ = static_cast<double>(n_) * problem.kappa * problem.kappa;
    nu_ = problem.n0 * g2_ / (problem.e_s * lambda_ref);
    sigma2_.assign(n_, 0.0);
    for (std::size_t m = 0; m < problem.sigma.size(); ++m) sigma2_[m] = problem.sigma[m] * problem.sigma[m];
    for (std::size_t m = 0; m < n_; ++m) {
        const double c = lambda_ref / problem.lambda[m];
        curv_.push_back(c);
        u_max_.push_back(std::sqrt(1.0 / (2.0 * c)));
        a_max_.push_back(std::sqrt(1.0 / (2.0 * std::numbers::e * c)));
        const double u = anchor.gamma[m] / scale_;
        if (!(u > 0.0) || !(anchor.p[m] > 0.0)) {
            throw std::domain_error("anchor at boundary: gamma and p must be strictly positive (device " +
                                    std::to_string(m) + ")");
        }
        u_bar_.push_back(u);
        p_bar_.push_back(anchor.p[m]);
    }
    a_bar_ = anchor.alpha / scale_;
    if (!(a_bar_ > 0.0)) throw std::domain_error("anchor at boundary: alpha must be strictly positive");
}

double Subproblem::objective(const Vector& x) const {
    const auto n = static_cast<Eigen::Index>(n_);
    const double a = x[3 * n];
    double var = nu_ / (a * a);
    double bias = 0.0;
    const double u = 1.0 / static_cast<double>(n_);
    for (Eigen::Index m = 0; m < n; ++m) {
        const auto mi = static_cast<std::size_t>(m);
        const double p = x[n + m];
        var += g2_ * x[2 * n + m] + p * p * sigma2_[mi] - g2_ * p_bar_[mi] * (2.0 * p - p_bar_[mi]);
        bias += (p - u) * (p - u);
    }
    return eta_l_ * var + n_kappa2_ * bias;
}

Vector Subproblem::objective_gradient(const Vector& x) const {
    const auto n = static_cast<Eigen::Index>(n_);
    Vector g = Vector::Zero(x.size());
    const double u = 1.0 / static_cast<double>(n_);
    for (Eigen::Index m = 0; m < n; ++m) {
        const auto mi = static_cast<std::size_t>(m);
        const double p = x[n + m];
        g[n + m] = eta_l_ * (2.0 * p * sigma2_[mi] - 2.0 * g2_ * p_bar_[mi]) + 2.0 * n_kappa2_ * (p - u);
        g[2 * n + m] = eta_l_ * g2_;
    }
    const double a = x[3 * n];
    g[3 * n] = -2.0 * eta_l_ * nu_ / (a * a * a);
    return g;
}

Eigen::MatrixXd Subproblem::objective_hessian(const Vector& x) const {
    const auto n = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(x.size(), x.size());
    for (Eigen::Index m = 0; m < n; ++m) {
        h(n + m, n + m) = 2.0 * eta_l_ * sigma2_[static_cast<std::size_t>(m)] + 2.0 * n_kappa2_;
    }
    const double a = x[3 * n];
    h(3 * n, 3 * n) = 6.0 * eta_l_ * nu_ / (a * a * a * a);
    return h;
}

Vector Subproblem::constraints(const Vector& x) const {
    const auto n = static_cast<Eigen::Index>(n_);
    Vector f(static_cast<Eigen::Index>(constraint_count()));
    const double a = x[3 * n];
    for (Eigen::Index m = 0; m < n; ++m) {
        const auto mi = static_cast<std::size_t>(m);
        const double u = x[m], p = x[n + m], z = x[2 * n + m];
        f[m] = std::log(u_bar_[mi] * p_bar_[mi]) + u / u_bar_[mi] + p / p_bar_[mi] - 2.0 - std::log(z) - std::log(a);
        f[n + m] = std::log(a_bar_ * p_bar_[mi]) + a / a_bar_ + p / p_bar_[mi] - 2.0 - std::log(u) + curv_[mi] * u * u;
        f[2 * n + m] = u - u_max_[mi];
        f[3 * n + m] = p / a_max_[mi] - (2.0 * a_bar_ - a) / (a_bar_ * a_bar_);
        f[4 * n + m] = kProbabilityFloor - p;
    }
    return f;
}

Eigen::MatrixXd Subproblem::constraint_jacobian(const Vector& x) const {
    const auto n = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(constraint_count()), x.size());
    const Eigen::Index ia = 3 * n;
    const double a = x[ia];
    for (Eigen::Index m = 0; m < n; ++m) {
        const auto mi = static_cast<std::size_t>(m);
        const double u = x[m], z = x[2 * n + m];
        j(m, m) = 1.0 / u_bar_[mi];
        j(m, n + m) = 1.0 / p_bar_[mi];
        j(m, 2 * n + m) = -1.0 / z;
        j(m, ia) = -1.0 / a;

        j(n + m, m) = -1.0 / u + 2.0 * curv_[mi] * u;
        j(n + m, n + m) = 1.0 / p_bar_[mi];
        j(n + m, ia) = 1.0 / a_bar_;

        j(2 * n + m, m) = 1.0;

        j(3 * n + m, n + m) = 1.0 / a_max_[mi];
        j(3 * n + m, ia) = 1.0 / (a_bar_ * a_bar_);

        j(4 * n + m, n + m) = -1.0;
    }
    return j;
}

Eigen::MatrixXd Subproblem::weighted_constraint_hessian(const Vector& x, const Vector& w) const {
    const auto n = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(x.size(), x.size());
    const Eigen::Index ia = 3 * n;
    const double a = x[ia];
    for (Eigen::Index m = 0; m < n; ++m) {
        const double u = x[m], z = x[2 * n + m];
        h(2 * n + m, 2 * n + m) += w[m] / (z * z);
        h(ia, ia) += w[m] / (a * a);
        h(m, m) += w[n + m] * (1.0 / (u * u) + 2.0 * curv_[static_cast<std::size_t>(m)]);
    }
    return h;
}

bool Subproblem::in_domain(const Vector& x) const {
    const auto n = static_cast<Eigen::Index>(n_);
    if (!x.allFinite()) return false;
    for (Eigen::Index m = 0; m < n; ++m) {
        if (!(x[m] > 0.0) || !(x[2 * n + m] > 0.0)) return false;
    }
    return x[3 * n] > 0.0;
}

bool Subproblem::strictly_feasible(const Vector& x) const {
    if (!in_domain(x)) return false;
    const Vector f = constraints(x);
    return f.allFinite() && (f.array() < 0.0).all();
}

Vector Subproblem::to_normalized(const Anchor& a, const std::vector<double>& z) const {
    const auto n = static_cast<Eigen::Index>(n_);
    Vector x(static_cast<Eigen::Index>(dim()));
    for (Eigen::Index m = 0; m < n; ++m) {
        const auto mi = static_cast<std::size_t>(m);
        x[m] = a.gamma[mi] / scale_;
        x[n + m] = a.p[mi];
        x[2 * n + m] = z.at(mi);
    }
    x[3 * n] = a.alpha / scale_;
    return x;
}

Anchor Subproblem::to_physical(const Vector& x) const {
    const auto n = static_cast<Eigen::Index>(n_);
    Anchor out;
    for (Eigen::Index m = 0; m < n; ++m) {
        out.gamma.push_back(x[m] * scale_);
        out.p.push_back(x[n + m]);
    }
    out.alpha = x[3 * n] * scale_;
    return out;
}

Vector Subproblem::anchor_point() const {
    const auto n = static_cast<Eigen::Index>(n_);
    Vector x(static_cast<Eigen::Index>(dim()));
    for (Eigen::Index m = 0; m < n; ++m) {
        const auto mi = static_cast<std::size_t>(m);
        x[m] = u_bar_[mi];
        x[n + m] = p_bar_[mi];
        x[2 * n + m] = u_bar_[mi] * p_bar_[mi] / a_bar_;
    }
    x[3 * n] = a_bar_;
    return x;
}

Vector Subproblem::strict_start() const {
    const auto n = static_cast<Eigen::Index>(n_);
    // The anchor is exactly coupled, so the coupling constraint is tight there:
    // shrink alpha slightly and inflate z to get a strictly interior point.
    for (double shrink : {1e-4, 1e-6, 1e-8}) {
        Vector x = anchor_point();
        x[3 * n] = a_bar_ * (1.0 - shrink);
        for (Eigen::Index m = 0; m < n; ++m) {
            const auto mi = static_cast<std::size_t>(m);
            x[m] = std::min(x[m], u_max_[mi] * (1.0 - shrink * shrink));
            x[2 * n + m] = x[m] * x[n + m] / x[3 * n] * (1.0 + 10.0 * shrink);
        }
        if (strictly_feasible(x)) return x;
    }
    throw std::domain_error("anchor at boundary: no strictly feasible start near the anchor");
}

Subproblem build_subproblem(const ScaState& state, const DesignProblem& problem) {
    return Subproblem(problem, state.anchor);
}

// ---------------------------------------------------------------------------
// Barrier solver

namespace {

double barrier_value(const Subproblem& sp, const Vector& x, double t) {
    const Vector f = sp.constraints(x);
    return t * sp.objective(x) - (-f.array()).log().sum();
}

}  // namespace

SolveResult solve_subproblem(const Subproblem& program, const SolverOptions& options) {
    return solve_subproblem(program, program.strict_start(), options);
}

SolveResult solve_subproblem(const Subproblem& program, const Vector& start, const SolverOptions& options) {
    if (!program.strictly_feasible(start)) {
        const Vector f = program.in_domain(start) ? program.constraints(start) : Vector();
        std::string report = "start point is not strictly feasible";
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            if (!(f[i] < 0.0)) report += "; constraint " + std::to_string(i) + " = " + std::to_string(f[i]);
        }
        throw std::domain_error(report);
    }
    const auto dim = static_cast<Eigen::Index>(program.dim());
    const auto n = static_cast<Eigen::Index>(program.n());
    const auto m_count = static_cast<double>(program.constraint_count());

    SolveResult res;
    res.x = start;
    double t = 1.0 / options.mu0;
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim + 1, dim + 1);
    for (Eigen::Index m = 0; m < n; ++m) {
        kkt(dim, n + m) = 1.0;
        kkt(n + m, dim) = 1.0;
    }

    bool stage_ok = true;
    for (;;) {
        stage_ok = false;
        for (std::size_t k = 0; k < options.max_newton; ++k) {
            const Vector& x = res.x;
            const Vector f = program.constraints(x);
            const Vector inv = (-f.array()).inverse().matrix();
            const Eigen::MatrixXd jac = program.constraint_jacobian(x);
            const Vector grad = t * program.objective_gradient(x) + jac.transpose() * inv;
            Eigen::MatrixXd hess = t * program.objective_hessian(x) +
                                   jac.transpose() * inv.cwiseAbs2().asDiagonal() * jac +
                                   program.weighted_constraint_hessian(x, inv);
            kkt.topLeftCorner(dim, dim) = hess;
            Vector rhs(dim + 1);
            rhs.head(dim) = -grad;
            rhs[dim] = 1.0 - x.segment(n, n).sum();
            // Symmetric diagonal equilibration; barrier terms near the boundary
            // make the raw system badly scaled.
            Vector scale = kkt.diagonal().cwiseAbs().cwiseSqrt();
            for (Eigen::Index i = 0; i <= dim; ++i) {
                if (!(scale[i] > 1e-300) || !std::isfinite(scale[i])) scale[i] = 1.0;
            }
            const Eigen::MatrixXd scaled = scale.cwiseInverse().asDiagonal() * kkt * scale.cwiseInverse().asDiagonal();
            const Vector sol = scale.cwiseInverse().asDiagonal() *
                               scaled.fullPivLu().solve(scale.cwiseInverse().asDiagonal() * rhs);
            Vector dx = sol.head(dim);
            // Remove the rounding drift from sum p = 1.
            dx.segment(n, n).array() += (rhs[dim] - dx.segment(n, n).sum()) / static_cast<double>(n);
            const double decrement = -grad.dot(dx);
            if (!std::isfinite(decrement)) break;
            if (decrement / 2.0 <= 1e-10) {
                stage_ok = true;
                break;
            }
            double s = 1.0;
            while (s > 1e-20 && !program.strictly_feasible(x + s * dx)) s *= options.backtrack;
            const double phi = barrier_value(program, x, t);
            while (s > 1e-20 && barrier_value(program, x + s * dx, t) > phi - options.armijo * s * decrement) {
                s *= options.backtrack;
            }
            if (s <= 1e-20) {
                // No progress possible in floating point: treat as centered.
                stage_ok = true;
                break;
            }
            res.x = x + s * dx;
            ++res.newton_steps;
        }
        res.objective = program.objective(res.x);
        res.gap = m_count / t;
        if (res.gap <= options.tolerance * std::max(1.0, std::abs(res.objective))) {
            res.converged = stage_ok;
            break;
        }
        if (!stage_ok) break;  // best iterate, flagged non-converged
        t *= options.mu_factor;
    }
    return res;
}

// ---------------------------------------------------------------------------
// SCA loop

double gamma_from_alpha(double target, double lambda, const DesignProblem& problem) {
    const double lambda_ref = max_lambda(problem);
    const double s = normalization_scale(problem, lambda_ref);
    const double c = lambda_ref / lambda;
    const double u_max = std::sqrt(1.0 / (2.0 * c));
    const double a_max = std::sqrt(1.0 / (2.0 * std::numbers::e * c));
    const double t = target / s;
    if (!(t >= 0.0)) throw std::domain_error("target alpha_m must be non-negative");
    if (t >= a_max) {
        if (t > a_max * (1.0 + 1e-9)) {
            throw std::domain_error("alpha p_m exceeds alpha_max: no real pre-scaler achieves it");
        }
        return u_max * s;
    }
    if (t == 0.0) return 0.0;
    auto f = [&](double u) { return u * std::exp(-c * u * u) - t; };
    auto tol = [](double lo, double hi) { return hi - lo <= kRootTolerance; };
    std::uintmax_t iters = 200;
    const auto [lo, hi] = boost::math::tools::bisect(f, 0.0, u_max, tol, iters);
    return 0.5 * (lo + hi) * s;
}

double evaluate_p1(const PowerControlDesign& design, const DesignProblem& problem) {
    const NetworkConfig cfg = problem.network();
    const BoundReport r = zeta(design, problem.sigma, cfg);
    return 2.0 * problem.eta * problem.lipschitz * r.zeta + bias_term(design.p, problem.kappa, problem.n());
}

Anchor default_anchor(const DesignProblem& problem) {
    const Limits lim = closed_form_limits(problem);
    const auto n = static_cast<double>(problem.n());
    Anchor a;
    a.alpha = 0.9 * n * *std::min_element(lim.alpha_max.begin(), lim.alpha_max.end());
    for (std::size_t m = 0; m < problem.n(); ++m) {
        a.p.push_back(1.0 / n);
        a.gamma.push_back(gamma_from_alpha(a.alpha / n, problem.lambda[m], problem));
    }
    return a;
}

FeasibilityCertificate certify(const Anchor& point, const DesignProblem& problem, double tolerance) {
    const Limits lim = closed_form_limits(problem);
    FeasibilityCertificate cert;
    double total = 0.0;
    for (std::size_t m = 0; m < problem.n(); ++m) {
        const double g = point.gamma[m];
        const double p = point.p[m];
        const double target = point.alpha * p;
        const double am = g > 0.0 ? alpha_m(g, problem.lambda[m], problem.g_max, problem.d, problem.e_s) : 0.0;
        const double resid = std::abs(am - target) / std::max(target, std::numeric_limits<double>::min());
        cert.coupling_residual.push_back(resid);
        cert.max_residual = std::max(cert.max_residual, resid);
        total += p;
        const std::string dev = "device " + std::to_string(m) + ": ";
        if (!(g > 0.0)) cert.box_violations.push_back(dev + "gamma <= 0");
        if (g > lim.gamma_max[m] * (1.0 + 1e-9)) cert.box_violations.push_back(dev + "gamma > gamma_max");
        if (target > lim.alpha_max[m] * (1.0 + 1e-9)) cert.box_violations.push_back(dev + "alpha p > alpha_max");
        if (p < 0.0 || p > 1.0) cert.box_violations.push_back(dev + "p outside [0, 1]");
    }
    if (!(point.alpha > 0.0)) cert.box_violations.push_back("alpha <= 0");
    cert.simplex_residual = std::abs(total - 1.0);
    cert.max_residual = std::max(cert.max_residual, cert.simplex_residual);
    cert.accepted = cert.max_residual <= tolerance && cert.box_violations.empty();
    return cert;
}

ScaResult sca_loop(const DesignProblem& problem, std::optional<ScaState> init, const ScaOptions& options) {
    problem.validate();
    const NetworkConfig cfg = problem.network();
    const Limits lim = closed_form_limits(problem);

    ScaState state;
    if (init) {
        state = *init;
    } else {
        state.anchor = default_anchor(problem);
    }
    // Keep anchors exactly coupled: p and alpha are re-derived from gamma.
    PowerControlDesign design = make_design(state.anchor.gamma, cfg);
    state.anchor = {design.gamma, design.p, design.alpha};
    state.iterate = state.anchor;
    state.objective_trace.push_back(evaluate_p1(design, problem));
    Anchor certified = state.iterate;

    for (std::size_t it = 1; it <= options.max_iters; ++it) {
        const Subproblem sub(problem, state.anchor);
        const SolveResult sol = solve_subproblem(sub, options.solver);
        Anchor iterate = sub.to_physical(sol.x);
        for (std::size_t m = 0; m < problem.n(); ++m) {
            double target = iterate.alpha * iterate.p[m];
            if (target > lim.alpha_max[m] && target <= lim.alpha_max[m] * (1.0 + 1e-9)) target = lim.alpha_max[m];
            iterate.gamma[m] = gamma_from_alpha(target, problem.lambda[m], problem);
        }
        state.iteration = it;
        const PowerControlDesign candidate = make_design(iterate.gamma, cfg);
        const double prev = state.objective_trace.back();
        const double value = evaluate_p1(candidate, problem);
        if (!(value <= prev + 1e-8 * std::max(1.0, std::abs(prev)))) {
            // The surrogate step no longer improves P1: the anchor is stationary to solver accuracy.
            state.converged = true;
            break;
        }
        design = candidate;
        state.anchor = {design.gamma, design.p, design.alpha};
        state.iterate = iterate;
        state.z.assign(sol.x.data() + 2 * sub.n(), sol.x.data() + 3 * sub.n());
        state.objective_trace.push_back(value);
        certified = iterate;
        if (prev - value <= options.rel_tol * std::max(std::abs(prev), std::numeric_limits<double>::min())) {
            state.converged = true;
            break;
        }
    }
    state.floored_devices.clear();
    for (std::size_t m = 0; m < problem.n(); ++m) {
        if (state.anchor.p[m] <= 10.0 * kProbabilityFloor) state.floored_devices.push_back(m);
    }
    ScaResult result;
    result.certificate = certify(certified, problem);
    result.design = std::move(design);
    result.state = std::move(state);
    return result;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const DesignProblem& p) {
    return {{"lambda", p.lambda}, {"g_max", p.g_max}, {"d", p.d},         {"e_s", p.e_s},     {"n0", p.n0},
            {"eta", p.eta},       {"L", p.lipschitz}, {"kappa", p.kappa}, {"sigma", p.sigma}};
}

DesignProblem problem_from_json(const nlohmann::json& j) {
    DesignProblem p;
    p.lambda = j.at("lambda").get<std::vector<double>>();
    p.g_max = j.value("g_max", p.g_max);
    p.d = j.at("d").get<std::size_t>();
    p.e_s = j.at("e_s").get<double>();
    p.n0 = j.at("n0").get<double>();
    p.eta = j.value("eta", p.eta);
    p.lipschitz = j.value("L", p.lipschitz);
    p.kappa = j.value("kappa", p.kappa);
    p.sigma = j.value("sigma", std::vector<double>{});
    p.validate();
    return p;
}

nlohmann::json to_json(const ScaResult& r, const DesignProblem& problem) {
    const BoundReport b = full_bound(r.design, problem.sigma, problem.network(), problem.kappa, problem.eta,
                                     problem.lipschitz, 0.0);
    return {{"design",
             {{"gamma", r.design.gamma}, {"alpha_m", r.design.alpha_m}, {"p", r.design.p}, {"alpha", r.design.alpha}}},
            {"p1_objective", evaluate_p1(r.design, problem)},
            {"bound", to_json(b)},
            {"objective_trace", r.state.objective_trace},
            {"iterations", r.state.iteration},
            {"converged", r.state.converged},
            {"floored_devices", r.state.floored_devices},
            {"certificate",
             {{"coupling_residual", r.certificate.coupling_residual},
              {"simplex_residual", r.certificate.simplex_residual},
              {"box_violations", r.certificate.box_violations},
              {"max_residual", r.certificate.max_residual},
              {"accepted", r.certificate.accepted}}}};
}

}  // namespace otafl::sca
