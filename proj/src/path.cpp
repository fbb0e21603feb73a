#include <skf/path.hpp>
#include <skf/errors.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace skf {

index_t LambdaGrid::find(double lambda) const
{
    for (index_t k = 0; k < values.size(); ++k) {
        if (std::abs(values[k] - lambda) <= 1e-9 * std::max(std::abs(lambda), values[k])) return k;
    }
    return -1;
}

LambdaGrid make_lambda_grid(double log10_max, double log10_min, double step)
{
    if (!std::isfinite(log10_max) || !std::isfinite(log10_min) || !(log10_max > log10_min)) {
        throw invalid_argument_error("make_lambda_grid: need log10_max > log10_min");
    }
    if (!(step > 0.0) || !std::isfinite(step)) {
        throw invalid_argument_error("make_lambda_grid: step must be positive");
    }
    LambdaGrid grid;
    grid.log10_max = log10_max;
    grid.log10_min = log10_min;
    grid.step = step;
    const auto count = static_cast<index_t>(std::floor((log10_max - log10_min) / step + 1e-9)) + 1;
    grid.values.resize(count);
    for (index_t k = 0; k < count; ++k) {
        grid.values[k] = std::pow(10.0, log10_max - static_cast<double>(k) * step);
    }
    return grid;
}

namespace {

double sign_of(double x)
{
    return (x > 0.0) - (x < 0.0);
}

struct KktParts
{
    double active = 0.0;
    double inactive_excess = 0.0;
};

KktParts kkt_parts(const vector_t& r, const vector_t& x, double lambda)
{
    KktParts out;
    for (index_t j = 0; j < x.size(); ++j) {
        if (x[j] != 0.0) {
            out.active = std::max(out.active, std::abs(r[j] - lambda * sign_of(x[j])));
        } else {
            out.inactive_excess = std::max(out.inactive_excess, std::abs(r[j]) - lambda);
        }
    }
    return out;
}

bool certified(const KktParts& parts, double lambda, double tol)
{
    return parts.active <= tol && parts.inactive_excess <= tol * lambda;
}

// Exact solve on a fixed active set, with the factorization cached across
// grid points while the set does not change. A singular block (the joint
// Gram of a design and its equi-correlated copy is one) is handled by
// projecting the current iterate onto {x : G_AA x = rhs}.
class ActiveSetPolisher
{
public:
    explicit ActiveSetPolisher(const matrix_t& G) : G_(G) {}

    // Returns false when no finite solution is available.
    bool solve(const index_set& active, const vector_t& rhs, const vector_t& base, vector_t& out)
    {
        if (active != cached_) factor(active);
        if (use_llt_) {
            out = llt_.solve(rhs);
        } else {
            const vector_t coeffs = eig_.eigenvectors().transpose() * (rhs - block_ * base);
            out = base + eig_.eigenvectors() * coeffs.cwiseProduct(inv_values_);
        }
        return out.allFinite();
    }

private:
    void factor(const index_set& active)
    {
        cached_ = active;
        const auto k = static_cast<index_t>(active.size());
        block_.resize(k, k);
        for (index_t a = 0; a < k; ++a) {
            for (index_t b = 0; b < k; ++b) block_(a, b) = G_(active[a], active[b]);
        }
        llt_.compute(block_);
        use_llt_ = llt_.info() == Eigen::Success;
        if (use_llt_ && k > 0) {
            const vector_t d = llt_.matrixLLT().diagonal();
            use_llt_ = d.minCoeff() > 1e-5 * d.maxCoeff();
        }
        if (!use_llt_) {
            eig_.compute(block_);
            const vector_t& values = eig_.eigenvalues();
            const double cut = 1e-11 * std::max(values.cwiseAbs().maxCoeff(), 1e-300);
            inv_values_ = values.unaryExpr([cut](double v) { return v > cut ? 1.0 / v : 0.0; });
        }
    }

    const matrix_t& G_;
    index_set cached_{static_cast<std::size_t>(1), index_t{-1}};
    matrix_t block_;
    Eigen::LLT<matrix_t> llt_;
    Eigen::SelfAdjointEigenSolver<matrix_t> eig_;
    vector_t inv_values_;
    bool use_llt_ = false;
};

// Attempts the exact solution on the given signed active set, starting from x.
bool try_polish(const matrix_t& G, const vector_t& c, double lambda, double tol,
                const index_set& active, const vector_t& signs, ActiveSetPolisher& polisher,
                vector_t& x, vector_t& r)
{
    const auto k = static_cast<index_t>(active.size());
    vector_t rhs(k);
    vector_t base(k);
    for (index_t a = 0; a < k; ++a) {
        rhs[a] = c[active[a]] - lambda * signs[a];
        base[a] = x[active[a]];
    }
    vector_t xa;
    if (k > 0 && !polisher.solve(active, rhs, base, xa)) return false;

    vector_t candidate = vector_t::Zero(c.size());
    for (index_t a = 0; a < k; ++a) {
        if (sign_of(xa[a]) != signs[a]) return false;
        candidate[active[a]] = xa[a];
    }
    vector_t resid = c;
    for (index_t a = 0; a < k; ++a) resid.noalias() -= xa[a] * G.col(active[a]);
    if (!certified(kkt_parts(resid, candidate, lambda), lambda, tol)) return false;
    x = std::move(candidate);
    r = std::move(resid);
    return true;
}

void signed_support(const vector_t& x, index_set& active, vector_t& signs)
{
    active.clear();
    for (index_t j = 0; j < x.size(); ++j) {
        if (x[j] != 0.0) active.push_back(j);
    }
    signs.resize(static_cast<index_t>(active.size()));
    for (std::size_t a = 0; a < active.size(); ++a) {
        signs[static_cast<index_t>(a)] = sign_of(x[active[a]]);
    }
}

double lasso_objective(const matrix_t& G, const vector_t& c, const vector_t& x, double lambda)
{
    return 0.5 * x.dot(G * x) - c.dot(x) + lambda * x.lpNorm<1>();
}

// Feature-sign search from x: solve on the signed active set, move to the best
// sign-change breakpoint when the signs disagree, and grow the set by the most
// violating inactive coordinate. Every accepted step lowers the objective.
bool refine_active_set(const matrix_t& G, const vector_t& c, double lambda, double tol, std::size_t max_iter,
                       ActiveSetPolisher& polisher, vector_t& x, vector_t& r)
{
    index_set active;
    vector_t signs;
    signed_support(x, active, signs);
    r = c - G * x;

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        const KktParts parts = kkt_parts(r, x, lambda);
        if (certified(parts, lambda, tol)) return true;

        if (parts.active <= tol) {
            // Active equations hold: add the worst inactive violator.
            index_t worst = -1;
            double excess = tol * lambda;
            for (index_t j = 0; j < x.size(); ++j) {
                if (x[j] == 0.0 && std::abs(r[j]) - lambda > excess) {
                    excess = std::abs(r[j]) - lambda;
                    worst = j;
                }
            }
            if (worst < 0) return false;
            const auto pos = std::lower_bound(active.begin(), active.end(), worst) - active.begin();
            active.insert(active.begin() + pos, worst);
            vector_t grown(signs.size() + 1);
            grown << signs.head(pos), sign_of(r[worst]), signs.tail(signs.size() - pos);
            signs = std::move(grown);
        }

        const auto k = static_cast<index_t>(active.size());
        vector_t rhs(k);
        vector_t x0(k);
        for (index_t a = 0; a < k; ++a) {
            rhs[a] = c[active[a]] - lambda * signs[a];
            x0[a] = x[active[a]];
        }
        vector_t x1;
        if (!polisher.solve(active, rhs, x0, x1)) return false;

        vector_t block_resid(k);
        for (index_t a = 0; a < k; ++a) {
            double g = 0.0;
            for (index_t b = 0; b < k; ++b) g += G(active[a], active[b]) * x1[b];
            block_resid[a] = rhs[a] - g;
        }
        const bool consistent = block_resid.norm() <= 1e-9 * (1.0 + rhs.norm());
        // Inconsistent system: the objective falls linearly along the null direction.
        const vector_t dir = consistent ? vector_t(x1 - x0) : block_resid;

        std::vector<double> breakpoints;
        for (index_t a = 0; a < k; ++a) {
            if (x0[a] != 0.0 && dir[a] != 0.0 && sign_of(dir[a]) != sign_of(x0[a])) {
                const double t = -x0[a] / dir[a];
                if (t > 0.0 && (!consistent || t < 1.0)) breakpoints.push_back(t);
            }
        }
        if (consistent) breakpoints.push_back(1.0);
        if (breakpoints.empty()) return false;
        std::sort(breakpoints.begin(), breakpoints.end());
        if (!consistent) breakpoints.resize(1);

        // Along x0 -> x0 + t dir the sign-fixed quadratic decreases up to the first
        // breakpoint, so that point is always a descent step; later breakpoints
        // (or the full step) are taken only when they measurably do better.
        auto point = [&](double t) {
            vector_t full = vector_t::Zero(x.size());
            for (index_t a = 0; a < k; ++a) {
                double v = x0[a] + t * dir[a];
                if (x0[a] == 0.0 && sign_of(v) != signs[a]) v = 0.0;
                if (x0[a] != 0.0 && dir[a] != 0.0 && std::abs(t + x0[a] / dir[a]) <= 1e-15 * t) v = 0.0;
                full[active[a]] = v;
            }
            return full;
        };
        vector_t best = point(breakpoints.front());
        double best_value = lasso_objective(G, c, best, lambda);
        for (std::size_t b = 1; b < breakpoints.size(); ++b) {
            vector_t candidate = point(breakpoints[b]);
            const double value = lasso_objective(G, c, candidate, lambda);
            if (value < best_value) {
                best_value = value;
                best = std::move(candidate);
            }
        }
        if (best == x) return false;
        x = std::move(best);
        r = c - G * x;
        signed_support(x, active, signs);
    }
    return false;
}

// One cyclic pass; returns max_j G_jj |dx_j|.
double sweep(const matrix_t& G, double lambda, vector_t& x, vector_t& r, const index_set* subset)
{
    double biggest = 0.0;
    auto update = [&](index_t j) {
        const double gjj = G(j, j);
        if (gjj <= 0.0) return;
        const double old = x[j];
        const double z = r[j] + gjj * old;
        const double shrunk = std::abs(z) - lambda;
        const double fresh = shrunk > 0.0 ? std::copysign(shrunk / gjj, z) : 0.0;
        if (fresh != old) {
            const double delta = fresh - old;
            r.noalias() -= delta * G.col(j);
            x[j] = fresh;
            biggest = std::max(biggest, gjj * std::abs(delta));
        }
    };
    if (subset) {
        for (index_t j : *subset) update(j);
    } else {
        for (index_t j = 0; j < x.size(); ++j) update(j);
    }
    return biggest;
}

} // namespace

double gram_lasso_kkt_residual(const matrix_t& G, const vector_t& c, const vector_t& x, double lambda,
                               double* inactive_excess)
{
    const vector_t r = c - G * x;
    const KktParts parts = kkt_parts(r, x, lambda);
    if (inactive_excess) *inactive_excess = std::max(parts.inactive_excess, 0.0);
    return std::max(parts.active, std::max(parts.inactive_excess, 0.0));
}

GramLassoPath solve_gram_lasso_path(const matrix_t& G, const vector_t& c, const vector_t& lambdas,
                                    const PathOptions& options)
{
    const index_t m = c.size();
    if (G.rows() != m || G.cols() != m) {
        throw invalid_argument_error("solve_gram_lasso_path: G must be square and match c");
    }
    if (!G.allFinite() || !c.allFinite()) {
        throw invalid_argument_error("solve_gram_lasso_path: non-finite input");
    }
    for (index_t k = 0; k < lambdas.size(); ++k) {
        if (!(lambdas[k] > 0.0)) {
            throw invalid_argument_error("solve_gram_lasso_path: lambdas must be positive");
        }
    }

    GramLassoPath out;
    out.coefs.reserve(static_cast<std::size_t>(lambdas.size()));
    out.kkt_residuals.resize(lambdas.size());

    ActiveSetPolisher polisher(G);
    vector_t x = vector_t::Zero(m);
    vector_t r;
    index_set active;
    vector_t signs;
    index_set previous_active;
    vector_t previous_signs;

    for (index_t k = 0; k < lambdas.size(); ++k) {
        const double lambda = lambdas[k];
        if (!options.warm_start) {
            x.setZero();
            previous_active.clear();
            previous_signs.resize(0);
        }
        r = c - G * x;

        // Same signed active set as the previous point: one exact solve.
        bool done = try_polish(G, c, lambda, options.tol, previous_active, previous_signs, polisher, x, r);
        if (!done && options.warm_start && k > 0) {
            // Few support changes between neighbouring grid points: feature-sign from the warm start.
            vector_t refined = x;
            vector_t refined_r;
            done = refine_active_set(G, c, lambda, options.tol, 2 * static_cast<std::size_t>(m) + 20, polisher,
                                     refined, refined_r);
            if (done) {
                x = std::move(refined);
                r = std::move(refined_r);
            }
        }
        if (!done) r = c - G * x;

        double threshold = 1e-4 * lambda;
        std::size_t sweeps = 0;
        while (!done) {
            // Full sweep, then cycle on the active set until it settles.
            double change = sweep(G, lambda, x, r, nullptr);
            ++sweeps;
            while (change > threshold && sweeps < options.max_sweeps) {
                signed_support(x, active, signs);
                double inner = sweep(G, lambda, x, r, &active);
                ++sweeps;
                while (inner > threshold && sweeps < options.max_sweeps) {
                    inner = sweep(G, lambda, x, r, &active);
                    ++sweeps;
                }
                change = sweep(G, lambda, x, r, nullptr);
                ++sweeps;
            }

            signed_support(x, active, signs);
            if (try_polish(G, c, lambda, options.tol, active, signs, polisher, x, r)) break;

            r = c - G * x;
            if (certified(kkt_parts(r, x, lambda), lambda, options.tol)) break;

            vector_t refined = x;
            vector_t refined_r;
            if (refine_active_set(G, c, lambda, options.tol, 4 * static_cast<std::size_t>(m) + 20, polisher,
                                  refined, refined_r)) {
                x = std::move(refined);
                r = std::move(refined_r);
                break;
            }

            if (sweeps >= options.max_sweeps) {
                const KktParts parts = kkt_parts(r, x, lambda);
                throw convergence_error("solve_gram_lasso_path: no certified solution at lambda = " +
                                            std::to_string(lambda) + " after " +
                                            std::to_string(sweeps) + " sweeps",
                                        std::max(parts.active, parts.inactive_excess));
            }
            threshold *= 1e-2;
        }
        out.total_sweeps += sweeps;

        const KktParts parts = kkt_parts(r, x, lambda);
        out.kkt_residuals[k] = std::max(parts.active, std::max(parts.inactive_excess, 0.0));
        out.coefs.push_back(x);
        signed_support(x, previous_active, previous_signs);
    }
    return out;
}

double split_stationarity_residual(const StructuralProblem& problem, double nu, const vector_t& beta,
                                   const vector_t& gamma)
{
    const double n = static_cast<double>(problem.n());
    const vector_t Xb = problem.X * beta;
    const vector_t Db = problem.D * beta;
    const vector_t grad = -problem.X.transpose() * Xb / n - problem.D.transpose() * Db / nu +
                          problem.D.transpose() * gamma / nu + problem.X.transpose() * problem.y / n;
    return grad.cwiseAbs().maxCoeff();
}

SplitPath solve_split_lasso_path(const StructuralProblem& problem, double nu, const LambdaGrid& grid,
                                 const PathOptions& options)
{
    if (!(nu > 0.0) || !std::isfinite(nu)) {
        throw invalid_argument_error("solve_split_lasso_path: nu must be positive and finite");
    }
    problem.validate();
    if (grid.size() == 0) {
        throw invalid_argument_error("solve_split_lasso_path: empty lambda grid");
    }

    const double n = static_cast<double>(problem.n());
    const index_t m = problem.m();
    const matrix_t& D = problem.D;

    matrix_t M = problem.X.transpose() * problem.X / n + D.transpose() * D / nu;
    M = 0.5 * (M + M.transpose());
    const matrix_t M_pinv = numerics::pseudo_inverse_sym(M);

    const matrix_t B = M_pinv * D.transpose() / nu;   // beta(g) = beta0 + B g
    const vector_t beta0 = M_pinv * (problem.X.transpose() * problem.y / n);
    const vector_t c = D * beta0 / nu;
    matrix_t G = (matrix_t::Identity(m, m) - D * B) / nu;
    G = 0.5 * (G + G.transpose());

    const GramLassoPath solved = solve_gram_lasso_path(G, c, grid.values, options);

    SplitPath path;
    path.nu = nu;
    path.grid = grid;
    path.kkt_residuals.resize(grid.size());
    path.beta_path.reserve(static_cast<std::size_t>(grid.size()));
    path.gamma_path = solved.coefs;
    for (index_t k = 0; k < grid.size(); ++k) {
        const vector_t& gamma = path.gamma_path[static_cast<std::size_t>(k)];
        vector_t beta = beta0 + B * gamma;
        const double stationarity = split_stationarity_residual(problem, nu, beta, gamma);
        path.kkt_residuals[k] = std::max(stationarity, solved.kkt_residuals[k]);
        path.beta_path.push_back(std::move(beta));
    }
    const double worst = path.kkt_residuals.maxCoeff();
    if (worst > options.tol) {
        throw convergence_error("solve_split_lasso_path: KKT residual " + std::to_string(worst) +
                                    " exceeds tolerance",
                                worst);
    }
    return path;
}

namespace {

// Soft threshold with a relative dead zone: margins within activity_rel_tol * t count as zero.
double threshold_active(double x, double t)
{
    const double shrunk = std::abs(x) - t;
    if (shrunk <= activity_rel_tol * t) return 0.0;
    return std::copysign(shrunk, x);
}

index_t require_lambda_hat(const LambdaGrid& grid, std::optional<double> lambda_hat)
{
    if (!lambda_hat) {
        throw invalid_argument_error("magnitude statistics need lambda_hat");
    }
    const index_t k = grid.find(*lambda_hat);
    if (k < 0) {
        throw invalid_argument_error("lambda_hat = " + std::to_string(*lambda_hat) +
                                     " is not on the lambda grid");
    }
    return k;
}

FeatureStats magnitude_of(const vector_t& coef)
{
    FeatureStats out;
    out.Z = coef.cwiseAbs();
    out.r = coef.unaryExpr([](double v) { return sign_of(v); });
    return out;
}

} // namespace

FeatureStats emergence_statistics(const std::vector<vector_t>& coefs, const vector_t& lambdas)
{
    if (coefs.empty() || static_cast<index_t>(coefs.size()) != lambdas.size()) {
        throw invalid_argument_error("emergence_statistics: one coefficient vector per lambda required");
    }
    const index_t m = coefs.front().size();
    FeatureStats out{vector_t::Zero(m), vector_t::Zero(m)};
    std::vector<bool> seen(static_cast<std::size_t>(m), false);
    for (std::size_t k = 0; k < coefs.size(); ++k) {
        const vector_t& coef = coefs[k];
        for (index_t i = 0; i < m; ++i) {
            if (seen[static_cast<std::size_t>(i)] || coef[i] == 0.0) continue;
            seen[static_cast<std::size_t>(i)] = true;
            out.Z[i] = lambdas[static_cast<index_t>(k)];
            out.r[i] = sign_of(coef[i]);
        }
    }
    return out;
}

FeatureStats stage1_statistics(const SplitPath& path, const StructuralProblem& problem, StatMode mode,
                               std::optional<double> lambda_hat)
{
    const double nu = path.nu;
    const index_t m = problem.m();
    auto stage1_at = [&](index_t k) {
        const double lambda = path.grid.values[k];
        const vector_t Db = problem.D * path.beta_path[static_cast<std::size_t>(k)];
        vector_t g(m);
        for (index_t i = 0; i < m; ++i) g[i] = threshold_active(Db[i], lambda * nu);
        return g;
    };

    if (mode == StatMode::magnitude) {
        return magnitude_of(stage1_at(require_lambda_hat(path.grid, lambda_hat)));
    }
    std::vector<vector_t> coefs;
    coefs.reserve(static_cast<std::size_t>(path.grid.size()));
    for (index_t k = 0; k < path.grid.size(); ++k) coefs.push_back(stage1_at(k));
    return emergence_statistics(coefs, path.grid.values);
}

KnockoffStats stage2_statistics(const SplitPath& path, const AugmentedSystem& aug,
                                const SplitKnockoffCopy& copy, const vector_t& r, StatMode mode,
                                std::optional<double> lambda_hat)
{
    const double nu = path.nu;
    const index_t m = copy.A_gamma_tilde.cols();
    if (r.size() != m) {
        throw invalid_argument_error("stage2_statistics: r must have length m");
    }
    const vector_t fit_y = copy.A_gamma_tilde.transpose() * aug.y_tilde;
    const matrix_t fit_beta = copy.A_gamma_tilde.transpose() * aug.A_beta;

    auto stage2_at = [&](index_t k) {
        const double lambda = path.grid.values[k];
        const vector_t resid_corr = fit_y - fit_beta * path.beta_path[static_cast<std::size_t>(k)];
        vector_t g(m);
        for (index_t i = 0; i < m; ++i) g[i] = threshold_active(nu * resid_corr[i], lambda * nu);
        return g;
    };

    FeatureStats raw;
    if (mode == StatMode::magnitude) {
        raw = magnitude_of(stage2_at(require_lambda_hat(path.grid, lambda_hat)));
    } else {
        std::vector<vector_t> coefs;
        coefs.reserve(static_cast<std::size_t>(path.grid.size()));
        for (index_t k = 0; k < path.grid.size(); ++k) coefs.push_back(stage2_at(k));
        raw = emergence_statistics(coefs, path.grid.values);
    }

    KnockoffStats out;
    out.Z_prime = raw.Z;
    out.r_prime = raw.r;
    out.Z_tilde = vector_t::Zero(m);
    for (index_t i = 0; i < m; ++i) {
        if (r[i] == raw.r[i]) out.Z_tilde[i] = raw.Z[i];
    }
    return out;
}

SignificanceStats significance_statistics(const SplitPath& path, const StructuralProblem& problem,
                                          const AugmentedSystem& aug, const SplitKnockoffCopy& copy,
                                          StatMode mode, std::optional<double> lambda_hat)
{
    const FeatureStats feature = stage1_statistics(path, problem, mode, lambda_hat);
    KnockoffStats knockoff = stage2_statistics(path, aug, copy, feature.r, mode, lambda_hat);
    SignificanceStats out;
    out.Z = feature.Z;
    out.r = feature.r;
    out.Z_prime = std::move(knockoff.Z_prime);
    out.r_prime = std::move(knockoff.r_prime);
    out.Z_tilde = std::move(knockoff.Z_tilde);
    out.mode = mode;
    out.lambda_hat = lambda_hat;
    return out;
}

} // namespace skf
