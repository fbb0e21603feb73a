#include <skf/baseline.hpp>
#include <skf/errors.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace skf {

namespace {

bool is_exact_identity(const matrix_t& D)
{
    return D.rows() == D.cols() && D == matrix_t::Identity(D.rows(), D.cols());
}

} // namespace

ReducedProblem reduce_generalized_lasso(const StructuralProblem& problem, const numerics::tolerances& tol)
{
    problem.validate();
    const index_t n = problem.n();
    const index_t p = problem.p();
    const index_t m = problem.m();

    if (m > p || numerics::numerical_rank(problem.D, tol.rank_rel) < m) {
        throw rank_deficiency_error("reduce_generalized_lasso: D must have full row rank m <= p");
    }
    if (n < p + m) {
        throw infeasible_dimension_error("reduce_generalized_lasso: need n >= p + m, got n = " +
                                         std::to_string(n) + ", p + m = " + std::to_string(p + m));
    }

    ReducedProblem out;
    if (is_exact_identity(problem.D)) {
        out.D_dagger = matrix_t::Identity(p, p);
        out.D_0 = matrix_t(p, 0);
        out.U = matrix_t::Identity(n, n);
        out.y_r = problem.y;
        out.X_r = problem.X;
        return out;
    }

    out.D_dagger = numerics::pseudo_inverse(problem.D, tol.rank_rel);
    out.D_0 = numerics::null_space_basis(problem.D, tol.rank_rel);
    if (out.D_0.cols() == 0) {
        out.U = matrix_t::Identity(n, n);
        out.y_r = problem.y;
        out.X_r = problem.X * out.D_dagger;
        return out;
    }
    const matrix_t XD0 = problem.X * out.D_0;
    out.U = numerics::orthonormal_complement(XD0, n - out.D_0.cols(), tol.rank_rel);
    out.y_r = out.U.transpose() * problem.y;
    out.X_r = out.U.transpose() * (problem.X * out.D_dagger);
    return out;
}

FixedKnockoff build_fixed_knockoff(const matrix_t& X_r, const numerics::tolerances& tol)
{
    const index_t rows = X_r.rows();
    const index_t cols = X_r.cols();
    if (cols == 0 || rows < 2 * cols) {
        throw infeasible_dimension_error("build_fixed_knockoff: need rows >= 2 * cols, got " +
                                         std::to_string(rows) + " x " + std::to_string(cols));
    }
    if (!X_r.allFinite()) {
        throw invalid_argument_error("build_fixed_knockoff: non-finite entries");
    }

    FixedKnockoff out;
    out.column_norms = X_r.colwise().norm().transpose();
    if (out.column_norms.minCoeff() <= 0.0) {
        throw invalid_argument_error("build_fixed_knockoff: design has a zero column");
    }
    out.X = X_r * out.column_norms.cwiseInverse().asDiagonal();

    matrix_t sigma = out.X.transpose() * out.X;
    sigma = 0.5 * (sigma + sigma.transpose());
    const double lambda_min = numerics::min_eigenvalue_sym(sigma, tol);
    out.s = vector_t::Constant(cols, std::max(0.0, std::min(2.0 * lambda_min, 1.0)));

    const matrix_t sigma_inv = numerics::pseudo_inverse_sym(sigma, tol.rank_rel);
    const matrix_t sigma_inv_s = sigma_inv * out.s.asDiagonal();
    matrix_t core = out.s.asDiagonal() * (2.0 * matrix_t::Identity(cols, cols) - sigma_inv_s);
    core = 0.5 * (core + core.transpose());
    const matrix_t K = numerics::sym_sqrt_factor(core, tol);
    const matrix_t U_tilde = numerics::orthonormal_complement(out.X, cols, tol.rank_rel);

    out.X_tilde = out.X - out.X * sigma_inv_s;
    out.X_tilde.noalias() += U_tilde * K;
    return out;
}

std::pair<vector_t, vector_t> joint_path_statistics(const matrix_t& X, const matrix_t& X_tilde,
                                                    const vector_t& y, const LambdaGrid& grid,
                                                    const PathOptions& options)
{
    if (X.rows() != X_tilde.rows() || X.cols() != X_tilde.cols() || X.rows() != y.size()) {
        throw invalid_argument_error("joint_path_statistics: dimension mismatch");
    }
    const index_t cols = X.cols();
    const double rows = static_cast<double>(X.rows());
    matrix_t joint(X.rows(), 2 * cols);
    joint << X, X_tilde;

    matrix_t G = joint.transpose() * joint / rows;
    G = 0.5 * (G + G.transpose());
    const vector_t c = joint.transpose() * y / rows;
    const GramLassoPath solved = solve_gram_lasso_path(G, c, grid.values, options);
    const FeatureStats emergence = emergence_statistics(solved.coefs, grid.values);
    return {emergence.Z.head(cols), emergence.Z.tail(cols)};
}

BaselineResult baseline_knockoff_select(const StructuralProblem& problem, const LambdaGrid& grid,
                                        const BaselineOptions& options)
{
    const ReducedProblem reduced = reduce_generalized_lasso(problem);
    const FixedKnockoff knockoff = build_fixed_knockoff(reduced.X_r);
    auto [Z, Z_tilde] = joint_path_statistics(knockoff.X, knockoff.X_tilde, reduced.y_r, grid, options.path);

    BaselineResult out;
    out.Z = std::move(Z);
    out.Z_tilde = std::move(Z_tilde);
    if (options.statistic == BaselineStatistic::signed_max) {
        out.W = compute_w_statistics(out.Z, out.Z_tilde).W;
    } else {
        out.W = out.Z - out.Z_tilde;
    }
    const Selection selection = knockoff_select(out.W, options.q, options.plus);
    out.T_q = selection.T_q;
    out.S_hat = selection.S_hat;
    return out;
}

} // namespace skf
