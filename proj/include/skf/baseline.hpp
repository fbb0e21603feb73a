#pragma once

#include <skf/augment.hpp>
#include <skf/filter.hpp>
#include <skf/path.hpp>

namespace skf {

/**
 * Generalized LASSO rewritten as a plain sparse regression in gamma = D beta
 * for full-row-rank D:
 *
 *     U'y = U' X D^+ gamma + U' eps,
 *
 * with D_0 spanning ker(D) and U an orthonormal basis orthogonal to X D_0.
 */
struct ReducedProblem
{
    vector_t y_r;
    matrix_t X_r;
    matrix_t U;
    matrix_t D_dagger;
    matrix_t D_0;
};

ReducedProblem reduce_generalized_lasso(const StructuralProblem& problem,
                                        const numerics::tolerances& tol = numerics::default_tolerances);

/// Fixed-design equi-correlated knockoff of a column-normalized design.
struct FixedKnockoff
{
    matrix_t X;           // column-normalized input
    matrix_t X_tilde;     // X_tilde'X_tilde = X'X, X'X_tilde = X'X - diag(s)
    vector_t s;
    vector_t column_norms;
};

FixedKnockoff build_fixed_knockoff(const matrix_t& X_r,
                                   const numerics::tolerances& tol = numerics::default_tolerances);

enum class BaselineStatistic { signed_max, difference };

struct BaselineOptions
{
    double q = 0.2;
    bool plus = false;
    BaselineStatistic statistic = BaselineStatistic::signed_max;
    PathOptions path;
};

struct BaselineResult
{
    vector_t Z;
    vector_t Z_tilde;
    vector_t W;
    double T_q = 0.0;
    index_set S_hat;
};

/// Emergence lambdas of each column of X and of X_tilde on the joint LASSO path
///     min 1/(2 rows) |y - [X, X_tilde] b|^2 + lambda |b|_1.
std::pair<vector_t, vector_t> joint_path_statistics(const matrix_t& X, const matrix_t& X_tilde,
                                                    const vector_t& y, const LambdaGrid& grid,
                                                    const PathOptions& options = {});

BaselineResult baseline_knockoff_select(const StructuralProblem& problem, const LambdaGrid& grid,
                                        const BaselineOptions& options = {});

} // namespace skf
