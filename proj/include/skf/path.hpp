#pragma once

#include <skf/augment.hpp>

#include <optional>
#include <vector>

namespace skf {

/// Descending geometric grid, values[k] = 10^(log10_max - k * step).
struct LambdaGrid
{
    double log10_max = 0.0;
    double log10_min = -6.0;
    double step = 0.01;
    vector_t values;

    index_t size() const { return values.size(); }

    /// Index of a grid value matching `lambda` to 1e-9 relative, or -1.
    index_t find(double lambda) const;
};

LambdaGrid make_lambda_grid(double log10_max = 0.0, double log10_min = -6.0, double step = 0.01);

struct PathOptions
{
    double tol = 1e-7;                   // KKT certificate tolerance
    std::size_t max_sweeps = 100000;     // coordinate sweeps per grid point
    bool warm_start = true;
};

/**
 * Regularization path of
 *
 *     min_x  1/2 x' G x - c' x + lambda |x|_1
 *
 * for G symmetric PSD, solved by cyclic coordinate descent with warm starts.
 * Once coordinate descent settles an active set the point is polished by an
 * exact solve on that set and accepted only if the KKT certificate holds:
 *
 *     |r_j - lambda sign(x_j)| <= tol   for x_j != 0,
 *     |r_j| <= lambda (1 + tol)         for x_j == 0,     r = c - G x.
 *
 * Throws convergence_error when a grid point cannot be certified.
 */
struct GramLassoPath
{
    std::vector<vector_t> coefs;
    vector_t kkt_residuals;
    std::size_t total_sweeps = 0;
};

GramLassoPath solve_gram_lasso_path(const matrix_t& G, const vector_t& c, const vector_t& lambdas,
                                    const PathOptions& options = {});

/// Largest violation of the certificate above at one point (absolute scale).
/// `inactive_excess` receives max(|r_j| - lambda, 0) over zero coordinates.
double gram_lasso_kkt_residual(const matrix_t& G, const vector_t& c, const vector_t& x,
                               double lambda, double* inactive_excess = nullptr);

/// Split LASSO path (beta(lambda), gamma(lambda)) at a fixed nu.
struct SplitPath
{
    double nu = 0.0;
    LambdaGrid grid;
    std::vector<vector_t> beta_path;
    std::vector<vector_t> gamma_path;
    vector_t kkt_residuals;
};

/**
 * Solves  min 1/(2n)|y - X b|^2 + 1/(2 nu)|D b - g|^2 + lambda |g|_1  on every grid value.
 *
 * beta is eliminated in closed form, b(g) = M^+ (X'y/n + D'g/nu) with M = X'X/n + D'D/nu,
 * leaving a LASSO in g with Gram H_nu/nu, H_nu = I - D M^+ D'/nu.
 */
SplitPath solve_split_lasso_path(const StructuralProblem& problem, double nu, const LambdaGrid& grid,
                                 const PathOptions& options = {});

/// Stationarity residual |-(X'X/n + D'D/nu) b + D'g/nu + X'y/n|_inf.
double split_stationarity_residual(const StructuralProblem& problem, double nu,
                                   const vector_t& beta, const vector_t& gamma);

enum class StatMode { path_order, magnitude };

/// Per-coordinate significance from the three stages.
struct SignificanceStats
{
    vector_t Z;
    vector_t r;
    vector_t Z_prime;
    vector_t r_prime;
    vector_t Z_tilde;
    StatMode mode = StatMode::path_order;
    std::optional<double> lambda_hat;
};

struct FeatureStats
{
    vector_t Z;
    vector_t r;
};

struct KnockoffStats
{
    vector_t Z_prime;
    vector_t r_prime;
    vector_t Z_tilde;
};

/// Relative margin below which a soft-thresholded coordinate counts as zero.
inline constexpr double activity_rel_tol = 1e-7;

/**
 * Entry-wise emergence on a descending grid: Z_i is the first (largest) lambda
 * at which coefs[k][i] != 0 and r_i its sign there; zero if never active.
 */
FeatureStats emergence_statistics(const std::vector<vector_t>& coefs, const vector_t& lambdas);

/// gamma(lambda) = soft_threshold(D beta(lambda), lambda nu).
FeatureStats stage1_statistics(const SplitPath& path, const StructuralProblem& problem, StatMode mode,
                               std::optional<double> lambda_hat = std::nullopt);

/// gamma~(lambda) = soft_threshold(nu At'(y~ - A_beta beta(lambda)), lambda nu), truncated on sign.
KnockoffStats stage2_statistics(const SplitPath& path, const AugmentedSystem& aug,
                                const SplitKnockoffCopy& copy, const vector_t& r, StatMode mode,
                                std::optional<double> lambda_hat = std::nullopt);

SignificanceStats significance_statistics(const SplitPath& path, const StructuralProblem& problem,
                                          const AugmentedSystem& aug, const SplitKnockoffCopy& copy,
                                          StatMode mode, std::optional<double> lambda_hat = std::nullopt);

} // namespace skf
