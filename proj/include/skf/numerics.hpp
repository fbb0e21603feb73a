#pragma once

#include <Eigen/Dense>
#include <vector>

namespace skf {

using matrix_t = Eigen::MatrixXd;
using vector_t = Eigen::VectorXd;
using index_t = Eigen::Index;

/// Sorted, duplicate-free, 0-based coordinate indices.
using index_set = std::vector<index_t>;

namespace numerics {

/// Numerical thresholds shared by every module.
struct tolerances
{
    double rank_rel = 1e-10;     // singular values below rank_rel * sigma_max are zero
    double identity = 1e-8;      // max-abs residual for algebraic identities
    double symmetry = 1e-10;     // max-abs asymmetry accepted as symmetric
    double psd_clamp = 1e-8;     // eigenvalues in [-psd_clamp*|M|, 0) are set to 0
    double psd_reject = 1e-6;    // eigenvalues below -psd_reject*|M| are an error
};

inline constexpr tolerances default_tolerances{};

double soft_threshold(double x, double t);
vector_t soft_threshold(const vector_t& x, double t);

/// Moore-Penrose inverse through an SVD with relative rank cut.
matrix_t pseudo_inverse(const matrix_t& M, double rank_rel = default_tolerances.rank_rel);

/// Pseudo-inverse of a symmetric matrix through its eigendecomposition.
/// Same rank rule as pseudo_inverse, applied to |eigenvalues|.
/// `rank_deficient`, when non-null, reports whether any eigenvalue was cut.
matrix_t pseudo_inverse_sym(const matrix_t& M,
                            double rank_rel = default_tolerances.rank_rel,
                            bool* rank_deficient = nullptr);

index_t numerical_rank(const matrix_t& M, double rank_rel = default_tolerances.rank_rel);

/**
 * Orthonormal basis of r directions orthogonal to col(B).
 *
 * B is factored by a column-pivoted Householder QR; its rank is read from
 * the singular values of R. The returned columns are Q(:, rank:rank+r), so
 * the result is a deterministic function of B.
 *
 * Throws infeasible_dimension_error when r > rows(B) - rank(B).
 */
matrix_t orthonormal_complement(const matrix_t& B, index_t r,
                                double rank_rel = default_tolerances.rank_rel);

/// Columns span ker(A); an A with no rows yields the identity.
matrix_t null_space_basis(const matrix_t& A, double rank_rel = default_tolerances.rank_rel);

double min_eigenvalue_sym(const matrix_t& M, const tolerances& tol = default_tolerances);

/// K with K^T K = M for PSD M. Negative eigenvalues within psd_reject are clamped.
matrix_t sym_sqrt_factor(const matrix_t& M, const tolerances& tol = default_tolerances);

/// argmin 1/2 |y - X b|^2 subject to (D b)_i = 0 for every i outside `support`.
/// A singular reduced system resolves to its minimum-norm solution.
vector_t constrained_least_squares(const matrix_t& X, const vector_t& y, const matrix_t& D,
                                   const index_set& support,
                                   double rank_rel = default_tolerances.rank_rel);

/// Largest absolute symmetric part violation, max |M - M^T|.
double asymmetry(const matrix_t& M);

bool all_finite(const matrix_t& M);

} // namespace numerics
} // namespace skf
