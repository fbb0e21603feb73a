#pragma once

#include <skf/numerics.hpp>

namespace skf {

/// Observed regression instance y = X beta + eps with structure gamma = D beta.
struct StructuralProblem
{
    matrix_t X;   // n x p
    vector_t y;   // n
    matrix_t D;   // m x p

    index_t n() const { return X.rows(); }
    index_t p() const { return X.cols(); }
    index_t m() const { return D.rows(); }

    /// Throws invalid_argument_error on inconsistent or non-finite data.
    void validate() const;
};

/**
 * Lifted design at relaxation level nu:
 *
 *   y_tilde = [y/sqrt(n); 0],  A_beta = [X/sqrt(n); D/sqrt(nu)],  A_gamma = [0; -I/sqrt(nu)].
 *
 * Gram blocks are stored alongside, with
 *   sigma_bb = X'X/n + D'D/nu,  sigma_bg = -D'/nu,
 *   C_nu = I/nu - (D/nu) sigma_bb^+ (D'/nu).
 */
struct AugmentedSystem
{
    double nu = 0.0;
    vector_t y_tilde;     // n+m
    matrix_t A_beta;      // (n+m) x p
    matrix_t A_gamma;     // (n+m) x m
    matrix_t sigma_bb;    // p x p
    matrix_t sigma_bg;    // p x m
    matrix_t sigma_bb_pinv;
    matrix_t C_nu;        // m x m
    bool sigma_bb_rank_deficient = false;

    index_t n() const { return y_tilde.size() - A_gamma.cols(); }
    index_t p() const { return A_beta.cols(); }
    index_t m() const { return A_gamma.cols(); }
};

/// Knockoff copy of A_gamma with its separation vector.
struct SplitKnockoffCopy
{
    matrix_t A_gamma_tilde;   // (n+m) x m; rows [0, n) form the X-side block
    vector_t s;
    double eta = 0.0;         // 0 when s was supplied directly
    bool C_nu_rank_deficient = false;

    /// First n rows of the copy (the block paired with X / sqrt(n)).
    matrix_t x_block(index_t n) const { return A_gamma_tilde.topRows(n); }
};

struct CopyReport
{
    double gram_residual = 0.0;      // |At'At - I/nu|
    double cross_residual = 0.0;     // |Ag'At - (I/nu - diag s)|
    double beta_residual = 0.0;      // |Ab'At + D'/nu|
    bool pass = false;
};

AugmentedSystem build_augmented(const StructuralProblem& problem, double nu,
                                const numerics::tolerances& tol = numerics::default_tolerances);

/// Constant s_i = min((2 - eta) * lambda_min(C_nu), 1/nu).
vector_t equicorrelated_s(const matrix_t& C_nu, double nu, double eta,
                          const numerics::tolerances& tol = numerics::default_tolerances);

SplitKnockoffCopy build_split_knockoff(const AugmentedSystem& aug, const vector_t& s,
                                       const numerics::tolerances& tol = numerics::default_tolerances);

/// equicorrelated_s followed by build_split_knockoff.
SplitKnockoffCopy make_split_knockoff(const AugmentedSystem& aug, double eta,
                                      const numerics::tolerances& tol = numerics::default_tolerances);

CopyReport verify_copy(const AugmentedSystem& aug, const SplitKnockoffCopy& copy,
                       double threshold = numerics::default_tolerances.identity);

} // namespace skf
