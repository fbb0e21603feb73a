#include <skf/augment.hpp>
#include <skf/errors.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace skf {

void StructuralProblem::validate() const
{
    if (X.rows() == 0 || X.cols() == 0) {
        throw invalid_argument_error("problem: X must be non-empty");
    }
    if (y.size() != X.rows()) {
        throw invalid_argument_error("problem: y has " + std::to_string(y.size()) +
                                     " entries but X has " + std::to_string(X.rows()) + " rows");
    }
    if (D.rows() == 0 || D.cols() != X.cols()) {
        throw invalid_argument_error("problem: D must have at least one row and " +
                                     std::to_string(X.cols()) + " columns");
    }
    if (!X.allFinite() || !y.allFinite() || !D.allFinite()) {
        throw invalid_argument_error("problem: non-finite entries in X, y or D");
    }
}

AugmentedSystem build_augmented(const StructuralProblem& problem, double nu,
                                const numerics::tolerances& tol)
{
    if (!(nu > 0.0) || !std::isfinite(nu)) {
        throw invalid_argument_error("build_augmented: nu must be positive and finite");
    }
    problem.validate();

    const index_t n = problem.n();
    const index_t p = problem.p();
    const index_t m = problem.m();
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    const double sqrt_nu = std::sqrt(nu);

    AugmentedSystem aug;
    aug.nu = nu;

    aug.y_tilde = vector_t::Zero(n + m);
    aug.y_tilde.head(n) = problem.y / sqrt_n;

    aug.A_beta.resize(n + m, p);
    aug.A_beta.topRows(n) = problem.X / sqrt_n;
    aug.A_beta.bottomRows(m) = problem.D / sqrt_nu;

    aug.A_gamma = matrix_t::Zero(n + m, m);
    aug.A_gamma.bottomRows(m).diagonal().setConstant(-1.0 / sqrt_nu);

    aug.sigma_bb = problem.X.transpose() * problem.X / static_cast<double>(n) +
                   problem.D.transpose() * problem.D / nu;
    aug.sigma_bb = 0.5 * (aug.sigma_bb + aug.sigma_bb.transpose());
    aug.sigma_bg = -problem.D.transpose() / nu;

    aug.sigma_bb_pinv =
        numerics::pseudo_inverse_sym(aug.sigma_bb, tol.rank_rel, &aug.sigma_bb_rank_deficient);

    const matrix_t D_over_nu = problem.D / nu;
    aug.C_nu = matrix_t::Identity(m, m) / nu - D_over_nu * aug.sigma_bb_pinv * D_over_nu.transpose();
    aug.C_nu = 0.5 * (aug.C_nu + aug.C_nu.transpose());
    return aug;
}

vector_t equicorrelated_s(const matrix_t& C_nu, double nu, double eta,
                          const numerics::tolerances& tol)
{
    if (!(nu > 0.0) || !std::isfinite(nu)) {
        throw invalid_argument_error("equicorrelated_s: nu must be positive and finite");
    }
    if (!(eta > 0.0 && eta < 2.0)) {
        throw invalid_argument_error("equicorrelated_s: eta must lie in (0, 2)");
    }
    if (C_nu.rows() != C_nu.cols() || C_nu.size() == 0) {
        throw invalid_argument_error("equicorrelated_s: C_nu must be square and non-empty");
    }
    if (numerics::asymmetry(C_nu) > tol.symmetry * std::max(1.0, C_nu.cwiseAbs().maxCoeff())) {
        throw invalid_argument_error("equicorrelated_s: C_nu is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<matrix_t> eig(0.5 * (C_nu + C_nu.transpose()),
                                                Eigen::EigenvaluesOnly);
    const vector_t& ev = eig.eigenvalues();
    const double lambda_min = ev[0];
    const double norm = ev.cwiseAbs().maxCoeff();
    if (lambda_min < -tol.psd_reject * norm) {
        throw not_psd_error("equicorrelated_s: C_nu has eigenvalue " + std::to_string(lambda_min));
    }
    const double value = std::max(0.0, std::min((2.0 - eta) * lambda_min, 1.0 / nu));
    return vector_t::Constant(C_nu.rows(), value);
}

SplitKnockoffCopy build_split_knockoff(const AugmentedSystem& aug, const vector_t& s,
                                       const numerics::tolerances& tol)
{
    const index_t n = aug.n();
    const index_t p = aug.p();
    const index_t m = aug.m();
    if (s.size() != m) {
        throw invalid_argument_error("build_split_knockoff: s must have length m");
    }
    if (n < m + p) {
        throw infeasible_dimension_error("build_split_knockoff: need n >= m + p, got n = " +
                                         std::to_string(n) + ", m + p = " + std::to_string(m + p));
    }
    if (!s.allFinite() || (s.size() && s.minCoeff() < 0.0)) {
        throw invalid_s_error("build_split_knockoff: s must be finite and non-negative");
    }

    SplitKnockoffCopy copy;
    copy.s = s;

    const matrix_t two_c_minus_s = 2.0 * aug.C_nu - matrix_t(s.asDiagonal());
    Eigen::SelfAdjointEigenSolver<matrix_t> eig(two_c_minus_s, Eigen::EigenvaluesOnly);
    const double scale = std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), s.cwiseAbs().maxCoeff());
    if (eig.eigenvalues()[0] < -tol.psd_reject * scale) {
        throw invalid_s_error("build_split_knockoff: 2 C_nu - diag(s) is indefinite (eigenvalue " +
                              std::to_string(eig.eigenvalues()[0]) + ")");
    }

    const matrix_t C_inv =
        numerics::pseudo_inverse_sym(aug.C_nu, tol.rank_rel, &copy.C_nu_rank_deficient);
    const matrix_t C_inv_s = C_inv * s.asDiagonal();

    matrix_t core = s.asDiagonal() * (2.0 * matrix_t::Identity(m, m) - C_inv_s);
    core = 0.5 * (core + core.transpose());
    const matrix_t K = numerics::sym_sqrt_factor(core, tol);

    matrix_t basis(n + m, p + m);
    basis << aug.A_beta, aug.A_gamma;
    const matrix_t U_tilde = numerics::orthonormal_complement(basis, m, tol.rank_rel);

    copy.A_gamma_tilde = aug.A_gamma - aug.A_gamma * C_inv_s;
    copy.A_gamma_tilde.noalias() += aug.A_beta * (aug.sigma_bb_pinv * aug.sigma_bg * C_inv_s);
    copy.A_gamma_tilde.noalias() += U_tilde * K;
    return copy;
}

SplitKnockoffCopy make_split_knockoff(const AugmentedSystem& aug, double eta,
                                      const numerics::tolerances& tol)
{
    SplitKnockoffCopy copy = build_split_knockoff(aug, equicorrelated_s(aug.C_nu, aug.nu, eta, tol), tol);
    copy.eta = eta;
    return copy;
}

CopyReport verify_copy(const AugmentedSystem& aug, const SplitKnockoffCopy& copy, double threshold)
{
    const index_t m = aug.m();
    const matrix_t& At = copy.A_gamma_tilde;
    const matrix_t eye_nu = matrix_t::Identity(m, m) / aug.nu;

    CopyReport report;
    report.gram_residual = (At.transpose() * At - eye_nu).cwiseAbs().maxCoeff();
    report.cross_residual =
        (aug.A_gamma.transpose() * At - (eye_nu - matrix_t(copy.s.asDiagonal()))).cwiseAbs().maxCoeff();
    report.beta_residual = (aug.A_beta.transpose() * At - aug.sigma_bg).cwiseAbs().maxCoeff();
    report.pass = report.gram_residual <= threshold && report.cross_residual <= threshold &&
                  report.beta_residual <= threshold;
    return report;
}

} // namespace skf
