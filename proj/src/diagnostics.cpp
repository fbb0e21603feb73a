#include <skf/errors.hpp>
#include <skf/experiments.hpp>

#include <cmath>

namespace skf {

namespace {

matrix_t take_block(const matrix_t& H, const index_set& rows, const index_set& cols)
{
    matrix_t out(static_cast<index_t>(rows.size()), static_cast<index_t>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            out(static_cast<index_t>(i), static_cast<index_t>(j)) = H(rows[i], cols[j]);
        }
    }
    return out;
}

} // namespace

matrix_t h_nu(const matrix_t& X, const matrix_t& D, double nu)
{
    if (!(nu > 0.0) || !std::isfinite(nu)) {
        throw invalid_argument_error("h_nu: nu must be positive and finite");
    }
    if (X.cols() != D.cols()) {
        throw invalid_argument_error("h_nu: X and D must have the same column count");
    }
    const double n = static_cast<double>(X.rows());
    matrix_t M = X.transpose() * X / n + D.transpose() * D / nu;
    M = 0.5 * (M + M.transpose());
    const matrix_t M_pinv = numerics::pseudo_inverse_sym(M);
    matrix_t H = matrix_t::Identity(D.rows(), D.rows()) - D * M_pinv * D.transpose() / nu;
    return 0.5 * (H + H.transpose());
}

vector_t knockoff_noise(const SplitKnockoffCopy& copy, const vector_t& epsilon)
{
    const index_t n = epsilon.size();
    if (copy.A_gamma_tilde.rows() < n) {
        throw invalid_argument_error("knockoff_noise: epsilon longer than the copy's X block");
    }
    return copy.x_block(n).transpose() * epsilon / std::sqrt(static_cast<double>(n));
}

std::optional<double> sign_lemma_agreement(const vector_t& W, const vector_t& r, const vector_t& zeta,
                                           const index_set& S_1, index_t* count)
{
    if (W.size() != r.size() || W.size() != zeta.size()) {
        throw invalid_argument_error("sign_lemma_agreement: W, r and zeta differ in length");
    }
    index_t total = 0;
    index_t agree = 0;
    for (index_t i : complement(S_1, W.size())) {
        if (W[i] == 0.0) continue;
        ++total;
        const bool negative = W[i] < 0.0;
        const bool aligned = zeta[i] * r[i] > 0.0;
        if (negative == aligned) ++agree;
    }
    if (count) *count = total;
    if (total == 0) return std::nullopt;
    return static_cast<double>(agree) / static_cast<double>(total);
}

DiagnosticsReport diagnostics(const StructuralProblem& problem, double nu, const std::optional<index_set>& S_1,
                              const std::optional<SignCheckInput>& sign_check)
{
    problem.validate();
    DiagnosticsReport out;
    out.nu = nu;
    const matrix_t H = h_nu(problem.X, problem.D, nu);
    out.lambda_min_H = numerics::min_eigenvalue_sym(H);

    if (S_1 && !S_1->empty()) {
        for (index_t i : *S_1) {
            if (i < 0 || i >= problem.m()) {
                throw invalid_argument_error("diagnostics: S_1 index out of range");
            }
        }
        const index_set S_0 = complement(*S_1, problem.m());
        const matrix_t H11 = take_block(H, *S_1, *S_1);
        out.lambda_min_H11 = numerics::min_eigenvalue_sym(H11);
        if (S_0.empty()) {
            out.incoherence_norm = 0.0;
        } else {
            const matrix_t H01 = take_block(H, S_0, *S_1);
            // H01 inv(H11) = (inv(H11) H10)'
            const matrix_t product = numerics::pseudo_inverse_sym(H11) * H01.transpose();
            out.incoherence_norm = product.cwiseAbs().colwise().sum().maxCoeff();
        }
    }

    if (sign_check && S_1) {
        const AugmentedSystem aug = build_augmented(problem, nu);
        const SplitKnockoffCopy copy = make_split_knockoff(aug, sign_check->eta);
        const vector_t zeta = knockoff_noise(copy, sign_check->epsilon);
        out.sign_lemma_agreement = sign_lemma_agreement(sign_check->result.w.W, sign_check->result.stats.r, zeta,
                                                        *S_1, &out.sign_lemma_count);
    }
    return out;
}

} // namespace skf
