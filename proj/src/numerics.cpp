#include <skf/numerics.hpp>
#include <skf/errors.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace skf {
namespace numerics {

double soft_threshold(double x, double t)
{
    if (!(t >= 0.0) || !std::isfinite(t)) {
        throw invalid_argument_error("soft_threshold: threshold must be finite and >= 0");
    }
    if (!std::isfinite(x)) {
        throw invalid_argument_error("soft_threshold: non-finite input");
    }
    const double shrunk = std::abs(x) - t;
    if (shrunk <= 0.0) return 0.0;
    return x > 0.0 ? shrunk : -shrunk;
}

vector_t soft_threshold(const vector_t& x, double t)
{
    vector_t out(x.size());
    for (index_t i = 0; i < x.size(); ++i) {
        out[i] = soft_threshold(x[i], t);
    }
    return out;
}

bool all_finite(const matrix_t& M)
{
    return M.allFinite();
}

double asymmetry(const matrix_t& M)
{
    if (M.rows() != M.cols()) return std::numeric_limits<double>::infinity();
    if (M.size() == 0) return 0.0;
    return (M - M.transpose()).cwiseAbs().maxCoeff();
}

matrix_t pseudo_inverse(const matrix_t& M, double rank_rel)
{
    if (M.size() == 0) {
        throw invalid_argument_error("pseudo_inverse: empty matrix");
    }
    if (!all_finite(M)) {
        throw invalid_argument_error("pseudo_inverse: non-finite entries");
    }
    Eigen::BDCSVD<matrix_t> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const vector_t& sv = svd.singularValues();
    const double cut = sv.size() ? rank_rel * sv[0] : 0.0;
    vector_t inv = vector_t::Zero(sv.size());
    for (index_t i = 0; i < sv.size(); ++i) {
        if (sv[i] > cut) inv[i] = 1.0 / sv[i];
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

matrix_t pseudo_inverse_sym(const matrix_t& M, double rank_rel, bool* rank_deficient)
{
    if (M.size() == 0 || M.rows() != M.cols()) {
        throw invalid_argument_error("pseudo_inverse_sym: expected a non-empty square matrix");
    }
    if (!all_finite(M)) {
        throw invalid_argument_error("pseudo_inverse_sym: non-finite entries");
    }
    Eigen::SelfAdjointEigenSolver<matrix_t> eig(M);
    const vector_t& ev = eig.eigenvalues();
    const double scale = ev.cwiseAbs().maxCoeff();
    const double cut = rank_rel * scale;
    vector_t inv = vector_t::Zero(ev.size());
    bool cut_any = false;
    for (index_t i = 0; i < ev.size(); ++i) {
        if (std::abs(ev[i]) > cut) {
            inv[i] = 1.0 / ev[i];
        } else {
            cut_any = true;
        }
    }
    if (rank_deficient) *rank_deficient = cut_any;
    const matrix_t& V = eig.eigenvectors();
    return V * inv.asDiagonal() * V.transpose();
}

index_t numerical_rank(const matrix_t& M, double rank_rel)
{
    if (M.size() == 0) return 0;
    Eigen::BDCSVD<matrix_t> svd(M);
    const vector_t& sv = svd.singularValues();
    const double cut = rank_rel * sv[0];
    return static_cast<index_t>((sv.array() > cut).count());
}

matrix_t orthonormal_complement(const matrix_t& B, index_t r, double rank_rel)
{
    const index_t n = B.rows();
    if (r < 0) {
        throw invalid_argument_error("orthonormal_complement: negative column count");
    }
    if (!all_finite(B)) {
        throw invalid_argument_error("orthonormal_complement: non-finite entries");
    }
    if (B.cols() == 0) {
        if (r > n) {
            throw infeasible_dimension_error("orthonormal_complement: requested more columns than rows");
        }
        return matrix_t::Identity(n, n).leftCols(r);
    }

    Eigen::ColPivHouseholderQR<matrix_t> qr(B);
    const index_t k = std::min(n, B.cols());
    const matrix_t R = qr.matrixR().topLeftCorner(k, B.cols()).triangularView<Eigen::Upper>();
    const index_t rank = numerical_rank(R, rank_rel);

    if (r > n - rank) {
        throw infeasible_dimension_error(
            "orthonormal_complement: need " + std::to_string(r) + " directions but only " +
            std::to_string(n - rank) + " are orthogonal to the column space (requires n >= m + p)");
    }
    matrix_t E = matrix_t::Zero(n, r);
    for (index_t j = 0; j < r; ++j) E(rank + j, j) = 1.0;
    return qr.householderQ() * E;
}

matrix_t null_space_basis(const matrix_t& A, double rank_rel)
{
    const index_t p = A.cols();
    if (A.rows() == 0) return matrix_t::Identity(p, p);
    Eigen::BDCSVD<matrix_t> svd(A, Eigen::ComputeFullV);
    const vector_t& sv = svd.singularValues();
    const double cut = sv.size() ? rank_rel * sv[0] : 0.0;
    index_t rank = 0;
    for (index_t i = 0; i < sv.size(); ++i) {
        if (sv[i] > cut) ++rank;
    }
    if (sv.size() && sv[0] == 0.0) rank = 0;
    return svd.matrixV().rightCols(p - rank);
}

namespace {

void require_symmetric(const matrix_t& M, const tolerances& tol, const char* who)
{
    if (M.size() == 0 || M.rows() != M.cols()) {
        throw invalid_argument_error(std::string(who) + ": expected a non-empty square matrix");
    }
    if (!all_finite(M)) {
        throw invalid_argument_error(std::string(who) + ": non-finite entries");
    }
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    if (asymmetry(M) > tol.symmetry * scale) {
        throw invalid_argument_error(std::string(who) + ": matrix is not symmetric");
    }
}

} // namespace

double min_eigenvalue_sym(const matrix_t& M, const tolerances& tol)
{
    require_symmetric(M, tol, "min_eigenvalue_sym");
    const matrix_t S = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<matrix_t> eig(S, Eigen::EigenvaluesOnly);
    return eig.eigenvalues()[0];
}

matrix_t sym_sqrt_factor(const matrix_t& M, const tolerances& tol)
{
    require_symmetric(M, tol, "sym_sqrt_factor");
    const matrix_t S = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<matrix_t> eig(S);
    vector_t ev = eig.eigenvalues();
    const double norm = ev.cwiseAbs().maxCoeff();
    if (ev[0] < -tol.psd_reject * norm) {
        throw not_psd_error("sym_sqrt_factor: smallest eigenvalue " + std::to_string(ev[0]) +
                            " is below -" + std::to_string(tol.psd_reject) + " * |M|");
    }
    for (index_t i = 0; i < ev.size(); ++i) {
        ev[i] = ev[i] > 0.0 ? std::sqrt(ev[i]) : 0.0;
    }
    return ev.asDiagonal() * eig.eigenvectors().transpose();
}

vector_t constrained_least_squares(const matrix_t& X, const vector_t& y, const matrix_t& D,
                                   const index_set& support, double rank_rel)
{
    if (X.rows() != y.size() || D.cols() != X.cols()) {
        throw invalid_argument_error("constrained_least_squares: dimension mismatch");
    }
    const index_t p = X.cols();
    const index_t m = D.rows();

    std::vector<bool> free(static_cast<std::size_t>(m), false);
    for (index_t i : support) {
        if (i < 0 || i >= m) {
            throw invalid_argument_error("constrained_least_squares: support index out of range");
        }
        free[static_cast<std::size_t>(i)] = true;
    }
    const index_t n_fixed = m - static_cast<index_t>(std::count(free.begin(), free.end(), true));
    matrix_t constraints(n_fixed, p);
    for (index_t i = 0, row = 0; i < m; ++i) {
        if (!free[static_cast<std::size_t>(i)]) constraints.row(row++) = D.row(i);
    }

    const matrix_t N = null_space_basis(constraints, rank_rel);
    if (N.cols() == 0) return vector_t::Zero(p);

    const matrix_t XN = X * N;
    Eigen::CompleteOrthogonalDecomposition<matrix_t> cod;
    if (XN.size() == 0 || XN.cwiseAbs().maxCoeff() == 0.0) return vector_t::Zero(p);
    cod.setThreshold(rank_rel);
    cod.compute(XN);
    const vector_t theta = cod.solve(y);
    return N * theta;
}

} // namespace numerics
} // namespace skf
