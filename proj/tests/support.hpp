#pragma once

#include <skf/augment.hpp>
#include <skf/experiments.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace skf::testing {

using rng_t = std::mt19937_64;

inline matrix_t random_matrix(rng_t& rng, index_t rows, index_t cols)
{
    std::normal_distribution<double> normal;
    matrix_t M(rows, cols);
    for (index_t i = 0; i < rows; ++i) {
        for (index_t j = 0; j < cols; ++j) M(i, j) = normal(rng);
    }
    return M;
}

inline vector_t random_vector(rng_t& rng, index_t n)
{
    return random_matrix(rng, n, 1).col(0);
}

inline index_t uniform_int(rng_t& rng, index_t lo, index_t hi)
{
    return std::uniform_int_distribution<index_t>(lo, hi)(rng);
}

inline double uniform_real(rng_t& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Sparse-signal regression instance y = X beta + noise with the given D.
inline StructuralProblem random_problem(rng_t& rng, index_t n, index_t p, const matrix_t& D, double noise = 1.0)
{
    StructuralProblem pb;
    pb.X = random_matrix(rng, n, p);
    vector_t beta = vector_t::Zero(p);
    for (index_t j = 0; j < p; ++j) {
        if (uniform_real(rng, 0.0, 1.0) < 0.4) beta[j] = uniform_real(rng, 0.5, 2.0) * (j % 2 ? 1.0 : -1.0);
    }
    pb.y = pb.X * beta + noise * random_vector(rng, n);
    pb.D = D;
    return pb;
}

/// Residuals of the three copy identities, computed from the raw blocks.
struct CopyResiduals
{
    double gram = 0.0;
    double cross = 0.0;
    double beta = 0.0;
};

inline CopyResiduals copy_residuals(const AugmentedSystem& aug, const matrix_t& D, const matrix_t& At,
                                    const vector_t& s)
{
    const index_t m = At.cols();
    const double nu = aug.nu;
    const matrix_t I = matrix_t::Identity(m, m);
    CopyResiduals out;
    out.gram = (At.transpose() * At - I / nu).cwiseAbs().maxCoeff();
    matrix_t target = I / nu;
    target.diagonal() -= s;
    out.cross = (aug.A_gamma.transpose() * At - target).cwiseAbs().maxCoeff();
    out.beta = (aug.A_beta.transpose() * At + D.transpose() / nu).cwiseAbs().maxCoeff();
    return out;
}

// Joint optimality of (beta, gamma), recomputed from scratch.
inline double joint_kkt_residual(const StructuralProblem& pb, double nu, double lambda, const vector_t& beta, const vector_t& gamma)
{
    const double n = static_cast<double>(pb.n());
    const vector_t grad_beta = pb.X.transpose() * (pb.X * beta - pb.y) / n + pb.D.transpose() * (pb.D * beta - gamma) / nu;
    const vector_t r = (pb.D * beta - gamma) / nu;   // minus the smooth gradient in gamma
    double worst = grad_beta.cwiseAbs().maxCoeff();
    for (index_t i = 0; i < gamma.size(); ++i) {
        if (gamma[i] != 0.0) {
            worst = std::max(worst, std::abs(r[i] - lambda * (gamma[i] > 0 ? 1.0 : -1.0)));
        } else {
            worst = std::max(worst, std::abs(r[i]) - lambda);
        }
    }
    return worst;
}

inline double soft(double x, double t)
{
    return x > t ? x - t : (x < -t ? x + t : 0.0);
}

/**
 * Accelerated proximal gradient (with adaptive restart) for
 *     min_x 1/2 |b - A x|^2 + lambda * sum_{i in penalized} |x_i|.
 * Stops when the fixed-point residual falls below `tol`.
 */
inline vector_t fista(const matrix_t& A, const vector_t& b, double lambda, const std::vector<bool>& penalized,
                      double tol = 1e-12, int max_iter = 2000000)
{
    const index_t k = A.cols();
    const matrix_t H = A.transpose() * A;
    const vector_t Atb = A.transpose() * b;
    const double L = Eigen::SelfAdjointEigenSolver<matrix_t>(H).eigenvalues().maxCoeff() * 1.0000001;
    vector_t x = vector_t::Zero(k);
    vector_t z = x;
    double t = 1.0;
    auto prox = [&](const vector_t& v) {
        vector_t out = v;
        for (index_t i = 0; i < k; ++i) {
            if (penalized[static_cast<std::size_t>(i)]) out[i] = soft(v[i], lambda / L);
        }
        return out;
    };
    for (int it = 0; it < max_iter; ++it) {
        const vector_t grad = H * z - Atb;
        const vector_t next = prox(z - grad / L);
        const double step = (next - x).cwiseAbs().maxCoeff();
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        if ((z - next).dot(next - x) > 0.0) {
            z = next;
            t = 1.0;
        } else {
            z = next + ((t - 1.0) / t_next) * (next - x);
            t = t_next;
        }
        x = next;
        if (step * L < tol && it > 10) break;
    }
    return x;
}

/// Joint (beta, gamma) split-LASSO solution through the lifted least-squares form.
inline std::pair<vector_t, vector_t> split_lasso_oracle(const StructuralProblem& pb, double nu, double lambda,
                                                        double tol = 1e-12)
{
    const index_t n = pb.n(), p = pb.p(), m = pb.m();
    matrix_t A = matrix_t::Zero(n + m, p + m);
    A.topLeftCorner(n, p) = pb.X / std::sqrt(static_cast<double>(n));
    A.bottomLeftCorner(m, p) = pb.D / std::sqrt(nu);
    A.bottomRightCorner(m, m) = -matrix_t::Identity(m, m) / std::sqrt(nu);
    vector_t b = vector_t::Zero(n + m);
    b.head(n) = pb.y / std::sqrt(static_cast<double>(n));
    std::vector<bool> penalized(static_cast<std::size_t>(p + m), false);
    for (index_t i = p; i < p + m; ++i) penalized[static_cast<std::size_t>(i)] = true;
    const vector_t x = fista(A, b, lambda, penalized, tol);
    return {x.head(p), x.tail(m)};
}

/// Threshold by direct definition: every candidate t is checked with set counting.
inline double brute_force_threshold(const vector_t& W, double q, bool plus)
{
    std::set<double> feasible;
    for (index_t i = 0; i < W.size(); ++i) {
        if (W[i] == 0.0) continue;
        const double t = std::abs(W[i]);
        std::set<index_t> neg, pos;
        for (index_t j = 0; j < W.size(); ++j) {
            if (W[j] <= -t) neg.insert(j);
            if (W[j] >= t) pos.insert(j);
        }
        const double num = static_cast<double>(neg.size()) + (plus ? 1.0 : 0.0);
        const double den = static_cast<double>(std::max<std::size_t>(pos.size(), 1));
        if (num / den <= q) feasible.insert(t);
    }
    return feasible.empty() ? std::numeric_limits<double>::infinity() : *feasible.begin();
}

} // namespace skf::testing
