#include "support.hpp"

#include <skf/errors.hpp>
#include <skf/path.hpp>

#include <doctest.h>

using namespace skf;
using namespace skf::testing;

namespace {

// Split path whose beta is frozen at beta_const on every grid point.
SplitPath frozen_path(const vector_t& beta_const, const vector_t& gamma, double nu, const LambdaGrid& grid)
{
    SplitPath path;
    path.nu = nu;
    path.grid = grid;
    for (index_t k = 0; k < grid.size(); ++k) {
        path.beta_path.push_back(beta_const);
        path.gamma_path.push_back(gamma);
    }
    path.kkt_residuals = vector_t::Zero(grid.size());
    return path;
}

} // namespace

TEST_CASE("make_lambda_grid")
{
    const LambdaGrid grid = make_lambda_grid(0.0, -6.0, 0.01);
    REQUIRE(grid.size() == 601);
    CHECK(grid.values[0] == 1.0);
    CHECK(grid.values[600] == doctest::Approx(1e-6).epsilon(1e-12));

    const LambdaGrid three = make_lambda_grid(0.0, -1.0, 0.5);
    REQUIRE(three.size() == 3);
    CHECK(three.values[1] == doctest::Approx(std::pow(10.0, -0.5)));
    CHECK(three.values[2] == doctest::Approx(0.1));
    CHECK(three.find(0.1) == 2);
    CHECK(three.find(0.2) == -1);

    CHECK_THROWS_AS(make_lambda_grid(-1.0, 0.0, 0.1), invalid_argument_error);
    CHECK_THROWS_AS(make_lambda_grid(0.0, -1.0, 0.0), invalid_argument_error);
}

TEST_CASE("split path above lambda_max is the ridge solution")
{
    rng_t rng(31);
    const StructuralProblem pb = random_problem(rng, 40, 6, make_D(DKind::d2, 6));
    const double nu = 1.5;
    const double n = 40.0;
    const matrix_t M = pb.X.transpose() * pb.X / n + pb.D.transpose() * pb.D / nu;
    const vector_t ridge = M.ldlt().solve(pb.X.transpose() * pb.y / n);
    const double lambda_max = (pb.D * ridge).cwiseAbs().maxCoeff() / nu;

    vector_t lambdas(2);
    lambdas << 1.5 * lambda_max, 1.01 * lambda_max;
    LambdaGrid grid;
    grid.values = lambdas;
    const SplitPath path = solve_split_lasso_path(pb, nu, grid);
    for (index_t k = 0; k < 2; ++k) {
        CHECK(path.gamma_path[static_cast<std::size_t>(k)].cwiseAbs().maxCoeff() == 0.0);
        CHECK((path.beta_path[static_cast<std::size_t>(k)] - ridge).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("zero response gives a zero path")
{
    rng_t rng(32);
    StructuralProblem pb = random_problem(rng, 20, 4, make_D(DKind::d3, 4));
    pb.y.setZero();
    const SplitPath path = solve_split_lasso_path(pb, 1.0, make_lambda_grid(0.0, -3.0, 0.1));
    for (std::size_t k = 0; k < path.gamma_path.size(); ++k) {
        CHECK(path.gamma_path[k].cwiseAbs().maxCoeff() == 0.0);
        CHECK(path.beta_path[k].cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("split path against a proximal-gradient oracle")
{
    rng_t rng(33);
    const StructuralProblem pb = random_problem(rng, 30, 5, matrix_t::Identity(5, 5));
    const double nu = 1.0;
    const LambdaGrid grid = make_lambda_grid(0.0, -3.0, 0.01);
    const SplitPath path = solve_split_lasso_path(pb, nu, grid);
    for (index_t k = 0; k < grid.size(); k += 30) {
        const auto [beta, gamma] = split_lasso_oracle(pb, nu, grid.values[k]);
        CHECK((path.gamma_path[static_cast<std::size_t>(k)] - gamma).cwiseAbs().maxCoeff() <= 1e-6);
        CHECK((path.beta_path[static_cast<std::size_t>(k)] - beta).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("every path point passes an independent KKT check")
{
    rng_t rng(34);
    for (int trial = 0; trial < 5; ++trial) {
        const DKind kind = static_cast<DKind>(trial % 3);
        const StructuralProblem pb = random_problem(rng, 40, 8, make_D(kind, 8));
        const double nu = std::pow(10.0, uniform_real(rng, -1.0, 2.0));
        const LambdaGrid grid = make_lambda_grid();
        const SplitPath path = solve_split_lasso_path(pb, nu, grid);
        double worst = 0.0;
        for (index_t k = 0; k < grid.size(); ++k) {
            worst = std::max(worst, joint_kkt_residual(pb, nu, grid.values[k], path.beta_path[static_cast<std::size_t>(k)],
                                              path.gamma_path[static_cast<std::size_t>(k)]));
        }
        CHECK(worst <= 1e-7);
        CHECK(path.kkt_residuals.maxCoeff() <= 1e-7);
    }
}

TEST_CASE("warm and cold starts agree")
{
    rng_t rng(35);
    const StructuralProblem pb = random_problem(rng, 40, 6, make_D(DKind::d2, 6));
    const LambdaGrid grid = make_lambda_grid(0.0, -4.0, 0.05);
    PathOptions cold;
    cold.warm_start = false;
    const SplitPath a = solve_split_lasso_path(pb, 3.0, grid);
    const SplitPath b = solve_split_lasso_path(pb, 3.0, grid, cold);
    for (std::size_t k = 0; k < a.gamma_path.size(); ++k) {
        CHECK((a.gamma_path[k] - b.gamma_path[k]).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("gram lasso handles a singular Gram matrix")
{
    // duplicated column: G singular, fitted values still unique
    rng_t rng(36);
    matrix_t A = random_matrix(rng, 30, 4);
    matrix_t J(30, 5);
    J << A, A.col(0);
    const vector_t y = random_vector(rng, 30);
    const matrix_t G = J.transpose() * J / 30.0;
    const vector_t c = J.transpose() * y / 30.0;
    const LambdaGrid grid = make_lambda_grid(0.0, -6.0, 0.05);
    const GramLassoPath path = solve_gram_lasso_path(G, c, grid.values);
    for (index_t k = 0; k < grid.size(); ++k) {
        CHECK(gram_lasso_kkt_residual(G, c, path.coefs[static_cast<std::size_t>(k)], grid.values[k]) <= 1e-7);
    }
}

TEST_CASE("convergence failure carries the residual")
{
    rng_t rng(37);
    const StructuralProblem pb = random_problem(rng, 30, 6, make_D(DKind::d2, 6));
    PathOptions opts;
    opts.max_sweeps = 1;
    opts.warm_start = false;
    opts.tol = 1e-300;
    try {
        solve_split_lasso_path(pb, 1.0, make_lambda_grid(0.0, -6.0, 0.5), opts);
        FAIL("expected a convergence error");
    } catch (const convergence_error& e) {
        CHECK(e.kind() == error_kind::convergence);
        CHECK(e.worst_residual() > 0.0);
    }
}

TEST_CASE("stage 1 emergence from a frozen beta")
{
    // D = I so D beta = (2, -1, 0)
    StructuralProblem pb;
    pb.X = matrix_t::Identity(3, 3);
    pb.y = vector_t::Zero(3);
    pb.D = matrix_t::Identity(3, 3);
    vector_t beta(3);
    beta << 2.0, -1.0, 0.0;
    const double nu = 0.5;
    const LambdaGrid grid = make_lambda_grid(1.0, -2.0, 0.001);
    const SplitPath path = frozen_path(beta, vector_t::Zero(3), nu, grid);
    const FeatureStats st = stage1_statistics(path, pb, StatMode::path_order);
    const double resolution = std::pow(10.0, 0.001);
    CHECK(st.Z[0] <= 4.0);
    CHECK(st.Z[0] >= 4.0 / resolution);
    CHECK(st.Z[1] <= 2.0);
    CHECK(st.Z[1] >= 2.0 / resolution);
    CHECK(st.Z[2] == 0.0);
    CHECK(st.r[0] == 1.0);
    CHECK(st.r[1] == -1.0);
    CHECK(st.r[2] == 0.0);

    // magnitude mode at the top of the path
    const FeatureStats top = stage1_statistics(path, pb, StatMode::magnitude, grid.values[0]);
    CHECK(top.Z == vector_t::Zero(3));
    CHECK_THROWS_AS(stage1_statistics(path, pb, StatMode::magnitude, 0.123456), invalid_argument_error);
    CHECK_THROWS_AS(stage1_statistics(path, pb, StatMode::magnitude), invalid_argument_error);
}

TEST_CASE("activation sets are nested along a frozen beta")
{
    rng_t rng(38);
    StructuralProblem pb;
    pb.X = matrix_t::Identity(6, 6);
    pb.y = vector_t::Zero(6);
    pb.D = make_D(DKind::d3, 6);
    const vector_t beta = random_vector(rng, 6);
    const LambdaGrid grid = make_lambda_grid(1.0, -3.0, 0.02);
    const SplitPath path = frozen_path(beta, vector_t::Zero(pb.m()), 0.7, grid);
    const FeatureStats st = stage1_statistics(path, pb, StatMode::path_order);
    const vector_t Db = pb.D * beta;
    for (index_t i = 0; i < pb.m(); ++i) {
        for (index_t k = 0; k < grid.size(); ++k) {
            const bool active = std::abs(Db[i]) > grid.values[k] * 0.7;
            const bool emerged = st.Z[i] >= grid.values[k] && st.Z[i] > 0.0;
            CHECK(active == emerged);
        }
    }
}

TEST_CASE("stage 2 from a frozen beta")
{
    // Build a copy with A_gamma_tilde' y_tilde = (0.5, -0.2) / nu * nu and no beta coupling.
    const double nu = 1.0;
    AugmentedSystem aug;
    aug.nu = nu;
    aug.y_tilde = vector_t::Zero(4);
    aug.y_tilde << 0.5, -0.2, 0.0, 0.0;
    aug.A_beta = matrix_t::Zero(4, 1);
    aug.A_gamma = matrix_t::Zero(4, 2);
    SplitKnockoffCopy copy;
    copy.A_gamma_tilde = matrix_t::Zero(4, 2);
    copy.A_gamma_tilde(0, 0) = 1.0;
    copy.A_gamma_tilde(1, 1) = 1.0;
    copy.s = vector_t::Zero(2);

    const LambdaGrid grid = make_lambda_grid(0.0, -3.0, 0.001);
    const SplitPath path = frozen_path(vector_t::Zero(1), vector_t::Zero(2), nu, grid);
    vector_t r(2);
    r << 1.0, -1.0;
    const KnockoffStats st = stage2_statistics(path, aug, copy, r, StatMode::path_order);
    const double resolution = std::pow(10.0, 0.001);
    CHECK(st.Z_prime[0] <= 0.5);
    CHECK(st.Z_prime[0] >= 0.5 / resolution);
    CHECK(st.Z_prime[1] <= 0.2);
    CHECK(st.Z_prime[1] >= 0.2 / resolution);
    CHECK(st.r_prime[0] == 1.0);
    CHECK(st.r_prime[1] == -1.0);
    CHECK(st.Z_tilde == st.Z_prime);

    vector_t r_flip(2);
    r_flip << 1.0, 1.0;
    const KnockoffStats truncated = stage2_statistics(path, aug, copy, r_flip, StatMode::path_order);
    CHECK(truncated.Z_tilde[0] == st.Z_prime[0]);
    CHECK(truncated.Z_tilde[1] == 0.0);
}

TEST_CASE("degenerate copy gives Z_tilde = Z")
{
    rng_t rng(39);
    const StructuralProblem pb = random_problem(rng, 40, 6, make_D(DKind::d2, 6));
    const double nu = 2.0;
    const AugmentedSystem aug = build_augmented(pb, nu);
    const SplitKnockoffCopy copy = build_split_knockoff(aug, vector_t::Zero(pb.m()));
    const LambdaGrid grid = make_lambda_grid();
    const SplitPath path = solve_split_lasso_path(pb, nu, grid);
    const SignificanceStats st = significance_statistics(path, pb, aug, copy, StatMode::path_order);
    CHECK(st.Z_tilde == st.Z);
    CHECK(st.r_prime == st.r);
}

TEST_CASE("stage closed forms against a generic proximal solver")
{
    rng_t rng(40);
    const StructuralProblem pb = random_problem(rng, 40, 5, make_D(DKind::d2, 5));
    const double nu = 1.3;
    const AugmentedSystem aug = build_augmented(pb, nu);
    const SplitKnockoffCopy copy = make_split_knockoff(aug, 0.1);
    const LambdaGrid grid = make_lambda_grid(0.0, -3.0, 0.5);
    const SplitPath path = solve_split_lasso_path(pb, nu, grid);
    const index_t m = pb.m();
    const std::vector<bool> all(static_cast<std::size_t>(m), true);
    for (index_t k = 0; k < grid.size(); ++k) {
        const double lambda = grid.values[k];
        const vector_t& beta = path.beta_path[static_cast<std::size_t>(k)];
        // stage 1: min 1/(2 nu) |D beta - g|^2 + lambda |g|_1
        const vector_t g1 = fista(matrix_t::Identity(m, m) / std::sqrt(nu), pb.D * beta / std::sqrt(nu), lambda, all);
        CHECK((g1 - numerics::soft_threshold(pb.D * beta, lambda * nu)).cwiseAbs().maxCoeff() <= 1e-8);
        // stage 2: min 1/2 |y~ - A_beta beta - At g|^2 + lambda |g|_1
        const vector_t g2 = fista(copy.A_gamma_tilde, aug.y_tilde - aug.A_beta * beta, lambda, all);
        const vector_t closed =
            numerics::soft_threshold(nu * copy.A_gamma_tilde.transpose() * (aug.y_tilde - aug.A_beta * beta), lambda * nu);
        CHECK((g2 - closed).cwiseAbs().maxCoeff() <= 1e-6);
    }
}
