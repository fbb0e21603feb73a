#include "support.hpp"

#include <skf/baseline.hpp>
#include <skf/errors.hpp>

#include <doctest.h>

using namespace skf;
using namespace skf::testing;

namespace {

double max_abs(const matrix_t& M)
{
    return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("identity D leaves the problem untouched")
{
    rng_t rng(51);
    const StructuralProblem pb = random_problem(rng, 30, 5, matrix_t::Identity(5, 5));
    const ReducedProblem red = reduce_generalized_lasso(pb);
    CHECK(red.X_r == pb.X);
    CHECK(red.y_r == pb.y);
    CHECK(red.D_0.cols() == 0);
    CHECK(red.U == matrix_t::Identity(30, 30));
    CHECK(red.D_dagger == matrix_t::Identity(5, 5));
}

TEST_CASE("difference operator reduction")
{
    rng_t rng(52);
    const index_t p = 6;
    const StructuralProblem pb = random_problem(rng, 30, p, make_D(DKind::d2, p));
    const ReducedProblem red = reduce_generalized_lasso(pb);
    const index_t r = red.U.cols();
    CHECK(r == 30 - 1);
    CHECK(max_abs(red.U.transpose() * red.U - matrix_t::Identity(r, r)) <= 1e-8);
    CHECK(max_abs(red.U.transpose() * (pb.X * red.D_0)) <= 1e-8);
    CHECK(max_abs(pb.D * red.D_0) <= 1e-8);

    // beta = D^+ gamma + D_0 gamma_0 reproduces X beta
    const vector_t beta = random_vector(rng, p);
    const vector_t gamma = pb.D * beta;
    const vector_t gamma0 = red.D_0.transpose() * beta;
    CHECK(max_abs(pb.X * (red.D_dagger * gamma + red.D_0 * gamma0) - pb.X * beta) <= 1e-8);
}

TEST_CASE("reduction errors")
{
    rng_t rng(53);
    matrix_t D(3, 4);
    D << make_D(DKind::d2, 4).topRows(2), make_D(DKind::d2, 4).row(0);
    CHECK_THROWS_AS(reduce_generalized_lasso(random_problem(rng, 30, 4, D)), rank_deficiency_error);
    CHECK_THROWS_AS(reduce_generalized_lasso(random_problem(rng, 30, 4, make_D(DKind::d3, 4))),
                    rank_deficiency_error);
    CHECK_THROWS_AS(reduce_generalized_lasso(random_problem(rng, 8, 5, matrix_t::Identity(5, 5))),
                    infeasible_dimension_error);
}

TEST_CASE("fixed knockoff Gram identities")
{
    rng_t rng(54);
    const matrix_t X = random_matrix(rng, 60, 10);
    const FixedKnockoff ko = build_fixed_knockoff(X);
    const matrix_t S = ko.X.transpose() * ko.X;
    CHECK(max_abs(ko.X_tilde.transpose() * ko.X_tilde - S) <= 1e-8);
    matrix_t target = S;
    target.diagonal() -= ko.s;
    CHECK(max_abs(ko.X.transpose() * ko.X_tilde - target) <= 1e-8);
    CHECK(ko.s[0] == doctest::Approx(std::min(2.0 * numerics::min_eigenvalue_sym(S), 1.0)));
    for (index_t j = 0; j < 10; ++j) CHECK(ko.X.col(j).norm() == doctest::Approx(1.0));
}

TEST_CASE("orthogonal design gives an orthogonal knockoff")
{
    const matrix_t Q = Eigen::HouseholderQR<matrix_t>(matrix_t::Random(12, 12)).householderQ();
    const matrix_t X = Q.leftCols(4);
    const FixedKnockoff ko = build_fixed_knockoff(X);
    CHECK(ko.s[0] == doctest::Approx(1.0));
    CHECK(max_abs(ko.X_tilde.transpose() * ko.X) <= 1e-10);
}

TEST_CASE("fixed knockoff dimension gate")
{
    rng_t rng(55);
    CHECK_THROWS_AS(build_fixed_knockoff(random_matrix(rng, 10, 10)), infeasible_dimension_error);
}

TEST_CASE("zero response selects nothing")
{
    rng_t rng(56);
    StructuralProblem pb = random_problem(rng, 40, 6, matrix_t::Identity(6, 6));
    pb.y.setZero();
    const BaselineResult res = baseline_knockoff_select(pb, make_lambda_grid(0.0, -4.0, 0.05));
    CHECK(res.Z == vector_t::Zero(6));
    CHECK(res.Z_tilde == vector_t::Zero(6));
    CHECK(res.S_hat.empty());
}

TEST_CASE("swapping a null feature with its knockoff keeps |W|")
{
    rng_t rng(57);
    const index_t p = 6;
    matrix_t X = random_matrix(rng, 40, p);
    vector_t beta = vector_t::Zero(p);
    beta[0] = 2.0;
    beta[1] = -1.5;
    const vector_t y = X * beta + 0.5 * random_vector(rng, 40);
    const FixedKnockoff ko = build_fixed_knockoff(X);
    const LambdaGrid grid = make_lambda_grid(0.0, -4.0, 0.005);

    const auto [Z, Zt] = joint_path_statistics(ko.X, ko.X_tilde, y, grid);
    matrix_t Xs = ko.X, Xts = ko.X_tilde;
    Xs.col(4).swap(Xts.col(4));
    const auto [Z2, Zt2] = joint_path_statistics(Xs, Xts, y, grid);

    const vector_t W = compute_w_statistics(Z, Zt).W;
    const vector_t W2 = compute_w_statistics(Z2, Zt2).W;
    std::vector<double> a(W.data(), W.data() + p), b(W2.data(), W2.data() + p);
    for (auto& v : a) v = std::abs(v);
    for (auto& v : b) v = std::abs(v);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (index_t i = 0; i < p; ++i) {
        CHECK(a[static_cast<std::size_t>(i)] == doctest::Approx(b[static_cast<std::size_t>(i)]).epsilon(1e-6));
    }
    CHECK(W2[4] == doctest::Approx(-W[4]).epsilon(1e-6));
}

TEST_CASE("difference statistic toggle")
{
    rng_t rng(58);
    const StructuralProblem pb = random_problem(rng, 60, 6, matrix_t::Identity(6, 6));
    BaselineOptions opts;
    opts.statistic = BaselineStatistic::difference;
    const BaselineResult res = baseline_knockoff_select(pb, make_lambda_grid(0.0, -4.0, 0.05), opts);
    CHECK((res.W - (res.Z - res.Z_tilde)).cwiseAbs().maxCoeff() == 0.0);
}
