#include <skf/errors.hpp>
#include <skf/experiments.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace skf {

namespace {

void require_feasible(index_t n, index_t m, index_t p, const char* where)
{
    if (n < m + p) {
        throw infeasible_dimension_error(std::string(where) + ": need n >= m + p, got n = " + std::to_string(n) +
                                         ", m + p = " + std::to_string(m + p));
    }
}

matrix_t take_rows(const matrix_t& A, const index_set& rows)
{
    matrix_t out(static_cast<index_t>(rows.size()), A.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<index_t>(i)) = A.row(rows[i]);
    return out;
}

vector_t take_rows(const vector_t& v, const index_set& rows)
{
    vector_t out(static_cast<index_t>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<index_t>(i)] = v[rows[i]];
    return out;
}

struct FoldSplit
{
    StructuralProblem train;
    matrix_t X_val;
    vector_t y_val;
};

FoldSplit split_fold(const StructuralProblem& problem, const std::vector<index_set>& folds, std::size_t f)
{
    index_set train_rows;
    for (std::size_t g = 0; g < folds.size(); ++g) {
        if (g != f) train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    FoldSplit out;
    out.train = StructuralProblem{take_rows(problem.X, train_rows), take_rows(problem.y, train_rows), problem.D};
    out.X_val = take_rows(problem.X, folds[f]);
    out.y_val = take_rows(problem.y, folds[f]);
    return out;
}

double validation_loss(const matrix_t& X_val, const vector_t& y_val, const vector_t& beta)
{
    return (y_val - X_val * beta).squaredNorm() / (2.0 * static_cast<double>(X_val.rows()));
}

} // namespace

PipelineResult run_split_pipeline(const StructuralProblem& problem, double nu, const PipelineOptions& options,
                                  const std::optional<index_set>& truth)
{
    problem.validate();
    require_feasible(problem.n(), problem.m(), problem.p(), "run_split_pipeline");

    const AugmentedSystem aug = build_augmented(problem, nu, options.tol);
    const SplitKnockoffCopy copy = make_split_knockoff(aug, options.eta, options.tol);
    const SplitPath path = solve_split_lasso_path(problem, nu, options.grid, options.path);

    PipelineResult out;
    out.nu = nu;
    out.s_value = copy.s.size() > 0 ? copy.s[0] : 0.0;
    out.C_nu_rank_deficient = copy.C_nu_rank_deficient;
    if (options.mode == StatMode::magnitude) {
        out.lambda_hat = options.lambda_hat
                             ? *options.lambda_hat
                             : select_lambda_hat(problem, nu, options.grid, options.lambda_cv_folds, options.path,
                                                 options.seed);
    }
    out.stats = significance_statistics(path, problem, aug, copy, options.mode, out.lambda_hat);
    out.w = compute_w_statistics(out.stats.Z, out.stats.Z_tilde);
    out.T_q = knockoff_threshold(out.w.W, options.q, options.plus);
    SelectionMetrics metrics = select_and_evaluate(out.w.W, out.T_q, truth, problem.m());
    out.S_hat = std::move(metrics.S_hat);
    out.fdp = metrics.fdp;
    out.power = metrics.power;
    return out;
}

vector_t log10_grid(double lo, double hi, double step)
{
    if (!(step > 0.0) || hi < lo) {
        throw invalid_argument_error("log10_grid: need lo <= hi and step > 0");
    }
    const auto count = static_cast<index_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    vector_t out(count);
    for (index_t k = 0; k < count; ++k) {
        const double e = std::round((lo + static_cast<double>(k) * step) * 1e9) / 1e9;
        out[k] = std::pow(10.0, e);
    }
    return out;
}

std::vector<index_set> make_folds(index_t n, index_t folds, std::uint64_t seed)
{
    if (folds < 2 || folds > n) {
        throw invalid_argument_error("make_folds: need 2 <= folds <= n");
    }
    std::vector<index_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), index_t{0});
    auto rng = make_stream(seed, 0, StreamPurpose::folds);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<index_set> out(static_cast<std::size_t>(folds));
    for (index_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i % folds)].push_back(order[static_cast<std::size_t>(i)]);
    for (auto& f : out) std::sort(f.begin(), f.end());
    return out;
}

index_t feasible_fold_count(index_t n, index_t m_plus_p, index_t requested)
{
    for (index_t k = std::max<index_t>(requested, 2); k <= n; ++k) {
        const index_t largest_fold = (n + k - 1) / k;
        if (n - largest_fold >= m_plus_p) return k;
    }
    throw infeasible_dimension_error("no fold count leaves n_train >= m + p (n = " + std::to_string(n) +
                                     ", m + p = " + std::to_string(m_plus_p) + ")");
}

CvResult cross_validate_nu(const StructuralProblem& problem, const vector_t& nu_values, index_t folds,
                           const PipelineOptions& options, std::uint64_t seed)
{
    problem.validate();
    if (folds < 2) {
        throw invalid_argument_error("cross_validate_nu: folds must be at least 2");
    }
    if (nu_values.size() == 0) {
        throw invalid_argument_error("cross_validate_nu: empty nu grid");
    }
    const index_t largest_fold = (problem.n() + folds - 1) / folds;
    if (problem.n() - largest_fold < problem.m() + problem.p()) {
        throw infeasible_dimension_error("cross_validate_nu: training folds have " +
                                         std::to_string(problem.n() - largest_fold) + " rows, need n_train >= m + p = " +
                                         std::to_string(problem.m() + problem.p()));
    }

    const auto fold_rows = make_folds(problem.n(), folds, seed);
    std::vector<FoldSplit> splits;
    splits.reserve(fold_rows.size());
    for (std::size_t f = 0; f < fold_rows.size(); ++f) splits.push_back(split_fold(problem, fold_rows, f));

    CvResult out;
    out.nu_values = nu_values;
    out.losses = vector_t::Zero(nu_values.size());
    out.folds = folds;
    for (index_t j = 0; j < nu_values.size(); ++j) {
        double total = 0.0;
        for (const FoldSplit& split : splits) {
            const PipelineResult fit = run_split_pipeline(split.train, nu_values[j], options);
            const vector_t beta =
                numerics::constrained_least_squares(split.train.X, split.train.y, problem.D, fit.S_hat);
            total += validation_loss(split.X_val, split.y_val, beta);
        }
        out.losses[j] = total / static_cast<double>(splits.size());
    }
    out.losses.minCoeff(&out.best);
    out.nu_star = nu_values[out.best];
    return out;
}

double select_lambda_hat(const StructuralProblem& problem, double nu, const LambdaGrid& grid, index_t folds,
                         const PathOptions& path_options, std::uint64_t seed)
{
    problem.validate();
    if (grid.size() == 0) {
        throw invalid_argument_error("select_lambda_hat: empty lambda grid");
    }
    const auto fold_rows = make_folds(problem.n(), folds, seed);
    vector_t losses = vector_t::Zero(grid.size());
    for (std::size_t f = 0; f < fold_rows.size(); ++f) {
        const FoldSplit split = split_fold(problem, fold_rows, f);
        const SplitPath path = solve_split_lasso_path(split.train, nu, grid, path_options);
        for (index_t k = 0; k < grid.size(); ++k) {
            losses[k] += validation_loss(split.X_val, split.y_val, path.beta_path[static_cast<std::size_t>(k)]);
        }
    }
    index_t best = 0;
    losses.minCoeff(&best);
    return grid.values[best];
}

} // namespace skf
