#pragma once

#include <skf/augment.hpp>
#include <skf/baseline.hpp>
#include <skf/filter.hpp>
#include <skf/path.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace skf {

enum class DKind { d1, d2, d3, file };

/// D1 = I_p, D2 = (p-1) x p forward difference, D3 = [I_p; D2].
matrix_t make_D(DKind kind, index_t p);

DKind parse_d_kind(const std::string& name);
std::string to_string(DKind kind);

struct SimConfig
{
    index_t n = 350;
    index_t p = 100;
    index_t k = 20;
    double A = 1.0;
    double c = 0.5;
    double sigma = 1.0;
    DKind D_kind = DKind::d2;
    std::string D_file;                           // used when D_kind == file
    double q = 0.2;
    double nu_grid[3] = {-1.0, 3.0, 0.2};         // log10 min, log10 max, step
    double lambda_grid[3] = {0.0, -6.0, 0.01};    // log10 max, log10 min, step
    index_t replicates = 20;
    std::uint64_t seed = 2021;
    double eta = 0.1;
    StatMode mode = StatMode::path_order;
    bool plus = false;

    // "grid": report every nu of nu_grid. "cv": per replicate, pick nu by
    // cross-validation on a log10 grid over [nu_grid[0], nu_grid[1]] with cv_nu_step.
    std::string nu_selection = "grid";
    double cv_nu_step = 0.4;
    index_t cv_folds = 5;
    bool baseline = true;                         // run the reduced-problem knockoff when rank D = m <= p
    index_t threads = 0;                          // 0: hardware concurrency

    void validate() const;
};

/// Tags for independent random substreams of one replicate.
enum class StreamPurpose : std::uint32_t { design = 1, noise = 2, folds = 3 };

/// Generator seeded from (seed, replicate, purpose); independent of scheduling.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t replicate, StreamPurpose purpose);

struct Dataset
{
    matrix_t X;
    vector_t beta_star;
    vector_t gamma_star;
    vector_t epsilon;
    vector_t y;
    index_set S_1;
};

/// beta*_i (1-based i <= k): -A when i = 1 mod 3, +A otherwise; 0 past k.
vector_t make_beta_star(index_t p, index_t k, double A);

/// Rows of X ~ N(0, Sigma), Sigma_ij = c^|i-j|; y = X beta* + sigma * eps.
Dataset gen_dataset(const SimConfig& config, const matrix_t& D, index_t replicate_index);

/// Nonzero coordinates of v.
index_set support_of(const vector_t& v);

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineOptions
{
    double q = 0.2;
    bool plus = false;
    StatMode mode = StatMode::path_order;
    std::optional<double> lambda_hat;     // magnitude mode; chosen by CV when absent
    double eta = 0.1;
    LambdaGrid grid = make_lambda_grid();
    PathOptions path;
    numerics::tolerances tol;
    index_t lambda_cv_folds = 5;
    std::uint64_t seed = 0;
};

struct PipelineResult
{
    double nu = 0.0;
    double s_value = 0.0;
    bool C_nu_rank_deficient = false;
    std::optional<double> lambda_hat;
    SignificanceStats stats;
    WStatistics w;
    double T_q = 0.0;
    index_set S_hat;
    std::optional<double> fdp;
    std::optional<double> power;
};

/// augment -> equi-correlated copy -> split path -> stage statistics -> filter.
PipelineResult run_split_pipeline(const StructuralProblem& problem, double nu, const PipelineOptions& options,
                                  const std::optional<index_set>& truth = std::nullopt);

// ---------------------------------------------------------------------------
// Cross-validation

/// Row folds from a seeded permutation; fold f holds positions f, f+K, f+2K, ...
std::vector<index_set> make_folds(index_t n, index_t folds, std::uint64_t seed);

/// Smallest fold count >= requested that leaves n_train >= m + p rows.
index_t feasible_fold_count(index_t n, index_t m_plus_p, index_t requested);

struct CvResult
{
    vector_t nu_values;
    vector_t losses;
    double nu_star = 0.0;
    index_t best = 0;
    index_t folds = 0;
};

/**
 * For each nu: on every fold run the split pipeline on the training rows, refit
 * beta by least squares on the training rows with supp(D beta) inside the
 * selection, and score (1 / 2 n_val) |y_val - X_val beta|^2. Returns the
 * fold-averaged losses and the minimizing nu.
 */
CvResult cross_validate_nu(const StructuralProblem& problem, const vector_t& nu_values, index_t folds,
                           const PipelineOptions& options, std::uint64_t seed = 0);

/// Grid value of lambda minimizing the K-fold prediction loss of beta(lambda).
double select_lambda_hat(const StructuralProblem& problem, double nu, const LambdaGrid& grid, index_t folds,
                         const PathOptions& path_options, std::uint64_t seed = 0);

/// 10^(lo), 10^(lo + step), ... up to 10^(hi).
vector_t log10_grid(double lo, double hi, double step);

// ---------------------------------------------------------------------------
// Diagnostics

struct DiagnosticsReport
{
    double nu = 0.0;
    double lambda_min_H = 0.0;                    // whole H_nu
    std::optional<double> lambda_min_H11;
    std::optional<double> incoherence_norm;       // |H01 inv(H11)|_inf
    std::optional<double> sign_lemma_agreement;
    index_t sign_lemma_count = 0;                 // nulls with W_i != 0
};

/// H_nu = I - D (X'X/n + D'D/nu)^+ D' / nu.
matrix_t h_nu(const matrix_t& X, const matrix_t& D, double nu);

/// zeta = At_1' eps / sqrt(n) for the copy rows paired with X.
vector_t knockoff_noise(const SplitKnockoffCopy& copy, const vector_t& epsilon);

/// Fraction of nulls with W_i != 0 where {W_i < 0} and {zeta_i r_i > 0} agree.
std::optional<double> sign_lemma_agreement(const vector_t& W, const vector_t& r, const vector_t& zeta,
                                           const index_set& S_1, index_t* count = nullptr);

struct SignCheckInput
{
    vector_t epsilon;
    PipelineResult result;
    double eta = 0.1;
};

DiagnosticsReport diagnostics(const StructuralProblem& problem, double nu,
                              const std::optional<index_set>& S_1,
                              const std::optional<SignCheckInput>& sign_check = std::nullopt);

// ---------------------------------------------------------------------------
// Simulation

struct ReplicateRecord
{
    index_t replicate = 0;
    std::string method;          // "split", "split_cv", "baseline"
    double nu = 0.0;
    double fdp = 0.0;
    double power = 0.0;
    index_t n_selected = 0;
    double T_q = 0.0;
    std::optional<double> cv_loss;
    vector_t W;                  // kept for split records
    vector_t W_s;
    index_set S_1;
};

struct NuRecord
{
    double nu = 0.0;
    double mean_fdr = 0.0;
    double sd_fdr = 0.0;
    double mean_power = 0.0;
    double sd_power = 0.0;
    std::optional<double> mean_cv_loss;
    index_t count = 0;
};

struct MethodRecord
{
    std::string method;
    double mean_fdr = 0.0;
    double sd_fdr = 0.0;
    double mean_power = 0.0;
    double sd_power = 0.0;
    std::optional<double> mean_log10_nu;
    index_t count = 0;
};

struct FailedReplicate
{
    index_t replicate = 0;
    std::string message;
};

struct RunSummary
{
    SimConfig config;
    index_t m = 0;
    index_t cv_folds_used = 0;
    std::vector<NuRecord> per_nu;
    std::vector<MethodRecord> methods;
    std::vector<ReplicateRecord> replicates;
    std::vector<FailedReplicate> failures;
};

/// Runs every replicate (in parallel when threads > 1) and aggregates.
/// Replicates that throw are excluded; more than 10% failures is an error.
RunSummary run_simulation(const SimConfig& config);

/// Mean and sample standard deviation (0 for fewer than two values).
std::pair<double, double> mean_sd(const std::vector<double>& values);

} // namespace skf
