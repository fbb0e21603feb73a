#include <skf/errors.hpp>
#include <skf/experiments.hpp>
#include <skf/io.hpp>

#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

namespace skf {

namespace {

struct ReplicateOutcome
{
    std::vector<ReplicateRecord> records;
    std::exception_ptr failure;
    std::string message;
};

ReplicateRecord make_record(index_t replicate, const std::string& method, double nu, const vector_t& W,
                            const vector_t& W_s, double T_q, const index_set& S_hat, const index_set& S_1)
{
    const SelectionMetrics metrics = select_and_evaluate(W, T_q, S_1, W.size());
    ReplicateRecord rec;
    rec.replicate = replicate;
    rec.method = method;
    rec.nu = nu;
    rec.fdp = *metrics.fdp;
    rec.power = *metrics.power;
    rec.n_selected = static_cast<index_t>(S_hat.size());
    rec.T_q = T_q;
    rec.W = W;
    rec.W_s = W_s;
    rec.S_1 = S_1;
    return rec;
}

bool baseline_applicable(const SimConfig& config, const matrix_t& D)
{
    const index_t m = D.rows();
    // the reduced design has n - p + m rows and needs at least 2 m of them
    return config.baseline && m <= config.p && config.n >= config.p + m && numerics::numerical_rank(D) == m;
}

} // namespace

std::pair<double, double> mean_sd(const std::vector<double>& values)
{
    if (values.empty()) return {0.0, 0.0};
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

RunSummary run_simulation(const SimConfig& config)
{
    config.validate();
    const matrix_t D = config.D_kind == DKind::file ? io::read_csv_matrix(config.D_file) : make_D(config.D_kind, config.p);
    if (D.cols() != config.p) {
        throw invalid_argument_error("run_simulation: D must have p columns");
    }
    const index_t m = D.rows();
    if (config.n < m + config.p) {
        throw infeasible_dimension_error("run_simulation: need n >= m + p, got n = " + std::to_string(config.n) +
                                         ", m + p = " + std::to_string(m + config.p));
    }

    const bool use_cv = config.nu_selection == "cv";
    const vector_t nus = use_cv ? log10_grid(config.nu_grid[0], config.nu_grid[1], config.cv_nu_step)
                                : log10_grid(config.nu_grid[0], config.nu_grid[1], config.nu_grid[2]);
    const index_t folds = use_cv ? feasible_fold_count(config.n, m + config.p, config.cv_folds) : config.cv_folds;
    const bool with_baseline = baseline_applicable(config, D);

    PipelineOptions base_options;
    base_options.q = config.q;
    base_options.plus = config.plus;
    base_options.mode = config.mode;
    base_options.eta = config.eta;
    base_options.grid = make_lambda_grid(config.lambda_grid[0], config.lambda_grid[1], config.lambda_grid[2]);
    base_options.lambda_cv_folds = folds;

    auto run_replicate = [&](index_t rep) {
        ReplicateOutcome outcome;
        try {
            const Dataset data = gen_dataset(config, D, rep);
            const StructuralProblem problem{data.X, data.y, D};
            PipelineOptions options = base_options;
            options.seed = make_stream(config.seed, static_cast<std::uint64_t>(rep), StreamPurpose::folds)();

            std::optional<CvResult> cv;
            if (use_cv) cv = cross_validate_nu(problem, nus, folds, options, options.seed);

            for (index_t j = 0; j < nus.size(); ++j) {
                const PipelineResult res = run_split_pipeline(problem, nus[j], options, data.S_1);
                ReplicateRecord rec = make_record(rep, "split", nus[j], res.w.W, res.w.W_s, res.T_q, res.S_hat, data.S_1);
                if (cv) rec.cv_loss = cv->losses[j];
                outcome.records.push_back(rec);
                if (cv && j == cv->best) {
                    rec.method = "split_cv";
                    outcome.records.push_back(std::move(rec));
                }
            }
            if (with_baseline) {
                BaselineOptions bopts;
                bopts.q = config.q;
                bopts.plus = config.plus;
                const BaselineResult res = baseline_knockoff_select(problem, base_options.grid, bopts);
                outcome.records.push_back(make_record(rep, "baseline", 0.0, res.W, vector_t(), res.T_q, res.S_hat,
                                                      data.S_1));
            }
        } catch (const std::exception& e) {
            outcome.records.clear();
            outcome.failure = std::current_exception();
            outcome.message = e.what();
        }
        return outcome;
    };

    std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(config.replicates));
    const index_t hw = std::max<index_t>(1, static_cast<index_t>(std::thread::hardware_concurrency()));
    const index_t workers = std::min<index_t>(config.threads > 0 ? config.threads : hw, config.replicates);
    if (workers <= 1) {
        for (index_t rep = 0; rep < config.replicates; ++rep) outcomes[static_cast<std::size_t>(rep)] = run_replicate(rep);
    } else {
        std::atomic<index_t> next{0};
        std::vector<std::thread> pool;
        for (index_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (index_t rep = next++; rep < config.replicates; rep = next++) {
                    outcomes[static_cast<std::size_t>(rep)] = run_replicate(rep);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    RunSummary summary;
    summary.config = config;
    summary.m = m;
    summary.cv_folds_used = use_cv ? folds : 0;
    std::exception_ptr first_failure;
    for (index_t rep = 0; rep < config.replicates; ++rep) {
        auto& outcome = outcomes[static_cast<std::size_t>(rep)];
        if (outcome.failure) {
            if (!first_failure) first_failure = outcome.failure;
            summary.failures.push_back({rep, outcome.message});
            continue;
        }
        for (auto& rec : outcome.records) summary.replicates.push_back(std::move(rec));
    }
    if (10 * static_cast<index_t>(summary.failures.size()) > config.replicates) {
        std::rethrow_exception(first_failure);
    }

    for (index_t j = 0; j < nus.size(); ++j) {
        std::vector<double> fdr, power, loss;
        for (const auto& rec : summary.replicates) {
            if (rec.method != "split" || rec.nu != nus[j]) continue;
            fdr.push_back(rec.fdp);
            power.push_back(rec.power);
            if (rec.cv_loss) loss.push_back(*rec.cv_loss);
        }
        NuRecord nr;
        nr.nu = nus[j];
        std::tie(nr.mean_fdr, nr.sd_fdr) = mean_sd(fdr);
        std::tie(nr.mean_power, nr.sd_power) = mean_sd(power);
        if (!loss.empty()) nr.mean_cv_loss = mean_sd(loss).first;
        nr.count = static_cast<index_t>(fdr.size());
        summary.per_nu.push_back(nr);
    }

    for (const char* method : {"split_cv", "baseline"}) {
        std::vector<double> fdr, power, log_nu;
        for (const auto& rec : summary.replicates) {
            if (rec.method != method) continue;
            fdr.push_back(rec.fdp);
            power.push_back(rec.power);
            if (rec.method == "split_cv") log_nu.push_back(std::log10(rec.nu));
        }
        if (fdr.empty()) continue;
        MethodRecord mr;
        mr.method = method;
        std::tie(mr.mean_fdr, mr.sd_fdr) = mean_sd(fdr);
        std::tie(mr.mean_power, mr.sd_power) = mean_sd(power);
        if (!log_nu.empty()) mr.mean_log10_nu = mean_sd(log_nu).first;
        mr.count = static_cast<index_t>(fdr.size());
        summary.methods.push_back(mr);
    }
    return summary;
}

} // namespace skf
