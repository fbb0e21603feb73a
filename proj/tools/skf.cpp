#include <skf/errors.hpp>
#include <skf/experiments.hpp>
#include <skf/io.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

enum exit_code { ok = 0, bad_input = 2, infeasible = 3, no_convergence = 4 };

std::vector<double> parse_triple(const std::string& spec, const char* what)
{
    std::vector<double> out;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ':')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw skf::invalid_argument_error(std::string(what) + ": cannot parse '" + spec + "'");
        }
    }
    if (out.size() != 3) {
        throw skf::invalid_argument_error(std::string(what) + ": expected three values a:b:c, got '" + spec + "'");
    }
    return out;
}

void write_json(const std::string& path, const nlohmann::json& j)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw skf::invalid_argument_error("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

skf::StructuralProblem load_problem(const std::string& x, const std::string& y, const std::string& d)
{
    skf::StructuralProblem problem{skf::io::read_csv_matrix(x), skf::io::read_csv_vector(y),
                                   skf::io::read_csv_matrix(d)};
    problem.validate();
    return problem;
}

skf::StatMode parse_mode(const std::string& mode)
{
    if (mode == "path" || mode == "path-order") return skf::StatMode::path_order;
    if (mode == "magnitude") return skf::StatMode::magnitude;
    throw skf::invalid_argument_error("--mode must be 'path' or 'magnitude'");
}

int exit_for(skf::error_kind kind)
{
    switch (kind) {
    case skf::error_kind::infeasible_dimension: return infeasible;
    case skf::error_kind::convergence: return no_convergence;
    default: return bad_input;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Split knockoff selection of structural sparsity"};
    app.require_subcommand(1);

    // make-d
    auto* make_d = app.add_subcommand("make-d", "Write a built-in structure matrix D");
    std::string d_kind;
    long long d_p = 0;
    std::string d_out;
    make_d->add_option("--kind", d_kind, "d1 | d2 | d3")->required();
    make_d->add_option("--p", d_p, "number of features")->required();
    make_d->add_option("--out", d_out, "output CSV")->required();

    // select
    auto* select = app.add_subcommand("select", "Run split knockoff selection at one nu");
    std::string x_path, y_path, dm_path, out_path, mode = "path", lambda_spec = "0:-6:0.01", truth_path;
    double nu = 0.0, q = 0.2, eta = 0.1;
    bool plus = false;
    std::optional<double> lambda_hat;
    select->add_option("--x", x_path, "design CSV (n x p)")->required();
    select->add_option("--y", y_path, "response CSV (n x 1)")->required();
    select->add_option("--d", dm_path, "structure CSV (m x p)")->required();
    select->add_option("--nu", nu, "relaxation parameter")->required();
    select->add_option("--q", q, "target FDR")->capture_default_str();
    select->add_flag("--plus", plus, "use the knockoff+ threshold");
    select->add_option("--mode", mode, "path | magnitude")->capture_default_str();
    select->add_option("--lambda-grid", lambda_spec, "log10 max:log10 min:step")->capture_default_str();
    select->add_option("--lambda-hat", lambda_hat, "magnitude-mode lambda (default: cross-validated)");
    select->add_option("--eta", eta, "equi-correlation slack")->capture_default_str();
    select->add_option("--truth", truth_path, "1-based nonnull indices of D beta, for fdr/power");
    select->add_option("--out", out_path, "output JSON")->required();

    // cv
    auto* cv = app.add_subcommand("cv", "Cross-validate nu");
    std::string nu_spec = "-1:3:0.4";
    long long folds = 5;
    cv->add_option("--x", x_path, "design CSV")->required();
    cv->add_option("--y", y_path, "response CSV")->required();
    cv->add_option("--d", dm_path, "structure CSV")->required();
    cv->add_option("--nu-grid", nu_spec, "log10 min:log10 max:step")->capture_default_str();
    cv->add_option("--folds", folds, "fold count")->capture_default_str();
    cv->add_option("--q", q, "target FDR")->capture_default_str();
    cv->add_flag("--plus", plus, "use the knockoff+ threshold");
    cv->add_option("--mode", mode, "path | magnitude")->capture_default_str();
    cv->add_option("--lambda-grid", lambda_spec, "log10 max:log10 min:step")->capture_default_str();
    cv->add_option("--eta", eta, "equi-correlation slack")->capture_default_str();
    cv->add_option("--out", out_path, "output JSON")->required();

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo simulation from a TOML config");
    std::string config_path, out_dir;
    simulate->add_option("--config", config_path, "TOML config")->required();
    simulate->add_option("--out-dir", out_dir, "output directory")->required();

    // diag
    auto* diag = app.add_subcommand("diag", "H_nu diagnostics");
    std::string s1_path;
    diag->add_option("--x", x_path, "design CSV")->required();
    diag->add_option("--d", dm_path, "structure CSV")->required();
    diag->add_option("--nu", nu, "relaxation parameter")->required();
    diag->add_option("--s1", s1_path, "1-based support of D beta");
    diag->add_option("--out", out_path, "output JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : bad_input;
    }

    try {
        if (*make_d) {
            if (d_p < 2) throw skf::invalid_argument_error("--p must be at least 2");
            const skf::DKind kind = skf::parse_d_kind(d_kind);
            if (kind == skf::DKind::file) throw skf::invalid_argument_error("--kind must be d1, d2 or d3");
            skf::io::write_csv_matrix(d_out, skf::make_D(kind, static_cast<skf::index_t>(d_p)));
        } else if (*select) {
            const skf::StructuralProblem problem = load_problem(x_path, y_path, dm_path);
            const auto grid = parse_triple(lambda_spec, "--lambda-grid");
            skf::PipelineOptions options;
            options.q = q;
            options.plus = plus;
            options.mode = parse_mode(mode);
            options.lambda_hat = lambda_hat;
            options.eta = eta;
            options.grid = skf::make_lambda_grid(grid[0], grid[1], grid[2]);
            std::optional<skf::index_set> truth;
            if (!truth_path.empty()) truth = skf::io::read_index_csv(truth_path, problem.m());
            const skf::PipelineResult result = skf::run_split_pipeline(problem, nu, options, truth);
            write_json(out_path, skf::io::pipeline_json(result, q, plus));
        } else if (*cv) {
            const skf::StructuralProblem problem = load_problem(x_path, y_path, dm_path);
            const auto nus = parse_triple(nu_spec, "--nu-grid");
            const auto grid = parse_triple(lambda_spec, "--lambda-grid");
            skf::PipelineOptions options;
            options.q = q;
            options.plus = plus;
            options.mode = parse_mode(mode);
            options.eta = eta;
            options.grid = skf::make_lambda_grid(grid[0], grid[1], grid[2]);
            options.lambda_cv_folds = static_cast<skf::index_t>(folds);
            const skf::CvResult result = skf::cross_validate_nu(problem, skf::log10_grid(nus[0], nus[1], nus[2]),
                                                                static_cast<skf::index_t>(folds), options);
            nlohmann::json j = skf::io::cv_json(result);
            const skf::PipelineResult at_best = skf::run_split_pipeline(problem, result.nu_star, options);
            j["selection"] = skf::io::pipeline_json(at_best, q, plus);
            write_json(out_path, j);
        } else if (*simulate) {
            const skf::SimConfig config = skf::io::load_sim_config(config_path);
            const skf::RunSummary summary = skf::run_simulation(config);
            skf::io::write_run_outputs(summary, out_dir);
            for (const auto& f : summary.failures) {
                std::cerr << "replicate " << f.replicate << " failed: " << f.message << "\n";
            }
        } else if (*diag) {
            skf::StructuralProblem problem{skf::io::read_csv_matrix(x_path), skf::vector_t(), skf::io::read_csv_matrix(dm_path)};
            problem.y = skf::vector_t::Zero(problem.X.rows());
            std::optional<skf::index_set> s1;
            if (!s1_path.empty()) s1 = skf::io::read_index_csv(s1_path, problem.m());
            write_json(out_path, skf::io::diagnostics_json(skf::diagnostics(problem, nu, s1)));
        }
    } catch (const skf::error& e) {
        std::cerr << "skf: " << e.what() << "\n";
        return exit_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "skf: " << e.what() << "\n";
        return bad_input;
    }
    return ok;
}
