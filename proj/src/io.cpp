#include <skf/errors.hpp>
#include <skf/io.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace skf {
namespace io {

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_number(const std::string& token, const std::string& context)
{
    const std::string t = trim(token);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
        throw invalid_argument_error(context + ": cannot parse number '" + t + "'");
    }
    return value;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw invalid_argument_error("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw invalid_argument_error("cannot write '" + path + "'");
    out << text;
}

} // namespace

std::string format_double(double value)
{
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (std::isnan(value)) return "nan";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    return std::string(buf, ptr);
}

matrix_t read_csv_matrix(const std::string& path)
{
    std::istringstream in(read_file(path));
    std::vector<std::vector<double>> rows;
    std::string line;
    index_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            row.push_back(parse_number(cell, path + ":" + std::to_string(line_no)));
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw invalid_argument_error(path + ":" + std::to_string(line_no) + ": ragged row");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw invalid_argument_error(path + ": empty matrix");
    matrix_t M(static_cast<index_t>(rows.size()), static_cast<index_t>(rows.front().size()));
    for (index_t i = 0; i < M.rows(); ++i) {
        for (index_t j = 0; j < M.cols(); ++j) M(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return M;
}

void write_csv_matrix(const std::string& path, const matrix_t& M)
{
    std::string text;
    for (index_t i = 0; i < M.rows(); ++i) {
        for (index_t j = 0; j < M.cols(); ++j) {
            if (j) text += ',';
            text += format_double(M(i, j));
        }
        text += '\n';
    }
    write_file(path, text);
}

vector_t read_csv_vector(const std::string& path)
{
    const matrix_t M = read_csv_matrix(path);
    if (M.cols() == 1) return M.col(0);
    if (M.rows() == 1) return M.row(0).transpose();
    throw invalid_argument_error(path + ": expected a single-column vector");
}

index_set read_index_csv(const std::string& path, index_t m)
{
    const vector_t v = read_csv_vector(path);
    index_set out;
    for (index_t i = 0; i < v.size(); ++i) {
        const double x = v[i];
        if (x != std::round(x) || x < 1 || x > static_cast<double>(m)) {
            throw invalid_argument_error(path + ": indices must be integers in [1, " + std::to_string(m) + "]");
        }
        out.push_back(static_cast<index_t>(x) - 1);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// flat TOML

namespace {

std::string strip_comment(const std::string& line)
{
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (ch == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (ch == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

toml_value parse_toml_value(const std::string& raw, const std::string& key)
{
    const std::string v = trim(raw);
    const std::string context = "config key '" + key + "'";
    if (v.empty()) throw invalid_argument_error(context + ": missing value");
    if (v == "true") return true;
    if (v == "false") return false;
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') throw invalid_argument_error(context + ": unterminated string");
        std::string out;
        for (std::size_t i = 1; i + 1 < v.size(); ++i) {
            if (v[i] == '\\' && i + 2 < v.size()) {
                const char e = v[++i];
                out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
            } else {
                out += v[i];
            }
        }
        return out;
    }
    if (v.front() == '[') {
        if (v.back() != ']') throw invalid_argument_error(context + ": unterminated array");
        std::vector<double> out;
        std::stringstream ss(v.substr(1, v.size() - 2));
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            if (trim(cell).empty()) continue;   // trailing comma
            out.push_back(parse_number(cell, context));
        }
        return out;
    }
    if (v.front() == '{') throw invalid_argument_error(context + ": inline tables are not supported");
    std::string digits;
    std::remove_copy(v.begin(), v.end(), std::back_inserter(digits), '_');
    if (digits == "inf" || digits == "+inf") return std::numeric_limits<double>::infinity();
    if (digits == "-inf") return -std::numeric_limits<double>::infinity();
    if (!digits.empty() && digits.front() == '+') digits.erase(0, 1);
    return parse_number(digits, context);
}

} // namespace

std::map<std::string, toml_value> parse_flat_toml(const std::string& text)
{
    std::map<std::string, toml_value> out;
    std::istringstream in(text);
    std::string line;
    index_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string body = trim(strip_comment(line));
        if (body.empty()) continue;
        const std::string where = "config line " + std::to_string(line_no);
        if (body.front() == '[') throw invalid_argument_error(where + ": tables are not supported");
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw invalid_argument_error(where + ": expected key = value");
        std::string key = trim(body.substr(0, eq));
        if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
        if (key.empty()) throw invalid_argument_error(where + ": empty key");
        if (out.count(key)) throw invalid_argument_error(where + ": duplicate key '" + key + "'");
        out.emplace(key, parse_toml_value(body.substr(eq + 1), key));
    }
    return out;
}

SimConfig parse_sim_config(const std::string& text)
{
    SimConfig cfg;
    for (const auto& [key, value] : parse_flat_toml(text)) {
        auto number = [&]() {
            if (const double* d = std::get_if<double>(&value)) return *d;
            throw invalid_argument_error("config key '" + key + "': expected a number");
        };
        auto count = [&]() {
            const double d = number();
            if (d != std::round(d) || d < 0 || d > 9.0e15) {
                throw invalid_argument_error("config key '" + key + "': expected a non-negative integer");
            }
            return static_cast<index_t>(d);
        };
        auto text_value = [&]() {
            if (const std::string* s = std::get_if<std::string>(&value)) return *s;
            throw invalid_argument_error("config key '" + key + "': expected a string");
        };
        auto flag = [&]() {
            if (const bool* b = std::get_if<bool>(&value)) return *b;
            throw invalid_argument_error("config key '" + key + "': expected true or false");
        };
        auto triple = [&](double* dst) {
            const auto* arr = std::get_if<std::vector<double>>(&value);
            if (!arr || arr->size() != 3) {
                throw invalid_argument_error("config key '" + key + "': expected an array of three numbers");
            }
            std::copy(arr->begin(), arr->end(), dst);
        };

        if (key == "n") cfg.n = count();
        else if (key == "p") cfg.p = count();
        else if (key == "k") cfg.k = count();
        else if (key == "A") cfg.A = number();
        else if (key == "c") cfg.c = number();
        else if (key == "sigma") cfg.sigma = number();
        else if (key == "D_kind") cfg.D_kind = parse_d_kind(text_value());
        else if (key == "D_file") cfg.D_file = text_value();
        else if (key == "q") cfg.q = number();
        else if (key == "nu_grid") triple(cfg.nu_grid);
        else if (key == "lambda_grid") triple(cfg.lambda_grid);
        else if (key == "replicates") cfg.replicates = count();
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(count());
        else if (key == "eta") cfg.eta = number();
        else if (key == "mode") {
            const std::string mode = text_value();
            if (mode == "path-order" || mode == "path_order" || mode == "path") cfg.mode = StatMode::path_order;
            else if (mode == "magnitude") cfg.mode = StatMode::magnitude;
            else throw invalid_argument_error("config key 'mode': expected \"path-order\" or \"magnitude\"");
        }
        else if (key == "plus") cfg.plus = flag();
        else if (key == "nu_selection") cfg.nu_selection = text_value();
        else if (key == "cv_nu_step") cfg.cv_nu_step = number();
        else if (key == "cv_folds") cfg.cv_folds = count();
        else if (key == "baseline") cfg.baseline = flag();
        else if (key == "threads") cfg.threads = count();
        else throw invalid_argument_error("config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

SimConfig load_sim_config(const std::string& path)
{
    SimConfig cfg = parse_sim_config(read_file(path));
    if (cfg.D_kind == DKind::file && std::filesystem::path(cfg.D_file).is_relative()) {
        cfg.D_file = (std::filesystem::path(path).parent_path() / cfg.D_file).string();
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const vector_t& v)
{
    nlohmann::json out = nlohmann::json::array();
    for (index_t i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

nlohmann::json indices_to_json(const index_set& s)
{
    nlohmann::json out = nlohmann::json::array();
    for (index_t i : s) out.push_back(i + 1);
    return out;
}

nlohmann::json number_or_inf(double value)
{
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    return value;
}

nlohmann::json pipeline_json(const PipelineResult& result, double q, bool plus)
{
    nlohmann::json j;
    j["nu"] = result.nu;
    j["q"] = q;
    j["plus"] = plus;
    j["T_q"] = number_or_inf(result.T_q);
    j["selected"] = indices_to_json(result.S_hat);
    j["W"] = to_json(result.w.W);
    j["Z"] = to_json(result.stats.Z);
    j["Z_tilde"] = to_json(result.stats.Z_tilde);
    j["mode"] = result.stats.mode == StatMode::magnitude ? "magnitude" : "path-order";
    if (result.lambda_hat) j["lambda_hat"] = *result.lambda_hat;
    j["s"] = result.s_value;
    if (result.fdp) j["fdr"] = *result.fdp;
    if (result.power) j["power"] = *result.power;
    return j;
}

namespace {

nlohmann::json config_json(const SimConfig& c)
{
    nlohmann::json j;
    j["n"] = c.n;
    j["p"] = c.p;
    j["k"] = c.k;
    j["A"] = c.A;
    j["c"] = c.c;
    j["sigma"] = c.sigma;
    j["D_kind"] = to_string(c.D_kind);
    if (c.D_kind == DKind::file) j["D_file"] = c.D_file;
    j["q"] = c.q;
    j["nu_grid"] = {c.nu_grid[0], c.nu_grid[1], c.nu_grid[2]};
    j["lambda_grid"] = {c.lambda_grid[0], c.lambda_grid[1], c.lambda_grid[2]};
    j["replicates"] = c.replicates;
    j["seed"] = c.seed;
    j["eta"] = c.eta;
    j["mode"] = c.mode == StatMode::magnitude ? "magnitude" : "path-order";
    j["plus"] = c.plus;
    j["nu_selection"] = c.nu_selection;
    j["cv_nu_step"] = c.cv_nu_step;
    j["cv_folds"] = c.cv_folds;
    j["baseline"] = c.baseline;
    return j;
}

} // namespace

nlohmann::json summary_json(const RunSummary& s)
{
    nlohmann::json j;
    j["config"] = config_json(s.config);
    j["m"] = s.m;
    if (s.cv_folds_used > 0) j["cv_folds_used"] = s.cv_folds_used;

    j["per_nu"] = nlohmann::json::array();
    for (const auto& r : s.per_nu) {
        nlohmann::json e{{"nu", r.nu},         {"mean_fdr", r.mean_fdr},     {"sd_fdr", r.sd_fdr},
                         {"mean_power", r.mean_power}, {"sd_power", r.sd_power}, {"count", r.count}};
        e["mean_cv_loss"] = r.mean_cv_loss ? nlohmann::json(*r.mean_cv_loss) : nlohmann::json(nullptr);
        j["per_nu"].push_back(e);
    }
    j["methods"] = nlohmann::json::array();
    for (const auto& r : s.methods) {
        nlohmann::json e{{"method", r.method},         {"mean_fdr", r.mean_fdr},     {"sd_fdr", r.sd_fdr},
                         {"mean_power", r.mean_power}, {"sd_power", r.sd_power}, {"count", r.count}};
        if (r.mean_log10_nu) e["mean_log10_nu"] = *r.mean_log10_nu;
        j["methods"].push_back(e);
    }
    j["replicates"] = nlohmann::json::array();
    for (const auto& r : s.replicates) {
        nlohmann::json e{{"replicate", r.replicate}, {"method", r.method},         {"nu", r.nu},
                         {"fdr", r.fdp},             {"power", r.power},           {"n_selected", r.n_selected},
                         {"T_q", number_or_inf(r.T_q)}, {"W", to_json(r.W)}};
        if (r.cv_loss) e["cv_loss"] = *r.cv_loss;
        j["replicates"].push_back(e);
    }
    j["failures"] = nlohmann::json::array();
    for (const auto& f : s.failures) {
        j["failures"].push_back({{"replicate", f.replicate}, {"message", f.message}});
    }
    return j;
}

nlohmann::json diagnostics_json(const DiagnosticsReport& r)
{
    nlohmann::json j;
    j["nu"] = r.nu;
    j["lambda_min_H"] = r.lambda_min_H;
    if (r.lambda_min_H11) j["lambda_min_H11"] = *r.lambda_min_H11;
    if (r.incoherence_norm) {
        j["incoherence_norm"] = *r.incoherence_norm;
        j["chi"] = 1.0 - *r.incoherence_norm;
    }
    if (r.sign_lemma_agreement) {
        j["sign_lemma_agreement"] = *r.sign_lemma_agreement;
        j["sign_lemma_count"] = r.sign_lemma_count;
    }
    return j;
}

nlohmann::json cv_json(const CvResult& cv)
{
    nlohmann::json j;
    j["nu_star"] = cv.nu_star;
    j["folds"] = cv.folds;
    j["nu"] = to_json(cv.nu_values);
    j["loss"] = to_json(cv.losses);
    return j;
}

void write_run_outputs(const RunSummary& s, const std::string& out_dir)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw invalid_argument_error("cannot create output directory '" + out_dir + "': " + ec.message());
    const std::filesystem::path dir(out_dir);
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };

    std::string summary = "nu,mean_fdr,sd_fdr,mean_power,sd_power,mean_cv_loss,count\n";
    for (const auto& r : s.per_nu) {
        summary += format_double(r.nu) + ',' + format_double(r.mean_fdr) + ',' + format_double(r.sd_fdr) + ',' +
                   format_double(r.mean_power) + ',' + format_double(r.sd_power) + ',' + opt(r.mean_cv_loss) + ',' +
                   std::to_string(r.count) + '\n';
    }
    write_file((dir / "summary.csv").string(), summary);

    std::string methods = "method,mean_fdr,sd_fdr,mean_power,sd_power,mean_log10_nu,count\n";
    for (const auto& r : s.methods) {
        methods += r.method + ',' + format_double(r.mean_fdr) + ',' + format_double(r.sd_fdr) + ',' +
                   format_double(r.mean_power) + ',' + format_double(r.sd_power) + ',' + opt(r.mean_log10_nu) + ',' +
                   std::to_string(r.count) + '\n';
    }
    write_file((dir / "methods.csv").string(), methods);

    std::string reps = "replicate,method,nu,fdr,power,n_selected,T_q,cv_loss\n";
    for (const auto& r : s.replicates) {
        reps += std::to_string(r.replicate) + ',' + r.method + ',' + format_double(r.nu) + ',' +
                format_double(r.fdp) + ',' + format_double(r.power) + ',' + std::to_string(r.n_selected) + ',' +
                format_double(r.T_q) + ',' + opt(r.cv_loss) + '\n';
    }
    write_file((dir / "replicates.csv").string(), reps);

    write_file((dir / "summary.json").string(), summary_json(s).dump(2) + "\n");
}

} // namespace io
} // namespace skf
