#include <skf/errors.hpp>
#include <skf/experiments.hpp>

#include <cmath>
#include <string>

namespace skf {

matrix_t make_D(DKind kind, index_t p)
{
    if (p < 2) {
        throw invalid_argument_error("make_D: p must be at least 2");
    }
    matrix_t diff = matrix_t::Zero(p - 1, p);
    for (index_t i = 0; i + 1 < p; ++i) {
        diff(i, i) = 1.0;
        diff(i, i + 1) = -1.0;
    }
    switch (kind) {
    case DKind::d1:
        return matrix_t::Identity(p, p);
    case DKind::d2:
        return diff;
    case DKind::d3: {
        matrix_t D(2 * p - 1, p);
        D << matrix_t::Identity(p, p), diff;
        return D;
    }
    case DKind::file:
        break;
    }
    throw invalid_argument_error("make_D: a file-backed D cannot be generated");
}

DKind parse_d_kind(const std::string& name)
{
    if (name == "D1" || name == "d1") return DKind::d1;
    if (name == "D2" || name == "d2") return DKind::d2;
    if (name == "D3" || name == "d3") return DKind::d3;
    if (name == "file") return DKind::file;
    throw invalid_argument_error("unknown D kind '" + name + "' (expected D1, D2, D3 or file)");
}

std::string to_string(DKind kind)
{
    switch (kind) {
    case DKind::d1: return "D1";
    case DKind::d2: return "D2";
    case DKind::d3: return "D3";
    case DKind::file: return "file";
    }
    return "?";
}

void SimConfig::validate() const
{
    auto fail = [](const std::string& what) { throw invalid_argument_error("config: " + what); };
    if (n < 1 || p < 2) fail("need n >= 1 and p >= 2");
    if (k < 0 || k > p) fail("k must lie in [0, p]");
    if (!(std::abs(c) < 1.0)) fail("c must satisfy |c| < 1");
    if (!(sigma >= 0.0) || !std::isfinite(sigma) || !std::isfinite(A)) fail("A and sigma must be finite, sigma >= 0");
    if (!(q > 0.0 && q < 1.0)) fail("q must lie in (0, 1)");
    if (!(eta > 0.0 && eta < 2.0)) fail("eta must lie in (0, 2)");
    if (replicates < 1) fail("replicates must be positive");
    if (!(nu_grid[2] > 0.0) || nu_grid[1] < nu_grid[0]) fail("nu_grid must be [lo, hi, step] with lo <= hi, step > 0");
    if (!(lambda_grid[2] > 0.0) || lambda_grid[0] < lambda_grid[1]) {
        fail("lambda_grid must be [log10 max, log10 min, step] with max >= min, step > 0");
    }
    if (nu_selection != "grid" && nu_selection != "cv") fail("nu_selection must be \"grid\" or \"cv\"");
    if (!(cv_nu_step > 0.0)) fail("cv_nu_step must be positive");
    if (cv_folds < 2) fail("cv_folds must be at least 2");
    if (threads < 0) fail("threads must be >= 0");
    if (D_kind == DKind::file && D_file.empty()) fail("D = \"file\" needs D_file");
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t replicate, StreamPurpose purpose)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32),
                      static_cast<std::uint32_t>(purpose)};
    return std::mt19937_64(seq);
}

vector_t make_beta_star(index_t p, index_t k, double A)
{
    vector_t beta = vector_t::Zero(p);
    for (index_t i = 1; i <= k && i <= p; ++i) {
        beta[i - 1] = (i % 3 == 1) ? -A : A;
    }
    return beta;
}

index_set support_of(const vector_t& v)
{
    index_set out;
    for (index_t i = 0; i < v.size(); ++i) {
        if (v[i] != 0.0) out.push_back(i);
    }
    return out;
}

Dataset gen_dataset(const SimConfig& config, const matrix_t& D, index_t replicate_index)
{
    const index_t n = config.n;
    const index_t p = config.p;
    if (D.cols() != p) {
        throw invalid_argument_error("gen_dataset: D must have p columns");
    }

    matrix_t sigma(p, p);
    for (index_t i = 0; i < p; ++i) {
        for (index_t j = 0; j < p; ++j) {
            sigma(i, j) = std::pow(config.c, static_cast<double>(std::abs(i - j)));
        }
    }
    const Eigen::LLT<matrix_t> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw not_psd_error("gen_dataset: covariance is not positive definite");
    }
    const matrix_t L = llt.matrixL();

    std::normal_distribution<double> normal(0.0, 1.0);
    auto design_rng = make_stream(config.seed, static_cast<std::uint64_t>(replicate_index), StreamPurpose::design);
    matrix_t Z(n, p);
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < p; ++j) Z(i, j) = normal(design_rng);
    }

    Dataset out;
    out.X = Z * L.transpose();
    out.beta_star = make_beta_star(p, config.k, config.A);
    out.gamma_star = D * out.beta_star;

    normal.reset();
    auto noise_rng = make_stream(config.seed, static_cast<std::uint64_t>(replicate_index), StreamPurpose::noise);
    out.epsilon.resize(n);
    for (index_t i = 0; i < n; ++i) out.epsilon[i] = normal(noise_rng);
    out.y = out.X * out.beta_star + config.sigma * out.epsilon;

    // Structural zeros are exact for integer-valued D; guard against rounding anyway.
    const double scale = std::max(1.0, std::abs(config.A)) * std::max(1.0, D.cwiseAbs().maxCoeff());
    for (index_t i = 0; i < out.gamma_star.size(); ++i) {
        if (std::abs(out.gamma_star[i]) <= 1e-12 * scale) out.gamma_star[i] = 0.0;
    }
    out.S_1 = support_of(out.gamma_star);
    return out;
}

} // namespace skf
