#include <skf/filter.hpp>
#include <skf/errors.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace skf {

WStatistics compute_w_statistics(const vector_t& Z, const vector_t& Z_tilde)
{
    if (Z.size() != Z_tilde.size()) {
        throw invalid_argument_error("compute_w_statistics: Z and Z_tilde differ in length");
    }
    const index_t m = Z.size();
    WStatistics out{vector_t::Zero(m), vector_t::Zero(m)};
    for (index_t i = 0; i < m; ++i) {
        const double z = Z[i];
        const double zt = Z_tilde[i];
        if (!(z >= 0.0) || !(zt >= 0.0) || !std::isfinite(z) || !std::isfinite(zt)) {
            throw invalid_argument_error("compute_w_statistics: statistics must be finite and >= 0");
        }
        if (z > zt) {
            out.W[i] = z;
            out.W_s[i] = z;
        } else if (z < zt) {
            out.W[i] = -zt;
            out.W_s[i] = -z;
        }
    }
    return out;
}

double knockoff_threshold(const vector_t& W, double q, bool plus)
{
    if (!(q > 0.0 && q < 1.0)) {
        throw invalid_argument_error("knockoff_threshold: q must lie in (0, 1)");
    }
    std::vector<double> candidates;
    candidates.reserve(static_cast<std::size_t>(W.size()));
    for (index_t i = 0; i < W.size(); ++i) {
        if (W[i] != 0.0) candidates.push_back(std::abs(W[i]));
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    for (double t : candidates) {
        index_t negatives = 0;
        index_t positives = 0;
        for (index_t i = 0; i < W.size(); ++i) {
            if (W[i] <= -t) ++negatives;
            if (W[i] >= t) ++positives;
        }
        const double ratio = (static_cast<double>(negatives) + (plus ? 1.0 : 0.0)) /
                             static_cast<double>(std::max<index_t>(1, positives));
        if (ratio <= q) return t;
    }
    return std::numeric_limits<double>::infinity();
}

Selection knockoff_select(const vector_t& W, double q, bool plus)
{
    Selection out;
    out.q = q;
    out.plus = plus;
    out.T_q = knockoff_threshold(W, q, plus);
    for (index_t i = 0; i < W.size(); ++i) {
        if (W[i] >= out.T_q) out.S_hat.push_back(i);
    }
    return out;
}

index_set complement(const index_set& support, index_t m)
{
    std::vector<bool> in(static_cast<std::size_t>(m), false);
    for (index_t i : support) {
        if (i >= 0 && i < m) in[static_cast<std::size_t>(i)] = true;
    }
    index_set out;
    for (index_t i = 0; i < m; ++i) {
        if (!in[static_cast<std::size_t>(i)]) out.push_back(i);
    }
    return out;
}

SelectionMetrics select_and_evaluate(const vector_t& W, double T_q, const std::optional<index_set>& truth,
                                     index_t m)
{
    if (W.size() != m) {
        throw invalid_argument_error("select_and_evaluate: W must have length m");
    }
    SelectionMetrics out;
    for (index_t i = 0; i < m; ++i) {
        if (W[i] >= T_q) out.S_hat.push_back(i);
    }
    if (!truth) return out;

    std::vector<bool> nonnull(static_cast<std::size_t>(m), false);
    for (index_t i : *truth) {
        if (i < 0 || i >= m) {
            throw invalid_argument_error("select_and_evaluate: truth index out of range");
        }
        nonnull[static_cast<std::size_t>(i)] = true;
    }
    index_t false_hits = 0;
    index_t true_hits = 0;
    for (index_t i : out.S_hat) {
        if (nonnull[static_cast<std::size_t>(i)]) {
            ++true_hits;
        } else {
            ++false_hits;
        }
    }
    const auto n_selected = static_cast<index_t>(out.S_hat.size());
    const auto n_nonnull = static_cast<index_t>(std::count(nonnull.begin(), nonnull.end(), true));
    out.fdp = static_cast<double>(false_hits) / static_cast<double>(std::max<index_t>(n_selected, 1));
    out.power = static_cast<double>(true_hits) / static_cast<double>(std::max<index_t>(n_nonnull, 1));
    return out;
}

std::vector<MRatioPoint> ms_ratio_curve(const WStatistics& stats, const vector_t& thresholds,
                                        const std::optional<index_set>& nulls)
{
    if (stats.W.size() != stats.W_s.size()) {
        throw invalid_argument_error("ms_ratio_curve: W and W_s differ in length");
    }
    index_set coords;
    if (nulls) {
        coords = *nulls;
    } else {
        for (index_t i = 0; i < stats.W.size(); ++i) coords.push_back(i);
    }

    auto ratio = [&](const vector_t& V, double t) {
        index_t up = 0;
        index_t down = 0;
        for (index_t i : coords) {
            if (V[i] >= t) ++up;
            if (V[i] <= -t) ++down;
        }
        return static_cast<double>(up) / (1.0 + static_cast<double>(down));
    };

    std::vector<MRatioPoint> curve;
    curve.reserve(static_cast<std::size_t>(thresholds.size()));
    for (index_t k = 0; k < thresholds.size(); ++k) {
        const double t = thresholds[k];
        if (!(t > 0.0)) {
            throw invalid_argument_error("ms_ratio_curve: thresholds must be positive");
        }
        curve.push_back({t, ratio(stats.W, t), ratio(stats.W_s, t)});
    }
    return curve;
}

} // namespace skf
