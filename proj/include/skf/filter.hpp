#pragma once

#include <skf/numerics.hpp>

#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace skf {

struct WStatistics
{
    vector_t W;     // sign(Z - Zt) * max(Z, Zt)
    vector_t W_s;   // sign(Z - Zt) * Z
};

struct Selection
{
    double q = 0.2;
    bool plus = false;
    double T_q = std::numeric_limits<double>::infinity();
    index_set S_hat;
};

struct SelectionMetrics
{
    index_set S_hat;
    std::optional<double> fdp;
    std::optional<double> power;
};

WStatistics compute_w_statistics(const vector_t& Z, const vector_t& Z_tilde);

/**
 * Smallest t among the nonzero |W_i| with
 *
 *     (#{W_i <= -t} + plus) / max(1, #{W_i >= t}) <= q,
 *
 * or +inf when no candidate qualifies.
 */
double knockoff_threshold(const vector_t& W, double q, bool plus);

/// knockoff_threshold plus the selected set {i : W_i >= T_q}.
Selection knockoff_select(const vector_t& W, double q, bool plus);

/// fdp and power are filled only when `truth` (the nonnull set) is given.
SelectionMetrics select_and_evaluate(const vector_t& W, double T_q, const std::optional<index_set>& truth,
                                     index_t m);

/// M_t(V) = #{V_i >= t} / (1 + #{V_i <= -t}), counted over `nulls` when given.
struct MRatioPoint
{
    double t = 0.0;
    double m_w = 0.0;
    double m_ws = 0.0;
};

std::vector<MRatioPoint> ms_ratio_curve(const WStatistics& stats, const vector_t& thresholds,
                                        const std::optional<index_set>& nulls = std::nullopt);

/// Complement of `support` in {0, ..., m-1}.
index_set complement(const index_set& support, index_t m);

} // namespace skf
