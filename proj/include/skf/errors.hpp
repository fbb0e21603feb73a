#pragma once

#include <stdexcept>
#include <string>

namespace skf {

// Failure categories. The CLI maps them onto process exit codes.
enum class error_kind {
    invalid_argument,
    infeasible_dimension,
    not_psd,
    invalid_s,
    rank_deficiency,
    convergence,
};

class error : public std::runtime_error
{
public:
    error(error_kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind)
    {}

    error_kind kind() const noexcept { return kind_; }

private:
    error_kind kind_;
};

class invalid_argument_error : public error
{
public:
    explicit invalid_argument_error(const std::string& what)
        : error(error_kind::invalid_argument, what)
    {}
};

class infeasible_dimension_error : public error
{
public:
    explicit infeasible_dimension_error(const std::string& what)
        : error(error_kind::infeasible_dimension, what)
    {}
};

class not_psd_error : public error
{
public:
    explicit not_psd_error(const std::string& what)
        : error(error_kind::not_psd, what)
    {}
};

class invalid_s_error : public error
{
public:
    explicit invalid_s_error(const std::string& what)
        : error(error_kind::invalid_s, what)
    {}
};

class rank_deficiency_error : public error
{
public:
    explicit rank_deficiency_error(const std::string& what)
        : error(error_kind::rank_deficiency, what)
    {}
};

/// Raised when a path solver cannot certify a grid point.
/// Carries the worst KKT residual seen at the failing point.
class convergence_error : public error
{
public:
    convergence_error(const std::string& what, double worst_residual)
        : error(error_kind::convergence, what), worst_residual_(worst_residual)
    {}

    double worst_residual() const noexcept { return worst_residual_; }

private:
    double worst_residual_;
};

} // namespace skf
