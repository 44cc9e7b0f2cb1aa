#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace setnet {

/// Broad failure classes. The CLI maps each one to a distinct exit code.
enum class ErrorCategory {
    dimension,
    empty_reduction,
    numeric,
    format,
    config,
    budget,
    contract,
    degenerate,
};

std::string_view to_string(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

template <ErrorCategory C>
class CategorizedError : public Error {
public:
    explicit CategorizedError(const std::string& message) : Error(C, message) {}
};

using DimensionError = CategorizedError<ErrorCategory::dimension>;
using EmptyReductionError = CategorizedError<ErrorCategory::empty_reduction>;
using NumericError = CategorizedError<ErrorCategory::numeric>;
using FormatError = CategorizedError<ErrorCategory::format>;
using ConfigError = CategorizedError<ErrorCategory::config>;
using BudgetError = CategorizedError<ErrorCategory::budget>;
using ContractError = CategorizedError<ErrorCategory::contract>;
using DegenerateError = CategorizedError<ErrorCategory::degenerate>;

}  // namespace setnet
