#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dbl {

/// Base class for all library errors. Carries the module that raised the
/// error and a stable error name so callers (and the CLI) can report which
/// invariant failed without parsing prose.
class Error : public std::runtime_error {
public:
    Error(std::string module, std::string name, const std::string& detail)
        : std::runtime_error(module + ": " + name + ": " + detail),
          module_(std::move(module)),
          name_(std::move(name)) {}

    const std::string& module() const noexcept { return module_; }
    const std::string& name() const noexcept { return name_; }

private:
    std::string module_;
    std::string name_;
};

#define DBL_ERROR_TYPE(Type)                                        \
    class Type : public Error {                                     \
    public:                                                         \
        Type(const std::string& module, const std::string& detail)  \
            : Error(module, #Type, detail) {}                       \
    }

DBL_ERROR_TYPE(ShapeMismatch);
DBL_ERROR_TYPE(SingularObservationCov);
DBL_ERROR_TYPE(SingularInnerBlock);
DBL_ERROR_TYPE(DegeneratePick);
DBL_ERROR_TYPE(MissingHistory);
DBL_ERROR_TYPE(UnsortedHorizons);
DBL_ERROR_TYPE(SingularViewGram);
DBL_ERROR_TYPE(SingularOmega);
DBL_ERROR_TYPE(NotComparable);
DBL_ERROR_TYPE(GridOutOfRange);
DBL_ERROR_TYPE(GammaOutOfRange);
DBL_ERROR_TYPE(IntervalMismatch);
DBL_ERROR_TYPE(BankruptcyUnderflow);
DBL_ERROR_TYPE(NonPositiveWealth);
DBL_ERROR_TYPE(NumericalFailure);
DBL_ERROR_TYPE(ValidationError);

#undef DBL_ERROR_TYPE

/// Raised when a matrix expected to be positive definite is not. Stores the
/// index of the failing Cholesky pivot when known (-1 otherwise).
class NotPositiveDefinite : public Error {
public:
    NotPositiveDefinite(const std::string& module, const std::string& detail, int pivot = -1)
        : Error(module, "NotPositiveDefinite", detail), pivot_(pivot) {}

    int pivot() const noexcept { return pivot_; }

private:
    int pivot_;
};

}  // namespace dbl
