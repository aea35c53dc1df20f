#pragma once

#include <stdexcept>
#include <string>

namespace sorl {

/// Base class for domain errors raised by the library. Precondition
/// violations (bad indices, N = 0, ...) use std::invalid_argument instead.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SORL_DEFINE_ERROR(Name)            \
    class Name : public Error {            \
    public:                                \
        using Error::Error;                \
    }

SORL_DEFINE_ERROR(ConstructionFailed);
SORL_DEFINE_ERROR(NonFinite);
SORL_DEFINE_ERROR(SearchSpaceTooLarge);
SORL_DEFINE_ERROR(NegativeQuadratic);
SORL_DEFINE_ERROR(Infeasible);
SORL_DEFINE_ERROR(BadEpsilon);
SORL_DEFINE_ERROR(ConfigError);

#undef SORL_DEFINE_ERROR

}  // namespace sorl
