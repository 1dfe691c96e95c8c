#pragma once

#include <stdexcept>
#include <string>

namespace treegibbs {

/// Broad failure classes; the CLI maps them to exit codes.
enum class ErrorClass { Config, Numeric, Resource };

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), cls_(cls), kind_(kind) {}

    ErrorClass error_class() const noexcept { return cls_; }
    const std::string& kind() const noexcept { return kind_; }

private:
    ErrorClass cls_;
    std::string kind_;
};

#define TREEGIBBS_ERROR(Name, Cls)                                  \
    class Name : public Error {                                     \
    public:                                                         \
        explicit Name(const std::string& what)                      \
            : Error(ErrorClass::Cls, #Name, what) {}                \
    };

TREEGIBBS_ERROR(ConfigError, Config)
TREEGIBBS_ERROR(InvalidArgument, Config)
TREEGIBBS_ERROR(NonUnimodular, Config)
TREEGIBBS_ERROR(NoClosedGeodesic, Numeric)
TREEGIBBS_ERROR(ResourceLimit, Resource)
TREEGIBBS_ERROR(Diverges, Numeric)
TREEGIBBS_ERROR(NoPositiveSolution, Numeric)
TREEGIBBS_ERROR(NotConverged, Numeric)
TREEGIBBS_ERROR(ZeroShadow, Numeric)
TREEGIBBS_ERROR(Reducible, Numeric)
TREEGIBBS_ERROR(AlreadyExact, Numeric)
TREEGIBBS_ERROR(NoGeometricDrift, Numeric)
TREEGIBBS_ERROR(InconsistentExponent, Numeric)

#undef TREEGIBBS_ERROR

}  // namespace treegibbs
