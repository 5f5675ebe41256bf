#pragma once

#include <stdexcept>
#include <string>

namespace klctl {

/// Invalid configuration or input data (bad schema, inconsistent parameters).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a meaningful result
/// (non-finite values, failed fits, diverging training).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The stability theorem's hypotheses (a > 0, g'(x*) < 0) do not hold, so no
/// verdict can be given. Distinct from an "unstable" verdict.
class AssumptionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace klctl
