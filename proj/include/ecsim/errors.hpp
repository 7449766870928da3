#pragma once

#include <stdexcept>
#include <string>

namespace ecsim {

// Operands disagree on mode count, or a mode index is out of range.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A parameter lies outside its mathematical domain.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// A requested state has zero norm (e.g. the odd superposition at zero amplitude).
struct SingularStateError : std::domain_error {
    using std::domain_error::domain_error;
};

// Conditioning on an outcome whose probability is zero (or numerically nonpositive).
struct DegenerateConditioningError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A user-supplied series cutoff fails the documented tail bound, or no admissible
// cutoff could be found.
struct TailBoundError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A workflow specification (sweep grid, scheme list, ...) is malformed.
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

} // namespace ecsim
