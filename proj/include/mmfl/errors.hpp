#pragma once
#include <stdexcept>
#include <string>

namespace mmfl {

// Configuration / precondition violations. The CLI maps these to exit code 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Failures at run time (I/O, malformed data). CLI exit code 1.
struct RuntimeFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidStats : ValidationError { using ValidationError::ValidationError; };
struct ExcludedConfiguration : ValidationError { using ValidationError::ValidationError; };
struct ShapeMismatch : ValidationError { using ValidationError::ValidationError; };
struct InvalidShape : ValidationError { using ValidationError::ValidationError; };
struct AllMissing : ValidationError { using ValidationError::ValidationError; };
struct InsufficientBatch : ValidationError { using ValidationError::ValidationError; };
struct InvalidKappa : ValidationError { using ValidationError::ValidationError; };
struct InvalidP : ValidationError { using ValidationError::ValidationError; };
struct EmptySelection : ValidationError { using ValidationError::ValidationError; };
struct InvalidM : ValidationError { using ValidationError::ValidationError; };
struct NameMismatch : ValidationError { using ValidationError::ValidationError; };
struct ZeroWeights : ValidationError { using ValidationError::ValidationError; };
struct DimensionMismatch : ValidationError { using ValidationError::ValidationError; };
struct EmptyInput : ValidationError { using ValidationError::ValidationError; };
struct EmptyClient : ValidationError { using ValidationError::ValidationError; };
struct EmptyTestSet : ValidationError { using ValidationError::ValidationError; };
struct Degenerate : ValidationError { using ValidationError::ValidationError; };
struct InvalidSize : ValidationError { using ValidationError::ValidationError; };

struct FormatError : RuntimeFailure { using RuntimeFailure::RuntimeFailure; };
struct IOFailure : RuntimeFailure { using RuntimeFailure::RuntimeFailure; };

} // namespace mmfl
