#pragma once

#include <stdexcept>
#include <string>

namespace causalbench {

// Base for every error this library throws intentionally.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad arguments or preconditions (dimensions, ranges, short series).
struct ParameterError : Error {
    using Error::Error;
};

// Non-finite state while integrating an ODE; message names the step index.
struct IntegrationBlowup : Error {
    using Error::Error;
};

// Non-finite training loss; message names the epoch.
struct TrainingDivergence : Error {
    using Error::Error;
};

// |W_out W_in| was identically zero off the diagonal.
struct DegenerateExtraction : Error {
    using Error::Error;
};

// Iterative solver exhausted its sweep budget; message carries the gap.
struct ConvergenceError : Error {
    using Error::Error;
};

// Ground truth all-positive or all-negative after exclusions.
struct UndefinedAuroc : Error {
    using Error::Error;
};

// Inclusion policy left no positives or no negatives.
struct UndefinedTruth : Error {
    using Error::Error;
};

// CSV/manifest could not be loaded into a usable dataset.
struct IngestionError : Error {
    using Error::Error;
};

// Method registry misuse (duplicate name, invalid file-backed scores).
struct RegistrationError : Error {
    using Error::Error;
};

// A report was requested from a ledger with missing cells.
struct IncompleteGrid : Error {
    using Error::Error;
};

// Experiment plan failed fail-fast validation.
struct PlanError : Error {
    using Error::Error;
};

}  // namespace causalbench
