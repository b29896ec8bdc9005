#pragma once

#include "kqsd/types.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace kqsd {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid numeric or structural argument (bad metadata, infeasible parameters).
struct ParameterError : Error {
    using Error::Error;
};

// Coefficient evaluation produced a non-finite value; carries the offending point.
struct EvaluationError : Error {
    KineticState point;
    EvaluationError(const std::string& what, KineticState where)
        : Error(what), point(std::move(where)) {}
};

// Trajectory left the numerical guard box; carries the last finite state.
struct IntegratorError : Error {
    KineticState last_state;
    IntegratorError(const std::string& what, KineticState last)
        : Error(what), last_state(std::move(last)) {}
};

// Query at a point outside the domain of validity of the operation.
struct DomainError : Error {
    using Error::Error;
};

// Every particle exited in the same epoch.
struct ExtinctionError : Error {
    std::uint64_t epoch;
    std::uint64_t kill_count;
    ExtinctionError(std::uint64_t ep, std::uint64_t kills)
        : Error("particle system went extinct at epoch " + std::to_string(ep)),
          epoch(ep),
          kill_count(kills) {}
};

// Too few conditioned survivors for a usable estimate.
struct InsufficientSurvivorsError : Error {
    std::uint64_t survivors;
    std::uint64_t needed;
    InsufficientSurvivorsError(std::uint64_t got, std::uint64_t need = 30)
        : Error("only " + std::to_string(got) + " survivors, need at least " +
                std::to_string(need)),
          survivors(got),
          needed(need) {}
};

// Survival curve has no stable log-linear tail window.
struct NonExponentialError : Error {
    using Error::Error;
};

// Config rejected; lists every offending key path.
struct ConfigError : Error {
    std::vector<std::string> offending_keys;
    ConfigError(const std::string& what, std::vector<std::string> keys)
        : Error(what), offending_keys(std::move(keys)) {}
};

}  // namespace kqsd
