#pragma once
#include <stdexcept>
#include <string>

namespace gyre {

// Invalid user-supplied specification (env config, chain config, CLI args).
struct SpecError : std::runtime_error {
    explicit SpecError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violation of an API precondition (e.g. stepping a dead environment).
struct ContractViolation : std::logic_error {
    explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

// A charge would push total spent cost above the ledger maximum M.
struct BudgetExceeded : std::runtime_error {
    explicit BudgetExceeded(const std::string& msg) : std::runtime_error(msg) {}
};

// Sequential-mode ledger rejects charges to an environment earlier in the chain.
struct SequentialOrderError : std::runtime_error {
    explicit SequentialOrderError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training was asked to sample a batch from a buffer that is too small.
struct InsufficientReplay : std::runtime_error {
    explicit InsufficientReplay(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint (de)serialization failures, each distinguishable.
struct CheckpointError : std::runtime_error {
    enum class Kind { VersionMismatch, ShapeMismatch, Truncated, BadMagic };
    Kind kind;
    CheckpointError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

}  // namespace gyre
