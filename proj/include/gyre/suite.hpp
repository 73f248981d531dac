#pragma once
#include <limits>
#include <string>
#include <vector>

#include "gyre/env.hpp"

namespace gyre {

// Ordered environments E_1..E_n; the order is the training order when the
// ledger runs in sequential mode.
struct Chain {
    std::string name;
    std::vector<EnvSpec> specs;

    size_t n() const { return specs.size(); }
    void validate() const;  // ids unique, every spec valid
};

// Built-in chains:
//   "a" - 3 specs with increasingly complex wall patterns
//         (single-gap rings, multi-arc walls, multi-arc + spiral mix)
//   "b" - 7 specs layering one mechanic at a time: wall speed, spawn rate,
//         gap shrinkage, lane sectors, world rotation, control reversal.
//         Every mechanic active in spec i stays active in spec i+1.
// "b_costed" is chain "b" with cost_per_step = position index instead of 1.
Chain builtin_chain(const std::string& name);
std::vector<std::string> builtin_chain_names();

// Built-in single specs addressable by id (every spec of every builtin chain).
std::vector<EnvSpec> builtin_specs();
EnvSpec builtin_spec(const std::string& id);

// Tracks M >= sum(c_i * s_i). History is append-only for audit. In
// sequential mode (the default), once environment j has been charged, any
// charge to an index < j is rejected.
class BudgetLedger {
public:
    struct Entry {
        int env_index = 0;
        int64_t steps = 0;
        double cost_per_step = 0.0;
        double cumulative_cost = 0.0;  // total spent after this entry
        std::string kind;              // "train", "warmup", "eval", ...
    };

    BudgetLedger(double maximum, std::vector<double> cost_per_step, bool sequential = true);

    static BudgetLedger unlimited(size_t env_count);

    // Adds `steps` to s_i iff the result keeps sum(c_i s_i) <= M; otherwise
    // throws BudgetExceeded and changes nothing. Zero-step charges are no-ops.
    void charge(int env_index, int64_t steps, const std::string& kind = "train");

    bool would_exceed(int env_index, int64_t steps) const;

    // Largest step count currently affordable for env_index (0 if exhausted).
    int64_t affordable_steps(int env_index) const;

    double maximum() const { return maximum_; }
    double spent() const { return spent_; }
    double remaining() const { return maximum_ - spent_; }
    int64_t steps_taken(int env_index) const { return steps_[static_cast<size_t>(env_index)]; }
    double cost(int env_index) const { return costs_[static_cast<size_t>(env_index)]; }
    size_t env_count() const { return costs_.size(); }
    bool sequential() const { return sequential_; }
    int highest_charged_index() const { return highest_; }
    const std::vector<Entry>& history() const { return history_; }

    // Recomputes total spent cost from the history alone; used by audits.
    double replay_history_cost() const;

    // CSV: env_index,env_id?,steps,cost_per_step,cumulative,kind
    std::string audit_csv(const Chain* chain = nullptr) const;

private:
    double maximum_;
    std::vector<double> costs_;
    std::vector<int64_t> steps_;
    std::vector<Entry> history_;
    double spent_ = 0.0;
    bool sequential_;
    int highest_ = -1;
};

// Action superset across a chain. Unified index j maps to a native action
// where the environment has one, otherwise to Action::None.
struct UnifiedActionSet {
    int unified_count = 0;
    // mapping[env][unified_index] -> native action
    std::vector<std::vector<Action>> mapping;

    Action native(int env_index, int unified_index) const {
        return mapping[static_cast<size_t>(env_index)][static_cast<size_t>(unified_index)];
    }
};

UnifiedActionSet unify_actions(const Chain& chain);
// General form for heterogeneous action counts (native actions are the first
// `count` values of Action in declaration order; extra indices pad to None).
UnifiedActionSet unify_actions(const std::vector<int>& native_counts);

}  // namespace gyre
