#include "gyre/suite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace gyre {

void Chain::validate() const {
    if (name.empty()) throw SpecError("chain: name must be non-empty");
    if (specs.empty()) throw SpecError("chain '" + name + "': needs at least one spec");
    std::set<std::string> ids;
    for (const EnvSpec& s : specs) {
        s.validate();
        if (!ids.insert(s.id).second)
            throw SpecError("chain '" + name + "': duplicate env id '" + s.id + "'");
    }
}

namespace {

EnvSpec make_spec(std::string id, PatternGenerator gen, double speed, int64_t interval,
                  double gap, double ramp) {
    EnvSpec s;
    s.id = std::move(id);
    s.generator = gen;
    s.base_wall_speed = speed;
    s.base_spawn_interval = interval;
    s.gap_width = gap;
    s.difficulty_ramp = ramp;
    return s;
}

Chain chain_a() {
    Chain c;
    c.name = "a";
    c.specs.push_back(make_spec("a1", PatternGenerator::SingleGapRing, 0.25, 60, 1.10, 0.040));
    c.specs.push_back(make_spec("a2", PatternGenerator::MultiWall, 0.27, 55, 1.00, 0.050));
    EnvSpec a3 = make_spec("a3", PatternGenerator::Composite, 0.29, 50, 0.95, 0.060);
    a3.components = {PatternGenerator::MultiWall, PatternGenerator::Spiral};
    c.specs.push_back(a3);
    return c;
}

// Chain b layers one mechanic per position on top of an easy single-gap base:
// faster walls, faster spawns, narrower gap, lane sectors, world rotation,
// control reversal. Parameters are sized so the entry specs train quickly at
// desk scale while each successor is measurably harder.
Chain chain_b(bool costed) {
    Chain c;
    c.name = costed ? "b_costed" : "b";
    c.specs.push_back(make_spec("b1", PatternGenerator::SingleGapRing, 0.22, 70, 1.40, 0.030));
    c.specs.push_back(make_spec("b2", PatternGenerator::SingleGapRing, 0.30, 70, 1.40, 0.035));
    c.specs.push_back(make_spec("b3", PatternGenerator::SingleGapRing, 0.30, 52, 1.40, 0.040));
    c.specs.push_back(make_spec("b4", PatternGenerator::SingleGapRing, 0.32, 52, 0.95, 0.045));
    EnvSpec b5 = make_spec("b5", PatternGenerator::Composite, 0.34, 48, 0.95, 0.050);
    b5.components = {PatternGenerator::SingleGapRing, PatternGenerator::Lanes};
    c.specs.push_back(b5);
    EnvSpec b6 = b5;
    b6.id = "b6";
    b6.base_wall_speed = 0.36;
    b6.base_spawn_interval = 46;
    b6.difficulty_ramp = 0.055;
    b6.rotation_drift = 0.004;
    c.specs.push_back(b6);
    EnvSpec b7 = b6;
    b7.id = "b7";
    b7.base_wall_speed = 0.38;
    b7.base_spawn_interval = 44;
    b7.difficulty_ramp = 0.060;
    b7.reversal_period = 300;
    c.specs.push_back(b7);
    if (costed) {
        for (size_t i = 0; i < c.specs.size(); ++i) {
            c.specs[i].id += "c";
            c.specs[i].cost_per_step = static_cast<double>(i + 1);
        }
    }
    return c;
}

}  // namespace

Chain builtin_chain(const std::string& name) {
    if (name == "a") return chain_a();
    if (name == "b") return chain_b(false);
    if (name == "b_costed") return chain_b(true);
    throw SpecError("unknown builtin chain '" + name + "' (available: a, b, b_costed)");
}

std::vector<std::string> builtin_chain_names() { return {"a", "b", "b_costed"}; }

std::vector<EnvSpec> builtin_specs() {
    std::vector<EnvSpec> all;
    for (const auto& name : {"a", "b"}) {
        Chain c = builtin_chain(name);
        all.insert(all.end(), c.specs.begin(), c.specs.end());
    }
    std::sort(all.begin(), all.end(),
              [](const EnvSpec& x, const EnvSpec& y) { return x.id < y.id; });
    return all;
}

EnvSpec builtin_spec(const std::string& id) {
    for (const EnvSpec& s : builtin_specs())
        if (s.id == id) return s;
    throw SpecError("unknown builtin env id '" + id + "'");
}

BudgetLedger::BudgetLedger(double maximum, std::vector<double> cost_per_step, bool sequential)
    : maximum_(maximum), costs_(std::move(cost_per_step)), sequential_(sequential) {
    if (!(maximum_ > 0.0)) throw SpecError("ledger: maximum M must be positive");
    if (costs_.empty()) throw SpecError("ledger: need at least one environment cost");
    for (double c : costs_)
        if (!(c > 0.0)) throw SpecError("ledger: all costs must be positive");
    steps_.assign(costs_.size(), 0);
}

BudgetLedger BudgetLedger::unlimited(size_t env_count) {
    return BudgetLedger(std::numeric_limits<double>::infinity(),
                        std::vector<double>(env_count, 1.0));
}

void BudgetLedger::charge(int env_index, int64_t steps, const std::string& kind) {
    if (env_index < 0 || static_cast<size_t>(env_index) >= costs_.size())
        throw SpecError("ledger: env index out of range");
    if (steps < 0) throw ContractViolation("ledger: negative step charge");
    if (steps == 0) return;
    if (sequential_ && env_index < highest_)
        throw SequentialOrderError("ledger: sequential mode rejects charge to env " +
                                   std::to_string(env_index) + " after env " +
                                   std::to_string(highest_));
    const double cost = costs_[static_cast<size_t>(env_index)] * static_cast<double>(steps);
    if (spent_ + cost > maximum_)
        throw BudgetExceeded("ledger: charge of " + std::to_string(steps) + " steps to env " +
                             std::to_string(env_index) + " would exceed M");
    spent_ += cost;
    steps_[static_cast<size_t>(env_index)] += steps;
    highest_ = std::max(highest_, env_index);
    history_.push_back(Entry{env_index, steps, costs_[static_cast<size_t>(env_index)], spent_, kind});
}

bool BudgetLedger::would_exceed(int env_index, int64_t steps) const {
    if (env_index < 0 || static_cast<size_t>(env_index) >= costs_.size()) return true;
    return spent_ + costs_[static_cast<size_t>(env_index)] * static_cast<double>(steps) > maximum_;
}

int64_t BudgetLedger::affordable_steps(int env_index) const {
    if (env_index < 0 || static_cast<size_t>(env_index) >= costs_.size()) return 0;
    if (std::isinf(maximum_)) return std::numeric_limits<int64_t>::max();
    const double room = maximum_ - spent_;
    if (room <= 0.0) return 0;
    return static_cast<int64_t>(std::floor(room / costs_[static_cast<size_t>(env_index)]));
}

double BudgetLedger::replay_history_cost() const {
    double total = 0.0;
    for (const Entry& e : history_) {
        // rounded in a separate statement so the accumulation matches charge()
        // bit-for-bit (no fused multiply-add across the product)
        const double cost = e.cost_per_step * static_cast<double>(e.steps);
        total += cost;
    }
    return total;
}

std::string BudgetLedger::audit_csv(const Chain* chain) const {
    std::string out = "env_index,env_id,steps,cost_per_step,cumulative_cost,kind\n";
    char line[256];
    for (const Entry& e : history_) {
        const char* id = "";
        if (chain && static_cast<size_t>(e.env_index) < chain->specs.size())
            id = chain->specs[static_cast<size_t>(e.env_index)].id.c_str();
        std::snprintf(line, sizeof(line), "%d,%s,%lld,%.6f,%.6f,%s\n", e.env_index, id,
                      static_cast<long long>(e.steps), e.cost_per_step, e.cumulative_cost,
                      e.kind.c_str());
        out += line;
    }
    return out;
}

UnifiedActionSet unify_actions(const Chain& chain) {
    return unify_actions(std::vector<int>(chain.n(), kActionCount));
}

UnifiedActionSet unify_actions(const std::vector<int>& native_counts) {
    if (native_counts.empty()) throw SpecError("unify_actions: empty chain");
    UnifiedActionSet u;
    u.unified_count = *std::max_element(native_counts.begin(), native_counts.end());
    for (int count : native_counts) {
        if (count < 1 || count > kActionCount)
            throw SpecError("unify_actions: native action count out of range");
        std::vector<Action> m(static_cast<size_t>(u.unified_count), Action::None);
        for (int j = 0; j < count; ++j) m[static_cast<size_t>(j)] = static_cast<Action>(j);
        u.mapping.push_back(std::move(m));
    }
    return u;
}

}  // namespace gyre
