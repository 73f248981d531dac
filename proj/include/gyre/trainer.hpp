#pragma once
#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "gyre/env.hpp"
#include "gyre/net.hpp"
#include "gyre/render.hpp"
#include "gyre/rng.hpp"
#include "gyre/suite.hpp"

namespace gyre {

inline constexpr size_t kReplayCapacity = 40000;
inline constexpr int kMaxNStep = 8;

// Frames are binary masks, so replay stores them bit-packed (221 bytes each).
struct CompactFrame {
    std::array<uint8_t, (Frame::kPixels + 7) / 8> bits{};

    static CompactFrame pack(const Frame& f);
    Frame unpack() const;
    bool operator==(const CompactFrame&) const = default;
};

// One n-step training sample. The stored rewards are the raw per-step
// rewards of the window; the bootstrap value is recomputed with the current
// network at training time, so it is never stored. Terminal windows carry no
// bootstrap observation.
struct Transition {
    CompactFrame obs_prev, obs_curr;
    CompactFrame boot_prev, boot_curr;
    std::array<double, kMaxNStep> rewards{};
    uint8_t reward_count = 0;  // == steps_to_bootstrap, in [1, n]
    uint8_t action = 0;
    bool terminal = false;

    Observation observation() const { return Observation{obs_prev.unpack(), obs_curr.unpack()}; }
    Observation bootstrap_observation() const;
    int steps_to_bootstrap() const { return reward_count; }
    std::span<const double> reward_span() const { return {rewards.data(), reward_count}; }
};

// Fixed-capacity ring; oldest entries are evicted first. Sampling is uniform
// with replacement from an internal stream.
class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity, uint64_t seed);

    void push(const Transition& t);
    size_t size() const { return size_; }
    size_t capacity() const { return capacity_; }
    int64_t total_pushed() const { return total_pushed_; }

    // logical index 0 is the oldest retained entry
    const Transition& at(size_t logical) const;
    size_t sample_index();

    Rng& rng() { return rng_; }

private:
    size_t capacity_;
    std::vector<Transition> storage_;
    size_t next_ = 0;
    size_t size_ = 0;
    int64_t total_pushed_ = 0;
    Rng rng_;
};

struct TrainConfig {
    double gamma = 0.99;
    int n_step = 4;
    int batch_size = 128;
    int batches_per_episode = 75;
    double epsilon = 0.05;
    double value_loss_coef = 0.5;
    double entropy_coef = 0.01;
    int64_t step_budget = 60000;       // environment steps per training run
    int64_t warmup_steps = 2000;       // random-agent transitions before training
    int64_t eval_steps = 20000;        // environment steps per evaluation report
    size_t replay_capacity = kReplayCapacity;
    bool sample_from_policy = false;   // exploit by sampling pi instead of argmax
    double budget_m = std::numeric_limits<double>::infinity();

    void validate() const;  // throws SpecError
};

// Discounted return of up to n rewards plus a gamma^len bootstrap when the
// window did not end the episode. Throws ContractViolation on empty input.
double nstep_return(std::span<const double> rewards, double bootstrap_value, bool terminal,
                    double gamma);

// With probability epsilon a uniform action (which may repeat the argmax);
// otherwise the argmax of `policy`, ties to the lowest index.
int epsilon_greedy(std::span<const double> policy, double epsilon, Rng& rng);

int argmax_action(std::span<const double> policy);

// Action selection honoring TrainConfig::sample_from_policy.
int pick_action(std::span<const double> policy, const TrainConfig& cfg, Rng& rng);

struct EpisodeStats {
    double reward = 0.0;        // seconds survived; exact paid_steps / 50
    int64_t steps = 0;
    bool capped = false;
    bool budget_truncated = false;
};

// Rolls one episode with epsilon-greedy actions, appending n-step transitions
// to the buffer and charging `ledger` (when given) for every environment
// step. On budget exhaustion the partial window tail is flushed into the
// buffer, the consumed steps are charged, and BudgetExceeded propagates.
EpisodeStats collect_episode(const EnvSpec& spec, const ParamSet& params,
                             const TrainConfig& cfg, Rng& action_rng, uint64_t episode_seed,
                             ReplayBuffer& buffer, ForwardCache& cache,
                             BudgetLedger* ledger = nullptr, int env_index = 0);

// Pure-greedy rollout (epsilon = 0), no replay writes; used by evaluation.
EpisodeStats greedy_episode(const EnvSpec& spec, const ParamSet& params, uint64_t episode_seed,
                            ForwardCache& cache);

struct LossStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double total = 0.0;
    int updates = 0;
};

// Mean batch loss and accumulated gradients (grads is zeroed here).
// Per-sample targets R are n-step returns bootstrapped with the current
// parameters; the advantage A = R - V is treated as a constant in the policy
// term. Optional outputs expose R and A for the finite-difference oracle.
LossStats loss_and_grads(const ParamSet& params, std::span<const Transition* const> batch,
                         const TrainConfig& cfg, ParamSet& grads, ForwardCache& cache,
                         std::vector<double>* out_returns = nullptr,
                         std::vector<double>* out_advantages = nullptr);

// Loss with frozen targets/advantages; evaluation-only path for gradient checks.
LossStats loss_with_fixed_targets(const ParamSet& params,
                                  std::span<const Transition* const> batch,
                                  const TrainConfig& cfg, std::span<const double> returns,
                                  std::span<const double> advantages, ForwardCache& cache);

// Exactly cfg.batches_per_episode iterations of
//   sample batch -> loss_and_grads -> adam_step.
// Throws InsufficientReplay when the buffer holds fewer than batch_size
// entries. Returns per-component means over the updates.
LossStats train_after_episode(ParamSet& params, AdamState& adam, ReplayBuffer& buffer,
                              const TrainConfig& cfg, ForwardCache& cache);

// Uniform-random play until exactly `steps` transitions are stored (window
// tails are flushed as shortened non-terminal samples). No network involved.
int64_t warmup_random(const EnvSpec& spec, const TrainConfig& cfg, ReplayBuffer& buffer,
                      int64_t steps, Rng& rng, BudgetLedger* ledger = nullptr,
                      int env_index = 0);

}  // namespace gyre
