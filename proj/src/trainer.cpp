#include "gyre/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace gyre {

CompactFrame CompactFrame::pack(const Frame& f) {
    CompactFrame c;
    for (int i = 0; i < Frame::kPixels; ++i)
        if (f.px[static_cast<size_t>(i)])
            c.bits[static_cast<size_t>(i >> 3)] |= static_cast<uint8_t>(1u << (i & 7));
    return c;
}

Frame CompactFrame::unpack() const {
    Frame f;
    for (int i = 0; i < Frame::kPixels; ++i)
        f.px[static_cast<size_t>(i)] =
            (bits[static_cast<size_t>(i >> 3)] >> (i & 7)) & 1u;
    return f;
}

Observation Transition::bootstrap_observation() const {
    if (terminal)
        throw ContractViolation("transition: terminal windows carry no bootstrap observation");
    return Observation{boot_prev.unpack(), boot_curr.unpack()};
}

ReplayBuffer::ReplayBuffer(size_t capacity, uint64_t seed)
    : capacity_(capacity), rng_(derive_seed(seed, "replay-sample")) {
    if (capacity_ == 0) throw SpecError("replay buffer: capacity must be positive");
    storage_.reserve(std::min<size_t>(capacity_, 4096));
}

void ReplayBuffer::push(const Transition& t) {
    if (storage_.size() < capacity_) {
        storage_.push_back(t);
        next_ = storage_.size() % capacity_;
        size_ = storage_.size();
    } else {
        storage_[next_] = t;
        next_ = (next_ + 1) % capacity_;
    }
    total_pushed_ += 1;
}

const Transition& ReplayBuffer::at(size_t logical) const {
    if (logical >= size_) throw ContractViolation("replay buffer: index out of range");
    if (size_ < capacity_) return storage_[logical];
    return storage_[(next_ + logical) % capacity_];
}

size_t ReplayBuffer::sample_index() {
    if (size_ == 0) throw ContractViolation("replay buffer: sampling from empty buffer");
    return static_cast<size_t>(rng_.uniform_int(size_));
}

void TrainConfig::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw SpecError("config: gamma must lie in (0, 1)");
    if (n_step < 1 || n_step > kMaxNStep)
        throw SpecError("config: n_step must lie in [1, " + std::to_string(kMaxNStep) + "]");
    if (batch_size < 1) throw SpecError("config: batch_size must be positive");
    if (batches_per_episode < 1) throw SpecError("config: batches_per_episode must be positive");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw SpecError("config: epsilon must lie in [0, 1]");
    if (value_loss_coef < 0.0 || entropy_coef < 0.0)
        throw SpecError("config: loss coefficients must be non-negative");
    if (step_budget < 0) throw SpecError("config: step_budget must be non-negative");
    if (warmup_steps < 0) throw SpecError("config: warmup_steps must be non-negative");
    if (eval_steps < 1) throw SpecError("config: eval_steps must be positive");
    if (replay_capacity < 1) throw SpecError("config: replay_capacity must be positive");
    if (!(budget_m > 0.0)) throw SpecError("config: budget_m must be positive");
}

double nstep_return(std::span<const double> rewards, double bootstrap_value, bool terminal,
                    double gamma) {
    if (rewards.empty()) throw ContractViolation("nstep_return: needs at least one reward");
    double r = 0.0;
    double g = 1.0;
    for (double x : rewards) {
        r += g * x;
        g *= gamma;
    }
    if (!terminal) r += g * bootstrap_value;
    return r;
}

int argmax_action(std::span<const double> policy) {
    int best = 0;
    for (size_t k = 1; k < policy.size(); ++k)
        if (policy[k] > policy[static_cast<size_t>(best)]) best = static_cast<int>(k);
    return best;
}

int epsilon_greedy(std::span<const double> policy, double epsilon, Rng& rng) {
    if (rng.uniform() < epsilon)
        return static_cast<int>(rng.uniform_int(policy.size()));
    return argmax_action(policy);
}

int pick_action(std::span<const double> policy, const TrainConfig& cfg, Rng& rng) {
    if (!cfg.sample_from_policy) return epsilon_greedy(policy, cfg.epsilon, rng);
    if (rng.uniform() < cfg.epsilon)
        return static_cast<int>(rng.uniform_int(policy.size()));
    const double r = rng.uniform();
    double c = 0.0;
    for (size_t k = 0; k < policy.size(); ++k) {
        c += policy[k];
        if (r < c) return static_cast<int>(k);
    }
    return static_cast<int>(policy.size()) - 1;
}

namespace {

// Sliding n-step window bookkeeping. Every environment step eventually yields
// exactly one transition: windows mature at n rewards, shrink at terminal, and
// can be flushed early (shortened, still bootstrapped) when collection stops
// mid-episode.
class Windower {
public:
    Windower(int n, ReplayBuffer& buffer) : n_(n), buffer_(buffer) {}

    void add_step(const CompactFrame& obs_prev, const CompactFrame& obs_curr, int action,
                  double reward, const CompactFrame& next_prev, const CompactFrame& next_curr,
                  bool terminal) {
        Pending p;
        p.prev = obs_prev;
        p.curr = obs_curr;
        p.action = static_cast<uint8_t>(action);
        open_.push_back(p);
        for (Pending& w : open_) w.rewards[static_cast<size_t>(w.count++)] = reward;
        if (terminal) {
            for (Pending& w : open_) emit(w, nullptr, nullptr, true);
            open_.clear();
            return;
        }
        while (!open_.empty() && open_.front().count == n_) {
            emit(open_.front(), &next_prev, &next_curr, false);
            open_.erase(open_.begin());
        }
    }

    // Shortened non-terminal flush; `next_*` is the observation after the
    // most recent step.
    void flush(const CompactFrame& next_prev, const CompactFrame& next_curr) {
        for (Pending& w : open_) emit(w, &next_prev, &next_curr, false);
        open_.clear();
    }

private:
    struct Pending {
        CompactFrame prev, curr;
        std::array<double, kMaxNStep> rewards{};
        int count = 0;
        uint8_t action = 0;
    };

    void emit(const Pending& w, const CompactFrame* bp, const CompactFrame* bc, bool terminal) {
        Transition t;
        t.obs_prev = w.prev;
        t.obs_curr = w.curr;
        t.rewards = w.rewards;
        t.reward_count = static_cast<uint8_t>(w.count);
        t.action = w.action;
        t.terminal = terminal;
        if (!terminal) {
            t.boot_prev = *bp;
            t.boot_curr = *bc;
        }
        buffer_.push(t);
    }

    int n_;
    ReplayBuffer& buffer_;
    std::vector<Pending> open_;
};

}  // namespace

EpisodeStats collect_episode(const EnvSpec& spec, const ParamSet& params,
                             const TrainConfig& cfg, Rng& action_rng, uint64_t episode_seed,
                             ReplayBuffer& buffer, ForwardCache& cache, BudgetLedger* ledger,
                             int env_index) {
    cfg.validate();
    GameState state = reset(spec, episode_seed);
    Frame f_prev = render_frame(state);
    Frame f_curr = f_prev;  // both channels equal the initial frame
    CompactFrame cp = CompactFrame::pack(f_prev);
    CompactFrame cc = cp;

    const int64_t allowed = ledger ? ledger->affordable_steps(env_index)
                                   : std::numeric_limits<int64_t>::max();
    Windower windower(cfg.n_step, buffer);
    EpisodeStats stats;
    int64_t paid = 0;

    while (state.alive) {
        if (stats.steps == allowed) {
            windower.flush(cp, cc);
            if (ledger && stats.steps > 0) ledger->charge(env_index, stats.steps, "train");
            throw BudgetExceeded("collect_episode: ledger exhausted mid-episode");
        }
        PolicyEval pe = evaluate_policy(params, Observation{f_prev, f_curr}, cache);
        const int action =
            pick_action({pe.policy.data(), static_cast<size_t>(params.arch.actions)}, cfg,
                        action_rng);
        const StepResult res = step(spec, state, static_cast<Action>(action));
        stats.steps += 1;
        if (res.reward > 0.0) paid += 1;

        f_prev = f_curr;
        f_curr = render_frame(state);
        const CompactFrame np = cc;
        const CompactFrame nc = CompactFrame::pack(f_curr);
        windower.add_step(cp, cc, action, res.reward, np, nc, res.terminal);
        cp = np;
        cc = nc;
        if (res.terminal) {
            stats.capped = res.capped;
            break;
        }
    }
    if (ledger && stats.steps > 0) ledger->charge(env_index, stats.steps, "train");
    stats.reward = static_cast<double>(paid) * kStepSeconds;
    return stats;
}

EpisodeStats greedy_episode(const EnvSpec& spec, const ParamSet& params, uint64_t episode_seed,
                            ForwardCache& cache) {
    GameState state = reset(spec, episode_seed);
    Frame f_prev = render_frame(state);
    Frame f_curr = f_prev;
    EpisodeStats stats;
    int64_t paid = 0;
    while (state.alive) {
        PolicyEval pe = evaluate_policy(params, Observation{f_prev, f_curr}, cache);
        const StepResult res = step(spec, state, static_cast<Action>(pe.argmax));
        stats.steps += 1;
        if (res.reward > 0.0) paid += 1;
        f_prev = f_curr;
        f_curr = render_frame(state);
        if (res.terminal) {
            stats.capped = res.capped;
            break;
        }
    }
    stats.reward = static_cast<double>(paid) * kStepSeconds;
    return stats;
}

namespace {

Tensor batch_observations(std::span<const Transition* const> batch, bool bootstrap,
                          const std::vector<int>& rows) {
    const int B = static_cast<int>(rows.size());
    Tensor t({B, 2, Frame::kSide, Frame::kSide});
    for (int i = 0; i < B; ++i) {
        const Transition& tr = *batch[static_cast<size_t>(rows[static_cast<size_t>(i)])];
        const Frame a = bootstrap ? tr.boot_prev.unpack() : tr.obs_prev.unpack();
        const Frame b = bootstrap ? tr.boot_curr.unpack() : tr.obs_curr.unpack();
        double* dst = t.ptr() + static_cast<int64_t>(i) * 2 * Frame::kPixels;
        for (int j = 0; j < Frame::kPixels; ++j) dst[j] = a.px[static_cast<size_t>(j)];
        for (int j = 0; j < Frame::kPixels; ++j)
            dst[Frame::kPixels + j] = b.px[static_cast<size_t>(j)];
    }
    return t;
}

struct SampleTerms {
    double log_prob_action = 0.0;
    double entropy = 0.0;
};

// log-probabilities and entropy from one logits row, numerically stable
SampleTerms sample_terms(const double* logits, const double* policy, int K, int action) {
    double mx = logits[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, logits[k]);
    double sum = 0.0;
    for (int k = 0; k < K; ++k) sum += std::exp(logits[k] - mx);
    const double lse = mx + std::log(sum);
    SampleTerms t;
    t.log_prob_action = logits[action] - lse;
    for (int k = 0; k < K; ++k) t.entropy -= policy[k] * (logits[k] - lse);
    return t;
}

}  // namespace

LossStats loss_and_grads(const ParamSet& params, std::span<const Transition* const> batch,
                         const TrainConfig& cfg, ParamSet& grads, ForwardCache& cache,
                         std::vector<double>* out_returns,
                         std::vector<double>* out_advantages) {
    if (batch.empty()) throw ContractViolation("loss_and_grads: empty batch");
    const NetArch& arch = params.arch;
    const int B = static_cast<int>(batch.size());
    const int K = arch.actions;

    // bootstrap values with current (frozen within the batch) parameters
    std::vector<double> boot_value(static_cast<size_t>(B), 0.0);
    std::vector<int> boot_rows;
    for (int b = 0; b < B; ++b)
        if (!batch[static_cast<size_t>(b)]->terminal) boot_rows.push_back(b);
    if (!boot_rows.empty()) {
        Tensor boot_in = batch_observations(batch, true, boot_rows);
        ForwardOut out = forward(params, boot_in, cache);
        for (size_t i = 0; i < boot_rows.size(); ++i)
            boot_value[static_cast<size_t>(boot_rows[i])] = out.value[static_cast<int64_t>(i)];
    }

    std::vector<double> returns(static_cast<size_t>(B));
    for (int b = 0; b < B; ++b) {
        const Transition& tr = *batch[static_cast<size_t>(b)];
        returns[static_cast<size_t>(b)] =
            nstep_return(tr.reward_span(), boot_value[static_cast<size_t>(b)], tr.terminal,
                         cfg.gamma);
    }

    std::vector<int> all_rows(static_cast<size_t>(B));
    for (int b = 0; b < B; ++b) all_rows[static_cast<size_t>(b)] = b;
    Tensor input = batch_observations(batch, false, all_rows);
    ForwardOut out = forward(params, input, cache);

    Tensor glogits({B, K});
    Tensor gvalue({B});
    LossStats stats;
    std::vector<double> advantages(static_cast<size_t>(B));
    const double inv_b = 1.0 / static_cast<double>(B);

    for (int b = 0; b < B; ++b) {
        const Transition& tr = *batch[static_cast<size_t>(b)];
        const double* lg = out.logits.ptr() + static_cast<int64_t>(b) * K;
        const double* pol = out.policy.ptr() + static_cast<int64_t>(b) * K;
        const double v = out.value[b];
        const double R = returns[static_cast<size_t>(b)];
        const double A = R - v;  // detached for the policy term
        advantages[static_cast<size_t>(b)] = A;
        const SampleTerms st = sample_terms(lg, pol, K, tr.action);

        stats.policy_loss += -st.log_prob_action * A;
        stats.value_loss += (R - v) * (R - v);
        stats.entropy += st.entropy;

        for (int k = 0; k < K; ++k) {
            const double onehot = (k == tr.action) ? 1.0 : 0.0;
            const double lp = lg[k] - (lg[tr.action] - st.log_prob_action);  // log pi_k
            glogits[static_cast<int64_t>(b) * K + k] =
                (A * (pol[k] - onehot) + cfg.entropy_coef * pol[k] * (lp + st.entropy)) * inv_b;
        }
        gvalue[b] = -2.0 * cfg.value_loss_coef * (R - v) * inv_b;
    }
    stats.policy_loss *= inv_b;
    stats.value_loss *= inv_b;
    stats.entropy *= inv_b;
    stats.total = stats.policy_loss + cfg.value_loss_coef * stats.value_loss -
                  cfg.entropy_coef * stats.entropy;
    stats.updates = 1;

    grads.zero();
    backward(params, cache, glogits, gvalue, &grads);

    if (out_returns) *out_returns = returns;
    if (out_advantages) *out_advantages = advantages;
    return stats;
}

LossStats loss_with_fixed_targets(const ParamSet& params,
                                  std::span<const Transition* const> batch,
                                  const TrainConfig& cfg, std::span<const double> returns,
                                  std::span<const double> advantages, ForwardCache& cache) {
    const int B = static_cast<int>(batch.size());
    const int K = params.arch.actions;
    std::vector<int> all_rows(static_cast<size_t>(B));
    for (int b = 0; b < B; ++b) all_rows[static_cast<size_t>(b)] = b;
    Tensor input = batch_observations(batch, false, all_rows);
    ForwardOut out = forward(params, input, cache);

    LossStats stats;
    for (int b = 0; b < B; ++b) {
        const Transition& tr = *batch[static_cast<size_t>(b)];
        const double* lg = out.logits.ptr() + static_cast<int64_t>(b) * K;
        const double* pol = out.policy.ptr() + static_cast<int64_t>(b) * K;
        const double v = out.value[b];
        const SampleTerms st = sample_terms(lg, pol, K, tr.action);
        stats.policy_loss += -st.log_prob_action * advantages[static_cast<size_t>(b)];
        const double dv = returns[static_cast<size_t>(b)] - v;
        stats.value_loss += dv * dv;
        stats.entropy += st.entropy;
    }
    const double inv_b = 1.0 / static_cast<double>(B);
    stats.policy_loss *= inv_b;
    stats.value_loss *= inv_b;
    stats.entropy *= inv_b;
    stats.total = stats.policy_loss + cfg.value_loss_coef * stats.value_loss -
                  cfg.entropy_coef * stats.entropy;
    stats.updates = 1;
    return stats;
}

LossStats train_after_episode(ParamSet& params, AdamState& adam, ReplayBuffer& buffer,
                              const TrainConfig& cfg, ForwardCache& cache) {
    cfg.validate();
    if (buffer.size() < static_cast<size_t>(cfg.batch_size))
        throw InsufficientReplay("train_after_episode: buffer holds " +
                                 std::to_string(buffer.size()) + " < batch size " +
                                 std::to_string(cfg.batch_size));
    ParamSet grads = ParamSet::make(params.arch);
    std::vector<const Transition*> ptrs(static_cast<size_t>(cfg.batch_size));
    LossStats mean;
    for (int it = 0; it < cfg.batches_per_episode; ++it) {
        for (int j = 0; j < cfg.batch_size; ++j)
            ptrs[static_cast<size_t>(j)] = &buffer.at(buffer.sample_index());
        const LossStats s = loss_and_grads(params, ptrs, cfg, grads, cache);
        adam_step(params, grads, adam);
        mean.policy_loss += s.policy_loss;
        mean.value_loss += s.value_loss;
        mean.entropy += s.entropy;
        mean.total += s.total;
    }
    const double inv = 1.0 / cfg.batches_per_episode;
    mean.policy_loss *= inv;
    mean.value_loss *= inv;
    mean.entropy *= inv;
    mean.total *= inv;
    mean.updates = cfg.batches_per_episode;
    return mean;
}

int64_t warmup_random(const EnvSpec& spec, const TrainConfig& cfg, ReplayBuffer& buffer,
                      int64_t steps, Rng& rng, BudgetLedger* ledger, int env_index) {
    cfg.validate();
    if (steps == 0) return 0;
    const int64_t allowed = ledger ? std::min(steps, ledger->affordable_steps(env_index))
                                   : steps;
    int64_t stored = 0;
    bool exhausted = false;

    while (stored < steps && !exhausted) {
        GameState state = reset(spec, rng.next_u64());
        Frame f_prev = render_frame(state);
        Frame f_curr = f_prev;
        CompactFrame cp = CompactFrame::pack(f_prev);
        CompactFrame cc = cp;
        Windower windower(cfg.n_step, buffer);
        int64_t taken = 0;

        while (state.alive) {
            if (stored == steps || stored == allowed) {
                windower.flush(cp, cc);
                break;
            }
            const Action action = static_cast<Action>(rng.uniform_int(kActionCount));
            const StepResult res = step(spec, state, action);
            stored += 1;
            taken += 1;
            f_prev = f_curr;
            f_curr = render_frame(state);
            const CompactFrame np = cc;
            const CompactFrame nc = CompactFrame::pack(f_curr);
            windower.add_step(cp, cc, static_cast<int>(action), res.reward, np, nc,
                              res.terminal);
            cp = np;
            cc = nc;
            if (res.terminal) break;
        }
        if (ledger && taken > 0) ledger->charge(env_index, taken, "warmup");
        if (stored == allowed && stored < steps) exhausted = true;
    }
    if (exhausted)
        throw BudgetExceeded("warmup_random: ledger exhausted after " + std::to_string(stored) +
                             " steps");
    return stored;
}

}  // namespace gyre
