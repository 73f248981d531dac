#include "gyre/incremental.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gyre/hash.hpp"

namespace gyre {

const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::Random: return "Random";
        case ModelKind::Initial: return "Initial";
        case ModelKind::Baseline: return "Baseline";
        case ModelKind::Incremental: return "Incremental";
    }
    return "?";
}

std::string TrainResult::log_csv_header() {
    return "episode,steps,reward,policy_loss,value_loss,entropy,total_loss,updates,"
           "ledger_remaining,new_best\n";
}

std::string TrainResult::log_csv() const {
    std::string out = log_csv_header();
    char line[256];
    for (const EpisodeLogRow& r : log) {
        std::snprintf(line, sizeof(line), "%lld,%lld,%.2f,%.6f,%.6f,%.6f,%.6f,%d,%.6f,%d\n",
                      static_cast<long long>(r.episode), static_cast<long long>(r.steps),
                      r.reward, r.losses.policy_loss, r.losses.value_loss, r.losses.entropy,
                      r.losses.total, r.losses.updates, r.ledger_remaining, r.new_best ? 1 : 0);
        out += line;
    }
    return out;
}

namespace {

TrainResult run_training(const EnvSpec& spec, ParamSet params, const TrainConfig& cfg,
                         uint64_t seed, const std::string& initial_weights_id,
                         BudgetLedger* ledger, int env_index) {
    spec.validate();
    cfg.validate();

    TrainResult result;
    CheckpointMeta meta;
    meta.env_id = spec.id;
    meta.seed = seed;
    meta.initial_weights_id = initial_weights_id;

    AdamState adam = AdamState::make(params.arch);
    ReplayBuffer buffer(cfg.replay_capacity, derive_seed(seed, "buffer"));
    Rng warmup_rng(derive_seed(seed, "warmup"));
    Rng collect_rng(derive_seed(seed, "collect"));
    const uint64_t episode_seed_root = derive_seed(seed, "episodes");
    ForwardCache cache;

    auto snapshot = [&](double best_reward) {
        meta.best_episode_reward = best_reward;
        meta.env_steps = result.env_steps;
        meta.updates = result.updates;
        meta.budget_truncated = result.budget_truncated;
        result.checkpoint = save_checkpoint(params, nullptr, meta);
        result.meta = meta;
    };

    const int64_t warmup_target = std::min(cfg.warmup_steps, cfg.step_budget);
    if (warmup_target > 0) {
        try {
            result.env_steps +=
                warmup_random(spec, cfg, buffer, warmup_target, warmup_rng, ledger, env_index);
        } catch (const BudgetExceeded&) {
            result.budget_truncated = true;
            snapshot(0.0);
            return result;
        }
    }

    double best = -1.0;
    bool have_best = false;
    int64_t episode_index = 0;
    while (result.env_steps < cfg.step_budget) {
        EpisodeStats stats;
        try {
            stats = collect_episode(spec, params, cfg, collect_rng,
                                    stream_at(episode_seed_root, static_cast<uint64_t>(episode_index)),
                                    buffer, cache, ledger, env_index);
        } catch (const BudgetExceeded&) {
            result.budget_truncated = true;
            break;
        }
        result.env_steps += stats.steps;

        EpisodeLogRow row;
        row.episode = episode_index;
        row.steps = stats.steps;
        row.reward = stats.reward;
        if (stats.reward > best) {
            best = stats.reward;
            have_best = true;
            row.new_best = true;
            snapshot(best);  // weights that played this episode, before updates
        }
        if (buffer.size() >= static_cast<size_t>(cfg.batch_size)) {
            row.losses = train_after_episode(params, adam, buffer, cfg, cache);
            result.updates += row.losses.updates;
        }
        row.ledger_remaining = ledger ? ledger->remaining()
                                      : std::numeric_limits<double>::infinity();
        result.log.push_back(row);
        episode_index += 1;
    }

    if (!have_best) snapshot(0.0);
    // refresh final counters in the stored meta copy
    result.meta.env_steps = result.env_steps;
    result.meta.updates = result.updates;
    result.meta.budget_truncated = result.budget_truncated;
    return result;
}

}  // namespace

TrainResult train_baseline(const EnvSpec& spec, const TrainConfig& cfg, uint64_t seed,
                           BudgetLedger* ledger, int env_index) {
    ParamSet params = init_params(NetArch::standard(), seed);
    return run_training(spec, std::move(params), cfg, seed, "", ledger, env_index);
}

TrainResult train_incremental(const EnvSpec& spec, std::span<const uint8_t> prev_checkpoint,
                              const TrainConfig& cfg, uint64_t seed, BudgetLedger* ledger,
                              int env_index) {
    LoadedCheckpoint prev = load_checkpoint_expect(prev_checkpoint, NetArch::standard());
    const std::string prev_id = hex64(checkpoint_hash(prev_checkpoint));
    return run_training(spec, std::move(prev.params), cfg, seed, prev_id, ledger, env_index);
}

EvalReport evaluate(const ParamSet& params, const EnvSpec& spec, int64_t eval_steps,
                    uint64_t seed) {
    spec.validate();
    if (eval_steps < 1) throw SpecError("evaluate: eval_steps must be positive");
    EvalReport report;
    report.env_id = spec.id;
    report.seed = seed;
    const uint64_t root = derive_seed(seed, "eval-episodes");
    ForwardCache cache;
    double sum = 0.0;
    while (report.eval_steps < eval_steps) {
        const EpisodeStats stats =
            greedy_episode(spec, params, stream_at(root, static_cast<uint64_t>(report.episodes)),
                           cache);
        report.episodes += 1;
        report.eval_steps += stats.steps;
        sum += stats.reward;
        report.max_reward = std::max(report.max_reward, stats.reward);
    }
    report.mean_reward = sum / static_cast<double>(report.episodes);
    return report;
}

ChainResult run_chain(const Chain& chain, const TrainConfig& cfg, uint64_t seed) {
    chain.validate();
    cfg.validate();

    ChainResult result;
    result.chain_name = chain.name;
    result.seed = seed;
    result.grid.resize(chain.n());
    result.baseline_ckpts.resize(chain.n());
    result.incremental_ckpts.resize(chain.n());

    std::vector<double> costs;
    for (const EnvSpec& s : chain.specs) costs.push_back(s.cost_per_step);
    BudgetLedger ledger(cfg.budget_m, costs, /*sequential=*/true);

    const uint64_t sub = derive_seed(seed, "chain");
    auto role_seed = [&](const char* role, size_t i) {
        return stream_at(derive_seed(sub, role), static_cast<uint64_t>(i));
    };

    // Returns false when the ledger cannot cover the evaluation.
    auto eval_cell = [&](size_t i, ModelKind kind, const ParamSet& params,
                         uint64_t eval_seed) -> bool {
        if (ledger.affordable_steps(static_cast<int>(i)) <= 0) return false;
        EvalReport rep = evaluate(params, chain.specs[i], cfg.eval_steps, eval_seed);
        rep.kind = kind;
        try {
            ledger.charge(static_cast<int>(i), rep.eval_steps, "eval");
        } catch (const BudgetExceeded&) {
            return false;
        }
        auto& cell = result.grid[i][static_cast<size_t>(kind)];
        cell.defined = true;
        cell.report = rep;
        return true;
    };

    for (size_t i = 0; i < chain.n(); ++i) {
        const EnvSpec& spec = chain.specs[i];

        ParamSet random_params = init_params(NetArch::standard(), role_seed("random", i));
        if (!eval_cell(i, ModelKind::Random, random_params, role_seed("random-eval", i))) {
            result.truncated = true;
            break;
        }

        if (i > 0 && !result.baseline_ckpts[i - 1].empty()) {
            LoadedCheckpoint prev =
                load_checkpoint_expect(result.baseline_ckpts[i - 1], NetArch::standard());
            if (!eval_cell(i, ModelKind::Initial, prev.params, role_seed("initial-eval", i))) {
                result.truncated = true;
                break;
            }
        }

        TrainResult base = train_baseline(spec, cfg, role_seed("baseline", i), &ledger,
                                          static_cast<int>(i));
        result.baseline_ckpts[i] = base.checkpoint;
        const bool base_truncated = base.budget_truncated;
        result.baseline_runs.push_back(std::move(base));
        if (base_truncated) {
            result.truncated = true;
            break;
        }
        {
            LoadedCheckpoint w =
                load_checkpoint_expect(result.baseline_ckpts[i], NetArch::standard());
            if (!eval_cell(i, ModelKind::Baseline, w.params, role_seed("baseline-eval", i))) {
                result.truncated = true;
                break;
            }
        }

        if (i > 0) {
            TrainResult inc =
                train_incremental(spec, result.baseline_ckpts[i - 1], cfg,
                                  role_seed("incremental", i), &ledger, static_cast<int>(i));
            result.incremental_ckpts[i] = inc.checkpoint;
            const bool inc_truncated = inc.budget_truncated;
            result.incremental_runs.push_back(std::move(inc));
            if (inc_truncated) {
                result.truncated = true;
                break;
            }
            LoadedCheckpoint w =
                load_checkpoint_expect(result.incremental_ckpts[i], NetArch::standard());
            if (!eval_cell(i, ModelKind::Incremental, w.params,
                           role_seed("incremental-eval", i))) {
                result.truncated = true;
                break;
            }
        }
        result.completed_positions = static_cast<int>(i) + 1;
    }

    result.audit = ledger.history();
    return result;
}

// --- rendering -----------------------------------------------------------------

namespace {

std::string cell_text(const TableCell& c) {
    if (!c.defined) return "---";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", c.value);
    return buf;
}

void render_block(std::string& out, const char* title, const std::vector<std::string>& ids,
                  const std::vector<std::array<TableCell, 4>>& cells) {
    out += title;
    out += "\nE, Random, Initial, Baseline, Incremental\n";
    for (size_t i = 0; i < ids.size(); ++i) {
        out += ids[i];
        for (int k = 0; k < 4; ++k) {
            out += ", ";
            out += cell_text(cells[i][static_cast<size_t>(k)]);
        }
        out += "\n";
    }
}

}  // namespace

std::string render_chain_table(const std::vector<std::string>& env_ids,
                               const std::vector<std::array<TableCell, 4>>& max_cells,
                               const std::vector<std::array<TableCell, 4>>& mean_cells) {
    std::string out;
    render_block(out, "Max", env_ids, max_cells);
    out += "\n";
    render_block(out, "Mean", env_ids, mean_cells);
    return out;
}

AggregatedChain aggregate_chain_results(std::span<const ChainResult> results) {
    AggregatedChain agg;
    if (results.empty()) return agg;
    const size_t n = results[0].grid.size();
    for (size_t i = 0; i < n; ++i) {
        std::string id = "e" + std::to_string(i + 1);
        for (const ChainResult& r : results)
            for (size_t k = 0; k < 4; ++k)
                if (i < r.grid.size() && r.grid[i][k].defined) {
                    id = r.grid[i][k].report.env_id;
                    break;
                }
        agg.env_ids.push_back(id);
    }
    agg.max_cells.assign(n, {});
    agg.mean_cells.assign(n, {});
    for (size_t i = 0; i < n; ++i) {
        for (size_t k = 0; k < 4; ++k) {
            double max_sum = 0.0, mean_sum = 0.0;
            int count = 0;
            for (const ChainResult& r : results) {
                if (i >= r.grid.size() || !r.grid[i][k].defined) continue;
                max_sum += r.grid[i][k].report.max_reward;
                mean_sum += r.grid[i][k].report.mean_reward;
                count += 1;
            }
            if (count == static_cast<int>(results.size())) {
                agg.max_cells[i][k] = TableCell{true, max_sum / count};
                agg.mean_cells[i][k] = TableCell{true, mean_sum / count};
            }
        }
    }
    return agg;
}

std::string chain_results_csv(std::span<const ChainResult> results) {
    std::string out = "seed,env,model,max_reward,mean_reward,episodes,eval_steps\n";
    char line[256];
    for (const ChainResult& r : results) {
        for (size_t i = 0; i < r.grid.size(); ++i) {
            for (size_t k = 0; k < 4; ++k) {
                if (!r.grid[i][k].defined) continue;
                const EvalReport& rep = r.grid[i][k].report;
                std::snprintf(line, sizeof(line), "%llu,%s,%s,%.2f,%.2f,%lld,%lld\n",
                              static_cast<unsigned long long>(r.seed), rep.env_id.c_str(),
                              model_kind_name(static_cast<ModelKind>(k)), rep.max_reward,
                              rep.mean_reward, static_cast<long long>(rep.episodes),
                              static_cast<long long>(rep.eval_steps));
                out += line;
            }
        }
    }
    return out;
}

}  // namespace gyre
