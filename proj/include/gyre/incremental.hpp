#pragma once
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gyre/checkpoint.hpp"
#include "gyre/suite.hpp"
#include "gyre/trainer.hpp"

namespace gyre {

// Evaluation conditions. Initial and Incremental are undefined at chain
// position 1 (nothing precedes it).
enum class ModelKind { Random = 0, Initial = 1, Baseline = 2, Incremental = 3 };
const char* model_kind_name(ModelKind k);

struct EvalReport {
    std::string env_id;
    ModelKind kind = ModelKind::Random;
    double max_reward = 0.0;
    double mean_reward = 0.0;
    int64_t episodes = 0;
    int64_t eval_steps = 0;  // environment steps actually consumed
    uint64_t seed = 0;
};

struct EpisodeLogRow {
    int64_t episode = 0;
    int64_t steps = 0;
    double reward = 0.0;
    LossStats losses;
    double ledger_remaining = 0.0;
    bool new_best = false;
};

struct TrainResult {
    std::vector<uint8_t> checkpoint;  // best-episode weights (initial weights if no episode)
    CheckpointMeta meta;
    std::vector<EpisodeLogRow> log;
    int64_t env_steps = 0;  // warmup + collection
    int64_t updates = 0;
    bool budget_truncated = false;

    static std::string log_csv_header();
    std::string log_csv() const;
};

// Trains from random initialization, snapshotting the weights that played
// each new best-reward episode (before that episode's updates). Returns the
// best snapshot, never the final weights.
TrainResult train_baseline(const EnvSpec& spec, const TrainConfig& cfg, uint64_t seed,
                           BudgetLedger* ledger = nullptr, int env_index = 0);

// Identical schedule, but starts from previously trained weights; Adam
// moments and replay start fresh (only the weights transfer).
TrainResult train_incremental(const EnvSpec& spec, std::span<const uint8_t> prev_checkpoint,
                              const TrainConfig& cfg, uint64_t seed,
                              BudgetLedger* ledger = nullptr, int env_index = 0);

// Greedy (epsilon = 0) evaluation across as many episodes as fit within
// eval_steps; at least one episode always runs. Never mutates weights and
// never touches replay or ledgers.
EvalReport evaluate(const ParamSet& params, const EnvSpec& spec, int64_t eval_steps,
                    uint64_t seed);

struct ChainResult {
    struct Cell {
        bool defined = false;
        EvalReport report;
    };

    std::string chain_name;
    uint64_t seed = 0;
    std::vector<std::array<Cell, 4>> grid;           // [position][ModelKind]
    std::vector<std::vector<uint8_t>> baseline_ckpts;     // w_i
    std::vector<std::vector<uint8_t>> incremental_ckpts;  // w'_i; empty at position 1
    std::vector<TrainResult> baseline_runs;
    std::vector<TrainResult> incremental_runs;
    std::vector<BudgetLedger::Entry> audit;
    bool truncated = false;
    int completed_positions = 0;
};

// Executes the full protocol over one chain with one seed: per position,
// evaluate fresh random weights, evaluate the previous baseline's weights
// (position > 1), train a baseline from scratch, train incrementally from
// the previous baseline, and evaluate both trained models. All environment
// steps are charged against a sequential ledger built from cfg.budget_m and
// the chain's per-step costs. On budget exhaustion the result carries the
// completed positions and the truncation flag.
ChainResult run_chain(const Chain& chain, const TrainConfig& cfg, uint64_t seed);

// --- result rendering --------------------------------------------------------

struct TableCell {
    bool defined = false;
    double value = 0.0;
};

// Plain-text table with a Max block and a Mean block; header row
// "E, Random, Initial, Baseline, Incremental"; two-decimal cells, undefined
// cells rendered as "---".
std::string render_chain_table(const std::vector<std::string>& env_ids,
                               const std::vector<std::array<TableCell, 4>>& max_cells,
                               const std::vector<std::array<TableCell, 4>>& mean_cells);

struct AggregatedChain {
    std::vector<std::string> env_ids;
    std::vector<std::array<TableCell, 4>> max_cells;   // per-seed values averaged
    std::vector<std::array<TableCell, 4>> mean_cells;
};

AggregatedChain aggregate_chain_results(std::span<const ChainResult> results);

// One row per (seed, position, model): raw max/mean rewards.
std::string chain_results_csv(std::span<const ChainResult> results);

}  // namespace gyre
