#pragma once
#include <string>

#include <json.hpp>

#include "gyre/suite.hpp"
#include "gyre/trainer.hpp"

namespace gyre {

// JSON configuration schemas (strict: unknown keys are rejected).
//
// EnvSpec object keys:
//   id, generator, components (composite only), base_wall_speed,
//   base_spawn_interval, gap_width, difficulty_ramp, rotation_drift,
//   cost_per_step, reversal_period (integer or null)
//
// Chain file: { "chain": { "name": ..., "specs": [ EnvSpec, ... ] } }
// Env file:   { "env": EnvSpec }
// Train config file: { "train": { gamma, n_step, batch_size,
//   batches_per_episode, epsilon, value_loss_coef, entropy_coef, step_budget,
//   warmup_steps, eval_steps, replay_capacity, sample_from_policy,
//   budget_m (number or null for unlimited) } }
// All train keys are optional; omitted keys keep their defaults.

nlohmann::ordered_json env_spec_to_json(const EnvSpec& spec);
EnvSpec env_spec_from_json(const nlohmann::json& j);

nlohmann::ordered_json chain_to_json(const Chain& chain);
Chain chain_from_json(const nlohmann::json& j);

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

EnvSpec load_env_spec_file(const std::string& path);
Chain load_chain_file(const std::string& path);
TrainConfig load_train_config_file(const std::string& path);

void save_json_file(const std::string& path, const nlohmann::ordered_json& j);
nlohmann::json load_json_file(const std::string& path);

// Builtin id, or a path to an env file when the id names no builtin.
EnvSpec resolve_env(const std::string& id_or_path);
// Builtin chain name, or a path to a chain file.
Chain resolve_chain(const std::string& name_or_path);

}  // namespace gyre
