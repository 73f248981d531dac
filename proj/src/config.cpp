#include "gyre/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

namespace gyre {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& j, const std::set<std::string>& allowed, const char* what) {
    if (!j.is_object()) throw SpecError(std::string(what) + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw SpecError(std::string(what) + ": unknown key '" + it.key() + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw SpecError(std::string("config: bad value for '") + key + "'");
    }
}

}  // namespace

nlohmann::ordered_json env_spec_to_json(const EnvSpec& spec) {
    ordered_json j;
    j["id"] = spec.id;
    j["generator"] = generator_name(spec.generator);
    if (spec.generator == PatternGenerator::Composite) {
        ordered_json comps = ordered_json::array();
        for (PatternGenerator g : spec.components) comps.push_back(generator_name(g));
        j["components"] = comps;
    }
    j["base_wall_speed"] = spec.base_wall_speed;
    j["base_spawn_interval"] = spec.base_spawn_interval;
    j["gap_width"] = spec.gap_width;
    j["difficulty_ramp"] = spec.difficulty_ramp;
    j["rotation_drift"] = spec.rotation_drift;
    j["cost_per_step"] = spec.cost_per_step;
    if (spec.reversal_period)
        j["reversal_period"] = *spec.reversal_period;
    else
        j["reversal_period"] = nullptr;
    return j;
}

EnvSpec env_spec_from_json(const json& j) {
    check_keys(j,
               {"id", "generator", "components", "base_wall_speed", "base_spawn_interval",
                "gap_width", "difficulty_ramp", "rotation_drift", "cost_per_step",
                "reversal_period"},
               "env spec");
    EnvSpec s;
    s.id = get_or<std::string>(j, "id", "");
    const std::string gen = get_or<std::string>(j, "generator", "single_gap_ring");
    auto g = generator_from_name(gen);
    if (!g) throw SpecError("env spec: unknown generator '" + gen + "'");
    s.generator = *g;
    if (j.contains("components") && !j.at("components").is_null()) {
        for (const auto& c : j.at("components")) {
            auto cg = generator_from_name(c.get<std::string>());
            if (!cg) throw SpecError("env spec: unknown component generator");
            s.components.push_back(*cg);
        }
    }
    s.base_wall_speed = get_or<double>(j, "base_wall_speed", s.base_wall_speed);
    s.base_spawn_interval = get_or<int64_t>(j, "base_spawn_interval", s.base_spawn_interval);
    s.gap_width = get_or<double>(j, "gap_width", s.gap_width);
    s.difficulty_ramp = get_or<double>(j, "difficulty_ramp", s.difficulty_ramp);
    s.rotation_drift = get_or<double>(j, "rotation_drift", s.rotation_drift);
    s.cost_per_step = get_or<double>(j, "cost_per_step", s.cost_per_step);
    if (j.contains("reversal_period") && !j.at("reversal_period").is_null())
        s.reversal_period = j.at("reversal_period").get<int64_t>();
    s.validate();
    return s;
}

nlohmann::ordered_json chain_to_json(const Chain& chain) {
    ordered_json specs = ordered_json::array();
    for (const EnvSpec& s : chain.specs) specs.push_back(env_spec_to_json(s));
    ordered_json j;
    j["chain"] = ordered_json{{"name", chain.name}, {"specs", specs}};
    return j;
}

Chain chain_from_json(const json& j) {
    if (!j.contains("chain")) throw SpecError("chain file: missing 'chain' block");
    const json& c = j.at("chain");
    check_keys(c, {"name", "specs"}, "chain");
    Chain chain;
    chain.name = get_or<std::string>(c, "name", "");
    if (!c.contains("specs") || !c.at("specs").is_array())
        throw SpecError("chain: 'specs' must be an array");
    for (const auto& s : c.at("specs")) chain.specs.push_back(env_spec_from_json(s));
    chain.validate();
    return chain;
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg) {
    ordered_json t;
    t["gamma"] = cfg.gamma;
    t["n_step"] = cfg.n_step;
    t["batch_size"] = cfg.batch_size;
    t["batches_per_episode"] = cfg.batches_per_episode;
    t["epsilon"] = cfg.epsilon;
    t["value_loss_coef"] = cfg.value_loss_coef;
    t["entropy_coef"] = cfg.entropy_coef;
    t["step_budget"] = cfg.step_budget;
    t["warmup_steps"] = cfg.warmup_steps;
    t["eval_steps"] = cfg.eval_steps;
    t["replay_capacity"] = cfg.replay_capacity;
    t["sample_from_policy"] = cfg.sample_from_policy;
    if (std::isfinite(cfg.budget_m))
        t["budget_m"] = cfg.budget_m;
    else
        t["budget_m"] = nullptr;
    ordered_json j;
    j["train"] = t;
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    const json& t = j.contains("train") ? j.at("train") : j;
    check_keys(t,
               {"gamma", "n_step", "batch_size", "batches_per_episode", "epsilon",
                "value_loss_coef", "entropy_coef", "step_budget", "warmup_steps", "eval_steps",
                "replay_capacity", "sample_from_policy", "budget_m"},
               "train config");
    TrainConfig cfg;
    cfg.gamma = get_or<double>(t, "gamma", cfg.gamma);
    cfg.n_step = get_or<int>(t, "n_step", cfg.n_step);
    cfg.batch_size = get_or<int>(t, "batch_size", cfg.batch_size);
    cfg.batches_per_episode = get_or<int>(t, "batches_per_episode", cfg.batches_per_episode);
    cfg.epsilon = get_or<double>(t, "epsilon", cfg.epsilon);
    cfg.value_loss_coef = get_or<double>(t, "value_loss_coef", cfg.value_loss_coef);
    cfg.entropy_coef = get_or<double>(t, "entropy_coef", cfg.entropy_coef);
    cfg.step_budget = get_or<int64_t>(t, "step_budget", cfg.step_budget);
    cfg.warmup_steps = get_or<int64_t>(t, "warmup_steps", cfg.warmup_steps);
    cfg.eval_steps = get_or<int64_t>(t, "eval_steps", cfg.eval_steps);
    cfg.replay_capacity = get_or<size_t>(t, "replay_capacity", cfg.replay_capacity);
    cfg.sample_from_policy = get_or<bool>(t, "sample_from_policy", cfg.sample_from_policy);
    if (t.contains("budget_m") && !t.at("budget_m").is_null())
        cfg.budget_m = t.at("budget_m").get<double>();
    cfg.validate();
    return cfg;
}

void save_json_file(const std::string& path, const ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("short write: " + path);
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open config file: " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw SpecError("config parse error in " + path + ": " + e.what());
    }
}

EnvSpec load_env_spec_file(const std::string& path) {
    const json j = load_json_file(path);
    if (j.contains("env")) return env_spec_from_json(j.at("env"));
    return env_spec_from_json(j);
}

Chain load_chain_file(const std::string& path) { return chain_from_json(load_json_file(path)); }

TrainConfig load_train_config_file(const std::string& path) {
    return train_config_from_json(load_json_file(path));
}

EnvSpec resolve_env(const std::string& id_or_path) {
    for (const EnvSpec& s : builtin_specs())
        if (s.id == id_or_path) return s;
    if (std::filesystem::exists(id_or_path)) return load_env_spec_file(id_or_path);
    throw SpecError("unknown env '" + id_or_path + "': not a builtin id or a readable file");
}

Chain resolve_chain(const std::string& name_or_path) {
    for (const std::string& n : builtin_chain_names())
        if (n == name_or_path) return builtin_chain(name_or_path);
    if (std::filesystem::exists(name_or_path)) return load_chain_file(name_or_path);
    throw SpecError("unknown chain '" + name_or_path + "': not a builtin name or a readable file");
}

}  // namespace gyre
