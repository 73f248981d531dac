#include "gyre/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "gyre/config.hpp"
#include "gyre/hash.hpp"
#include "gyre/incremental.hpp"
#include "gyre/manifest.hpp"
#include "gyre/saliency.hpp"

namespace gyre {

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string out_dir;
    std::string config_path;
    uint64_t seed = 1;
};

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw std::runtime_error("cannot create directory: " + dir);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << text;
}

TrainConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return TrainConfig{};
    return load_train_config_file(path);
}

std::vector<uint64_t> parse_seed_list(const std::string& text) {
    std::vector<uint64_t> seeds;
    std::string cur;
    for (char c : text + ",") {
        if (c == ',') {
            if (!cur.empty()) {
                seeds.push_back(std::stoull(cur));
                cur.clear();
            }
        } else if (c == ' ') {
            continue;
        } else {
            cur += c;
        }
    }
    if (seeds.empty()) throw SpecError("--seeds: no seeds given");
    return seeds;
}

// --- list-envs ---------------------------------------------------------------

int cmd_list_envs(bool as_json, const std::string& out_dir,
                  const std::vector<std::string>& argv) {
    const std::vector<EnvSpec> specs = builtin_specs();  // sorted by id

    nlohmann::ordered_json j;
    nlohmann::ordered_json envs = nlohmann::ordered_json::array();
    for (const EnvSpec& s : specs) envs.push_back(env_spec_to_json(s));
    j["envs"] = envs;
    nlohmann::ordered_json chains = nlohmann::ordered_json::object();
    for (const std::string& name : builtin_chain_names()) {
        nlohmann::ordered_json ids = nlohmann::ordered_json::array();
        for (const EnvSpec& s : builtin_chain(name).specs) ids.push_back(s.id);
        chains[name] = ids;
    }
    j["chains"] = chains;

    if (as_json) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::printf("%-4s %-17s %7s %9s %6s %6s %7s %9s %5s\n", "id", "generator", "speed",
                    "interval", "gap", "ramp", "drift", "reversal", "cost");
        for (const EnvSpec& s : specs) {
            std::string gen = generator_name(s.generator);
            if (s.generator == PatternGenerator::Composite) {
                gen += "(";
                for (size_t i = 0; i < s.components.size(); ++i)
                    gen += std::string(i ? "+" : "") + generator_name(s.components[i]);
                gen += ")";
            }
            std::printf("%-4s %-17s %7.2f %9lld %6.2f %6.3f %7.4f %9s %5.1f\n", s.id.c_str(),
                        gen.c_str(), s.base_wall_speed,
                        static_cast<long long>(s.base_spawn_interval), s.gap_width,
                        s.difficulty_ramp, s.rotation_drift,
                        s.reversal_period ? std::to_string(*s.reversal_period).c_str() : "-",
                        s.cost_per_step);
        }
        for (const std::string& name : builtin_chain_names()) {
            std::printf("chain %-9s:", name.c_str());
            for (const EnvSpec& s : builtin_chain(name).specs) std::printf(" %s", s.id.c_str());
            std::printf("\n");
        }
    }

    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        save_json_file((fs::path(out_dir) / "envs.json").string(), j);
        RunManifest m;
        m.command = "list-envs";
        m.argv = argv;
        m.config = j;
        m.record_output(out_dir, "envs.json");
        m.write(out_dir);
    }
    return kExitOk;
}

// --- train -------------------------------------------------------------------

int cmd_train(const std::string& env_id, const CommonOpts& opts, int64_t steps_override,
              const std::string& init_ckpt, const std::vector<std::string>& argv) {
    const EnvSpec spec = resolve_env(env_id);
    TrainConfig cfg = load_config_or_default(opts.config_path);
    if (steps_override >= 0) cfg.step_budget = steps_override;
    cfg.validate();

    BudgetLedger ledger(cfg.budget_m, {spec.cost_per_step});

    TrainResult result;
    if (init_ckpt.empty()) {
        result = train_baseline(spec, cfg, opts.seed, &ledger, 0);
    } else {
        const std::vector<uint8_t> prev = read_file(init_ckpt);
        result = train_incremental(spec, prev, cfg, opts.seed, &ledger, 0);
    }

    ensure_dir(opts.out_dir);
    write_file((fs::path(opts.out_dir) / "checkpoint.ckpt").string(), result.checkpoint);
    write_text((fs::path(opts.out_dir) / "train_log.csv").string(), result.log_csv());
    write_text((fs::path(opts.out_dir) / "ledger_audit.csv").string(), ledger.audit_csv());

    RunManifest m;
    m.command = "train";
    m.argv = argv;
    m.config = train_config_to_json(cfg);
    m.config["env"] = env_spec_to_json(spec);
    m.seeds = {opts.seed};
    m.env_steps = result.env_steps;
    m.updates = result.updates;
    m.checkpoint_hashes.emplace_back("checkpoint.ckpt",
                                     hex64(checkpoint_hash(result.checkpoint)));
    m.record_output(opts.out_dir, "checkpoint.ckpt");
    m.record_output(opts.out_dir, "train_log.csv");
    m.record_output(opts.out_dir, "ledger_audit.csv");
    m.write(opts.out_dir);

    std::printf("env=%s episodes=%zu env_steps=%lld updates=%lld best_reward=%.2f%s\n",
                spec.id.c_str(), result.log.size(), static_cast<long long>(result.env_steps),
                static_cast<long long>(result.updates), result.meta.best_episode_reward,
                result.budget_truncated ? " budget_truncated=1" : "");
    return result.budget_truncated ? kExitBudget : kExitOk;
}

// --- eval ---------------------------------------------------------------------

int cmd_eval(const std::string& ckpt_path, const std::string& env_id, const CommonOpts& opts,
             int64_t steps_override, const std::vector<std::string>& argv) {
    const EnvSpec spec = resolve_env(env_id);
    TrainConfig cfg = load_config_or_default(opts.config_path);
    const int64_t eval_steps = steps_override >= 0 ? steps_override : cfg.eval_steps;
    if (eval_steps < 1) throw SpecError("eval: --steps must be positive");

    const std::vector<uint8_t> bytes = read_file(ckpt_path);
    LoadedCheckpoint ckpt = load_checkpoint_expect(bytes, NetArch::standard());
    const EvalReport rep = evaluate(ckpt.params, spec, eval_steps, opts.seed);

    std::printf("env=%s checkpoint=%s max=%.2f mean=%.2f episodes=%lld steps=%lld\n",
                spec.id.c_str(), hex64(checkpoint_hash(bytes)).c_str(), rep.max_reward,
                rep.mean_reward, static_cast<long long>(rep.episodes),
                static_cast<long long>(rep.eval_steps));

    if (!opts.out_dir.empty()) {
        ensure_dir(opts.out_dir);
        char buf[256];
        std::snprintf(buf, sizeof(buf), "env,max_reward,mean_reward,episodes,eval_steps\n%s,%.2f,%.2f,%lld,%lld\n",
                      spec.id.c_str(), rep.max_reward, rep.mean_reward,
                      static_cast<long long>(rep.episodes),
                      static_cast<long long>(rep.eval_steps));
        write_text((fs::path(opts.out_dir) / "eval.csv").string(), buf);
        RunManifest m;
        m.command = "eval";
        m.argv = argv;
        m.config = train_config_to_json(cfg);
        m.config["env"] = env_spec_to_json(spec);
        m.seeds = {opts.seed};
        m.env_steps = rep.eval_steps;
        m.checkpoint_hashes.emplace_back(ckpt_path, hex64(checkpoint_hash(bytes)));
        m.record_output(opts.out_dir, "eval.csv");
        m.write(opts.out_dir);
    }
    return kExitOk;
}

// --- chain ---------------------------------------------------------------------

int cmd_chain(const std::string& chain_name, const CommonOpts& opts, const std::string& seeds_text,
              const std::vector<std::string>& argv) {
    const Chain chain = resolve_chain(chain_name);
    const TrainConfig cfg = load_config_or_default(opts.config_path);
    const std::vector<uint64_t> seeds = parse_seed_list(seeds_text);

    ensure_dir(opts.out_dir);
    RunManifest m;
    m.command = "chain";
    m.argv = argv;
    m.config = train_config_to_json(cfg);
    m.config["chain"] = chain_to_json(chain)["chain"];
    m.seeds = seeds;

    std::vector<ChainResult> results;
    bool any_truncated = false;
    for (uint64_t seed : seeds) {
        ChainResult r = run_chain(chain, cfg, seed);
        any_truncated = any_truncated || r.truncated;

        const std::string seed_dir_rel = "seed_" + std::to_string(seed);
        const std::string seed_dir = (fs::path(opts.out_dir) / seed_dir_rel).string();
        ensure_dir(seed_dir);
        for (size_t i = 0; i < r.grid.size(); ++i) {
            if (!r.baseline_ckpts[i].empty()) {
                const std::string rel = seed_dir_rel + "/w_" + std::to_string(i + 1) + ".ckpt";
                write_file((fs::path(opts.out_dir) / rel).string(), r.baseline_ckpts[i]);
                m.checkpoint_hashes.emplace_back(rel, hex64(checkpoint_hash(r.baseline_ckpts[i])));
                m.record_output(opts.out_dir, rel);
            }
            if (!r.incremental_ckpts[i].empty()) {
                const std::string rel =
                    seed_dir_rel + "/w_inc_" + std::to_string(i + 1) + ".ckpt";
                write_file((fs::path(opts.out_dir) / rel).string(), r.incremental_ckpts[i]);
                m.checkpoint_hashes.emplace_back(rel,
                                                 hex64(checkpoint_hash(r.incremental_ckpts[i])));
                m.record_output(opts.out_dir, rel);
            }
        }
        for (size_t i = 0; i < r.baseline_runs.size(); ++i) {
            const std::string rel =
                seed_dir_rel + "/baseline_" + std::to_string(i + 1) + "_log.csv";
            write_text((fs::path(opts.out_dir) / rel).string(), r.baseline_runs[i].log_csv());
            m.record_output(opts.out_dir, rel);
        }
        for (size_t i = 0; i < r.incremental_runs.size(); ++i) {
            const std::string rel =
                seed_dir_rel + "/incremental_" + std::to_string(i + 2) + "_log.csv";
            write_text((fs::path(opts.out_dir) / rel).string(), r.incremental_runs[i].log_csv());
            m.record_output(opts.out_dir, rel);
        }
        {
            std::string csv = "env_index,env_id,steps,cost_per_step,cumulative_cost,kind\n";
            char line[256];
            for (const auto& e : r.audit) {
                std::snprintf(line, sizeof(line), "%d,%s,%lld,%.6f,%.6f,%s\n", e.env_index,
                              chain.specs[static_cast<size_t>(e.env_index)].id.c_str(),
                              static_cast<long long>(e.steps), e.cost_per_step,
                              e.cumulative_cost, e.kind.c_str());
                csv += line;
            }
            const std::string rel = seed_dir_rel + "/ledger_audit.csv";
            write_text((fs::path(opts.out_dir) / rel).string(), csv);
            m.record_output(opts.out_dir, rel);
        }
        results.push_back(std::move(r));
    }

    const AggregatedChain agg = aggregate_chain_results(results);
    const std::string table = render_chain_table(agg.env_ids, agg.max_cells, agg.mean_cells);
    write_text((fs::path(opts.out_dir) / "results_table.txt").string(), table);
    write_text((fs::path(opts.out_dir) / "results_raw.csv").string(),
               chain_results_csv(results));
    m.record_output(opts.out_dir, "results_table.txt");
    m.record_output(opts.out_dir, "results_raw.csv");
    int64_t total_steps = 0;
    for (const ChainResult& r : results)
        for (const auto& e : r.audit) total_steps += e.steps;
    m.env_steps = total_steps;
    m.write(opts.out_dir);

    std::cout << table;
    return any_truncated ? kExitBudget : kExitOk;
}

// --- saliency -------------------------------------------------------------------

int cmd_saliency(const std::string& ckpt_path, const std::string& env_id, const CommonOpts& opts,
                 int64_t max_steps, const std::vector<std::string>& argv) {
    const EnvSpec spec = resolve_env(env_id);
    const std::vector<uint8_t> bytes = read_file(ckpt_path);
    LoadedCheckpoint ckpt = load_checkpoint_expect(bytes, NetArch::standard());

    ensure_dir(opts.out_dir);
    const SaliencyEpisodeResult res =
        episode_saliency(ckpt.params, spec, opts.seed, opts.out_dir, max_steps);

    RunManifest m;
    m.command = "saliency";
    m.argv = argv;
    m.config["env"] = env_spec_to_json(spec);
    m.seeds = {opts.seed};
    m.env_steps = res.steps;
    m.checkpoint_hashes.emplace_back(ckpt_path, hex64(checkpoint_hash(bytes)));
    for (const std::string& f : res.files)
        m.record_output(opts.out_dir, fs::path(f).filename().string());
    m.write(opts.out_dir);

    std::printf("env=%s steps=%lld files=%zu reward=%.2f\n", spec.id.c_str(),
                static_cast<long long>(res.steps), res.files.size(), res.episode_reward);
    return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return cli_main(args);
}

int cli_main(const std::vector<std::string>& args) {
    CLI::App app{"continual-RL toolkit: polar survival environments, actor-critic training, "
                 "incremental chains, saliency maps"};
    app.name("gyre");
    app.require_subcommand(1);

    // list-envs
    auto* list_cmd = app.add_subcommand("list-envs", "list built-in environments and chains");
    bool list_json = false;
    std::string list_out;
    list_cmd->add_flag("--json", list_json, "emit machine-readable JSON");
    list_cmd->add_option("--out", list_out, "optional output directory");

    // train
    auto* train_cmd = app.add_subcommand("train", "train on one environment");
    std::string train_env, train_init;
    CommonOpts train_opts;
    int64_t train_steps = -1;
    train_cmd->add_option("--env", train_env, "builtin env id or env spec file")->required();
    train_cmd->add_option("--steps", train_steps, "environment step budget");
    train_cmd->add_option("--seed", train_opts.seed, "root seed");
    train_cmd->add_option("--init", train_init, "initial weights checkpoint");
    train_cmd->add_option("--out", train_opts.out_dir, "output directory")->required();
    train_cmd->add_option("--config", train_opts.config_path, "train config JSON");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint without training");
    std::string eval_env, eval_ckpt;
    CommonOpts eval_opts;
    int64_t eval_steps = -1;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--env", eval_env, "builtin env id or env spec file")->required();
    eval_cmd->add_option("--steps", eval_steps, "evaluation step budget");
    eval_cmd->add_option("--seed", eval_opts.seed, "root seed");
    eval_cmd->add_option("--out", eval_opts.out_dir, "optional output directory");
    eval_cmd->add_option("--config", eval_opts.config_path, "train config JSON");

    // chain
    auto* chain_cmd = app.add_subcommand("chain", "run the four-model protocol over a chain");
    std::string chain_name, chain_seeds = "1";
    CommonOpts chain_opts;
    chain_cmd->add_option("--chain", chain_name, "builtin chain name or chain file")->required();
    chain_cmd->add_option("--config", chain_opts.config_path, "train config JSON");
    chain_cmd->add_option("--seeds", chain_seeds, "comma-separated seed list");
    chain_cmd->add_option("--out", chain_opts.out_dir, "output directory")->required();

    // saliency
    auto* sal_cmd = app.add_subcommand("saliency", "emit per-step saliency images");
    std::string sal_env, sal_ckpt;
    CommonOpts sal_opts;
    int64_t sal_max_steps = 0;
    sal_cmd->add_option("--checkpoint", sal_ckpt, "checkpoint file")->required();
    sal_cmd->add_option("--env", sal_env, "builtin env id or env spec file")->required();
    sal_cmd->add_option("--seed", sal_opts.seed, "episode seed");
    sal_cmd->add_option("--out", sal_opts.out_dir, "output directory")->required();
    sal_cmd->add_option("--max-steps", sal_max_steps, "truncate the episode (0 = play out)");

    std::vector<const char*> cargs;
    cargs.push_back("gyre");
    for (const std::string& a : args) cargs.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*list_cmd) return cmd_list_envs(list_json, list_out, args);
        if (*train_cmd) return cmd_train(train_env, train_opts, train_steps, train_init, args);
        if (*eval_cmd) return cmd_eval(eval_ckpt, eval_env, eval_opts, eval_steps, args);
        if (*chain_cmd) return cmd_chain(chain_name, chain_opts, chain_seeds, args);
        if (*sal_cmd) return cmd_saliency(sal_ckpt, sal_env, sal_opts, sal_max_steps, args);
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const CheckpointError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind == CheckpointError::Kind::ShapeMismatch ? kExitUsage : kExitIo;
    } catch (const BudgetExceeded& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBudget;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitUsage;
}

}  // namespace gyre
