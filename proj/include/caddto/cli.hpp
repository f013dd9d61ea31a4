// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "caddto/baselines.hpp"
#include "caddto/config.hpp"
#include "caddto/environment.hpp"
#include "caddto/experiments.hpp"
#include "caddto/nn/checkpoint.hpp"
#include "caddto/ppo/trainer.hpp"
#include "caddto/profiler.hpp"

namespace caddto::cli {

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

inline void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.overrides, "Override one config key (key=value), repeatable");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--out", o.out_dir, "Output directory");
}

inline SystemConfig resolve_config(const CommonOptions& o) {
  SystemConfig c = o.config_path.empty() ? default_config() : load_config(o.config_path);
  for (const auto& kv : o.overrides) c = apply_override(c, kv);
  if (o.seed) c.seed = *o.seed;
  validate(c);
  return c;
}

inline std::filesystem::path prepare_out(const CommonOptions& o, const std::string& subcommand) {
  const std::filesystem::path dir = o.out_dir.empty() ? std::filesystem::path("runs") / subcommand : std::filesystem::path(o.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

inline void write_snapshot(const std::filesystem::path& dir, const SystemConfig& c) {
  write_file(dir / "config.snapshot", write_config(c));
}

/// Rebuilds a policy from a checkpoint; the input width tells apart the
/// per-user and the joint actor.
inline std::shared_ptr<const nn::GaussianPolicy> load_policy(const std::string& path, const SystemConfig& c,
                                                             bool& centralized) {
  nn::Checkpoint ck = nn::load_checkpoint(path);
  const int in = ck.net.input_dim();
  centralized = in != static_cast<int>(Observation::dim);
  const ppo::AgentLayout layout{centralized, c.num_users};
  if (in != layout.obs_dim() || ck.net.output_dim() != layout.act_dim()) {
    throw UsageError("checkpoint shape does not match num_users=" + std::to_string(c.num_users));
  }
  auto p = std::make_shared<nn::GaussianPolicy>(std::move(ck.net), layout.action_scale(c), c.ppo.init_log_std);
  if (ck.log_std) p->log_std = *ck.log_std;
  return p;
}

inline std::vector<PolicyKind> parse_policy_list(const std::vector<std::string>& tokens) {
  std::vector<PolicyKind> out;
  for (const auto& t : tokens) {
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      if (item == "all") {
        out.assign(std::begin(kAllPolicies), std::end(kAllPolicies));
        continue;
      }
      const auto k = parse_policy(item);
      if (!k) throw UsageError("unknown policy '" + item + "'");
      out.push_back(*k);
    }
  }
  if (out.empty()) throw UsageError("no policies given");
  return out;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  CommonOptions common;
  long long steps = -1;
  bool centralized = false;
  bool quiet = false;
};

inline int cmd_train(const TrainArgs& a, std::ostream& out) {
  const SystemConfig c = resolve_config(a.common);
  const auto dir = prepare_out(a.common, "train");
  write_snapshot(dir, c);
  ppo::TrainOptions opt;
  opt.total_steps = a.steps;
  opt.centralized = a.centralized;
  if (!a.quiet) {
    opt.on_update = [&out](const ppo::TrainReport& r) {
      out << "update " << r.update_index << " steps " << r.env_steps << " reward " << r.mean_episode_reward
          << " entropy " << r.entropy << std::endl;
    };
  }
  const ppo::TrainResult result = ppo::train(c, opt);
  std::ostringstream curve;
  ppo::write_curve_csv(curve, result.curve);
  write_file(dir / "curves.csv", curve.str());
  nn::save_checkpoint(result.best_policy.trunk, (dir / "checkpoint.bin").string(), &result.best_policy.log_std);
  nn::save_checkpoint(result.policy.trunk, (dir / "final.bin").string(), &result.policy.log_std);
  nn::save_checkpoint(result.critic, (dir / "critic.bin").string());
  out << "wrote " << result.curve.size() << " updates to " << dir.string() << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  CommonOptions common;
  std::string policy = "greedy";
  std::string checkpoint;
  int runs = -1;
  int episodes = -1;
  bool stochastic = false;
};

inline JointPolicy policy_for(PolicyKind kind, const std::string& checkpoint, const SystemConfig& c) {
  if (!is_learned(kind)) return make_rule_policy(kind, c);
  if (checkpoint.empty()) throw UsageError(std::string(policy_name(kind)) + " needs --checkpoint");
  bool centralized = false;
  auto actor = load_policy(checkpoint, c, centralized);
  if (centralized != (kind == PolicyKind::CentralizedPpo)) {
    throw UsageError("checkpoint layout does not match policy " + std::string(policy_name(kind)));
  }
  return make_learned_policy(std::move(actor), centralized, c.stochastic_eval);
}

inline int cmd_eval(const EvalArgs& a, std::ostream& out) {
  SystemConfig c = resolve_config(a.common);
  if (a.stochastic) c.stochastic_eval = true;
  const auto kind = parse_policy(a.policy);
  if (!kind) throw UsageError("unknown policy '" + a.policy + "'");
  const auto dir = prepare_out(a.common, "eval");
  write_snapshot(dir, c);
  const JointPolicy policy = policy_for(*kind, a.checkpoint, c);
  const int runs = a.runs > 0 ? a.runs : c.eval_runs;
  const int episodes = a.episodes > 0 ? a.episodes : c.eval_episodes_per_run;
  const AggregateRecord rec = evaluate(*kind, policy, c, runs, episodes);
  std::ostringstream csv;
  write_results_csv(csv, std::span<const AggregateRecord>(&rec, 1));
  write_file(dir / "eval.csv", csv.str());
  for (std::size_t m = 0; m < kNumMetrics; ++m) {
    out << kMetricNames[m] << ' ' << rec.stats[m].mean << " +- " << rec.stats[m].std << '\n';
  }
  out.flush();
  return 0;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  CommonOptions common;
  std::string kind = "arrival";
  std::vector<std::string> policies{"greedy,local,offload,dpp"};
  std::vector<double> values;
  std::string checkpoint;
  long long train_steps = 20480;
  int runs = -1;
  int episodes = -1;
  bool full_scale = false;
};

inline int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  SystemConfig c = resolve_config(a.common);
  std::string var;
  std::vector<double> values = a.values;
  if (a.kind == "arrival") {
    var = "arrival_rate_mean";
    if (values.empty()) values = {2, 4, 6, 8, 10};
  } else if (a.kind == "energy") {
    var = "harvest_rate_mean";
    if (values.empty()) values = {1, 2, 3, 4, 5};
  } else if (a.kind == "users") {
    var = "num_users";
    if (values.empty()) values = {5, 10, 20, 50};
  } else {
    throw UsageError("--kind must be arrival, energy or users");
  }
  const auto policies = parse_policy_list(a.policies);
  const auto dir = prepare_out(a.common, "sweep");
  write_snapshot(dir, c);

  // Learned policies: a checkpoint if given, otherwise a short training run.
  // The per-user actor is shared across sweep values; the joint actor
  // depends on the user count and is trained once per U.
  std::shared_ptr<const nn::GaussianPolicy> shared_actor;
  std::map<int, std::shared_ptr<const nn::GaussianPolicy>> joint_actors;
  const PolicyFactory factory = [&](PolicyKind k, const SystemConfig& vc) -> JointPolicy {
    if (!is_learned(k)) return make_rule_policy(k, vc);
    if (k == PolicyKind::CaddtoPpo) {
      if (!shared_actor) {
        if (!a.checkpoint.empty()) {
          bool centralized = false;
          shared_actor = load_policy(a.checkpoint, c, centralized);
          if (centralized) throw UsageError("--checkpoint must hold a per-user actor");
        } else {
          out << "training CADDTO-PPO for " << a.train_steps << " steps" << std::endl;
          shared_actor = std::make_shared<nn::GaussianPolicy>(ppo::train(c, {a.train_steps, false, {}}).best_policy);
        }
      }
      return make_learned_policy(shared_actor, false, vc.stochastic_eval);
    }
    auto& actor = joint_actors[vc.num_users];
    if (!actor) {
      out << "training Centralized-PPO (U=" << vc.num_users << ") for " << a.train_steps << " steps" << std::endl;
      actor = std::make_shared<nn::GaussianPolicy>(ppo::train(vc, {a.train_steps, true, {}}).best_policy);
    }
    return make_learned_policy(actor, true, vc.stochastic_eval);
  };

  SweepOptions opt;
  opt.n_runs = a.runs > 0 ? a.runs : (a.full_scale ? 100 : c.eval_runs);
  opt.episodes_per_run = a.episodes > 0 ? a.episodes : c.eval_episodes_per_run;
  opt.record_latency = a.kind == "users";
  const auto records = run_sweep(policies, c, var, values, factory, opt);

  std::ostringstream csv;
  write_results_csv(csv, records);
  write_file(dir / ("sweep_" + a.kind + ".csv"), csv.str());
  write_file(dir / "tradeoff.csv", tradeoff_scatter(records));
  if (opt.record_latency) {
    // Timings vary run to run, so they stay out of the CSVs.
    std::ostringstream lat;
    for (const auto& r : records) {
      lat << policy_name(r.policy) << " U=" << r.sweep_value << " per_agent_ms=" << r.latency_ms_per_agent << '\n';
    }
    write_file(dir / "latency.txt", lat.str());
    out << lat.str();
  }
  out << "wrote " << records.size() << " records to " << dir.string() << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------

struct ProfileArgs {
  CommonOptions common;
  std::string checkpoint;
  int iterations = 5000;
};

inline int cmd_profile(const ProfileArgs& a, std::ostream& out) {
  const SystemConfig c = resolve_config(a.common);
  std::shared_ptr<const nn::GaussianPolicy> actor;
  if (!a.checkpoint.empty()) {
    bool centralized = false;
    actor = load_policy(a.checkpoint, c, centralized);
  } else {
    Rng rng = c.rng_stream(ppo::kStreamInit);
    actor = std::make_shared<nn::GaussianPolicy>(ppo::make_actor({false, c.num_users}, c, rng));
  }
  const auto report = profiler::profile(*actor, c, a.iterations);
  out << profiler::format_report(report);
  out.flush();
  if (!a.common.out_dir.empty()) {
    const auto dir = prepare_out(a.common, "profile");
    write_snapshot(dir, c);
    write_file(dir / "profile.csv", profiler::complexity_csv(report));
    write_file(dir / "profile.txt", profiler::format_report(report));
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct TraceArgs {
  CommonOptions common;
  std::string policy = "greedy";
  std::string checkpoint;
  int episodes = 1;
};

inline int cmd_trace(const TraceArgs& a, std::ostream& out) {
  const SystemConfig c = resolve_config(a.common);
  const auto kind = parse_policy(a.policy);
  if (!kind) throw UsageError("unknown policy '" + a.policy + "'");
  const auto dir = prepare_out(a.common, "trace");
  write_snapshot(dir, c);
  const JointPolicy policy = policy_for(*kind, a.checkpoint, c);
  std::vector<StepInfo> history;
  (void)run_episodes(*kind, policy, c, 0, a.episodes, &history);
  std::ostringstream csv;
  write_trace_header(csv);
  for (const auto& info : history) write_trace_rows(csv, info);
  write_file(dir / "trace.csv", csv.str());
  out << "wrote " << history.size() << " slots to " << dir.string() << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------

/// Entry point. Exit codes: 0 success, 1 usage error, 2 runtime failure.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Carbon-aware multi-user edge offloading simulator and PPO trainer", "caddto"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the shared-parameter PPO policy");
  add_common(train_cmd, train.common);
  train_cmd->add_option("--steps", train.steps, "Environment slot budget (default episodes * episode_len)");
  train_cmd->add_flag("--centralized", train.centralized, "Train one joint actor over all users");
  train_cmd->add_flag("--quiet", train.quiet, "No per-update progress");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate one policy over seeded runs");
  add_common(eval_cmd, eval.common);
  eval_cmd->add_option("--policy", eval.policy, "caddto|central|dpp|greedy|local|offload");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Actor checkpoint for learned policies")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--runs", eval.runs, "Independent runs");
  eval_cmd->add_option("--episodes", eval.episodes, "Episodes per run");
  eval_cmd->add_flag("--stochastic", eval.stochastic, "Sample actions instead of the policy mean");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep arrival rate, harvest rate or user count");
  add_common(sweep_cmd, sweep.common);
  sweep_cmd->add_option("--kind", sweep.kind, "arrival|energy|users");
  sweep_cmd->add_option("--policies", sweep.policies, "Comma-separated policy list, or 'all'");
  sweep_cmd->add_option("--values", sweep.values, "Sweep values (defaults per kind)");
  sweep_cmd->add_option("--checkpoint", sweep.checkpoint, "Per-user actor checkpoint")->check(CLI::ExistingFile);
  sweep_cmd->add_option("--train-steps", sweep.train_steps, "Training budget for learned policies without a checkpoint");
  sweep_cmd->add_option("--runs", sweep.runs, "Independent runs per cell");
  sweep_cmd->add_option("--episodes", sweep.episodes, "Episodes per run");
  sweep_cmd->add_flag("--full-scale", sweep.full_scale, "100 runs per cell");

  ProfileArgs prof;
  auto* prof_cmd = app.add_subcommand("profile", "Model complexity and inference latency report");
  add_common(prof_cmd, prof.common);
  prof_cmd->add_option("--checkpoint", prof.checkpoint, "Profile this actor instead of a fresh one")
      ->check(CLI::ExistingFile);
  prof_cmd->add_option("--iterations", prof.iterations, "Timed forward passes")->check(CLI::Range(1000, 100000000));

  TraceArgs trace;
  auto* trace_cmd = app.add_subcommand("trace", "Export a per-slot trace");
  add_common(trace_cmd, trace.common);
  trace_cmd->add_option("--policy", trace.policy, "caddto|central|dpp|greedy|local|offload");
  trace_cmd->add_option("--checkpoint", trace.checkpoint, "Actor checkpoint for learned policies")
      ->check(CLI::ExistingFile);
  trace_cmd->add_option("--episodes", trace.episodes, "Episodes to trace")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) return cmd_train(train, out);
    if (*eval_cmd) return cmd_eval(eval, out);
    if (*sweep_cmd) return cmd_sweep(sweep, out);
    if (*prof_cmd) return cmd_profile(prof, out);
    if (*trace_cmd) return cmd_trace(trace, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return 1;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace caddto::cli
