#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <memory>

#include "rql/agent.hpp"
#include "rql/checkpoint.hpp"
#include "rql/config.hpp"
#include "rql/errors.hpp"
#include "rql/metrics.hpp"
#include "rql/pong.hpp"
#include "rql/trainer.hpp"

namespace fs = std::filesystem;

namespace rql::cli {

namespace {

// A run's outputs live under out_dir/run_id; colliding with an existing run
// is an error, never an overwrite.
fs::path claim_run_dir(const std::string& out_dir, const std::string& run_id) {
  const fs::path dir = fs::path(out_dir) / run_id;
  if (fs::exists(dir)) {
    throw ConfigError("run id collision: " + dir.string() + " already exists");
  }
  fs::create_directories(dir);
  return dir;
}

struct LoadedCheckpoint {
  ExperimentConfig config;
  NetworkF net;
  ParamsF params;
};

LoadedCheckpoint load_policy(const std::string& path) {
  const CheckpointReader r(path);
  ExperimentConfig cfg = ExperimentConfig::from_string(r.str("meta/config"));
  NetworkF net(cfg.network_spec(kPongNumActions));
  ParamsF params = r.read_params("params", net.zero_params());
  return LoadedCheckpoint{std::move(cfg), std::move(net), std::move(params)};
}

EnvFactory pong_factory(const ExperimentConfig& cfg) {
  const PongConfig pong = cfg.pong_config();
  return [pong]() { return std::make_unique<PongEnv>(pong); };
}

int run_training(ExperimentConfig cfg, const fs::path& run_dir, bool quiet,
                 const std::string& resume_checkpoint) {
  cfg.save((run_dir / "config.cfg").string());

  CsvWriter metrics((run_dir / "metrics.csv").string(), "rql-metrics-v1",
                    "iteration,mean_score,std_score,epsilon,loss_ma");
  // wall-clock lives in its own file so metrics.csv stays byte-reproducible
  CsvWriter progress((run_dir / "progress.csv").string(), "rql-progress-v1",
                     "iteration,wall_seconds");

  Trainer trainer = resume_checkpoint.empty()
                        ? Trainer(cfg)
                        : Trainer::resume(resume_checkpoint);

  TrainHooks hooks;
  hooks.on_eval = [&](const EvalRecord& rec) {
    metrics.row({std::to_string(rec.iteration), csv_double(rec.mean_score),
                 csv_double(rec.std_score), csv_double(rec.epsilon),
                 csv_double(rec.loss_ma)});
    progress.row({std::to_string(rec.iteration), csv_double(rec.wall_seconds)});
    if (!quiet) {
      std::printf("iter %lld  mean %.3f  std %.3f  eps %.3f  loss %.5f\n",
                  static_cast<long long>(rec.iteration), rec.mean_score,
                  rec.std_score, rec.epsilon, rec.loss_ma);
      std::fflush(stdout);
    }
  };
  hooks.on_periodic_checkpoint = [&](int64_t iteration) {
    trainer.save_checkpoint(
        (run_dir / ("ckpt_" + std::to_string(iteration) + ".bin")).string());
  };

  trainer.run(hooks);
  trainer.save_checkpoint((run_dir / "final.ckpt").string());
  return 0;
}

}  // namespace

int cmd_train(const TrainArgs& args) {
  ExperimentConfig cfg;
  if (!args.resume_checkpoint.empty()) {
    const CheckpointReader r(args.resume_checkpoint);
    cfg = ExperimentConfig::from_string(r.str("meta/config"));
  } else {
    cfg = ExperimentConfig::load(args.config_path);
  }
  if (args.seed_override) cfg.train.seed = *args.seed_override;
  if (!args.run_id_override.empty()) cfg.run_id = args.run_id_override;
  cfg.validate();
  const fs::path run_dir = claim_run_dir(args.out_dir, cfg.run_id);
  return run_training(std::move(cfg), run_dir, args.quiet, args.resume_checkpoint);
}

namespace {

void dump_episode(const LoadedCheckpoint& policy, double flicker_p,
                  uint64_t seed, const std::string& dir) {
  fs::create_directories(dir);
  CsvWriter traj((fs::path(dir) / "trajectory.csv").string(), "rql-trajectory-v1",
                 "step,action,reward,obscured,done");

  FlickeringEnv env(pong_factory(policy.config)(), flicker_p,
                    derive_seed(seed, 0xD01));
  Rng act_rng(derive_seed(seed, 0xD02));
  Observation obs = env.reset(derive_seed(seed, 0xD03));
  const AgentKind kind = policy.config.agent_kind();
  auto state = nn::LstmState<float>::zeros(
      policy.net.spec().recurrent() ? policy.net.spec().head_units : 1);
  FrameHistory history(policy.config.stack_k);
  FrameHistory overlay_window(10);
  history.push(obs.frame);
  overlay_window.push(obs.frame);

  char name[64];
  int step = 0;
  bool done = false;
  while (!done) {
    std::snprintf(name, sizeof(name), "frame_%05d.pgm", step);
    write_pgm(obs.frame, (fs::path(dir) / name).string());
    const TensorF input = kind == AgentKind::kDqn ? history.stack() : obs.frame;
    auto ar = select_action(policy.net, policy.params, input,
                            kind == AgentKind::kDrqn ? &state : nullptr,
                            policy.config.train.eval_epsilon, act_rng);
    if (kind == AgentKind::kDrqn) state = std::move(ar.next_state);
    StepResult sr = env.step(ar.action);
    traj.row({std::to_string(step), std::to_string(ar.action),
              csv_double(sr.reward), sr.obs.obscured ? "1" : "0",
              sr.done ? "1" : "0"});
    done = sr.done;
    obs = std::move(sr.obs);
    history.push(obs.frame);
    overlay_window.push(obs.frame);
    ++step;
  }
  write_pgm(overlay_window.overlay(), (fs::path(dir) / "overlay_last10.pgm").string());
}

}  // namespace

int cmd_eval(const EvalArgs& args) {
  if (args.flicker_p < 0.0 || args.flicker_p > 1.0) {
    throw ConfigError("--flicker-p must be in [0,1]");
  }
  const LoadedCheckpoint policy = load_policy(args.checkpoint);
  const EvalResult result =
      evaluate(policy.net, policy.params, policy.config.agent_kind(),
               policy.config.stack_k, pong_factory(policy.config), args.episodes,
               args.flicker_p, policy.config.train.eval_epsilon, args.seed);

  if (!args.out_csv.empty()) {
    CsvWriter csv(args.out_csv, "rql-eval-v1", "episode,score");
    for (size_t i = 0; i < result.scores.size(); ++i) {
      csv.row({std::to_string(i), csv_double(result.scores[i])});
    }
  }
  if (!args.dump_dir.empty()) {
    dump_episode(policy, args.flicker_p, args.seed, args.dump_dir);
  }
  std::printf("mean_score %s\n", csv_double(result.mean).c_str());
  return 0;
}

int cmd_sweep(const SweepArgs& args) {
  for (double p : args.p_list) {
    if (p < 0.0 || p > 1.0) {
      throw ConfigError("sweep p values must lie in [0,1], got " +
                        csv_double(p));
    }
  }
  if (args.p_list.empty()) throw ConfigError("sweep needs at least one p value");

  struct Row {
    double p;
    std::string agent;
    double mean, stddev, fraction;
  };
  std::vector<Row> rows;

  const std::pair<std::string, std::string> jobs[2] = {
      {"drqn", args.checkpoint_drqn}, {"dqn", args.checkpoint_dqn}};
  for (const auto& [label, path] : jobs) {
    const LoadedCheckpoint policy = load_policy(path);
    auto eval_at = [&](double p) {
      return evaluate(policy.net, policy.params, policy.config.agent_kind(),
                      policy.config.stack_k, pong_factory(policy.config),
                      args.episodes, p, policy.config.train.eval_epsilon,
                      args.seed);
    };
    // own p=0 score is the base for the retained fraction
    const double base = eval_at(0.0).mean;
    for (double p : args.p_list) {
      const EvalResult r = eval_at(p);
      const double fraction = p == 0.0 ? 1.0 : (base != 0.0 ? r.mean / base : 0.0);
      rows.push_back({p, label, r.mean, r.stddev, fraction});
    }
  }

  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.p != b.p) return a.p < b.p;
    return a.agent < b.agent;
  });
  CsvWriter csv(args.out_csv, "rql-sweep-v1", "p,agent,mean,std,fraction");
  for (const Row& r : rows) {
    csv.row({csv_double(r.p), r.agent, csv_double(r.mean), csv_double(r.stddev),
             csv_double(r.fraction)});
  }
  std::printf("wrote %s\n", args.out_csv.c_str());
  return 0;
}

int cmd_variants(const VariantsArgs& args) {
  ExperimentConfig base = ExperimentConfig::load(args.config_path);
  if (args.seed_override) base.train.seed = *args.seed_override;
  base.agent = "drqn";

  const fs::path out_csv = fs::path(args.out_dir) / (base.run_id + "_variants.csv");
  if (fs::exists(out_csv)) {
    throw ConfigError("run id collision: " + out_csv.string() + " already exists");
  }

  struct Row {
    std::string variant;
    double mean, stddev;
    size_t params;
  };
  std::vector<Row> rows;
  for (const std::string variant :
       {"lstm", "relu_lstm", "lstm_over_fc", "relu_lstm_over_fc"}) {
    ExperimentConfig cfg = base;
    cfg.variant = variant;
    cfg.run_id = base.run_id + "_" + variant;
    cfg.validate();
    const fs::path run_dir = claim_run_dir(args.out_dir, cfg.run_id);
    cfg.save((run_dir / "config.cfg").string());

    Trainer trainer(cfg);
    EvalRecord last{};
    TrainHooks hooks;
    CsvWriter metrics((run_dir / "metrics.csv").string(), "rql-metrics-v1",
                      "iteration,mean_score,std_score,epsilon,loss_ma");
    hooks.on_eval = [&](const EvalRecord& rec) {
      last = rec;
      metrics.row({std::to_string(rec.iteration), csv_double(rec.mean_score),
                   csv_double(rec.std_score), csv_double(rec.epsilon),
                   csv_double(rec.loss_ma)});
      if (!args.quiet) {
        std::printf("[%s] iter %lld mean %.3f\n", variant.c_str(),
                    static_cast<long long>(rec.iteration), rec.mean_score);
        std::fflush(stdout);
      }
    };
    trainer.run(hooks);
    trainer.save_checkpoint((run_dir / "final.ckpt").string());
    rows.push_back({variant, last.mean_score, last.std_score,
                    trainer.agent().network().param_count()});
  }

  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.mean > b.mean; });
  CsvWriter csv(out_csv.string(), "rql-variants-v1",
                "variant,mean_score,std_score,param_count");
  for (const Row& r : rows) {
    csv.row({r.variant, csv_double(r.mean), csv_double(r.stddev),
             std::to_string(r.params)});
  }
  std::printf("wrote %s\n", out_csv.string().c_str());
  return 0;
}

}  // namespace rql::cli
