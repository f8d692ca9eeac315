#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "rql/errors.hpp"

// rql: recurrent Q-learning on a built-in flickering mini-Pong POMDP.
// Subcommands: train, eval, sweep, bench, variants. All outputs are CSV
// plus binary checkpoints; every command is deterministic for a fixed
// config and seed (bench timings excepted).

int main(int argc, char** argv) {
  CLI::App app{"rql - recurrent deep Q-learning engine"};
  app.require_subcommand(1);

  rql::cli::TrainArgs train_args;
  uint64_t train_seed = 0;
  auto* train = app.add_subcommand("train", "Train an agent from a config file");
  train->add_option("--config", train_args.config_path,
                    "Experiment config file");
  train->add_option("--out", train_args.out_dir, "Output directory root");
  train->add_option("--run-id", train_args.run_id_override,
                    "Override the config run_id");
  auto* train_seed_opt =
      train->add_option("--seed", train_seed, "Override the config seed");
  train->add_option("--resume", train_args.resume_checkpoint,
                    "Resume from a checkpoint (config comes from it)");
  train->add_flag("--quiet", train_args.quiet, "Suppress progress lines");

  rql::cli::EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpointed policy");
  eval->add_option("--checkpoint", eval_args.checkpoint, "Policy checkpoint")
      ->required();
  eval->add_option("--episodes", eval_args.episodes, "Episodes to play");
  eval->add_option("--flicker-p", eval_args.flicker_p,
                   "Observation obscure probability");
  eval->add_option("--seed", eval_args.seed, "Evaluation seed");
  eval->add_option("--out", eval_args.out_csv, "Per-episode score CSV");
  eval->add_option("--dump", eval_args.dump_dir,
                   "Dump one episode: trajectory CSV + PGM frames");

  rql::cli::SweepArgs sweep_args;
  auto* sweep = app.add_subcommand(
      "sweep", "Evaluate a DRQN/DQN pair across obscure probabilities");
  sweep->add_option("--checkpoint-drqn", sweep_args.checkpoint_drqn,
                    "DRQN checkpoint")->required();
  sweep->add_option("--checkpoint-dqn", sweep_args.checkpoint_dqn,
                    "DQN checkpoint")->required();
  sweep->add_option("--p-list", sweep_args.p_list,
                    "Obscure probabilities to evaluate")->delimiter(',');
  sweep->add_option("--episodes", sweep_args.episodes, "Episodes per point");
  sweep->add_option("--seed", sweep_args.seed, "Evaluation seed");
  sweep->add_option("--out", sweep_args.out_csv, "Output CSV");

  rql::cli::BenchArgs bench_args;
  auto* bench = app.add_subcommand(
      "bench", "Time forward/backward passes per architecture");
  bench->add_option("--frames", bench_args.frames, "Stacked input frames")
      ->delimiter(',');
  bench->add_option("--unrolls", bench_args.unrolls, "BPTT unroll lengths")
      ->delimiter(',');
  bench->add_option("--trials", bench_args.trials, "Timed passes per cell");
  bench->add_option("--warmup", bench_args.warmup, "Untimed warmup passes");
  bench->add_option("--input-size", bench_args.input_size, "Frame edge length");
  bench->add_option("--out", bench_args.out_csv, "Output CSV");

  rql::cli::VariantsArgs variants_args;
  uint64_t variants_seed = 0;
  auto* variants = app.add_subcommand(
      "variants", "Train and rank the alternative recurrent architectures");
  variants->add_option("--config", variants_args.config_path,
                       "Base experiment config")->required();
  variants->add_option("--out", variants_args.out_dir, "Output directory root");
  auto* variants_seed_opt = variants->add_option("--seed", variants_seed,
                                                 "Override the config seed");
  variants->add_flag("--quiet", variants_args.quiet, "Suppress progress lines");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      if (train_args.resume_checkpoint.empty() && train_args.config_path.empty()) {
        throw rql::ConfigError("train needs --config (or --resume)");
      }
      if (train_seed_opt->count() > 0) train_args.seed_override = train_seed;
      return rql::cli::cmd_train(train_args);
    }
    if (*eval) return rql::cli::cmd_eval(eval_args);
    if (*sweep) return rql::cli::cmd_sweep(sweep_args);
    if (*bench) return rql::cli::cmd_bench(bench_args);
    if (*variants) {
      if (variants_seed_opt->count() > 0) {
        variants_args.seed_override = variants_seed;
      }
      return rql::cli::cmd_variants(variants_args);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
