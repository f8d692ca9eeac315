#ifndef RQL_TRAINER_HPP
#define RQL_TRAINER_HPP

#include <functional>
#include <memory>
#include <string>

#include "rql/agent.hpp"
#include "rql/config.hpp"
#include "rql/env.hpp"
#include "rql/replay.hpp"

namespace rql {

struct EvalRecord {
  int64_t iteration = 0;
  double mean_score = 0.0;
  double std_score = 0.0;
  double epsilon = 0.0;
  double loss_ma = 0.0;       // exponential moving average of the train loss
  double wall_seconds = 0.0;  // measurement only; not part of the
                              // deterministic metrics contract
};

struct TrainHooks {
  std::function<void(const EvalRecord&)> on_eval;
  std::function<void(int64_t iteration)> on_periodic_checkpoint;
};

// Strictly sequential train loop: act, append to replay, one train step per
// environment step once the warmup transitions are collected, evaluate every
// eval_period iterations (plus once at the end). Deterministic for a fixed
// config and seed.
class Trainer {
 public:
  // env_factory overrides the built-in environment; tests inject synthetic
  // MDPs through this seam. Defaults to mini-Pong per the config.
  explicit Trainer(const ExperimentConfig& config, EnvFactory env_factory = {});

  void run(const TrainHooks& hooks = {});

  // Persists parameters, target, optimizer accumulators, counters and rng
  // state. Replay contents are not persisted: a resumed run refills its
  // replay from fresh play before updates recommence.
  void save_checkpoint(const std::string& path) const;
  static Trainer resume(const std::string& checkpoint_path,
                        EnvFactory env_factory = {});

  const ExperimentConfig& config() const { return config_; }
  Agent& agent() { return *agent_; }
  const Agent& agent() const { return *agent_; }
  int64_t iteration() const { return iteration_; }
  double loss_ma() const { return loss_ma_; }

  EvalRecord evaluate_now();

 private:
  void init_episode();
  TensorF acting_input() const;

  ExperimentConfig config_;
  TrainConfig train_;  // resolved (epsilon anneal defaulted)
  EnvFactory env_factory_;
  std::unique_ptr<FlickeringEnv> env_;
  std::unique_ptr<Agent> agent_;
  std::unique_ptr<ReplayMemory> replay_;
  Rng act_rng_;

  Observation obs_;
  nn::LstmState<float> live_state_;
  FrameHistory history_;

  int64_t iteration_ = 0;
  uint64_t episodes_started_ = 0;
  int64_t eval_count_ = 0;
  double loss_ma_ = 0.0;
  bool loss_ma_init_ = false;
  double start_time_ = 0.0;
};

}  // namespace rql

#endif  // RQL_TRAINER_HPP
