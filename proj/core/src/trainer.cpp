#include "rql/trainer.hpp"

#include <chrono>

#include "rql/checkpoint.hpp"
#include "rql/errors.hpp"
#include "rql/pong.hpp"

namespace rql {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

TrainConfig resolve_train(const ExperimentConfig& cfg) {
  TrainConfig t = cfg.train;
  if (t.epsilon.anneal_steps == 0) {
    t.epsilon.anneal_steps = std::max<int64_t>(1, t.total_iterations / 10);
  }
  return t;
}

EnvFactory default_factory(const ExperimentConfig& cfg) {
  const PongConfig pong = cfg.pong_config();
  return [pong]() { return std::make_unique<PongEnv>(pong); };
}

}  // namespace

Trainer::Trainer(const ExperimentConfig& config, EnvFactory env_factory)
    : config_(config), train_(resolve_train(config)),
      env_factory_(env_factory ? std::move(env_factory) : default_factory(config)),
      act_rng_(derive_seed(config.train.seed, 1)),
      history_(config.stack_k) {
  config_.validate();
  auto probe = env_factory_();
  const int num_actions = probe->num_actions();
  const int obs_channels = probe->obs_channels();
  NetworkSpec spec = config_.network_spec(num_actions);
  spec.input_size = probe->frame_size();
  spec.input_channels = config_.agent_kind() == AgentKind::kDqn
                            ? config_.stack_k * obs_channels
                            : obs_channels;
  env_ = std::make_unique<FlickeringEnv>(std::move(probe), train_.flicker_p_train,
                                         derive_seed(train_.seed, 3));
  agent_ = std::make_unique<Agent>(config_.agent_kind(), config_.stack_k,
                                   std::move(spec), train_, obs_channels);
  replay_ = std::make_unique<ReplayMemory>(train_.replay_capacity,
                                           derive_seed(train_.seed, 2));
  live_state_ = nn::LstmState<float>::zeros(
      agent_->network().spec().recurrent() ? agent_->network().spec().head_units : 1);
  init_episode();
}

void Trainer::init_episode() {
  obs_ = env_->reset(derive_seed(train_.seed, 0x100000ULL + episodes_started_));
  episodes_started_ += 1;
  if (agent_->network().spec().recurrent()) {
    live_state_ = nn::LstmState<float>::zeros(agent_->network().spec().head_units);
  }
  history_.clear();
  history_.push(obs_.frame);
}

TensorF Trainer::acting_input() const {
  return agent_->kind() == AgentKind::kDqn ? history_.stack() : obs_.frame;
}

EvalRecord Trainer::evaluate_now() {
  const uint64_t eval_seed =
      derive_seed(train_.seed, 0xE0000ULL + static_cast<uint64_t>(eval_count_));
  eval_count_ += 1;
  const EvalResult r = evaluate(agent_->network(), agent_->params(), agent_->kind(),
                                config_.stack_k, env_factory_, train_.eval_episodes,
                                train_.flicker_p_eval, train_.eval_epsilon, eval_seed);
  EvalRecord rec;
  rec.iteration = iteration_;
  rec.mean_score = r.mean;
  rec.std_score = r.stddev;
  rec.epsilon = epsilon_at(iteration_, train_.epsilon);
  rec.loss_ma = loss_ma_;
  rec.wall_seconds = now_seconds() - start_time_;
  return rec;
}

void Trainer::run(const TrainHooks& hooks) {
  start_time_ = now_seconds();
  const int64_t total = train_.total_iterations;

  while (iteration_ < total) {
    const double eps = epsilon_at(iteration_, train_.epsilon);
    const TensorF input = acting_input();
    ActionResult ar = select_action(
        agent_->network(), agent_->params(), input,
        agent_->kind() == AgentKind::kDrqn ? &live_state_ : nullptr, eps, act_rng_);
    if (agent_->kind() == AgentKind::kDrqn) live_state_ = std::move(ar.next_state);

    StepResult sr = env_->step(ar.action);
    replay_->append(Transition{obs_.frame, ar.action, sr.reward, sr.done});

    if (sr.done) {
      init_episode();
    } else {
      obs_ = std::move(sr.obs);
      history_.push(obs_.frame);
    }

    if (replay_->total_transitions() >=
        static_cast<size_t>(train_.warmup_transitions)) {
      if (const auto loss = agent_->train_step(*replay_)) {
        if (!loss_ma_init_) {
          loss_ma_ = *loss;
          loss_ma_init_ = true;
        } else {
          loss_ma_ = 0.99 * loss_ma_ + 0.01 * static_cast<double>(*loss);
        }
      }
    }

    iteration_ += 1;
    const bool at_end = iteration_ == total;
    if (iteration_ % train_.eval_period == 0 || at_end) {
      const EvalRecord rec = evaluate_now();
      if (hooks.on_eval) hooks.on_eval(rec);
    }
    if (config_.checkpoint_period > 0 &&
        iteration_ % config_.checkpoint_period == 0 && !at_end &&
        hooks.on_periodic_checkpoint) {
      hooks.on_periodic_checkpoint(iteration_);
    }
  }
}

void Trainer::save_checkpoint(const std::string& path) const {
  CheckpointWriter w(path);
  w.write_string("meta/config", config_.to_string());
  w.write_u64("meta/iteration", static_cast<uint64_t>(iteration_));
  w.write_u64("meta/train_steps", static_cast<uint64_t>(agent_->train_steps()));
  w.write_u64("meta/episodes_started", episodes_started_);
  w.write_u64("meta/eval_count", static_cast<uint64_t>(eval_count_));
  w.write_f64("meta/loss_ma", loss_ma_);
  w.write_u64("meta/loss_ma_init", loss_ma_init_ ? 1 : 0);
  w.write_string("rng/act", act_rng_.save_state());
  w.write_params("params", agent_->params());
  w.write_params("target", agent_->target_params());
  w.write_params("optim/avg_sq_grad", agent_->optimizer().avg_sq_grad());
  w.write_params("optim/avg_sq_update", agent_->optimizer().avg_sq_update());
  w.close();
}

Trainer Trainer::resume(const std::string& checkpoint_path, EnvFactory env_factory) {
  const CheckpointReader r(checkpoint_path);
  const ExperimentConfig cfg = ExperimentConfig::from_string(r.str("meta/config"));
  Trainer t(cfg, std::move(env_factory));

  const ParamsF layout = t.agent_->network().zero_params();
  t.agent_->params() = r.read_params("params", layout);
  t.agent_->target_params() = r.read_params("target", layout);
  t.agent_->optimizer().restore(r.read_params("optim/avg_sq_grad", layout),
                                r.read_params("optim/avg_sq_update", layout));
  t.iteration_ = static_cast<int64_t>(r.u64("meta/iteration"));
  t.agent_->restore_train_steps(static_cast<int64_t>(r.u64("meta/train_steps")));
  t.episodes_started_ = r.u64("meta/episodes_started");
  t.eval_count_ = static_cast<int64_t>(r.u64("meta/eval_count"));
  t.loss_ma_ = r.f64("meta/loss_ma");
  t.loss_ma_init_ = r.u64("meta/loss_ma_init") != 0;
  t.act_rng_.load_state(r.str("rng/act"));
  // the replay memory is rebuilt from fresh play (it is not persisted), so
  // start a fresh episode under the restored counters
  t.episodes_started_ -= 1;  // init_episode in the ctor consumed one slot
  t.init_episode();
  return t;
}

}  // namespace rql
