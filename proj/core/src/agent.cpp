#include "rql/agent.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "rql/errors.hpp"

namespace rql {

double epsilon_at(int64_t iteration, const EpsilonSchedule& s) {
  if (iteration >= s.anneal_steps) return s.end;
  if (iteration < 0) return s.start;
  const double frac = static_cast<double>(iteration) /
                      static_cast<double>(s.anneal_steps);
  return s.start + (s.end - s.start) * frac;
}

void TrainConfig::validate() const {
  if (gamma < 0.0 || gamma >= 1.0) {
    throw ConfigError("gamma must be in [0,1), got " + std::to_string(gamma));
  }
  if (epsilon.end > epsilon.start) {
    throw ConfigError("epsilon_end must not exceed epsilon_start");
  }
  if (epsilon.start < 0.0 || epsilon.start > 1.0 || epsilon.end < 0.0) {
    throw ConfigError("epsilon schedule must stay within [0,1]");
  }
  if (epsilon.anneal_steps < 1) throw ConfigError("epsilon_anneal must be >= 1");
  if (unroll < 1) throw ConfigError("unroll must be >= 1");
  if (target_sync_period < 1) throw ConfigError("target_sync_period must be >= 1");
  if (eval_period < 1) throw ConfigError("eval_period must be >= 1");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (eval_epsilon < 0.0 || eval_epsilon > 1.0) {
    throw ConfigError("eval_epsilon must be in [0,1]");
  }
  if (flicker_p_train < 0.0 || flicker_p_train > 1.0 || flicker_p_eval < 0.0 ||
      flicker_p_eval > 1.0) {
    throw ConfigError("flicker probabilities must be in [0,1]");
  }
  if (clip_threshold <= 0.0) throw ConfigError("clip_threshold must be positive");
  if (replay_capacity < 1) throw ConfigError("replay_capacity must be >= 1");
  if (total_iterations < 0) throw ConfigError("total_iterations must be >= 0");
  if (warmup_transitions < 0) throw ConfigError("warmup_transitions must be >= 0");
  if (adadelta_lr <= 0.0 || adadelta_eps <= 0.0) {
    throw ConfigError("adadelta lr and eps must be positive");
  }
  if (adadelta_rho <= 0.0 || adadelta_rho >= 1.0) {
    throw ConfigError("adadelta_rho must be in (0,1)");
  }
}

ActionResult select_action(const NetworkF& net, const ParamsF& params,
                           const TensorF& observation_input,
                           const nn::LstmState<float>* live_state,
                           double epsilon, Rng& rng) {
  auto fwd = net.forward(params, std::span(&observation_input, 1), live_state);
  const TensorF& q = fwd.q(0);
  const int n = q.dim(0);
  int action;
  if (rng.bernoulli(epsilon)) {
    action = rng.uniform_int(n);
  } else {
    action = 0;
    for (int a = 1; a < n; ++a) {
      if (q[static_cast<size_t>(a)] > q[static_cast<size_t>(action)]) action = a;
    }
  }
  return ActionResult{action, std::move(fwd.final_state)};
}

float compute_target(float reward, bool terminal, const TensorF& next_q,
                     double gamma) {
  if (terminal) return reward;
  if (next_q.empty()) {
    throw ShapeError("compute_target needs successor Q-values for a "
                     "non-terminal transition");
  }
  float best = next_q[0];
  for (size_t i = 1; i < next_q.size(); ++i) best = std::max(best, next_q[i]);
  return reward + static_cast<float>(gamma) * best;
}

Agent::Agent(AgentKind kind, int stack_k, NetworkSpec spec, TrainConfig cfg,
             int obs_channels)
    : kind_(kind), stack_k_(stack_k), net_(std::move(spec)), cfg_(cfg),
      params_(net_.init_params(cfg.seed)),
      target_params_(params_.clone()),
      optim_(cfg.adadelta_lr, cfg.adadelta_rho, cfg.adadelta_eps),
      grads_(net_.zero_params()) {
  cfg_.validate();
  if (stack_k_ < 1) throw ConfigError("stack_k must be >= 1");
  const auto& s = net_.spec();
  if (kind_ == AgentKind::kDqn) {
    if (s.recurrent()) {
      throw ConfigError("DQN requires the fully connected head");
    }
    if (s.input_channels != stack_k_ * obs_channels) {
      throw ConfigError("DQN input_channels (" +
                        std::to_string(s.input_channels) +
                        ") must equal stack_k * obs_channels (" +
                        std::to_string(stack_k_ * obs_channels) + ")");
    }
  } else {
    if (!s.recurrent()) {
      throw ConfigError("DRQN requires a recurrent head");
    }
    if (s.input_channels != obs_channels) {
      throw ConfigError("DRQN consumes one frame per step; input_channels "
                        "must equal obs_channels (" +
                        std::to_string(obs_channels) + ")");
    }
  }
  optim_.init(params_);
}

void Agent::sync_target() {
  target_params_ = params_.clone();
}

void Agent::after_optimizer_step() {
  train_steps_ += 1;
  if (train_steps_ % cfg_.target_sync_period == 0) sync_target();
}

std::optional<float> Agent::train_step(ReplayMemory& memory) {
  if (kind_ == AgentKind::kDqn) {
    if (!memory.can_sample()) return std::nullopt;
    return dqn_update(memory);
  }
  if (cfg_.update_scheme == UpdateScheme::kRandom) {
    if (!memory.can_sample()) return std::nullopt;
    return drqn_random_update(memory);
  }
  if (!seq_window_.episode && !memory.can_sample()) return std::nullopt;
  return drqn_sequential_update(memory);
}

float Agent::dqn_update(ReplayMemory& memory) {
  const SampledWindow w = memory.sample_random_update(1);
  const Episode& ep = *w.episode;
  const Transition& tr = ep.steps[static_cast<size_t>(w.start)];

  const TensorF input = stacked_observation(ep, w.start, stack_k_);
  auto fwd = net_.forward(params_, std::span(&input, 1), nullptr);

  float y;
  if (tr.terminal) {
    y = tr.reward;
  } else {
    const TensorF next_input = stacked_observation(ep, w.start + 1, stack_k_);
    auto tfwd = net_.forward(target_params_, std::span(&next_input, 1), nullptr);
    y = compute_target(tr.reward, false, tfwd.q(0), cfg_.gamma);
  }

  TensorF dq({net_.spec().num_actions});
  const float diff = fwd.q(0)[static_cast<size_t>(tr.action)] - y;
  dq[static_cast<size_t>(tr.action)] = 2.0f * diff;
  const float loss = diff * diff;

  grads_.zero_all();
  net_.backward(params_, fwd, std::span(&dq, 1), grads_);
  clip_gradients(grads_, cfg_.clip_threshold, cfg_.clip_mode);
  optim_.step(params_, grads_);
  after_optimizer_step();
  return loss;
}

// Forward the chunk with the online net, forward the shifted successor
// stream with the target net (so both see the same history length at the
// point of evaluation), then one clipped ADADELTA step on the summed
// squared error of the taken actions.
float Agent::update_from_window(const SampledWindow& w, int offset, int length,
                                const nn::LstmState<float>* initial_online,
                                const nn::LstmState<float>* initial_target,
                                nn::LstmState<float>* out_online,
                                nn::LstmState<float>* out_target) {
  const Episode& ep = *w.episode;
  const int begin = w.start + offset;

  std::vector<TensorF> frames;
  frames.reserve(static_cast<size_t>(length));
  for (int i = 0; i < length; ++i) {
    frames.push_back(ep.steps[static_cast<size_t>(begin + i)].observation);
  }
  auto fwd = net_.forward(params_, frames, initial_online);

  const bool ends_terminal = ep.steps[static_cast<size_t>(begin + length - 1)].terminal;
  const int n_succ = ends_terminal ? length - 1 : length;
  NetworkF::ForwardResult tfwd;
  if (n_succ > 0) {
    std::vector<TensorF> successors;
    successors.reserve(static_cast<size_t>(n_succ));
    for (int i = 0; i < n_succ; ++i) {
      successors.push_back(ep.steps[static_cast<size_t>(begin + i + 1)].observation);
    }
    tfwd = net_.forward(target_params_, successors, initial_target);
  }
  if (out_online != nullptr) *out_online = fwd.final_state;
  if (out_target != nullptr && n_succ > 0) *out_target = tfwd.final_state;

  float loss = 0.0f;
  std::vector<TensorF> dq;
  dq.reserve(static_cast<size_t>(length));
  for (int i = 0; i < length; ++i) {
    const Transition& tr = ep.steps[static_cast<size_t>(begin + i)];
    const float y = tr.terminal
                        ? tr.reward
                        : compute_target(tr.reward, false, tfwd.q(i), cfg_.gamma);
    TensorF g({net_.spec().num_actions});
    const float diff = fwd.q(i)[static_cast<size_t>(tr.action)] - y;
    g[static_cast<size_t>(tr.action)] = 2.0f * diff;
    loss += diff * diff;
    dq.push_back(std::move(g));
  }

  grads_.zero_all();
  net_.backward(params_, fwd, dq, grads_);
  clip_gradients(grads_, cfg_.clip_threshold, cfg_.clip_mode);
  optim_.step(params_, grads_);
  after_optimizer_step();
  return loss;
}

float Agent::drqn_random_update(ReplayMemory& memory) {
  const SampledWindow w = memory.sample_random_update(cfg_.unroll);
  const auto zero = nn::LstmState<float>::zeros(net_.spec().head_units);
  return update_from_window(w, 0, w.length, &zero, &zero, nullptr, nullptr);
}

float Agent::drqn_sequential_update(ReplayMemory& memory) {
  if (!seq_window_.episode) {
    seq_window_ = memory.sample_sequential_update();
    seq_pos_ = 0;
    seq_state_online_ = nn::LstmState<float>::zeros(net_.spec().head_units);
    seq_state_target_ = nn::LstmState<float>::zeros(net_.spec().head_units);
  }
  const int len = seq_window_.length;
  const int chunk = std::min(cfg_.unroll, len - seq_pos_);
  const float loss = update_from_window(seq_window_, seq_pos_, chunk,
                                        &seq_state_online_, &seq_state_target_,
                                        &seq_state_online_, &seq_state_target_);
  seq_pos_ += chunk;
  if (seq_pos_ >= len) {
    seq_window_ = SampledWindow{};
  }
  return loss;
}

EvalResult evaluate(const NetworkF& net, const ParamsF& params, AgentKind kind,
                    int stack_k, const EnvFactory& env_factory, int episodes,
                    double flicker_p, double eval_epsilon, uint64_t seed) {
  if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
  EvalResult res;
  res.scores.reserve(static_cast<size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    FlickeringEnv env(env_factory(), flicker_p,
                      derive_seed(seed, 0xF11C000ULL + static_cast<uint64_t>(e)));
    Rng act_rng(derive_seed(seed, 0xAC7000ULL + static_cast<uint64_t>(e)));
    Observation obs = env.reset(derive_seed(seed, 0xE9000ULL + static_cast<uint64_t>(e)));

    auto state = nn::LstmState<float>::zeros(
        net.spec().recurrent() ? net.spec().head_units : 1);
    FrameHistory history(stack_k);
    history.push(obs.frame);

    double total = 0.0;
    bool done = false;
    while (!done) {
      const TensorF input = kind == AgentKind::kDqn ? history.stack() : obs.frame;
      auto ar = select_action(net, params, input,
                              kind == AgentKind::kDrqn ? &state : nullptr,
                              eval_epsilon, act_rng);
      if (kind == AgentKind::kDrqn) state = std::move(ar.next_state);
      StepResult sr = env.step(ar.action);
      total += sr.reward;
      done = sr.done;
      obs = std::move(sr.obs);
      if (kind == AgentKind::kDqn) history.push(obs.frame);
    }
    res.scores.push_back(total);
  }

  double sum = 0.0;
  for (double s : res.scores) sum += s;
  res.mean = sum / static_cast<double>(res.scores.size());
  double var = 0.0;
  for (double s : res.scores) var += (s - res.mean) * (s - res.mean);
  res.stddev = std::sqrt(var / static_cast<double>(res.scores.size()));
  return res;
}

}  // namespace rql
