#ifndef RQL_AGENT_HPP
#define RQL_AGENT_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "rql/env.hpp"
#include "rql/network.hpp"
#include "rql/optim.hpp"
#include "rql/replay.hpp"
#include "rql/rng.hpp"

namespace rql {

enum class UpdateScheme { kRandom, kSequential };
enum class AgentKind { kDqn, kDrqn };

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.1;
  int64_t anneal_steps = 1;
  bool operator==(const EpsilonSchedule&) const = default;
};

// Linear interpolation from start to end over anneal_steps, constant
// afterward. iteration is 0-based.
double epsilon_at(int64_t iteration, const EpsilonSchedule& schedule);

struct TrainConfig {
  double gamma = 0.99;
  EpsilonSchedule epsilon;
  int unroll = 10;
  UpdateScheme update_scheme = UpdateScheme::kRandom;
  int64_t target_sync_period = 2500;
  double flicker_p_train = 0.0;
  double flicker_p_eval = 0.0;
  double clip_threshold = 10.0;
  ClipMode clip_mode = ClipMode::kNorm;
  size_t replay_capacity = 50000;
  int64_t eval_period = 5000;
  int eval_episodes = 10;
  double eval_epsilon = 0.05;
  int64_t total_iterations = 150000;
  int warmup_transitions = 500;
  double adadelta_lr = 0.1;
  double adadelta_rho = 0.95;
  double adadelta_eps = 1e-6;
  uint64_t seed = 1;

  bool operator==(const TrainConfig&) const = default;
  void validate() const;
};

struct ActionResult {
  int action = 0;
  nn::LstmState<float> next_state;  // advanced by one cell step for DRQN
};

// epsilon-greedy: uniform with probability epsilon, otherwise argmax with
// lowest-index tie breaking. The recurrent state advances exactly one step
// regardless of whether the action was greedy or random (the frame was
// seen either way).
ActionResult select_action(const NetworkF& net, const ParamsF& params,
                           const TensorF& observation_input,
                           const nn::LstmState<float>* live_state,
                           double epsilon, Rng& rng);

// y = r for terminal transitions, else r + gamma * max(next_q), with next_q
// taken from the target network.
float compute_target(float reward, bool terminal, const TensorF& next_q,
                     double gamma);

// A Q-learning agent: online parameters, a periodically synchronized target
// copy, ADADELTA, and the replay-driven update step.
//
// DRQN random updates draw a window of at most `unroll` transitions with the
// recurrent state zeroed at the window start. Sequential updates walk a
// randomly chosen episode from its beginning in unroll-sized chunks across
// successive train_step calls, carrying the forward state through the whole
// episode; backpropagation is truncated at chunk boundaries. DQN ignores the
// scheme and samples single transitions, stacking frames at read time.
class Agent {
 public:
  Agent(AgentKind kind, int stack_k, NetworkSpec spec, TrainConfig cfg,
        int obs_channels = 1);

  AgentKind kind() const { return kind_; }
  int stack_k() const { return stack_k_; }
  const NetworkF& network() const { return net_; }
  const TrainConfig& config() const { return cfg_; }

  ParamsF& params() { return params_; }
  const ParamsF& params() const { return params_; }
  ParamsF& target_params() { return target_params_; }
  const ParamsF& target_params() const { return target_params_; }
  AdaDelta<float>& optimizer() { return optim_; }
  int64_t train_steps() const { return train_steps_; }
  void restore_train_steps(int64_t n) { train_steps_ = n; }

  // One update. Empty replay is a no-op signalled by nullopt. Returns the
  // summed squared-error loss over the sampled window.
  std::optional<float> train_step(ReplayMemory& memory);

  // Target becomes a bitwise copy of the online parameters.
  void sync_target();

  // sequential-walker introspection (tests)
  bool sequential_active() const { return seq_window_.episode != nullptr; }
  int sequential_position() const { return seq_pos_; }

 private:
  float update_from_window(const SampledWindow& window, int offset, int length,
                           const nn::LstmState<float>* initial_online,
                           const nn::LstmState<float>* initial_target,
                           nn::LstmState<float>* out_online,
                           nn::LstmState<float>* out_target);
  float dqn_update(ReplayMemory& memory);
  float drqn_random_update(ReplayMemory& memory);
  float drqn_sequential_update(ReplayMemory& memory);
  void after_optimizer_step();

  AgentKind kind_;
  int stack_k_;
  NetworkF net_;
  TrainConfig cfg_;
  ParamsF params_;
  ParamsF target_params_;
  AdaDelta<float> optim_;
  ParamsF grads_;
  int64_t train_steps_ = 0;

  // sequential-update cursor
  SampledWindow seq_window_;
  int seq_pos_ = 0;
  nn::LstmState<float> seq_state_online_;
  nn::LstmState<float> seq_state_target_;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> scores;
};

// Plays `episodes` episodes with a small exploration floor and averages the
// returns. The recurrent state is zeroed at each episode start and carried
// within the episode; frame flicker is applied at probability flicker_p.
// Deterministic given the seed.
EvalResult evaluate(const NetworkF& net, const ParamsF& params, AgentKind kind,
                    int stack_k, const EnvFactory& env_factory, int episodes,
                    double flicker_p, double eval_epsilon, uint64_t seed);

}  // namespace rql

#endif  // RQL_AGENT_HPP
