#ifndef RQL_CONFIG_HPP
#define RQL_CONFIG_HPP

#include <string>
#include <vector>

#include "rql/agent.hpp"
#include "rql/network.hpp"
#include "rql/pong.hpp"

namespace rql {

// Everything a run needs, serializable to and from a flat key-value text
// file (one `key = value` per line, `#` comments, unknown keys rejected).
// The file written next to a run's outputs is its provenance.
struct ExperimentConfig {
  std::string run_id = "run";
  std::string env = "pong";
  std::string agent = "drqn";       // drqn | dqn
  int stack_k = 4;                  // frames stacked per DQN input
  std::string variant = "lstm";     // lstm | relu_lstm | lstm_over_fc | relu_lstm_over_fc
  int frame_size = 32;
  int points_to_win = 5;
  int max_episode_steps = 5000;
  std::vector<ConvLayerSpec> conv_layers = {{8, 5, 2}, {16, 3, 2}};
  int head_units = 64;
  int64_t checkpoint_period = 0;    // 0: final checkpoint only
  TrainConfig train;
  // epsilon_anneal key: 0 selects the default of total_iterations / 10

  bool operator==(const ExperimentConfig&) const = default;

  void validate() const;
  AgentKind agent_kind() const;
  UpdateScheme update_scheme() const { return train.update_scheme; }
  NetworkSpec network_spec(int num_actions) const;
  PongConfig pong_config() const;

  std::string to_string() const;
  static ExperimentConfig from_string(const std::string& text);
  void save(const std::string& path) const;
  static ExperimentConfig load(const std::string& path);
};

std::string to_string(UpdateScheme s);
std::string to_string(ClipMode m);

}  // namespace rql

#endif  // RQL_CONFIG_HPP
