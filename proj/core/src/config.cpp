#include "rql/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "rql/errors.hpp"

namespace rql {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* begin = v.data();
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

int64_t parse_int(const std::string& key, const std::string& v) {
  int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

std::string conv_to_string(const std::vector<ConvLayerSpec>& layers) {
  if (layers.empty()) return "none";
  std::ostringstream os;
  for (size_t i = 0; i < layers.size(); ++i) {
    if (i) os << ",";
    os << layers[i].filters << ":" << layers[i].kernel << ":" << layers[i].stride;
  }
  return os.str();
}

std::vector<ConvLayerSpec> parse_conv(const std::string& v) {
  std::vector<ConvLayerSpec> layers;
  if (v.empty() || v == "none") return layers;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    ConvLayerSpec c;
    if (std::sscanf(item.c_str(), "%d:%d:%d", &c.filters, &c.kernel, &c.stride) != 3) {
      throw ConfigError("conv_layers entries must look like filters:kernel:stride, got '" +
                        item + "'");
    }
    layers.push_back(c);
  }
  return layers;
}

}  // namespace

std::string to_string(UpdateScheme s) {
  return s == UpdateScheme::kRandom ? "random" : "sequential";
}

std::string to_string(ClipMode m) {
  return m == ClipMode::kNorm ? "norm" : "element";
}

void ExperimentConfig::validate() const {
  if (env != "pong") {
    throw ConfigError("unknown env '" + env + "' (built-in: pong)");
  }
  if (agent != "drqn" && agent != "dqn") {
    throw ConfigError("agent must be drqn or dqn, got '" + agent + "'");
  }
  if (variant != "lstm" && variant != "relu_lstm" && variant != "lstm_over_fc" &&
      variant != "relu_lstm_over_fc") {
    throw ConfigError("unknown architecture variant '" + variant + "'");
  }
  if (run_id.empty()) throw ConfigError("run_id must not be empty");
  if (run_id.find('/') != std::string::npos) {
    throw ConfigError("run_id must not contain '/'");
  }
  if (stack_k < 1) throw ConfigError("stack_k must be >= 1");
  if (frame_size < 8) throw ConfigError("frame_size must be >= 8");
  if (points_to_win < 1) throw ConfigError("points_to_win must be >= 1");
  if (max_episode_steps < 0) throw ConfigError("max_episode_steps must be >= 0");
  if (head_units < 1) throw ConfigError("head_units must be >= 1");
  if (checkpoint_period < 0) throw ConfigError("checkpoint_period must be >= 0");
  TrainConfig resolved = train;
  if (resolved.epsilon.anneal_steps == 0) {
    resolved.epsilon.anneal_steps = std::max<int64_t>(1, train.total_iterations / 10);
  }
  resolved.validate();
  network_spec(kPongNumActions).validate();
}

AgentKind ExperimentConfig::agent_kind() const {
  return agent == "dqn" ? AgentKind::kDqn : AgentKind::kDrqn;
}

NetworkSpec ExperimentConfig::network_spec(int num_actions) const {
  NetworkSpec s;
  s.input_size = frame_size;
  s.conv_layers = conv_layers;
  s.head_units = head_units;
  s.num_actions = num_actions;
  if (agent_kind() == AgentKind::kDqn) {
    s.input_channels = stack_k;
    s.head = HeadKind::kFc;
  } else {
    s.input_channels = 1;
    if (variant == "lstm" || variant == "relu_lstm") {
      s.head = HeadKind::kLstm;
    } else {
      s.head = HeadKind::kLstmOverFc;
    }
    s.relu_after_recurrent = variant.starts_with("relu_");
  }
  return s;
}

PongConfig ExperimentConfig::pong_config() const {
  PongConfig p;
  p.frame_size = frame_size;
  p.points_to_win = points_to_win;
  p.max_steps = max_episode_steps;
  return p;
}

std::string ExperimentConfig::to_string() const {
  std::ostringstream os;
  os << "# rql experiment config v1\n";
  os << "run_id = " << run_id << "\n";
  os << "env = " << env << "\n";
  os << "agent = " << agent << "\n";
  os << "stack_k = " << stack_k << "\n";
  os << "variant = " << variant << "\n";
  os << "frame_size = " << frame_size << "\n";
  os << "points_to_win = " << points_to_win << "\n";
  os << "max_episode_steps = " << max_episode_steps << "\n";
  os << "conv_layers = " << conv_to_string(conv_layers) << "\n";
  os << "head_units = " << head_units << "\n";
  os << "gamma = " << fmt_double(train.gamma) << "\n";
  os << "epsilon_start = " << fmt_double(train.epsilon.start) << "\n";
  os << "epsilon_end = " << fmt_double(train.epsilon.end) << "\n";
  os << "epsilon_anneal = " << train.epsilon.anneal_steps << "\n";
  os << "unroll = " << train.unroll << "\n";
  os << "update_scheme = " << rql::to_string(train.update_scheme) << "\n";
  os << "target_sync_period = " << train.target_sync_period << "\n";
  os << "flicker_p_train = " << fmt_double(train.flicker_p_train) << "\n";
  os << "flicker_p_eval = " << fmt_double(train.flicker_p_eval) << "\n";
  os << "clip_threshold = " << fmt_double(train.clip_threshold) << "\n";
  os << "clip_mode = " << rql::to_string(train.clip_mode) << "\n";
  os << "replay_capacity = " << train.replay_capacity << "\n";
  os << "eval_period = " << train.eval_period << "\n";
  os << "eval_episodes = " << train.eval_episodes << "\n";
  os << "eval_epsilon = " << fmt_double(train.eval_epsilon) << "\n";
  os << "total_iterations = " << train.total_iterations << "\n";
  os << "warmup_transitions = " << train.warmup_transitions << "\n";
  os << "adadelta_lr = " << fmt_double(train.adadelta_lr) << "\n";
  os << "adadelta_rho = " << fmt_double(train.adadelta_rho) << "\n";
  os << "adadelta_eps = " << fmt_double(train.adadelta_eps) << "\n";
  os << "checkpoint_period = " << checkpoint_period << "\n";
  os << "seed = " << train.seed << "\n";
  return os.str();
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
  ExperimentConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"run_id", [&](const std::string&, const std::string& v) { c.run_id = v; }},
      {"env", [&](const std::string&, const std::string& v) { c.env = v; }},
      {"agent", [&](const std::string&, const std::string& v) { c.agent = v; }},
      {"stack_k", [&](const std::string& k, const std::string& v) {
         c.stack_k = static_cast<int>(parse_int(k, v)); }},
      {"variant", [&](const std::string&, const std::string& v) { c.variant = v; }},
      {"frame_size", [&](const std::string& k, const std::string& v) {
         c.frame_size = static_cast<int>(parse_int(k, v)); }},
      {"points_to_win", [&](const std::string& k, const std::string& v) {
         c.points_to_win = static_cast<int>(parse_int(k, v)); }},
      {"max_episode_steps", [&](const std::string& k, const std::string& v) {
         c.max_episode_steps = static_cast<int>(parse_int(k, v)); }},
      {"conv_layers", [&](const std::string&, const std::string& v) {
         c.conv_layers = parse_conv(v); }},
      {"head_units", [&](const std::string& k, const std::string& v) {
         c.head_units = static_cast<int>(parse_int(k, v)); }},
      {"gamma", [&](const std::string& k, const std::string& v) {
         c.train.gamma = parse_double(k, v); }},
      {"epsilon_start", [&](const std::string& k, const std::string& v) {
         c.train.epsilon.start = parse_double(k, v); }},
      {"epsilon_end", [&](const std::string& k, const std::string& v) {
         c.train.epsilon.end = parse_double(k, v); }},
      {"epsilon_anneal", [&](const std::string& k, const std::string& v) {
         c.train.epsilon.anneal_steps = parse_int(k, v); }},
      {"unroll", [&](const std::string& k, const std::string& v) {
         c.train.unroll = static_cast<int>(parse_int(k, v)); }},
      {"update_scheme", [&](const std::string& k, const std::string& v) {
         if (v == "random") c.train.update_scheme = UpdateScheme::kRandom;
         else if (v == "sequential") c.train.update_scheme = UpdateScheme::kSequential;
         else throw ConfigError("config key '" + k + "' must be random or sequential");
       }},
      {"target_sync_period", [&](const std::string& k, const std::string& v) {
         c.train.target_sync_period = parse_int(k, v); }},
      {"flicker_p_train", [&](const std::string& k, const std::string& v) {
         c.train.flicker_p_train = parse_double(k, v); }},
      {"flicker_p_eval", [&](const std::string& k, const std::string& v) {
         c.train.flicker_p_eval = parse_double(k, v); }},
      {"clip_threshold", [&](const std::string& k, const std::string& v) {
         c.train.clip_threshold = parse_double(k, v); }},
      {"clip_mode", [&](const std::string& k, const std::string& v) {
         if (v == "norm") c.train.clip_mode = ClipMode::kNorm;
         else if (v == "element") c.train.clip_mode = ClipMode::kElement;
         else throw ConfigError("config key '" + k + "' must be norm or element");
       }},
      {"replay_capacity", [&](const std::string& k, const std::string& v) {
         c.train.replay_capacity = static_cast<size_t>(parse_int(k, v)); }},
      {"eval_period", [&](const std::string& k, const std::string& v) {
         c.train.eval_period = parse_int(k, v); }},
      {"eval_episodes", [&](const std::string& k, const std::string& v) {
         c.train.eval_episodes = static_cast<int>(parse_int(k, v)); }},
      {"eval_epsilon", [&](const std::string& k, const std::string& v) {
         c.train.eval_epsilon = parse_double(k, v); }},
      {"total_iterations", [&](const std::string& k, const std::string& v) {
         c.train.total_iterations = parse_int(k, v); }},
      {"warmup_transitions", [&](const std::string& k, const std::string& v) {
         c.train.warmup_transitions = static_cast<int>(parse_int(k, v)); }},
      {"adadelta_lr", [&](const std::string& k, const std::string& v) {
         c.train.adadelta_lr = parse_double(k, v); }},
      {"adadelta_rho", [&](const std::string& k, const std::string& v) {
         c.train.adadelta_rho = parse_double(k, v); }},
      {"adadelta_eps", [&](const std::string& k, const std::string& v) {
         c.train.adadelta_eps = parse_double(k, v); }},
      {"checkpoint_period", [&](const std::string& k, const std::string& v) {
         c.checkpoint_period = parse_int(k, v); }},
      {"seed", [&](const std::string& k, const std::string& v) {
         c.train.seed = static_cast<uint64_t>(parse_int(k, v)); }},
  };

  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        " is not 'key = value': " + stripped);
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    it->second(key, value);
  }
  return c;
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config to " + path);
  out << to_string();
  if (!out) throw IoError("failed writing config to " + path);
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config from " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

}  // namespace rql
