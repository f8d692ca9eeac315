#include "doctest.h"
#include "helpers.hpp"
#include "rql/config.hpp"

using namespace rql;

TEST_CASE("experiment config round-trips through its text form") {
  ExperimentConfig c;
  c.run_id = "exp42";
  c.agent = "dqn";
  c.stack_k = 10;
  c.frame_size = 84;
  c.conv_layers = {{32, 8, 4}, {64, 4, 2}, {64, 3, 1}};
  c.head_units = 512;
  c.train.gamma = 0.95;
  c.train.epsilon = {0.9, 0.05, 12345};
  c.train.update_scheme = UpdateScheme::kSequential;
  c.train.clip_mode = ClipMode::kElement;
  c.train.flicker_p_train = 0.5;
  c.train.adadelta_eps = 1e-8;
  c.train.seed = 987654321;
  c.checkpoint_period = 5000;

  const ExperimentConfig back = ExperimentConfig::from_string(c.to_string());
  CHECK(back == c);
}

TEST_CASE("defaults round-trip and validate") {
  ExperimentConfig c;
  CHECK(ExperimentConfig::from_string(c.to_string()) == c);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("unknown keys are rejected") {
  CHECK_THROWS_AS(ExperimentConfig::from_string("learning_rate = 0.1\n"),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_string("agent drqn\n"), ConfigError);
}

TEST_CASE("typed values are enforced") {
  CHECK_THROWS_AS(ExperimentConfig::from_string("gamma = fast\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_string("unroll = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_string("update_scheme = shuffled\n"),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_string("conv_layers = 8:5\n"),
                  ConfigError);
}

TEST_CASE("validation catches out-of-range settings") {
  ExperimentConfig c;
  c.train.gamma = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  c = ExperimentConfig{};
  c.train.flicker_p_train = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  c = ExperimentConfig{};
  c.train.epsilon = {0.1, 0.9, 100};  // end above start
  CHECK_THROWS_AS(c.validate(), ConfigError);

  c = ExperimentConfig{};
  c.agent = "a2c";
  CHECK_THROWS_AS(c.validate(), ConfigError);

  c = ExperimentConfig{};
  c.run_id = "has/slash";
  CHECK_THROWS_AS(c.validate(), ConfigError);

  c = ExperimentConfig{};
  c.env = "frostbite";
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("comments and blank lines are ignored") {
  const ExperimentConfig c = ExperimentConfig::from_string(
      "# a comment\n\n  agent = dqn  \n\n# another\nstack_k = 7\n");
  CHECK(c.agent == "dqn");
  CHECK(c.stack_k == 7);
}

TEST_CASE("variant strings map onto head kinds") {
  ExperimentConfig c;
  c.variant = "lstm";
  CHECK(c.network_spec(3).head == HeadKind::kLstm);
  CHECK(!c.network_spec(3).relu_after_recurrent);
  c.variant = "relu_lstm";
  CHECK(c.network_spec(3).head == HeadKind::kLstm);
  CHECK(c.network_spec(3).relu_after_recurrent);
  c.variant = "lstm_over_fc";
  CHECK(c.network_spec(3).head == HeadKind::kLstmOverFc);
  c.variant = "relu_lstm_over_fc";
  CHECK(c.network_spec(3).relu_after_recurrent);

  c.agent = "dqn";
  c.stack_k = 4;
  CHECK(c.network_spec(3).head == HeadKind::kFc);
  CHECK(c.network_spec(3).input_channels == 4);
}

TEST_CASE("config files save and load") {
  const auto dir = test::scratch_dir("config");
  ExperimentConfig c;
  c.run_id = "filetest";
  const std::string path = (dir / "exp.cfg").string();
  c.save(path);
  CHECK(ExperimentConfig::load(path) == c);
  CHECK_THROWS_AS(ExperimentConfig::load((dir / "missing.cfg").string()), IoError);
}
