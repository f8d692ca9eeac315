#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "rql/checkpoint.hpp"
#include "rql/network.hpp"
#include "rql/trainer.hpp"

using namespace rql;

TEST_CASE("named records round-trip bit-exactly") {
  const auto dir = test::scratch_dir("ckpt");
  const std::string path = (dir / "a.bin").string();

  NetworkF net(NetworkSpec::desk_drqn(3, 16, 8));
  ParamsF params = net.init_params(5);
  params.version = 41;

  {
    CheckpointWriter w(path);
    w.write_params("params", params);
    w.write_u64("meta/iteration", 123456789ULL);
    w.write_f64("meta/loss", 0.125);
    w.write_string("meta/config", "agent = drqn\n");
    w.close();
  }

  const CheckpointReader r(path);
  const ParamsF back = r.read_params("params", net.zero_params());
  CHECK(back.bitwise_equal(params));
  CHECK(r.u64("meta/iteration") == 123456789ULL);
  CHECK(r.f64("meta/loss") == 0.125);
  CHECK(r.str("meta/config") == "agent = drqn\n");
  CHECK(r.has("params/out.w"));
  CHECK(!r.has("params/missing"));
  CHECK_THROWS_AS(r.u64("meta/nothing"), IoError);
}

TEST_CASE("magic and shape mismatches are rejected") {
  const auto dir = test::scratch_dir("ckpt_bad");
  const std::string garbage = (dir / "garbage.bin").string();
  {
    std::ofstream out(garbage, std::ios::binary);
    out << "NOTACKPT plus trailing junk";
  }
  CHECK_THROWS_AS(CheckpointReader{garbage}, IoError);
  CHECK_THROWS_AS(CheckpointReader{(dir / "missing.bin").string()}, IoError);

  // shape validation against the expected layout
  const std::string path = (dir / "mismatch.bin").string();
  NetworkF small(NetworkSpec::desk_drqn(3, 16, 8));
  NetworkF large(NetworkSpec::desk_drqn(3, 16, 16));
  {
    CheckpointWriter w(path);
    w.write_params("params", small.init_params(1));
    w.close();
  }
  const CheckpointReader r(path);
  CHECK_THROWS_AS(r.read_params("params", large.zero_params()), IoError);
}

TEST_CASE("trainer checkpoints restore training state bit-exactly") {
  ExperimentConfig cfg;
  cfg.run_id = "ckpt_roundtrip";
  cfg.frame_size = 16;
  cfg.points_to_win = 1;
  cfg.max_episode_steps = 60;
  cfg.conv_layers = {{4, 3, 2}};
  cfg.head_units = 8;
  cfg.train.total_iterations = 150;
  cfg.train.warmup_transitions = 30;
  cfg.train.replay_capacity = 500;
  cfg.train.eval_period = 75;
  cfg.train.eval_episodes = 1;
  cfg.train.epsilon.anneal_steps = 50;
  cfg.train.unroll = 4;
  cfg.train.seed = 13;

  const auto dir = test::scratch_dir("trainer_ckpt");
  const std::string path = (dir / "t.ckpt").string();

  Trainer trainer(cfg);
  trainer.run();
  trainer.save_checkpoint(path);

  Trainer resumed = Trainer::resume(path);
  CHECK(resumed.iteration() == trainer.iteration());
  CHECK(resumed.loss_ma() == trainer.loss_ma());
  CHECK(resumed.agent().params().bitwise_equal(trainer.agent().params()));
  CHECK(resumed.agent().target_params().bitwise_equal(
      trainer.agent().target_params()));
  CHECK(resumed.agent().optimizer().avg_sq_grad().bitwise_equal(
      trainer.agent().optimizer().avg_sq_grad()));
  CHECK(resumed.agent().optimizer().avg_sq_update().bitwise_equal(
      trainer.agent().optimizer().avg_sq_update()));
  CHECK(resumed.agent().train_steps() == trainer.agent().train_steps());
  CHECK(resumed.config() == trainer.config());

  // the checkpoint itself round-trips byte for byte
  const std::string path2 = (dir / "t2.ckpt").string();
  resumed.save_checkpoint(path2);
  CHECK(test::read_file(path) == test::read_file(path2));
}
