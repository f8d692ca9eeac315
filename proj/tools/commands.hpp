#ifndef RQL_TOOLS_COMMANDS_HPP
#define RQL_TOOLS_COMMANDS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rql::cli {

struct TrainArgs {
  std::string config_path;
  std::string out_dir = "runs";
  std::string run_id_override;
  std::optional<uint64_t> seed_override;
  std::string resume_checkpoint;
  bool quiet = false;
};
int cmd_train(const TrainArgs& args);

struct EvalArgs {
  std::string checkpoint;
  int episodes = 10;
  double flicker_p = 0.0;
  uint64_t seed = 1;
  std::string out_csv;
  std::string dump_dir;  // trajectory CSV + PGM frames when set
};
int cmd_eval(const EvalArgs& args);

struct SweepArgs {
  std::string checkpoint_drqn;
  std::string checkpoint_dqn;
  std::vector<double> p_list = {0.0, 0.25, 0.5, 0.75};
  int episodes = 10;
  uint64_t seed = 1;
  std::string out_csv = "sweep.csv";
};
int cmd_sweep(const SweepArgs& args);

struct BenchArgs {
  std::vector<int> frames = {1, 4, 10};
  std::vector<int> unrolls = {1, 10, 30};
  int trials = 1000;
  int warmup = 50;
  int input_size = 84;
  std::string out_csv = "bench.csv";
};
int cmd_bench(const BenchArgs& args);

struct VariantsArgs {
  std::string config_path;
  std::string out_dir = "runs";
  std::optional<uint64_t> seed_override;
  bool quiet = false;
};
int cmd_variants(const VariantsArgs& args);

}  // namespace rql::cli

#endif  // RQL_TOOLS_COMMANDS_HPP
