#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "commands.hpp"
#include "rql/errors.hpp"
#include "rql/metrics.hpp"
#include "rql/network.hpp"
#include "rql/rng.hpp"

namespace rql::cli {

namespace {

// Timing convention: "forward" is the per-decision acting pass (one stacked
// pass for the baseline, one single-timestep pass for recurrent nets);
// "backward" is the full update pass (one backward for the baseline, BPTT
// over the whole unroll for recurrent nets).

NetworkSpec bench_spec(int frames, int input_size, bool recurrent) {
  NetworkSpec s;
  s.input_channels = frames;
  s.input_size = input_size;
  if (input_size >= 36) {  // the 84x84-class trunk fits
    s.conv_layers = {{32, 8, 4}, {64, 4, 2}, {64, 3, 1}};
    s.head_units = 512;
  } else {
    s.conv_layers = {{8, 5, 2}, {16, 3, 2}};
    s.head_units = 64;
  }
  s.head = recurrent ? HeadKind::kLstm : HeadKind::kFc;
  s.num_actions = 18;
  return s;
}

TensorF random_frame(const NetworkSpec& spec, Rng& rng) {
  TensorF f({spec.input_channels, spec.input_size, spec.input_size});
  fill_uniform(f, rng, 0.0, 1.0);
  return f;
}

double time_ms(int trials, int warmup, const std::function<void()>& pass) {
  for (int i = 0; i < warmup; ++i) pass();
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < trials; ++i) pass();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / trials;
}

struct BenchRow {
  std::string arch;
  int frames;
  double backward_ms;
  double forward_ms;
};

BenchRow bench_baseline(int frames, const BenchArgs& args) {
  const NetworkSpec spec = bench_spec(frames, args.input_size, false);
  NetworkF net(spec);
  ParamsF params = net.init_params(42);
  Rng rng(7);
  const TensorF input = random_frame(spec, rng);
  TensorF dq({spec.num_actions});
  fill_uniform(dq, rng, -1.0, 1.0);

  const double fwd = time_ms(args.trials, args.warmup, [&] {
    auto r = net.forward(params, std::span(&input, 1), nullptr);
  });
  auto trace = net.forward(params, std::span(&input, 1), nullptr);
  ParamsF grads = net.zero_params();
  const double bwd = time_ms(args.trials, args.warmup, [&] {
    grads.zero_all();
    net.backward(params, trace, std::span(&dq, 1), grads);
  });
  return BenchRow{"baseline", frames, bwd, fwd};
}

BenchRow bench_unrolled(int frames, int unroll, const BenchArgs& args) {
  const NetworkSpec spec = bench_spec(frames, args.input_size, true);
  NetworkF net(spec);
  ParamsF params = net.init_params(42);
  Rng rng(7);

  std::vector<TensorF> sequence;
  sequence.reserve(static_cast<size_t>(unroll));
  for (int i = 0; i < unroll; ++i) sequence.push_back(random_frame(spec, rng));
  std::vector<TensorF> dq(static_cast<size_t>(unroll), TensorF({spec.num_actions}));
  for (auto& g : dq) fill_uniform(g, rng, -1.0, 1.0);

  const auto state = nn::LstmState<float>::zeros(spec.head_units);
  const double fwd = time_ms(args.trials, args.warmup, [&] {
    auto r = net.forward(params, std::span(sequence.data(), 1), &state);
  });
  auto trace = net.forward(params, sequence, &state);
  ParamsF grads = net.zero_params();
  const double bwd = time_ms(args.trials, args.warmup, [&] {
    grads.zero_all();
    net.backward(params, trace, dq, grads);
  });
  return BenchRow{"unroll" + std::to_string(unroll), frames, bwd, fwd};
}

}  // namespace

int cmd_bench(const BenchArgs& args) {
  if (args.trials < 1) throw ConfigError("--trials must be >= 1");
  if (args.input_size < 8) throw ConfigError("--input-size must be >= 8");
  for (int u : args.unrolls) {
    if (u < 1) throw ConfigError("unroll values must be >= 1");
  }
  for (int f : args.frames) {
    if (f < 1) throw ConfigError("frame counts must be >= 1");
  }

  std::vector<BenchRow> rows;
  for (int frames : args.frames) {
    rows.push_back(bench_baseline(frames, args));
    std::printf("%-10s frames=%-3d backward %8.3f ms  forward %8.3f ms\n",
                rows.back().arch.c_str(), frames, rows.back().backward_ms,
                rows.back().forward_ms);
    std::fflush(stdout);
    for (int unroll : args.unrolls) {
      rows.push_back(bench_unrolled(frames, unroll, args));
      std::printf("%-10s frames=%-3d backward %8.3f ms  forward %8.3f ms\n",
                  rows.back().arch.c_str(), frames, rows.back().backward_ms,
                  rows.back().forward_ms);
      std::fflush(stdout);
    }
  }

  CsvWriter csv(args.out_csv, "rql-bench-v1", "arch,frames,backward_ms,forward_ms");
  for (const BenchRow& r : rows) {
    csv.row({r.arch, std::to_string(r.frames), csv_double(r.backward_ms),
             csv_double(r.forward_ms)});
  }
  return 0;
}

}  // namespace rql::cli
