#ifndef RQL_PONG_HPP
#define RQL_PONG_HPP

#include <cstdint>
#include <utility>

#include "rql/env.hpp"
#include "rql/rng.hpp"
#include "rql/tensor.hpp"

namespace rql {

// Desk-scale two-paddle Pong in the unit square. The agent defends the right
// edge. The true state carries ball velocity; a rendered frame shows
// positions only, so a single frame underdetermines the state.
struct PongConfig {
  int frame_size = 32;        // 84 supported for paper-shape experiments
  int points_to_win = 5;      // episode ends when either side reaches this
  int max_steps = 3000;       // safety cap; episode ends (done) when reached

  float serve_speed = 0.05f;  // |vx| right after a serve
  float serve_vy_min = 0.015f;
  float serve_vy_max = 0.035f;
  float paddle_speed = 0.06f;
  float paddle_half_height = 0.15f;
  float paddle_half_width = 0.016f;
  float ball_radius = 0.045f;
  float agent_x = 0.95f;
  float opponent_x = 0.05f;
  // The opponent tracks the ball with speed capped at this fraction of the
  // ball's vertical speed: winnable but not trivial. The absolute ceiling
  // keeps escalated rallies decisive.
  float opponent_speed_factor = 0.8f;
  float opponent_max_speed = 0.04f;
  float english = 0.7f;       // vy imparted by off-center paddle hits
  float speedup = 1.12f;      // |vx| multiplier per paddle hit
  float speed_cap_factor = 3.0f;  // relative to serve_speed
  float min_vy_fraction = 0.35f;  // vy floor after a paddle hit
};

struct PongState {
  float ball_x = 0.5f, ball_y = 0.5f;
  float vel_x = 0.0f, vel_y = 0.0f;
  float agent_y = 0.5f, opponent_y = 0.5f;
  int agent_score = 0, opponent_score = 0;
  int step_count = 0;
  Rng rng{0};
};

enum PongAction { kActionUp = 0, kActionStay = 1, kActionDown = 2 };
inline constexpr int kPongNumActions = 3;

// Ball at center with a randomized serve direction, scores 0-0.
// Deterministic per seed.
std::pair<PongState, Observation> pong_reset(const PongConfig& cfg, uint64_t seed);

struct PongStepResult {
  Observation obs;
  float reward = 0.0f;  // +1 opponent missed, -1 agent missed, else 0
  bool done = false;
};

PongStepResult pong_step(PongState& state, int action, const PongConfig& cfg);

// Paddles and ball as filled rectangles at intensity 1 on a black
// background. Positions only; no velocity cue in a single frame.
TensorF pong_render(const PongState& state, int n, const PongConfig& cfg);

class PongEnv : public Environment {
 public:
  explicit PongEnv(PongConfig cfg = {}) : cfg_(cfg) {}

  int num_actions() const override { return kPongNumActions; }
  int frame_size() const override { return cfg_.frame_size; }

  Observation reset(uint64_t seed) override {
    auto [state, obs] = pong_reset(cfg_, seed);
    state_ = std::move(state);
    return obs;
  }

  StepResult step(int action) override {
    PongStepResult r = pong_step(state_, action, cfg_);
    return StepResult{std::move(r.obs), r.reward, r.done};
  }

  const PongState& state() const { return state_; }
  const PongConfig& config() const { return cfg_; }

 private:
  PongConfig cfg_;
  PongState state_;
};

}  // namespace rql

#endif  // RQL_PONG_HPP
