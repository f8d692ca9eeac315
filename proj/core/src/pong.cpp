#include "rql/pong.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rql/errors.hpp"

namespace rql {

namespace {

void serve(PongState& s, const PongConfig& cfg) {
  s.ball_x = 0.5f;
  s.ball_y = 0.5f;
  const float dir_x = s.rng.bernoulli(0.5) ? 1.0f : -1.0f;
  const float dir_y = s.rng.bernoulli(0.5) ? 1.0f : -1.0f;
  s.vel_x = dir_x * cfg.serve_speed;
  s.vel_y = dir_y * static_cast<float>(
                        s.rng.uniform(cfg.serve_vy_min, cfg.serve_vy_max));
}

float clamp_paddle(float y, const PongConfig& cfg) {
  return std::clamp(y, cfg.paddle_half_height, 1.0f - cfg.paddle_half_height);
}

// Reflects the ball off a paddle plane if the swept segment crosses it at a
// covered height. Returns true on a hit.
bool paddle_bounce(PongState& s, float prev_x, float prev_y, float plane,
                   float paddle_y, bool moving_right, const PongConfig& cfg) {
  const bool crossed = moving_right ? (prev_x <= plane && s.ball_x >= plane)
                                    : (prev_x >= plane && s.ball_x <= plane);
  if (!crossed) return false;
  const float span = s.ball_x - prev_x;
  const float t = span == 0.0f ? 0.0f : (plane - prev_x) / span;
  const float y_cross = prev_y + t * (s.ball_y - prev_y);
  const float reach = cfg.paddle_half_height + cfg.ball_radius;
  const float offset = y_cross - paddle_y;
  if (std::abs(offset) > reach) return false;

  s.ball_x = 2.0f * plane - s.ball_x;
  const float speed_cap = cfg.speed_cap_factor * cfg.serve_speed;
  const float new_speed = std::min(std::abs(s.vel_x) * cfg.speedup, speed_cap);
  s.vel_x = moving_right ? -new_speed : new_speed;
  s.vel_y = cfg.english * (offset / reach) * new_speed;
  // center hits must not flatten the rally into an endless volley
  const float vy_floor = cfg.min_vy_fraction * new_speed;
  if (std::abs(s.vel_y) < vy_floor) {
    const float dir = s.vel_y != 0.0f  ? std::copysign(1.0f, s.vel_y)
                      : offset != 0.0f ? std::copysign(1.0f, offset)
                                       : 1.0f;
    s.vel_y = dir * vy_floor;
  }
  return true;
}

}  // namespace

std::pair<PongState, Observation> pong_reset(const PongConfig& cfg, uint64_t seed) {
  PongState s;
  s.rng = Rng(derive_seed(seed, 0x706f6e67));
  s.agent_y = 0.5f;
  s.opponent_y = 0.5f;
  s.agent_score = 0;
  s.opponent_score = 0;
  s.step_count = 0;
  serve(s, cfg);
  Observation obs{pong_render(s, cfg.frame_size, cfg), false};
  return {std::move(s), std::move(obs)};
}

PongStepResult pong_step(PongState& s, int action, const PongConfig& cfg) {
  if (action < 0 || action >= kPongNumActions) {
    throw ConfigError("pong action out of range: " + std::to_string(action));
  }

  if (action == kActionUp) s.agent_y -= cfg.paddle_speed;
  if (action == kActionDown) s.agent_y += cfg.paddle_speed;
  s.agent_y = clamp_paddle(s.agent_y, cfg);

  // opponent: proportional tracking, speed capped relative to the ball
  const float cap = std::min(cfg.opponent_speed_factor * std::abs(s.vel_y),
                             cfg.opponent_max_speed);
  const float delta = std::clamp(s.ball_y - s.opponent_y, -cap, cap);
  s.opponent_y = clamp_paddle(s.opponent_y + delta, cfg);

  const float prev_x = s.ball_x;
  const float prev_y = s.ball_y;
  s.ball_x += s.vel_x;
  s.ball_y += s.vel_y;

  // elastic wall reflection, |vy| preserved
  const float top = cfg.ball_radius;
  const float bottom = 1.0f - cfg.ball_radius;
  while (s.ball_y < top || s.ball_y > bottom) {
    if (s.ball_y < top) s.ball_y = 2.0f * top - s.ball_y;
    if (s.ball_y > bottom) s.ball_y = 2.0f * bottom - s.ball_y;
    s.vel_y = -s.vel_y;
  }

  if (s.vel_x > 0.0f) {
    paddle_bounce(s, prev_x, prev_y, cfg.agent_x - cfg.paddle_half_width,
                  s.agent_y, true, cfg);
  } else if (s.vel_x < 0.0f) {
    paddle_bounce(s, prev_x, prev_y, cfg.opponent_x + cfg.paddle_half_width,
                  s.opponent_y, false, cfg);
  }

  float reward = 0.0f;
  if (s.ball_x > 1.0f) {  // past the agent
    reward = -1.0f;
    s.opponent_score += 1;
    serve(s, cfg);
  } else if (s.ball_x < 0.0f) {  // past the opponent
    reward = 1.0f;
    s.agent_score += 1;
    serve(s, cfg);
  }

  s.step_count += 1;
  const bool done = s.agent_score >= cfg.points_to_win ||
                    s.opponent_score >= cfg.points_to_win ||
                    (cfg.max_steps > 0 && s.step_count >= cfg.max_steps);

  PongStepResult r;
  r.obs = Observation{pong_render(s, cfg.frame_size, cfg), false};
  r.reward = reward;
  r.done = done;
  return r;
}

TensorF pong_render(const PongState& s, int n, const PongConfig& cfg) {
  if (n < 8) throw ConfigError("render size must be at least 8");
  TensorF frame({1, n, n});
  auto draw_rect = [&](float cx, float cy, float half_w, float half_h) {
    const int x0 = std::max(0, static_cast<int>(std::floor((cx - half_w) * n)));
    const int x1 = std::min(n - 1, static_cast<int>(std::floor((cx + half_w) * n)));
    const int y0 = std::max(0, static_cast<int>(std::floor((cy - half_h) * n)));
    const int y1 = std::min(n - 1, static_cast<int>(std::floor((cy + half_h) * n)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        frame[static_cast<size_t>(y) * n + x] = 1.0f;
      }
    }
  };
  draw_rect(cfg.opponent_x, s.opponent_y, cfg.paddle_half_width,
            cfg.paddle_half_height);
  draw_rect(cfg.agent_x, s.agent_y, cfg.paddle_half_width,
            cfg.paddle_half_height);
  draw_rect(s.ball_x, s.ball_y, cfg.ball_radius, cfg.ball_radius);
  return frame;
}

}  // namespace rql
