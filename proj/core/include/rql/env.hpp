#ifndef RQL_ENV_HPP
#define RQL_ENV_HPP

#include <deque>
#include <memory>
#include <string>

#include "rql/rng.hpp"
#include "rql/tensor.hpp"

namespace rql {

// What the agent sees: a [1,N,N] grayscale frame in [0,1]. An obscured
// observation is all zeros.
struct Observation {
  TensorF frame;
  bool obscured = false;
};

struct StepResult {
  Observation obs;
  float reward = 0.0f;
  bool done = false;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual int num_actions() const = 0;
  virtual int frame_size() const = 0;
  // channels per observation frame; stacking multiplies this
  virtual int obs_channels() const { return 1; }
  virtual Observation reset(uint64_t seed) = 0;
  virtual StepResult step(int action) = 0;
};

// With probability p the frame is replaced by all zeros and flagged
// obscured; otherwise the observation passes through untouched.
Observation flicker(Observation obs, double p, Rng& rng);

// Wrapper inducing partial observability. Never alters reward, done, or the
// underlying environment state.
class FlickeringEnv : public Environment {
 public:
  FlickeringEnv(std::unique_ptr<Environment> inner, double p, uint64_t seed);

  int num_actions() const override { return inner_->num_actions(); }
  int frame_size() const override { return inner_->frame_size(); }
  int obs_channels() const override { return inner_->obs_channels(); }
  Observation reset(uint64_t seed) override;
  StepResult step(int action) override;

  Environment& inner() { return *inner_; }

 private:
  std::unique_ptr<Environment> inner_;
  double p_;
  Rng rng_;
};

// Last k frames concatenated on the channel axis, oldest first: a stack of
// k C-channel frames is [k*C,H,W]. The history holds the most recent frame
// at the back; missing history before episode start is zero-filled.
TensorF frame_stack(const std::deque<TensorF>& history, int k);

// Diagnostic overlay: superimposes the last k frames, weighting recent
// frames with more luminance.
TensorF luminance_overlay(const std::deque<TensorF>& history, int k);

// Rolling window of the most recent k frames an agent has seen.
class FrameHistory {
 public:
  explicit FrameHistory(int k) : k_(k) {}
  void clear() { frames_.clear(); }
  void push(const TensorF& frame) {
    frames_.push_back(frame);
    while (static_cast<int>(frames_.size()) > k_) frames_.pop_front();
  }
  TensorF stack() const { return frame_stack(frames_, k_); }
  TensorF overlay() const { return luminance_overlay(frames_, k_); }
  int k() const { return k_; }

 private:
  int k_;
  std::deque<TensorF> frames_;
};

// Frame dump as a binary portable graymap (P5), 8 bits per pixel.
void write_pgm(const TensorF& frame, const std::string& path);

}  // namespace rql

#endif  // RQL_ENV_HPP
