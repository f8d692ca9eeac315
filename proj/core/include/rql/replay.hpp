#ifndef RQL_REPLAY_HPP
#define RQL_REPLAY_HPP

#include <deque>
#include <memory>
#include <vector>

#include "rql/rng.hpp"
#include "rql/tensor.hpp"

namespace rql {

// One timestep as stored: the (post-preprocessing, pre-stacking) observation
// the action was chosen from. The successor observation is the next entry of
// the same episode.
struct Transition {
  TensorF observation;
  int action = 0;
  float reward = 0.0f;
  bool terminal = false;
};

struct Episode {
  std::vector<Transition> steps;
  int length() const { return static_cast<int>(steps.size()); }
};

using EpisodePtr = std::shared_ptr<const Episode>;

// A consecutive window of one episode. Windows never cross episode
// boundaries; `zero_initial_state` tells the consumer whether the recurrent
// state starts zeroed (random updates) or is carried (sequential updates).
struct SampledWindow {
  EpisodePtr episode;
  int start = 0;
  int length = 0;
  bool zero_initial_state = true;

  const Transition& step(int i) const {
    return episode->steps[static_cast<size_t>(start + i)];
  }
  // Observation of step i+1 within the episode; stepping past a terminal
  // transition is an error.
  const TensorF& next_observation(int i) const;
};

// Builds the k-frame stack ending at `index` from episodic storage,
// zero-padding positions before the episode start. Channel 0 is the oldest
// frame.
TensorF stacked_observation(const Episode& episode, int index, int k);

// Episodic replay memory. Whole episodes are the unit of eviction; the
// in-progress episode is not sampleable.
class ReplayMemory {
 public:
  ReplayMemory(size_t capacity, uint64_t seed);

  // Appends to the in-progress episode; a terminal transition seals it.
  // Capacity is enforced by evicting whole episodes, oldest first.
  void append(Transition t);

  bool can_sample() const { return !sealed_.empty(); }
  size_t num_sealed_episodes() const { return sealed_.size(); }
  size_t total_transitions() const {
    return sealed_transitions_ + in_progress_.size();
  }
  size_t capacity() const { return capacity_; }
  const std::deque<EpisodePtr>& episodes() const { return sealed_; }

  // Uniform episode, uniform start position, consecutive window of at most
  // `unroll` transitions (shorter only at episode end). The recurrent state
  // must be zeroed at the window start.
  SampledWindow sample_random_update(int unroll);

  // Uniform episode, returned whole and in order; the recurrent state is
  // carried across the episode.
  SampledWindow sample_sequential_update();

 private:
  void seal_in_progress();
  void evict_to_capacity();

  std::deque<EpisodePtr> sealed_;
  std::vector<Transition> in_progress_;
  size_t capacity_;
  size_t sealed_transitions_ = 0;
  Rng rng_;
};

}  // namespace rql

#endif  // RQL_REPLAY_HPP
