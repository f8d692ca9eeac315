#include "rql/replay.hpp"

#include <string>

#include "rql/errors.hpp"

namespace rql {

const TensorF& SampledWindow::next_observation(int i) const {
  const auto& steps = episode->steps;
  const int pos = start + i;
  if (pos < 0 || pos >= static_cast<int>(steps.size())) {
    throw ReplayError("window step " + std::to_string(i) + " out of episode");
  }
  if (steps[static_cast<size_t>(pos)].terminal) {
    throw ReplayError("no successor observation past a terminal step");
  }
  return steps[static_cast<size_t>(pos + 1)].observation;
}

TensorF stacked_observation(const Episode& episode, int index, int k) {
  if (index < 0 || index >= episode.length()) {
    throw ReplayError("stack index " + std::to_string(index) +
                      " out of episode of length " +
                      std::to_string(episode.length()));
  }
  const TensorF& ref = episode.steps[static_cast<size_t>(index)].observation;
  const int c = ref.dim(0), h = ref.dim(1), w = ref.dim(2);
  TensorF stack({k * c, h, w});
  const size_t frame_elems = ref.size();
  for (int j = 0; j < k; ++j) {
    const int src = index - (k - 1) + j;
    if (src < 0) continue;  // zero frames before episode start
    const TensorF& obs = episode.steps[static_cast<size_t>(src)].observation;
    std::copy(obs.data(), obs.data() + frame_elems,
              stack.data() + static_cast<size_t>(j) * frame_elems);
  }
  return stack;
}

ReplayMemory::ReplayMemory(size_t capacity, uint64_t seed)
    : capacity_(capacity), rng_(seed) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayMemory::append(Transition t) {
  const bool terminal = t.terminal;
  in_progress_.push_back(std::move(t));
  if (terminal) seal_in_progress();
  evict_to_capacity();
}

void ReplayMemory::seal_in_progress() {
  auto ep = std::make_shared<Episode>();
  ep->steps = std::move(in_progress_);
  in_progress_.clear();
  sealed_transitions_ += ep->steps.size();
  sealed_.push_back(std::move(ep));
}

void ReplayMemory::evict_to_capacity() {
  while (total_transitions() > capacity_ && !sealed_.empty()) {
    sealed_transitions_ -= sealed_.front()->steps.size();
    sealed_.pop_front();
  }
  if (total_transitions() > capacity_) {
    throw ReplayError("in-progress episode alone exceeds replay capacity " +
                      std::to_string(capacity_) +
                      "; raise the capacity or shorten episodes");
  }
}

SampledWindow ReplayMemory::sample_random_update(int unroll) {
  if (sealed_.empty()) throw ReplayError("cannot sample from an empty memory");
  if (unroll < 1) throw ConfigError("unroll must be >= 1");
  const auto& ep = sealed_[static_cast<size_t>(
      rng_.uniform_int(static_cast<int>(sealed_.size())))];
  const int len = ep->length();
  const int start = rng_.uniform_int(len);
  SampledWindow w;
  w.episode = ep;
  w.start = start;
  w.length = std::min(unroll, len - start);
  w.zero_initial_state = true;
  return w;
}

SampledWindow ReplayMemory::sample_sequential_update() {
  if (sealed_.empty()) throw ReplayError("cannot sample from an empty memory");
  const auto& ep = sealed_[static_cast<size_t>(
      rng_.uniform_int(static_cast<int>(sealed_.size())))];
  SampledWindow w;
  w.episode = ep;
  w.start = 0;
  w.length = ep->length();
  w.zero_initial_state = false;
  return w;
}

}  // namespace rql
