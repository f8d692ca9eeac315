#include <map>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "rql/replay.hpp"

using namespace rql;

namespace {

TensorF marker_frame(float v) {
  TensorF f({1, 2, 2});
  f.fill(v);
  return f;
}

Transition make_step(float v, bool terminal = false, int action = 0) {
  return Transition{marker_frame(v), action, 0.0f, terminal};
}

void append_episode(ReplayMemory& m, int length, float base = 0.0f) {
  for (int i = 0; i < length; ++i) {
    m.append(make_step(base + static_cast<float>(i), i == length - 1));
  }
}

}  // namespace

TEST_CASE("terminal seals the in-progress episode") {
  ReplayMemory m(100, 1);
  m.append(make_step(0));
  m.append(make_step(1));
  CHECK(m.num_sealed_episodes() == 0);
  CHECK(!m.can_sample());
  m.append(make_step(2, true));
  CHECK(m.num_sealed_episodes() == 1);
  CHECK(m.episodes().front()->length() == 3);
  CHECK(m.total_transitions() == 3);

  // appending after a terminal starts a new episode
  m.append(make_step(3));
  CHECK(m.num_sealed_episodes() == 1);
  CHECK(m.total_transitions() == 4);
}

TEST_CASE("capacity evicts whole episodes, oldest first") {
  ReplayMemory m(5, 1);
  append_episode(m, 3, 0.0f);
  append_episode(m, 3, 10.0f);
  CHECK(m.num_sealed_episodes() == 1);
  CHECK(m.total_transitions() == 3);
  // the survivor is the newer episode
  CHECK(m.episodes().front()->steps[0].observation[0] == 10.0f);
}

TEST_CASE("an episode longer than the whole capacity is an error") {
  ReplayMemory m(4, 1);
  m.append(make_step(0));
  m.append(make_step(1));
  m.append(make_step(2));
  m.append(make_step(3));
  CHECK_THROWS_AS(m.append(make_step(4)), ReplayError);
}

TEST_CASE("random windows enumerate the documented start positions") {
  ReplayMemory m(100, 7);
  append_episode(m, 5);

  std::map<int, int> lengths_by_start;
  for (int i = 0; i < 2000; ++i) {
    const SampledWindow w = m.sample_random_update(2);
    CHECK(w.zero_initial_state);
    CHECK(w.start >= 0);
    CHECK(w.start <= 4);
    lengths_by_start[w.start] = w.length;
  }
  CHECK(lengths_by_start.size() == 5);  // all starts reachable
  for (int s = 0; s <= 3; ++s) CHECK(lengths_by_start[s] == 2);
  CHECK(lengths_by_start[4] == 1);  // shorter only at episode end
}

TEST_CASE("unroll beyond the episode returns the whole episode") {
  ReplayMemory m(100, 3);
  append_episode(m, 4);
  for (int i = 0; i < 50; ++i) {
    const SampledWindow w = m.sample_random_update(64);
    CHECK(w.length == 4 - w.start);
  }
}

TEST_CASE("sequential sampling returns whole episodes in order") {
  ReplayMemory m(100, 5);
  append_episode(m, 6, 100.0f);
  const SampledWindow w = m.sample_sequential_update();
  CHECK(!w.zero_initial_state);
  CHECK(w.start == 0);
  CHECK(w.length == 6);
  CHECK(w.step(0).observation[0] == 100.0f);
  CHECK(w.step(5).terminal);
  for (int i = 0; i < 6; ++i) {
    CHECK(w.step(i).observation[0] == 100.0f + static_cast<float>(i));
  }
}

TEST_CASE("next_observation walks within the episode and stops at terminal") {
  ReplayMemory m(100, 5);
  append_episode(m, 3);
  const SampledWindow w = m.sample_sequential_update();
  CHECK(w.next_observation(0)[0] == 1.0f);
  CHECK(w.next_observation(1)[0] == 2.0f);
  CHECK_THROWS_AS(w.next_observation(2), ReplayError);  // terminal step
  CHECK_THROWS_AS(w.next_observation(7), ReplayError);
}

TEST_CASE("sampling from an empty memory is an error") {
  ReplayMemory m(10, 1);
  CHECK_THROWS_AS(m.sample_random_update(4), ReplayError);
  CHECK_THROWS_AS(m.sample_sequential_update(), ReplayError);
  m.append(make_step(0));  // in-progress episodes are not sampleable
  CHECK_THROWS_AS(m.sample_random_update(4), ReplayError);
}

TEST_CASE("start positions are uniform (chi-square at 0.01)") {
  ReplayMemory m(100, 99);
  append_episode(m, 10);
  std::vector<int64_t> counts(10, 0);
  for (int i = 0; i < 10000; ++i) {
    counts[static_cast<size_t>(m.sample_random_update(3).start)] += 1;
  }
  const double stat = test::chi_square_uniform(counts);
  CHECK(stat < test::chi_square_critical_01(9));
}

TEST_CASE("episode choice is uniform (chi-square at 0.01)") {
  ReplayMemory m(1000, 123);
  append_episode(m, 4, 0.0f);
  append_episode(m, 8, 10.0f);
  append_episode(m, 6, 20.0f);
  std::vector<int64_t> counts(3, 0);
  for (int i = 0; i < 10000; ++i) {
    const SampledWindow w = m.sample_sequential_update();
    counts[static_cast<size_t>(w.step(0).observation[0] / 10.0f)] += 1;
  }
  CHECK(test::chi_square_uniform(counts) < test::chi_square_critical_01(2));
}

TEST_CASE("windows never cross episode boundaries") {
  Rng rng(17);
  ReplayMemory m(5000, 31);
  std::vector<int> lengths;
  for (int e = 0; e < 40; ++e) {
    const int len = 1 + rng.uniform_int(12);
    lengths.push_back(len);
    append_episode(m, len, static_cast<float>(e) * 100.0f);
  }
  for (int i = 0; i < 10000; ++i) {
    const int unroll = 1 + rng.uniform_int(8);
    const SampledWindow w = m.sample_random_update(unroll);
    const int len = w.episode->length();
    CHECK(w.length >= 1);
    CHECK(w.length <= unroll);
    CHECK(w.start + w.length <= len);
    // every step of the window belongs to the same episode marker
    const float base = w.step(0).observation[0];
    for (int j = 1; j < w.length; ++j) {
      CHECK(w.step(j).observation[0] == base + static_cast<float>(j));
    }
    if (w.length < unroll) CHECK(w.start + w.length == len);
  }
}

TEST_CASE("a fixed seed reproduces the sampling sequence bit-exactly") {
  auto build = [] {
    ReplayMemory m(1000, 555);
    append_episode(m, 7, 0.0f);
    append_episode(m, 9, 10.0f);
    append_episode(m, 5, 20.0f);
    return m;
  };
  ReplayMemory a = build();
  ReplayMemory b = build();
  for (int i = 0; i < 500; ++i) {
    const SampledWindow wa = a.sample_random_update(3);
    const SampledWindow wb = b.sample_random_update(3);
    CHECK(wa.start == wb.start);
    CHECK(wa.length == wb.length);
    CHECK(wa.step(0).observation[0] == wb.step(0).observation[0]);
  }
}

TEST_CASE("stacked reads zero-pad before the episode start, oldest first") {
  ReplayMemory m(100, 1);
  append_episode(m, 3, 5.0f);  // markers 5, 6, 7
  const Episode& ep = *m.episodes().front();

  const TensorF stack = stacked_observation(ep, 1, 4);
  CHECK(stack.shape() == std::vector<int>{4, 2, 2});
  // channels: [zero, zero, obs0, obs1]
  CHECK(stack.at({0, 0, 0}) == 0.0f);
  CHECK(stack.at({1, 0, 0}) == 0.0f);
  CHECK(stack.at({2, 0, 0}) == 5.0f);
  CHECK(stack.at({3, 0, 0}) == 6.0f);

  // no hidden duplication: stored payload is one frame per transition
  CHECK(ep.steps[0].observation.size() == 4);
  CHECK_THROWS_AS(stacked_observation(ep, 9, 4), ReplayError);
}

TEST_CASE("total transitions never exceed capacity under random appends") {
  Rng rng(77);
  ReplayMemory m(64, 3);
  for (int i = 0; i < 3000; ++i) {
    m.append(make_step(static_cast<float>(i), rng.bernoulli(0.3)));
    CHECK(m.total_transitions() <= 64);
  }
}
