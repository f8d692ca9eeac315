#include "rql/env.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>

#include "rql/errors.hpp"

namespace rql {

Observation flicker(Observation obs, double p, Rng& rng) {
  if (p < 0.0 || p > 1.0) {
    throw ConfigError("flicker probability must be in [0,1], got " +
                      std::to_string(p));
  }
  if (rng.bernoulli(p)) {
    obs.frame.zero();
    obs.obscured = true;
  }
  return obs;
}

FlickeringEnv::FlickeringEnv(std::unique_ptr<Environment> inner, double p,
                             uint64_t seed)
    : inner_(std::move(inner)), p_(p), rng_(seed) {
  if (p_ < 0.0 || p_ > 1.0) {
    throw ConfigError("flicker probability must be in [0,1], got " +
                      std::to_string(p_));
  }
}

Observation FlickeringEnv::reset(uint64_t seed) {
  return flicker(inner_->reset(seed), p_, rng_);
}

StepResult FlickeringEnv::step(int action) {
  StepResult r = inner_->step(action);
  r.obs = flicker(std::move(r.obs), p_, rng_);
  return r;
}

TensorF frame_stack(const std::deque<TensorF>& history, int k) {
  if (k < 1) throw ConfigError("frame stack needs k >= 1");
  if (history.empty()) throw ConfigError("frame stack needs at least one frame");
  const TensorF& ref = history.back();
  const int c = ref.dim(0), h = ref.dim(1), w = ref.dim(2);
  TensorF stack({k * c, h, w});
  const size_t frame_elems = ref.size();
  const int have = static_cast<int>(history.size());
  for (int j = 0; j < k; ++j) {
    // slot j holds the frame k-1-j steps ago; oldest first
    const int src = have - k + j;
    if (src < 0) continue;
    const TensorF& f = history[static_cast<size_t>(src)];
    std::copy(f.data(), f.data() + frame_elems,
              stack.data() + static_cast<size_t>(j) * frame_elems);
  }
  return stack;
}

TensorF luminance_overlay(const std::deque<TensorF>& history, int k) {
  if (k < 1) throw ConfigError("overlay needs k >= 1");
  if (history.empty()) throw ConfigError("overlay needs at least one frame");
  const TensorF& ref = history.back();
  TensorF out({1, ref.dim(1), ref.dim(2)});
  const int have = static_cast<int>(history.size());
  const int used = std::min(k, have);
  for (int j = 0; j < used; ++j) {
    const TensorF& f = history[static_cast<size_t>(have - used + j)];
    const float weight = static_cast<float>(j + 1) / static_cast<float>(used);
    for (size_t i = 0; i < out.size(); ++i) {
      out[i] = std::max(out[i], weight * f[i]);
    }
  }
  return out;
}

void write_pgm(const TensorF& frame, const std::string& path) {
  const int h = frame.dim(frame.rank() - 2);
  const int w = frame.dim(frame.rank() - 1);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "P5\n" << w << " " << h << "\n255\n";
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float v = std::clamp(frame[static_cast<size_t>(y) * w + x], 0.0f, 1.0f);
      out.put(static_cast<char>(static_cast<uint8_t>(v * 255.0f + 0.5f)));
    }
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace rql
