#ifndef RQL_RNG_HPP
#define RQL_RNG_HPP

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace rql {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Mixes a stream tag into a base seed so that independent consumers (env,
// action selection, replay sampling, evaluation, ...) get decorrelated
// streams from one experiment seed.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream));
}

// Seeded generator with explicitly-defined mappings to reals and integers.
// std::uniform_*_distribution is implementation-defined, so rolling the
// mappings here keeps trajectories reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(splitmix64(seed)) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Multiply-shift mapping; bias is O(n / 2^64).
  int uniform_int(int n) {
    const auto wide = static_cast<unsigned __int128>(next_u64()) *
                      static_cast<unsigned __int128>(static_cast<uint64_t>(n));
    return static_cast<int>(wide >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // mt19937_64's text serialization is specified by the standard, so state
  // round-trips exactly through checkpoints.
  std::string save_state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }
  void load_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
  }

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rql

#endif  // RQL_RNG_HPP
