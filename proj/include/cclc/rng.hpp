#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace cclc {

// Deterministic random source. All draws go through the 53-bit uniform
// below instead of std::uniform_real_distribution, so two runs with the
// same seed produce identical streams on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform draw in [lo, hi) with 53 bits of resolution.
  double uniform(double lo, double hi) {
    const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
  }

  // Uniform index in [0, n). n must be positive.
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

  // Fisher-Yates; spelled out so the permutation does not depend on the
  // standard library's std::shuffle implementation.
  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

  std::string save_state() const;
  void restore_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace cclc
