#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace k2q {

/// Seeded random stream with portable draws.
///
/// The standard distributions are implementation-defined, so the same seed
/// could give different datasets on different standard libraries. Draws here
/// only use the raw 64-bit engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Stream for one named unit of work (usually a document id). Streams for
  /// different keys are independent of each other and of scheduling order.
  static Rng derive(std::uint64_t seed, std::string_view key);

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  /// Uniform real in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

  /// `k` distinct indices out of [0, n), in increasing order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace k2q
