#include "k2q/rng.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "k2q/digest.hpp"
#include "k2q/error.hpp"

namespace k2q {

Rng Rng::derive(std::uint64_t seed, std::string_view key) {
  std::string material = std::to_string(seed);
  material.push_back('\0');
  material.append(key);
  return Rng(hash64(material));
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw Error(ErrorKind::invalid_argument, "Rng::index: empty range");
  const std::uint64_t bound = n;
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return static_cast<std::size_t>(x % bound);
}

std::vector<std::size_t> Rng::sample_indices(std::size_t n, std::size_t k) {
  k = std::min(k, n);
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(all[i], all[i + index(n - i)]);
  }
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace k2q
