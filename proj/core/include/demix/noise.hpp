#pragma once

#include <cstdint>
#include <string_view>

namespace demix {

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view text) noexcept;

/// Stateless Gaussian noise: the value at an index depends only on the
/// stream key and that index, so any slice of the stream can be generated
/// independently and chunked processing sees one consistent signal.
class CounterNoise {
 public:
  explicit CounterNoise(std::uint64_t key) noexcept : key_(splitmix64(key)) {}

  /// Standard normal sample; negative indices are valid.
  double gaussian(std::int64_t index) const noexcept;
  /// Uniform in [0, 1).
  double uniform(std::int64_t index) const noexcept;

 private:
  std::uint64_t key_;
};

}  // namespace demix
