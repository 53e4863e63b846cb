#include "demix/noise.hpp"

#include <cmath>
#include <numbers>

namespace demix {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

namespace {

double unit_interval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace

double CounterNoise::uniform(std::int64_t index) const noexcept {
  return unit_interval(splitmix64(key_ ^ splitmix64(static_cast<std::uint64_t>(index))));
}

double CounterNoise::gaussian(std::int64_t index) const noexcept {
  const auto base = static_cast<std::uint64_t>(index) * 2;
  const double u1 = unit_interval(splitmix64(key_ ^ splitmix64(base)));
  const double u2 = unit_interval(splitmix64(key_ ^ splitmix64(base + 1)));
  // 1 - u1 lies in (0, 1], keeping the log finite.
  return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace demix
