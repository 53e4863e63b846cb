#pragma once

#include <map>
#include <string>
#include <vector>

#include "demix/waveform.hpp"

namespace demix {

/// Named stems that all share one sample rate, channel count and length.
class StemSet {
 public:
  using Map = std::map<std::string, Waveform>;

  StemSet() = default;
  explicit StemSet(Map stems);

  /// Adds or replaces a stem; throws ShapeError if it disagrees in shape
  /// with the stems already present.
  void set(const std::string& name, Waveform w);

  bool contains(const std::string& name) const { return stems_.contains(name); }
  /// Throws Error naming the stem if absent.
  const Waveform& at(const std::string& name) const;
  Waveform& at(const std::string& name);

  bool empty() const noexcept { return stems_.empty(); }
  std::size_t size() const noexcept { return stems_.size(); }
  std::vector<std::string> names() const;

  Map::const_iterator begin() const { return stems_.begin(); }
  Map::const_iterator end() const { return stems_.end(); }
  const Map& map() const noexcept { return stems_; }

  /// Sample-wise sum of every stem. Throws on an empty set.
  Waveform sum() const;

  friend bool operator==(const StemSet&, const StemSet&) = default;

 private:
  Map stems_;
};

}  // namespace demix
