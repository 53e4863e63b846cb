#include "demix/stem_set.hpp"

#include "demix/error.hpp"

namespace demix {

StemSet::StemSet(Map stems) {
  for (auto& [name, w] : stems) set(name, std::move(w));
}

void StemSet::set(const std::string& name, Waveform w) {
  if (!stems_.empty()) {
    const Waveform& ref = stems_.begin()->second;
    if (!ref.same_shape(w)) {
      throw ShapeError("stem '" + name + "' disagrees in shape with the other stems");
    }
  }
  stems_.insert_or_assign(name, std::move(w));
}

const Waveform& StemSet::at(const std::string& name) const {
  auto it = stems_.find(name);
  if (it == stems_.end()) throw Error("missing stem '" + name + "'");
  return it->second;
}

Waveform& StemSet::at(const std::string& name) {
  auto it = stems_.find(name);
  if (it == stems_.end()) throw Error("missing stem '" + name + "'");
  return it->second;
}

std::vector<std::string> StemSet::names() const {
  std::vector<std::string> out;
  out.reserve(stems_.size());
  for (const auto& [name, w] : stems_) out.push_back(name);
  return out;
}

Waveform StemSet::sum() const {
  if (stems_.empty()) throw Error("sum of an empty stem set");
  Waveform total = stems_.begin()->second;
  for (auto it = std::next(stems_.begin()); it != stems_.end(); ++it) total += it->second;
  return total;
}

}  // namespace demix
