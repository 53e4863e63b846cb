#include "demix/chunking.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "demix/error.hpp"

namespace demix {

namespace {

std::vector<double> triangular_window(std::size_t len) {
  std::vector<double> w(len);
  const double half = static_cast<double>(len) / 2.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double centre = static_cast<double>(i) + 0.5;
    w[i] = 1.0 - std::abs(centre - half) / half;
  }
  return w;
}

}  // namespace

double ChunkPlan::coverage(std::size_t n) const {
  double sum = 0.0;
  for (std::size_t off : offsets) {
    if (n >= off && n < off + chunk_len) sum += window[n - off];
  }
  return sum;
}

double ChunkPlan::normalized_weight(std::size_t k, std::size_t n) const {
  const std::size_t off = offsets.at(k);
  if (n < off || n >= off + chunk_len) return 0.0;
  return window[n - off] / coverage(n);
}

ChunkPlan plan_chunks(std::size_t length, std::size_t chunk_len, double overlap) {
  if (chunk_len == 0) throw ConfigError("chunk length must be positive");
  if (!(overlap >= 0.0 && overlap < 1.0)) {
    throw ConfigError("overlap must lie in [0, 1), got " + std::to_string(overlap));
  }
  ChunkPlan plan;
  plan.chunk_len = chunk_len;
  plan.length = length;
  const double ideal = std::round(static_cast<double>(chunk_len) * (1.0 - overlap));
  plan.hop = std::max<std::size_t>(1, static_cast<std::size_t>(ideal));
  plan.offsets.push_back(0);
  for (std::size_t off = plan.hop; off < length; off += plan.hop) plan.offsets.push_back(off);
  plan.window = triangular_window(chunk_len);
  return plan;
}

Waveform overlap_add(std::span<const ChunkPiece> pieces, const ChunkPlan& plan, std::size_t total_len) {
  if (pieces.size() != plan.offsets.size()) {
    throw ShapeError("overlap_add: " + std::to_string(pieces.size()) + " pieces for " +
                     std::to_string(plan.offsets.size()) + " planned chunks");
  }
  if (total_len > plan.length) {
    throw ShapeError("overlap_add: output length exceeds the planned length");
  }
  std::vector<const ChunkPiece*> ordered;
  ordered.reserve(pieces.size());
  for (const auto& p : pieces) ordered.push_back(&p);
  std::sort(ordered.begin(), ordered.end(),
            [](const ChunkPiece* a, const ChunkPiece* b) { return a->first < b->first; });

  const Waveform& first = ordered.front()->second;
  for (std::size_t k = 0; k < ordered.size(); ++k) {
    const auto& [offset, w] = *ordered[k];
    if (offset != plan.offsets[k]) {
      throw ShapeError("overlap_add: piece offset " + std::to_string(offset) +
                       " does not match planned offset " + std::to_string(plan.offsets[k]));
    }
    if (w.length() != plan.chunk_len) {
      throw ShapeError("overlap_add: piece at offset " + std::to_string(offset) + " has " +
                       std::to_string(w.length()) + " samples, expected " +
                       std::to_string(plan.chunk_len));
    }
    if (w.num_channels() != first.num_channels() || w.sample_rate() != first.sample_rate()) {
      throw ShapeError("overlap_add: pieces disagree in channel count or sample rate");
    }
  }

  std::vector<double> norm(total_len, 0.0);
  for (const ChunkPiece* piece : ordered) {
    const std::size_t off = piece->first;
    if (off >= total_len) continue;
    const std::size_t span_len = std::min(plan.chunk_len, total_len - off);
    for (std::size_t i = 0; i < span_len; ++i) norm[off + i] += plan.window[i];
  }

  // Weights are normalised before accumulation, so a sample covered by a
  // single chunk is copied exactly.
  Waveform acc(first.num_channels(), total_len, first.sample_rate());
  std::vector<double> weight(plan.chunk_len);
  for (const ChunkPiece* piece : ordered) {
    const std::size_t off = piece->first;
    if (off >= total_len) continue;
    const std::size_t span_len = std::min(plan.chunk_len, total_len - off);
    for (std::size_t i = 0; i < span_len; ++i) weight[i] = plan.window[i] / norm[off + i];
    for (std::size_t c = 0; c < acc.num_channels(); ++c) {
      auto dst = acc.channel(c);
      auto src = piece->second.channel(c);
      for (std::size_t i = 0; i < span_len; ++i) dst[off + i] += weight[i] * src[i];
    }
  }
  return acc;
}

}  // namespace demix
