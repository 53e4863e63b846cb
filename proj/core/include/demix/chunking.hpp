#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "demix/waveform.hpp"

namespace demix {

/// Segmentation of a signal into overlapping windowed chunks.
///
/// Offsets are k * hop for every k with k * hop < length (at least one
/// offset, even for an empty signal). The tail of the last chunk reads past
/// the end of the signal and is zero-padded. The triangular window is
/// strictly positive, so renormalising by the per-sample window sum gives an
/// exact partition of unity everywhere, including both edges.
struct ChunkPlan {
  std::size_t chunk_len = 0;
  std::size_t hop = 0;
  std::size_t length = 0;
  std::vector<std::size_t> offsets;
  std::vector<double> window;

  /// Sum of raw window weights landing on output sample `n`.
  double coverage(std::size_t n) const;
  /// Normalised weight of chunk `k` at output sample `n` (0 outside the chunk).
  double normalized_weight(std::size_t k, std::size_t n) const;
};

/// hop = max(1, round(chunk_len * (1 - overlap))).
/// Throws ConfigError for chunk_len == 0 or overlap outside [0, 1).
ChunkPlan plan_chunks(std::size_t length, std::size_t chunk_len, double overlap);

/// One separated chunk: (offset into the full signal, chunk_len samples).
using ChunkPiece = std::pair<std::size_t, Waveform>;

/// Weighted overlap-add. Pieces may arrive in any order but must match the
/// plan's offsets one-to-one and be exactly chunk_len long; they are merged
/// in offset order so the result does not depend on scheduling.
Waveform overlap_add(std::span<const ChunkPiece> pieces, const ChunkPlan& plan, std::size_t total_len);

}  // namespace demix
