#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace demix {

inline constexpr unsigned kDefaultSampleRate = 44100;

/// Planar multichannel audio. Samples are stored as double so that algebra
/// over long signals stays well below the tolerances the metrics care about.
///
/// Every channel has the same length and the sample rate is positive. The
/// finite-sample invariant is checked when a waveform is built from data and
/// again at I/O boundaries; code that writes through `channel()` is expected
/// to keep samples finite.
class Waveform {
 public:
  /// Empty mono waveform at the default rate.
  Waveform();
  /// Zero-filled waveform.
  Waveform(std::size_t num_channels, std::size_t length, unsigned sample_rate);
  /// Takes ownership of `channels`; throws ShapeError on ragged or empty
  /// channel lists, invalid rates, or non-finite samples.
  Waveform(std::vector<std::vector<double>> channels, unsigned sample_rate);

  std::size_t num_channels() const noexcept { return channels_.size(); }
  std::size_t length() const noexcept { return channels_.front().size(); }
  unsigned sample_rate() const noexcept { return sample_rate_; }
  double duration_seconds() const noexcept {
    return static_cast<double>(length()) / sample_rate_;
  }

  std::span<const double> channel(std::size_t c) const { return channels_.at(c); }
  std::span<double> channel(std::size_t c) { return channels_.at(c); }

  double at(std::size_t c, std::size_t n) const { return channels_[c][n]; }
  double& at(std::size_t c, std::size_t n) { return channels_[c][n]; }

  /// Same channel count, length, and sample rate.
  bool same_shape(const Waveform& other) const noexcept;

  /// Sum of squares over every channel and sample (pairwise summation).
  double energy() const;
  /// Largest absolute sample value (0 for an empty waveform).
  double peak() const;

  /// Throws ShapeError if any sample is NaN or infinite.
  void check_finite() const;

  /// Copy of samples [offset, offset + len) where out-of-range positions
  /// (including negative offsets) read as zero.
  Waveform slice(std::ptrdiff_t offset, std::size_t len) const;

  Waveform& operator+=(const Waveform& other);
  Waveform& operator-=(const Waveform& other);
  Waveform& operator*=(double gain);

  friend bool operator==(const Waveform&, const Waveform&) = default;

 private:
  std::vector<std::vector<double>> channels_;
  unsigned sample_rate_;
};

Waveform operator+(Waveform a, const Waveform& b);
Waveform operator-(Waveform a, const Waveform& b);
Waveform operator*(double gain, Waveform w);

/// Throws ShapeError naming `context` unless the two waveforms share shape.
void require_same_shape(const Waveform& a, const Waveform& b, const char* context);

/// out[c][n] = -w[c][n].
Waveform polarity_invert(const Waveform& w);

/// out[c][n] = sum_i coeffs[i] * ws[i][c][n].
/// Channel-count mismatches are errors; nothing is up- or down-mixed.
Waveform mix_linear(std::span<const Waveform> ws, std::span<const double> coeffs);

/// Largest absolute sample-wise difference between two same-shape waveforms.
double max_abs_diff(const Waveform& a, const Waveform& b);

/// Pairwise (cascade) summation; result is independent of thread scheduling.
double pairwise_sum(std::span<const double> values);
double pairwise_sum_squares(std::span<const double> values);

}  // namespace demix
