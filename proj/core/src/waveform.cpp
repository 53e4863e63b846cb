#include "demix/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "demix/error.hpp"

namespace demix {

namespace {

constexpr std::size_t kPairwiseBlock = 128;

template <typename F>
double pairwise(std::span<const double> v, F term) {
  if (v.size() <= kPairwiseBlock) {
    double acc = 0.0;
    for (double x : v) acc += term(x);
    return acc;
  }
  const std::size_t half = v.size() / 2;
  return pairwise(v.first(half), term) + pairwise(v.subspan(half), term);
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
  return pairwise(values, [](double x) { return x; });
}

double pairwise_sum_squares(std::span<const double> values) {
  return pairwise(values, [](double x) { return x * x; });
}

Waveform::Waveform() : channels_(1), sample_rate_(kDefaultSampleRate) {}

Waveform::Waveform(std::size_t num_channels, std::size_t length, unsigned sample_rate)
    : channels_(num_channels, std::vector<double>(length, 0.0)), sample_rate_(sample_rate) {
  if (num_channels == 0) throw ShapeError("waveform needs at least one channel");
  if (sample_rate == 0) throw ShapeError("sample rate must be positive");
}

Waveform::Waveform(std::vector<std::vector<double>> channels, unsigned sample_rate)
    : channels_(std::move(channels)), sample_rate_(sample_rate) {
  if (channels_.empty()) throw ShapeError("waveform needs at least one channel");
  if (sample_rate_ == 0) throw ShapeError("sample rate must be positive");
  const std::size_t len = channels_.front().size();
  for (const auto& ch : channels_) {
    if (ch.size() != len) throw ShapeError("channels have different lengths");
  }
  check_finite();
}

bool Waveform::same_shape(const Waveform& other) const noexcept {
  return num_channels() == other.num_channels() && length() == other.length() &&
         sample_rate_ == other.sample_rate_;
}

double Waveform::energy() const {
  double total = 0.0;
  for (const auto& ch : channels_) total += pairwise_sum_squares(ch);
  return total;
}

double Waveform::peak() const {
  double p = 0.0;
  for (const auto& ch : channels_) {
    for (double x : ch) p = std::max(p, std::abs(x));
  }
  return p;
}

void Waveform::check_finite() const {
  for (std::size_t c = 0; c < channels_.size(); ++c) {
    const auto& ch = channels_[c];
    auto bad = std::find_if(ch.begin(), ch.end(), [](double x) { return !std::isfinite(x); });
    if (bad != ch.end()) {
      throw ShapeError("non-finite sample at channel " + std::to_string(c) + ", index " +
                       std::to_string(bad - ch.begin()));
    }
  }
}

Waveform Waveform::slice(std::ptrdiff_t offset, std::size_t len) const {
  Waveform out(num_channels(), len, sample_rate_);
  const auto total = static_cast<std::ptrdiff_t>(length());
  const std::ptrdiff_t begin = std::max<std::ptrdiff_t>(offset, 0);
  const std::ptrdiff_t end = std::min<std::ptrdiff_t>(offset + static_cast<std::ptrdiff_t>(len), total);
  if (begin >= end) return out;
  for (std::size_t c = 0; c < num_channels(); ++c) {
    std::copy(channels_[c].begin() + begin, channels_[c].begin() + end,
              out.channels_[c].begin() + (begin - offset));
  }
  return out;
}

Waveform& Waveform::operator+=(const Waveform& other) {
  require_same_shape(*this, other, "waveform addition");
  for (std::size_t c = 0; c < channels_.size(); ++c) {
    auto& dst = channels_[c];
    const auto& src = other.channels_[c];
    for (std::size_t n = 0; n < dst.size(); ++n) dst[n] += src[n];
  }
  return *this;
}

Waveform& Waveform::operator-=(const Waveform& other) {
  require_same_shape(*this, other, "waveform subtraction");
  for (std::size_t c = 0; c < channels_.size(); ++c) {
    auto& dst = channels_[c];
    const auto& src = other.channels_[c];
    for (std::size_t n = 0; n < dst.size(); ++n) dst[n] -= src[n];
  }
  return *this;
}

Waveform& Waveform::operator*=(double gain) {
  for (auto& ch : channels_) {
    for (double& x : ch) x *= gain;
  }
  return *this;
}

Waveform operator+(Waveform a, const Waveform& b) { return a += b; }
Waveform operator-(Waveform a, const Waveform& b) { return a -= b; }
Waveform operator*(double gain, Waveform w) { return w *= gain; }

void require_same_shape(const Waveform& a, const Waveform& b, const char* context) {
  if (a.same_shape(b)) return;
  throw ShapeError(std::string(context) + ": shape mismatch (" +
                   std::to_string(a.num_channels()) + "ch x " + std::to_string(a.length()) + " @ " +
                   std::to_string(a.sample_rate()) + " Hz vs " + std::to_string(b.num_channels()) +
                   "ch x " + std::to_string(b.length()) + " @ " + std::to_string(b.sample_rate()) +
                   " Hz)");
}

Waveform polarity_invert(const Waveform& w) {
  Waveform out = w;
  for (std::size_t c = 0; c < out.num_channels(); ++c) {
    for (double& x : out.channel(c)) x = -x;
  }
  return out;
}

Waveform mix_linear(std::span<const Waveform> ws, std::span<const double> coeffs) {
  if (ws.empty()) throw ShapeError("mix_linear: no inputs");
  if (ws.size() != coeffs.size()) {
    throw ShapeError("mix_linear: " + std::to_string(ws.size()) + " inputs but " +
                     std::to_string(coeffs.size()) + " coefficients");
  }
  for (const auto& w : ws) require_same_shape(ws.front(), w, "mix_linear");

  const Waveform& first = ws.front();
  Waveform out(first.num_channels(), first.length(), first.sample_rate());
  for (std::size_t c = 0; c < out.num_channels(); ++c) {
    auto dst = out.channel(c);
    for (std::size_t i = 0; i < ws.size(); ++i) {
      const double k = coeffs[i];
      auto src = ws[i].channel(c);
      for (std::size_t n = 0; n < dst.size(); ++n) dst[n] += k * src[n];
    }
  }
  out.check_finite();
  return out;
}

double max_abs_diff(const Waveform& a, const Waveform& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t c = 0; c < a.num_channels(); ++c) {
    auto x = a.channel(c);
    auto y = b.channel(c);
    for (std::size_t n = 0; n < x.size(); ++n) worst = std::max(worst, std::abs(x[n] - y[n]));
  }
  return worst;
}

}  // namespace demix
