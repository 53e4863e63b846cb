#include "demix/wav_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "demix/error.hpp"

namespace demix {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

struct ParsedHeader {
  WavInfo info;
  unsigned bits;
  std::uint64_t data_offset;
  std::uint64_t data_bytes;
  unsigned block_align;
};

[[noreturn]] void fail(WavErrorKind kind, const std::filesystem::path& path, const std::string& msg) {
  throw WavError(kind, path.string(), msg);
}

ParsedHeader parse_header(std::ifstream& in, const std::filesystem::path& path) {
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);

  std::array<std::uint8_t, 12> riff{};
  if (!in.read(reinterpret_cast<char*>(riff.data()), riff.size())) {
    fail(WavErrorKind::kMalformedHeader, path, "file too short for a RIFF header");
  }
  if (std::memcmp(riff.data(), "RIFF", 4) != 0 || std::memcmp(riff.data() + 8, "WAVE", 4) != 0) {
    fail(WavErrorKind::kMalformedHeader, path, "not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  ParsedHeader h{};
  std::uint64_t pos = 12;
  while (true) {
    std::array<std::uint8_t, 8> chunk{};
    in.seekg(static_cast<std::streamoff>(pos));
    if (!in.read(reinterpret_cast<char*>(chunk.data()), chunk.size())) {
      fail(WavErrorKind::kMalformedHeader, path, "no data chunk");
    }
    const std::uint32_t size = read_u32(chunk.data() + 4);
    const std::uint64_t body = pos + 8;

    if (std::memcmp(chunk.data(), "fmt ", 4) == 0) {
      if (size < 16) fail(WavErrorKind::kMalformedHeader, path, "fmt chunk too small");
      std::vector<std::uint8_t> fmt(size);
      if (!in.read(reinterpret_cast<char*>(fmt.data()), size)) {
        fail(WavErrorKind::kMalformedHeader, path, "fmt chunk cut short");
      }
      std::uint16_t tag = read_u16(fmt.data());
      const std::uint16_t channels = read_u16(fmt.data() + 2);
      const std::uint32_t rate = read_u32(fmt.data() + 4);
      const std::uint16_t block_align = read_u16(fmt.data() + 12);
      const std::uint16_t bits = read_u16(fmt.data() + 14);
      if (tag == kFormatExtensible) {
        if (size < 40) fail(WavErrorKind::kMalformedHeader, path, "extensible fmt chunk too small");
        tag = read_u16(fmt.data() + 24);
      }
      if (channels == 0) fail(WavErrorKind::kMalformedHeader, path, "zero channels");
      if (rate == 0) fail(WavErrorKind::kMalformedHeader, path, "zero sample rate");

      if (tag == kFormatPcm && bits == 16) {
        h.info.encoding = WavEncoding::kPcm16;
      } else if (tag == kFormatPcm && bits == 24) {
        h.info.encoding = WavEncoding::kPcm24;
      } else if (tag == kFormatFloat && bits == 32) {
        h.info.encoding = WavEncoding::kFloat32;
      } else {
        fail(WavErrorKind::kUnsupportedEncoding, path,
             "unsupported encoding (format tag " + std::to_string(tag) + ", " +
                 std::to_string(bits) + " bits)");
      }
      if (block_align != channels * (bits / 8)) {
        fail(WavErrorKind::kMalformedHeader, path, "block alignment disagrees with channel layout");
      }
      h.info.num_channels = channels;
      h.info.sample_rate = rate;
      h.bits = bits;
      h.block_align = block_align;
      have_fmt = true;
    } else if (std::memcmp(chunk.data(), "data", 4) == 0) {
      if (!have_fmt) fail(WavErrorKind::kMalformedHeader, path, "data chunk before fmt chunk");
      if (body + size > file_size) {
        fail(WavErrorKind::kTruncatedData, path,
             "data chunk declares " + std::to_string(size) + " bytes but only " +
                 std::to_string(file_size - body) + " remain");
      }
      if (size % h.block_align != 0) {
        fail(WavErrorKind::kTruncatedData, path, "data chunk ends inside a sample frame");
      }
      h.data_offset = body;
      h.data_bytes = size;
      h.info.length = size / h.block_align;
      return h;
    }
    pos = body + size + (size & 1u);
  }
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(WavErrorKind::kIo, path, "cannot open for reading");
  return in;
}

}  // namespace

WavInfo probe_wav(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  return parse_header(in, path).info;
}

Waveform load_wav(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  const ParsedHeader h = parse_header(in, path);

  std::vector<std::uint8_t> raw(h.data_bytes);
  in.seekg(static_cast<std::streamoff>(h.data_offset));
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    fail(WavErrorKind::kTruncatedData, path, "short read in data chunk");
  }

  const std::size_t nch = h.info.num_channels;
  const std::size_t len = h.info.length;
  std::vector<std::vector<double>> channels(nch, std::vector<double>(len));
  const std::size_t width = h.bits / 8;
  const std::uint8_t* p = raw.data();
  for (std::size_t n = 0; n < len; ++n) {
    for (std::size_t c = 0; c < nch; ++c, p += width) {
      double value = 0.0;
      switch (h.info.encoding) {
        case WavEncoding::kPcm16:
          value = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
          break;
        case WavEncoding::kPcm24: {
          std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
          if (s & 0x800000) s -= 0x1000000;
          value = s / 8388608.0;
          break;
        }
        case WavEncoding::kFloat32: {
          const std::uint32_t bits = read_u32(p);
          float f;
          std::memcpy(&f, &bits, sizeof f);
          if (!std::isfinite(f)) {
            fail(WavErrorKind::kMalformedHeader, path, "non-finite float sample");
          }
          value = f;
          break;
        }
      }
      channels[c][n] = value;
    }
  }
  return Waveform(std::move(channels), h.info.sample_rate);
}

SaveResult save_wav(const Waveform& w, const std::filesystem::path& path, WavEncoding encoding) {
  w.check_finite();
  const unsigned bits = encoding == WavEncoding::kPcm16 ? 16 : (encoding == WavEncoding::kPcm24 ? 24 : 32);
  const std::size_t nch = w.num_channels();
  const std::size_t len = w.length();
  const std::uint64_t data_bytes = static_cast<std::uint64_t>(len) * nch * (bits / 8);
  if (data_bytes > 0xFFFFFFF0ull) {
    throw WavError(WavErrorKind::kUnsupportedEncoding, path.string(), "waveform too large for RIFF");
  }
  const bool is_float = encoding == WavEncoding::kFloat32;

  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(data_bytes) + 64);
  const std::uint32_t fmt_size = is_float ? 18 : 16;
  const std::uint32_t fact_bytes = is_float ? 12 : 0;
  put_tag(out, "RIFF");
  put_u32(out, static_cast<std::uint32_t>(4 + 8 + fmt_size + fact_bytes + 8 + data_bytes + (data_bytes & 1u)));
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, fmt_size);
  put_u16(out, is_float ? kFormatFloat : kFormatPcm);
  put_u16(out, static_cast<std::uint16_t>(nch));
  put_u32(out, w.sample_rate());
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate() * nch * (bits / 8)));
  put_u16(out, static_cast<std::uint16_t>(nch * (bits / 8)));
  put_u16(out, static_cast<std::uint16_t>(bits));
  if (is_float) {
    put_u16(out, 0);
    put_tag(out, "fact");
    put_u32(out, 4);
    put_u32(out, static_cast<std::uint32_t>(len));
  }
  put_tag(out, "data");
  put_u32(out, static_cast<std::uint32_t>(data_bytes));

  SaveResult result;
  const double full_scale = encoding == WavEncoding::kPcm16 ? 32768.0 : 8388608.0;
  for (std::size_t n = 0; n < len; ++n) {
    for (std::size_t c = 0; c < nch; ++c) {
      const double x = w.at(c, n);
      if (is_float) {
        const float f = static_cast<float>(x);
        std::uint32_t u;
        std::memcpy(&u, &f, sizeof u);
        put_u32(out, u);
        continue;
      }
      if (x > 1.0 || x < -1.0) ++result.clipped;
      const double scaled = std::clamp(std::round(x * full_scale), -full_scale, full_scale - 1.0);
      const auto s = static_cast<std::int32_t>(scaled);
      out.push_back(static_cast<std::uint8_t>(s & 0xFF));
      out.push_back(static_cast<std::uint8_t>((s >> 8) & 0xFF));
      if (encoding == WavEncoding::kPcm24) out.push_back(static_cast<std::uint8_t>((s >> 16) & 0xFF));
    }
  }
  if (data_bytes & 1u) out.push_back(0);

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw WavError(WavErrorKind::kIo, path.string(), "cannot open for writing");
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw WavError(WavErrorKind::kIo, path.string(), "write failed");
  return result;
}

Waveform quantize(const Waveform& w, WavEncoding encoding) {
  Waveform out = w;
  const double full_scale = encoding == WavEncoding::kPcm16 ? 32768.0 : 8388608.0;
  for (std::size_t c = 0; c < out.num_channels(); ++c) {
    for (double& x : out.channel(c)) {
      if (encoding == WavEncoding::kFloat32) {
        x = static_cast<float>(x);
      } else {
        x = std::clamp(std::round(x * full_scale), -full_scale, full_scale - 1.0) / full_scale;
      }
    }
  }
  return out;
}

WavEncoding parse_wav_encoding(std::string_view name) {
  if (name == "pcm16") return WavEncoding::kPcm16;
  if (name == "pcm24") return WavEncoding::kPcm24;
  if (name == "float32") return WavEncoding::kFloat32;
  throw ConfigError("unknown WAV encoding '" + std::string(name) + "' (expected pcm16, pcm24, float32)");
}

}  // namespace demix
