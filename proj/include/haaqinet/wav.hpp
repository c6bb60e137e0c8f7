#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "haaqinet/common.hpp"
#include "haaqinet/fir.hpp"

namespace haaqi {

// Mono 16-bit PCM WAV I/O. Inputs at 32 kHz are resampled to 16 kHz on read;
// anything else is rejected.

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return std::uint16_t(p[0]) | (std::uint16_t(p[1]) << 8);
}
inline void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
  b.push_back((v >> 16) & 0xff);
  b.push_back((v >> 24) & 0xff);
}
inline void put_u16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
}

}  // namespace detail

// Halve the rate of a 32 kHz signal: anti-alias lowpass then pick every
// second sample.
inline Waveform decimate2(const Waveform& w) {
  auto taps = design_lowpass(0.5 * w.sample_rate / 2.0 * 0.9, w.sample_rate, 255);
  auto filtered = filter_zero_phase(w.samples, taps);
  Waveform out;
  out.sample_rate = w.sample_rate / 2;
  out.samples.reserve(filtered.size() / 2 + 1);
  for (std::size_t i = 0; i < filtered.size(); i += 2) out.samples.push_back(filtered[i]);
  return out;
}

inline Waveform read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(bool(f), "wav: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  require(buf.size() >= 44, "wav: file too small: " + path);
  require(std::memcmp(buf.data(), "RIFF", 4) == 0 &&
              std::memcmp(buf.data() + 8, "WAVE", 4) == 0,
          "wav: not a RIFF/WAVE file: " + path);

  std::size_t pos = 12;
  int sample_rate = 0, channels = 0, bits = 0;
  std::size_t data_off = 0, data_len = 0;
  while (pos + 8 <= buf.size()) {
    std::uint32_t len = detail::read_u32(buf.data() + pos + 4);
    if (std::memcmp(buf.data() + pos, "fmt ", 4) == 0) {
      require(pos + 8 + 16 <= buf.size(), "wav: truncated fmt chunk");
      const unsigned char* p = buf.data() + pos + 8;
      std::uint16_t format = detail::read_u16(p);
      channels = detail::read_u16(p + 2);
      sample_rate = int(detail::read_u32(p + 4));
      bits = detail::read_u16(p + 14);
      require(format == 1, "wav: only PCM supported: " + path);
    } else if (std::memcmp(buf.data() + pos, "data", 4) == 0) {
      data_off = pos + 8;
      data_len = len;
    }
    pos += 8 + len + (len & 1);
  }
  require(data_off != 0, "wav: no data chunk: " + path);
  require(channels == 1, "wav: only mono supported: " + path);
  require(bits == 16, "wav: only 16-bit PCM supported: " + path);
  require(sample_rate == 16000 || sample_rate == 32000,
          "wav: sample rate must be 16000 or 32000: " + path);
  require(data_off + data_len <= buf.size(), "wav: truncated data chunk");

  Waveform w;
  w.sample_rate = sample_rate;
  std::size_t n = data_len / 2;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::int16_t s = std::int16_t(detail::read_u16(buf.data() + data_off + 2 * i));
    w.samples[i] = double(s) / 32768.0;
  }
  require(!w.samples.empty(), "wav: empty audio: " + path);
  if (w.sample_rate == 32000) return decimate2(w);
  return w;
}

inline void write_wav(const std::string& path, const Waveform& w) {
  require(!w.samples.empty(), "wav: refusing to write empty audio");
  std::vector<unsigned char> b;
  b.reserve(44 + 2 * w.samples.size());
  std::uint32_t data_len = std::uint32_t(2 * w.samples.size());
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32(b, 36 + data_len);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put_u32(b, 16);
  detail::put_u16(b, 1);  // PCM
  detail::put_u16(b, 1);  // mono
  detail::put_u32(b, std::uint32_t(w.sample_rate));
  detail::put_u32(b, std::uint32_t(w.sample_rate * 2));
  detail::put_u16(b, 2);
  detail::put_u16(b, 16);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  detail::put_u32(b, data_len);
  for (double v : w.samples) {
    long s = std::lrint(clamp(v, -1.0, 1.0) * 32768.0);
    s = std::min<long>(32767, std::max<long>(-32768, s));
    detail::put_u16(b, std::uint16_t(std::int16_t(s)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(bool(f), "wav: cannot write " + path);
  f.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
  require(bool(f), "wav: short write " + path);
}

}  // namespace haaqi
