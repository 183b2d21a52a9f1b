// mcvap/audio.hpp

// Copyright 2026  The mcvap Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mcvap {

inline constexpr int kSampleRate = 16000;
/// Label frames are 10 ms.
inline constexpr int kLabelHop = 160;
inline constexpr double kLabelFrameSeconds = 0.01;

/// Base class for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class WavError : public Error {
 public:
  enum class Kind { kMissingFile, kMalformed, kEncoding, kSampleRate, kChannels, kWrite };

  WavError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Mono 16 kHz audio with samples in [-1, 1].
class Waveform {
 public:
  Waveform() = default;
  explicit Waveform(std::vector<double> samples, int sample_rate = kSampleRate)
      : samples_(std::move(samples)) {
    if (sample_rate != kSampleRate)
      throw Error("Waveform: sample rate " + std::to_string(sample_rate) +
                  " is not supported (expected 16000)");
  }
  static Waveform Zeros(std::size_t n) { return Waveform(std::vector<double>(n, 0.0)); }

  int sample_rate() const noexcept { return kSampleRate; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  double duration() const noexcept { return static_cast<double>(samples_.size()) / kSampleRate; }

  std::span<const double> samples() const noexcept { return samples_; }
  const std::vector<double>& vec() const noexcept { return samples_; }
  double operator[](std::size_t i) const { return samples_[i]; }

  bool operator==(const Waveform&) const = default;

 private:
  std::vector<double> samples_;
};

/// Clips every sample into [-1, 1]; returns the number of samples changed.
inline std::size_t ClipInPlace(std::vector<double>& x) {
  std::size_t clipped = 0;
  for (double& v : x) {
    if (v > 1.0) { v = 1.0; ++clipped; }
    else if (v < -1.0) { v = -1.0; ++clipped; }
  }
  return clipped;
}

/// Frame-level voice activity at 100 Hz.
///
/// `detected` keeps the raw decisions a hangover was applied to, so that
/// re-applying the same hangover is a no-op. It is empty for tracks that
/// come from exact labels.
struct VadTrack {
  std::vector<std::uint8_t> active;
  std::vector<std::uint8_t> detected;

  VadTrack() = default;
  explicit VadTrack(std::size_t n) : active(n, 0) {}
  explicit VadTrack(std::vector<std::uint8_t> a) : active(std::move(a)) {}

  static constexpr double frame_rate() { return 100.0; }
  std::size_t size() const noexcept { return active.size(); }
  bool operator[](std::size_t i) const { return active[i] != 0; }
  std::size_t count_active() const {
    return static_cast<std::size_t>(std::count(active.begin(), active.end(), std::uint8_t{1}));
  }
  bool any() const { return count_active() > 0; }

  bool operator==(const VadTrack& o) const { return active == o.active; }
};

/// Number of 10 ms label frames covering `samples` audio samples.
inline std::size_t LabelFrameCount(std::size_t samples) {
  return (samples + kLabelHop - 1) / kLabelHop;
}

struct StereoDialogue {
  Waveform channel_a;  // user
  Waveform channel_b;  // robot
  VadTrack vad_a;
  VadTrack vad_b;

  double duration() const { return channel_a.duration(); }

  void Validate() const {
    if (channel_a.size() != channel_b.size())
      throw Error("StereoDialogue: channel lengths differ");
    std::size_t n = LabelFrameCount(channel_a.size());
    if (vad_a.size() != n || vad_b.size() != n)
      throw Error("StereoDialogue: VAD tracks inconsistent with channel length");
  }
};

namespace wav_detail {

inline std::uint32_t ReadU32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}
inline std::uint16_t ReadU16(const unsigned char* p) {
  return std::uint16_t(p[0] | (p[1] << 8));
}
inline void PutU32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void PutU16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace wav_detail

/// Sample quantization used by SaveWav: saturating, round-to-nearest.
inline std::int16_t QuantizeSample(double v) {
  double s = std::round(v * 32768.0);
  if (s > 32767.0) s = 32767.0;
  if (s < -32768.0) s = -32768.0;
  return static_cast<std::int16_t>(s);
}

inline Waveform LoadWav(const std::filesystem::path& path) {
  using wav_detail::ReadU16;
  using wav_detail::ReadU32;
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw WavError(WavError::Kind::kMissingFile, "cannot open WAV file " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw WavError(WavError::Kind::kMalformed, path.string() + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* chunk = buf.data() + pos;
    std::uint32_t size = ReadU32(chunk + 4);
    std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > buf.size())
        throw WavError(WavError::Kind::kMalformed, path.string() + ": truncated fmt chunk");
      std::uint16_t format = ReadU16(buf.data() + body);
      std::uint16_t channels = ReadU16(buf.data() + body + 2);
      std::uint32_t rate = ReadU32(buf.data() + body + 4);
      std::uint16_t bits = ReadU16(buf.data() + body + 14);
      if (format != 1 || bits != 16)
        throw WavError(WavError::Kind::kEncoding,
                       path.string() + ": only 16-bit PCM is supported (format " +
                           std::to_string(format) + ", " + std::to_string(bits) + " bits)");
      if (rate != kSampleRate)
        throw WavError(WavError::Kind::kSampleRate,
                       path.string() + ": sample rate " + std::to_string(rate) +
                           " is not 16000");
      if (channels != 1)
        throw WavError(WavError::Kind::kChannels,
                       path.string() + ": " + std::to_string(channels) +
                           " channels, expected mono");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt)
        throw WavError(WavError::Kind::kMalformed, path.string() + ": data before fmt chunk");
      std::size_t n = std::min<std::size_t>(size, buf.size() - body) / 2;
      std::vector<double> samples(n);
      for (std::size_t i = 0; i < n; ++i) {
        auto v = static_cast<std::int16_t>(ReadU16(buf.data() + body + 2 * i));
        samples[i] = v / 32768.0;
      }
      return Waveform(std::move(samples));
    }
    pos = body + size + (size & 1);
  }
  throw WavError(WavError::Kind::kMalformed, path.string() + ": no data chunk");
}

inline void SaveWav(const Waveform& w, const std::filesystem::path& path) {
  using wav_detail::PutU16;
  using wav_detail::PutU32;
  std::string out;
  const auto data_bytes = static_cast<std::uint32_t>(w.size() * 2);
  out.reserve(44 + data_bytes);
  out += "RIFF";
  PutU32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  PutU32(out, 16);
  PutU16(out, 1);
  PutU16(out, 1);
  PutU32(out, kSampleRate);
  PutU32(out, kSampleRate * 2);
  PutU16(out, 2);
  PutU16(out, 16);
  out += "data";
  PutU32(out, data_bytes);
  for (double v : w.samples()) PutU16(out, static_cast<std::uint16_t>(QuantizeSample(v)));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw WavError(WavError::Kind::kWrite, "cannot write WAV file " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw WavError(WavError::Kind::kWrite, "short write to " + path.string());
}

/// Mean of squared samples.
inline double RmsPower(std::span<const double> x) {
  if (x.empty()) throw Error("RmsPower: empty waveform");
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}
inline double RmsPower(const Waveform& w) { return RmsPower(w.samples()); }

/// Raw per-frame energy decisions: a 10 ms frame is active iff its mean
/// square, in dB re full scale, exceeds `threshold_db`. The last frame may be
/// partial and is judged on the samples it has.
inline VadTrack DetectEnergy(const Waveform& w, double threshold_db) {
  if (w.empty()) throw Error("DetectEnergy: empty waveform");
  const std::size_t n = LabelFrameCount(w.size());
  VadTrack t(n);
  auto s = w.samples();
  for (std::size_t f = 0; f < n; ++f) {
    std::size_t b = f * kLabelHop;
    std::size_t e = std::min(s.size(), b + kLabelHop);
    double p = RmsPower(s.subspan(b, e - b));
    double db = p > 0.0 ? 10.0 * std::log10(p) : -std::numeric_limits<double>::infinity();
    t.active[f] = db > threshold_db ? 1 : 0;
  }
  return t;
}

/// Extends every active run by `hangover_frames` trailing frames. Works from
/// the track's raw detections when present, so applying the same hangover
/// twice yields the same track as applying it once.
inline VadTrack ApplyHangover(const VadTrack& track, int hangover_frames) {
  if (hangover_frames < 0) throw Error("ApplyHangover: negative hangover");
  const auto& raw = track.detected.empty() ? track.active : track.detected;
  VadTrack out(raw.size());
  out.detected = raw;
  int remaining = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i]) {
      out.active[i] = 1;
      remaining = hangover_frames;
    } else if (remaining > 0) {
      out.active[i] = 1;
      --remaining;
    }
  }
  return out;
}

/// Energy-threshold VAD for generating labels on synthetic audio.
inline VadTrack VadFromEnergy(const Waveform& w, double threshold_db, double hangover_ms) {
  if (hangover_ms < 0) throw Error("VadFromEnergy: negative hangover");
  return ApplyHangover(DetectEnergy(w, threshold_db),
                       static_cast<int>(std::lround(hangover_ms / 10.0)));
}

}  // namespace mcvap
