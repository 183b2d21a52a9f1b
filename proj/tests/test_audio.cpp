// tests/test_audio.cpp

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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "mcvap/audio.hpp"

namespace fs = std::filesystem;
using namespace mcvap;

namespace {

fs::path TempPath(const std::string& name) {
  auto dir = fs::temp_directory_path() / "mcvap_test_audio";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<unsigned char> ReadBytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Minimal independent WAV writer for the error cases.
void WriteHeader(const fs::path& p, std::uint16_t format, std::uint16_t channels,
                 std::uint32_t rate, std::uint16_t bits, std::uint32_t n_bytes) {
  std::ofstream f(p, std::ios::binary);
  auto u32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };
  f.write("RIFF", 4);
  u32(36 + n_bytes);
  f.write("WAVEfmt ", 8);
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  f.write("data", 4);
  u32(n_bytes);
  for (std::uint32_t i = 0; i < n_bytes; ++i) f.put(0);
}

WavError::Kind LoadErrorKind(const fs::path& p) {
  try {
    LoadWav(p);
  } catch (const WavError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error for " << p;
  return WavError::Kind::kMalformed;
}

}  // namespace

TEST(Waveform, RejectsOtherSampleRates) {
  EXPECT_THROW(Waveform(std::vector<double>(10), 8000), Error);
  EXPECT_NO_THROW(Waveform(std::vector<double>(10), 16000));
}

TEST(Waveform, LabelFrameCountIsCeiling) {
  EXPECT_EQ(LabelFrameCount(0), 0u);
  EXPECT_EQ(LabelFrameCount(160), 1u);
  EXPECT_EQ(LabelFrameCount(161), 2u);
  EXPECT_EQ(LabelFrameCount(16000), 100u);
}

TEST(Waveform, ClipReportsCount) {
  std::vector<double> x{0.5, 1.5, -2.0, -1.0, 1.0};
  EXPECT_EQ(ClipInPlace(x), 2u);
  EXPECT_EQ(x[1], 1.0);
  EXPECT_EQ(x[2], -1.0);
}

TEST(StereoDialogue, ValidateChecksLengths) {
  StereoDialogue d;
  d.channel_a = Waveform::Zeros(1600);
  d.channel_b = Waveform::Zeros(1600);
  d.vad_a = VadTrack(10);
  d.vad_b = VadTrack(10);
  EXPECT_NO_THROW(d.Validate());
  d.vad_b = VadTrack(11);
  EXPECT_THROW(d.Validate(), Error);
  d.vad_b = VadTrack(10);
  d.channel_b = Waveform::Zeros(1601);
  EXPECT_THROW(d.Validate(), Error);
}

TEST(Wav, SilenceLoadsAsZeros) {
  auto p = TempPath("zeros.wav");
  SaveWav(Waveform::Zeros(16000), p);
  auto w = LoadWav(p);
  EXPECT_EQ(w.size(), 16000u);
  EXPECT_DOUBLE_EQ(w.duration(), 1.0);
  for (double v : w.samples()) EXPECT_EQ(v, 0.0);
  auto bytes = ReadBytes(p);
  ASSERT_EQ(bytes.size(), 44u + 32000u);
  for (std::size_t i = 44; i < bytes.size(); ++i) ASSERT_EQ(bytes[i], 0);
}

TEST(Wav, NormalizationAndSaturation) {
  auto p = TempPath("sat.wav");
  SaveWav(Waveform(std::vector<double>{1.0, -1.0, 32767.0 / 32768.0}), p);
  auto bytes = ReadBytes(p);
  auto sample = [&](int i) {
    return static_cast<std::int16_t>(bytes[44 + 2 * i] | (bytes[45 + 2 * i] << 8));
  };
  EXPECT_EQ(sample(0), 32767);
  EXPECT_EQ(sample(1), -32768);
  auto w = LoadWav(p);
  EXPECT_DOUBLE_EQ(w[0], 32767.0 / 32768.0);
  EXPECT_DOUBLE_EQ(w[1], -1.0);
}

TEST(Wav, RoundTripWithinQuantizationStep) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> len(1, 4000);
  auto p = TempPath("rt.wav");
  for (int k = 0; k < 100; ++k) {
    std::vector<double> x(static_cast<std::size_t>(len(rng)));
    for (auto& v : x) v = u(rng);
    SaveWav(Waveform(x), p);
    auto w = LoadWav(p);
    ASSERT_EQ(w.size(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i) ASSERT_LE(std::abs(w[i] - x[i]), 1.0 / 32768.0);
  }
}

TEST(Wav, DistinctErrors) {
  EXPECT_EQ(LoadErrorKind(TempPath("does_not_exist.wav")), WavError::Kind::kMissingFile);
  auto p = TempPath("bad.wav");
  std::ofstream(p) << "not a wav file at all";
  EXPECT_EQ(LoadErrorKind(p), WavError::Kind::kMalformed);
  WriteHeader(p, 3, 1, 16000, 32, 8);
  EXPECT_EQ(LoadErrorKind(p), WavError::Kind::kEncoding);
  WriteHeader(p, 1, 1, 44100, 16, 8);
  EXPECT_EQ(LoadErrorKind(p), WavError::Kind::kSampleRate);
  WriteHeader(p, 1, 2, 16000, 16, 8);
  EXPECT_EQ(LoadErrorKind(p), WavError::Kind::kChannels);
  WriteHeader(p, 1, 1, 16000, 16, 8);
  EXPECT_NO_THROW(LoadWav(p));
}

TEST(Wav, UnwritablePath) {
  try {
    SaveWav(Waveform::Zeros(4), "/nonexistent_dir_mcvap/x.wav");
    FAIL();
  } catch (const WavError& e) {
    EXPECT_EQ(e.kind(), WavError::Kind::kWrite);
  }
}

TEST(RmsPower, Values) {
  EXPECT_DOUBLE_EQ(RmsPower(Waveform(std::vector<double>(100, 0.5))), 0.25);
  EXPECT_EQ(RmsPower(Waveform::Zeros(100)), 0.0);
  std::vector<double> s(16000);
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = std::sin(2 * std::numbers::pi * 100.0 * static_cast<double>(i) / 16000.0);
  EXPECT_NEAR(RmsPower(Waveform(s)), 0.5, 1e-6);
  EXPECT_THROW(RmsPower(Waveform()), Error);
}

TEST(EnergyVad, SilenceIsInactive) {
  auto t = VadFromEnergy(Waveform::Zeros(16000), -50.0, 100.0);
  EXPECT_EQ(t.size(), 100u);
  EXPECT_FALSE(t.any());
  EXPECT_THROW(VadFromEnergy(Waveform(), -50.0, 0.0), Error);
}

TEST(EnergyVad, BurstFramesAndHangover) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> x(24000, 0.0);
  for (std::size_t i = 8000; i < 16000; ++i) x[i] = u(rng);
  Waveform w(x);
  auto t = VadFromEnergy(w, -30.0, 0.0);
  for (std::size_t f = 0; f < t.size(); ++f) EXPECT_EQ(t[f], f >= 50 && f < 100) << f;
  auto h = VadFromEnergy(w, -30.0, 100.0);
  EXPECT_EQ(h.count_active(), t.count_active() + 10);
  for (std::size_t f = 100; f < 110; ++f) EXPECT_TRUE(h[f]);
  EXPECT_FALSE(h[110]);
}

TEST(EnergyVad, HangoverIsIdempotent) {
  VadTrack raw(std::vector<std::uint8_t>{0, 1, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0});
  auto once = ApplyHangover(raw, 2);
  auto twice = ApplyHangover(once, 2);
  EXPECT_EQ(once, twice);
  EXPECT_EQ(once.active, (std::vector<std::uint8_t>{0, 1, 1, 1, 0, 1, 1, 1, 1, 0, 0, 0}));
}
