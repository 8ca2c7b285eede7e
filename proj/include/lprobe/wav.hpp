#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lprobe {

struct Waveform {
  std::vector<double> samples;  // nominally in [-1, 1]
  std::uint32_t sample_rate = 16000;
};

/// 16-bit PCM mono RIFF/WAVE.
Waveform read_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono: round(s * 32768) clamped to the int16 range.
void write_wav(const Waveform& wave, const std::filesystem::path& path);

}  // namespace lprobe
