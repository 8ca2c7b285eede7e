#include "lprobe/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "lprobe/error.hpp"

namespace lprobe {
namespace {

std::uint32_t u32le(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t u16le(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

void put(std::string& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0) {
    fail_validation(path.string() + ": not a RIFF/WAVE file");
  }
  Waveform w;
  bool have_fmt = false, have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = u32le(p + pos + 4);
    const unsigned char* body = p + pos + 8;
    if (pos + 8 + size > bytes.size()) fail_validation(path.string() + ": truncated chunk");
    if (std::memcmp(p + pos, "fmt ", 4) == 0) {
      if (size < 16) fail_validation(path.string() + ": short fmt chunk");
      const std::uint16_t format = u16le(body);
      const std::uint16_t channels = u16le(body + 2);
      w.sample_rate = u32le(body + 4);
      const std::uint16_t bits = u16le(body + 14);
      const bool pcm = format == 1 || (format == 0xFFFE && size >= 26 && u16le(body + 24) == 1);
      if (!pcm || bits != 16) fail_validation(path.string() + ": only 16-bit PCM is supported");
      if (channels != 1) fail_validation(path.string() + ": only mono audio is supported");
      have_fmt = true;
    } else if (std::memcmp(p + pos, "data", 4) == 0) {
      if (!have_fmt) fail_validation(path.string() + ": data chunk before fmt chunk");
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(u16le(body + 2 * i));
        w.samples[i] = static_cast<double>(v) / 32768.0;
      }
      have_data = true;
    }
    pos += 8 + size + (size & 1);
  }
  if (!have_fmt || !have_data) fail_validation(path.string() + ": missing fmt or data chunk");
  return w;
}

void write_wav(const Waveform& wave, const std::filesystem::path& path) {
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  std::string out = "RIFF";
  put(out, 36 + data_bytes, 4);
  out += "WAVEfmt ";
  put(out, 16, 4);
  put(out, 1, 2);  // PCM
  put(out, 1, 2);  // mono
  put(out, wave.sample_rate, 4);
  put(out, wave.sample_rate * 2, 4);
  put(out, 2, 2);
  put(out, 16, 2);
  out += "data";
  put(out, data_bytes, 4);
  for (double s : wave.samples) {
    // Inverse of the read scaling, so PCM read back from a file is written unchanged.
    const auto v = static_cast<std::int16_t>(std::clamp<long>(std::lround(s * 32768.0), -32768, 32767));
    put(out, static_cast<std::uint16_t>(v), 2);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail_io("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) fail_io("write failure on " + path.string());
}

}  // namespace lprobe
