#pragma once

// Speaker-voice perturbation of waveforms: formant scaling, F0 scaling and a
// random frequency-shaping equalizer, applied in that order with probability
// P(alpha > apply_threshold), alpha ~ U(0, 1).

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lprobe/rng.hpp"
#include "lprobe/spectral.hpp"
#include "lprobe/wav.hpp"

namespace lprobe {

struct PerturbConfig {
  double beta_low = 1.0;
  double beta_high = 1.4;
  double flip_prob = 0.5;
  double apply_threshold = 0.25;
  std::uint32_t eq_bands = 8;
  double eq_gain_db = 6.0;  // gains drawn from U(-eq_gain_db, +eq_gain_db)
  double eq_min_hz = 60.0;
  double eq_max_hz = 7600.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Analysis settings for a sample rate: 25 ms Hann window, 5 ms hop, FFT of
/// the next power of two >= 2 * window (1024 at 16 kHz), cepstral lifter of
/// 60 quefrency samples at 16 kHz (scaled with the rate).
struct AnalysisConfig {
  dsp::StftConfig stft;
  std::size_t lifter_order = 60;

  static AnalysisConfig for_rate(std::uint32_t sample_rate);
};

struct EqBand {
  double center_hz = 0.0;
  double gain_db = 0.0;
  double width_octaves = 1.0;
};

struct PerturbDraw {
  double alpha = 0.0;
  bool applied = false;
  double beta1 = 1.0;  // formant factor
  double beta2 = 1.0;  // F0 factor
  std::vector<EqBand> eq_bands;
  std::vector<double> eq_curve_db;  // one gain per analysis bin
};

/// Sum of Gaussian bumps in log-frequency, clamped to [-max_abs_db, max_abs_db].
std::vector<double> eq_curve_from_bands(std::span<const EqBand> bands, std::size_t bins,
                                        std::size_t fft_size, double sample_rate,
                                        double max_abs_db);

/// Draw order from `rng`: alpha, beta1, flip1, beta2, flip2, then per band
/// (center, gain). All values are drawn whether or not the draw applies.
PerturbDraw draw(const PerturbConfig& config, SplitMix64& rng, std::uint32_t sample_rate = 16000);

struct StageReport {
  std::vector<std::string> warnings;
};

/// Pitch shift by `beta2` with the spectral envelope kept: phase-vocoder time
/// stretch by beta2, band-limited resampling back to the input length, then a
/// per-frame cepstral envelope correction toward the input's envelope.
Waveform scale_f0(const Waveform& wave, double beta2, StageReport* report = nullptr);

/// Warps each frame's cepstral envelope along frequency by `beta1` while
/// keeping the excitation (fine structure) and phase.
Waveform scale_formants(const Waveform& wave, double beta1);

/// Frame-wise magnitude gain in dB; phase preserved.
Waveform apply_eq(const Waveform& wave, std::span<const double> eq_curve_db);

struct PerturbResult {
  Waveform wave;
  PerturbDraw draw;
  std::size_t clipped = 0;
  std::vector<std::string> warnings;
};

PerturbResult perturb_waveform(const Waveform& wave, const PerturbConfig& config, SplitMix64& rng);

/// Per-file stream seed so results do not depend on processing order.
std::uint64_t file_seed(std::uint64_t seed, std::string_view file_name);

/// True when some 40 ms frame has a normalized autocorrelation peak above 0.5
/// for lags between 2.5 ms and 16.7 ms (60-400 Hz).
bool has_voicing(const Waveform& wave);

}  // namespace lprobe
