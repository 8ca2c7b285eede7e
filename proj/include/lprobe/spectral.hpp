#pragma once

// Short-time spectral analysis/resynthesis used by the voice perturbations.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace lprobe::dsp {

using Complex = std::complex<double>;

/// Real <-> half-complex FFT of a fixed size, backed by FFTW.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  /// out.size() == bins()
  void forward(std::span<const double> in, std::span<Complex> out);
  /// Normalized inverse (includes the 1/n factor); out.size() == size().
  void inverse(std::span<const Complex> in, std::span<double> out);

 private:
  struct Plans;
  std::size_t n_;
  std::unique_ptr<Plans> plans_;
};

/// Periodic Hann window.
std::vector<double> hann_window(std::size_t n);

struct StftConfig {
  std::size_t window = 400;    // 25 ms at 16 kHz
  std::size_t hop = 80;        // 5 ms
  std::size_t fft_size = 1024;

  void validate() const;
};

/// Frame m is centered on sample m * hop; frames cover the whole signal with
/// full overlap at both ends.
struct Stft {
  StftConfig config;
  std::size_t length = 0;
  std::vector<std::vector<Complex>> frames;  // each fft_size / 2 + 1 bins
};

Stft stft(std::span<const double> signal, const StftConfig& config);

/// Weighted overlap-add resynthesis (Hann analysis and synthesis windows,
/// normalized by the summed squared window). Returns `length` samples.
std::vector<double> istft(const Stft& spec, std::size_t length);

/// Cepstrally smoothed log-magnitude: keeps quefrencies |q| <= lifter_order.
std::vector<double> cepstral_envelope(std::span<const double> log_magnitude, std::size_t lifter_order,
                                      RealFft& fft);

/// Band-limited resampling: out[m] = x(m * step), Hann-windowed sinc with the
/// cutoff lowered to 1/step when step > 1. Samples outside x are zero.
std::vector<double> resample(std::span<const double> x, double step, std::size_t out_length);

/// Frequency (Hz) of the strongest bin of the Hann-windowed signal, refined by
/// parabolic interpolation on the log-magnitude.
double peak_frequency(std::span<const double> signal, double sample_rate);

}  // namespace lprobe::dsp
