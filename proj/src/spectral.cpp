#include "lprobe/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "lprobe/error.hpp"

namespace lprobe::dsp {
namespace {

// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct RealFft::Plans {
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (inv) fftw_destroy_plan(inv);
    fftw_free(real);
    fftw_free(spec);
  }
};

RealFft::RealFft(std::size_t n) : n_(n), plans_(std::make_unique<Plans>()) {
  if (n < 2) fail_validation("FFT size must be at least 2");
  std::lock_guard lock(planner_mutex());
  plans_->real = fftw_alloc_real(n);
  plans_->spec = fftw_alloc_complex(n / 2 + 1);
  const int size = static_cast<int>(n);
  plans_->fwd = fftw_plan_dft_r2c_1d(size, plans_->real, plans_->spec, FFTW_ESTIMATE);
  plans_->inv = fftw_plan_dft_c2r_1d(size, plans_->spec, plans_->real, FFTW_ESTIMATE);
  if (!plans_->fwd || !plans_->inv) fail_numerical("FFTW planning failed");
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::forward(std::span<const double> in, std::span<Complex> out) {
  std::copy(in.begin(), in.end(), plans_->real);
  std::fill(plans_->real + in.size(), plans_->real + n_, 0.0);
  fftw_execute(plans_->fwd);
  for (std::size_t k = 0; k < bins(); ++k) out[k] = {plans_->spec[k][0], plans_->spec[k][1]};
}

void RealFft::inverse(std::span<const Complex> in, std::span<double> out) {
  for (std::size_t k = 0; k < bins(); ++k) {
    plans_->spec[k][0] = in[k].real();
    plans_->spec[k][1] = in[k].imag();
  }
  fftw_execute(plans_->inv);  // c2r destroys its input; we refill every call
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = plans_->real[i] * scale;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

void StftConfig::validate() const {
  if (window < 16 || hop < 1 || hop > window / 2 || fft_size < window) {
    fail_validation("STFT config needs window >= 16, 1 <= hop <= window/2, fft_size >= window");
  }
}

namespace {

std::ptrdiff_t frame_start(std::size_t m, const StftConfig& c) {
  return static_cast<std::ptrdiff_t>(m * c.hop) - static_cast<std::ptrdiff_t>(c.window / 2);
}

std::size_t frame_count(std::size_t length, const StftConfig& c) {
  return (length + c.window / 2) / c.hop + 1;
}

}  // namespace

Stft stft(std::span<const double> signal, const StftConfig& config) {
  config.validate();
  Stft out;
  out.config = config;
  out.length = signal.size();
  const auto window = hann_window(config.window);
  RealFft fft(config.fft_size);
  std::vector<double> buf(config.window);
  const std::size_t frames = frame_count(signal.size(), config);
  out.frames.assign(frames, std::vector<Complex>(fft.bins()));
  const auto n = static_cast<std::ptrdiff_t>(signal.size());
  for (std::size_t m = 0; m < frames; ++m) {
    const std::ptrdiff_t start = frame_start(m, config);
    for (std::size_t i = 0; i < config.window; ++i) {
      const std::ptrdiff_t t = start + static_cast<std::ptrdiff_t>(i);
      buf[i] = (t >= 0 && t < n) ? signal[static_cast<std::size_t>(t)] * window[i] : 0.0;
    }
    fft.forward(buf, out.frames[m]);
  }
  return out;
}

std::vector<double> istft(const Stft& spec, std::size_t length) {
  const StftConfig& c = spec.config;
  const auto window = hann_window(c.window);
  RealFft fft(c.fft_size);
  std::vector<double> out(length, 0.0), norm(length, 0.0), buf(c.fft_size);
  const auto n = static_cast<std::ptrdiff_t>(length);
  for (std::size_t m = 0; m < spec.frames.size(); ++m) {
    fft.inverse(spec.frames[m], buf);
    const std::ptrdiff_t start = frame_start(m, c);
    for (std::size_t i = 0; i < c.window; ++i) {
      const std::ptrdiff_t t = start + static_cast<std::ptrdiff_t>(i);
      if (t < 0 || t >= n) continue;
      out[static_cast<std::size_t>(t)] += buf[i] * window[i];
      norm[static_cast<std::size_t>(t)] += window[i] * window[i];
    }
  }
  for (std::size_t t = 0; t < length; ++t) {
    if (norm[t] > 1e-12) out[t] /= norm[t];
  }
  return out;
}

std::vector<double> cepstral_envelope(std::span<const double> log_magnitude, std::size_t lifter_order,
                                      RealFft& fft) {
  const std::size_t n = fft.size();
  if (log_magnitude.size() != fft.bins()) fail_validation("cepstral_envelope: bin count mismatch");
  std::vector<Complex> half(fft.bins());
  for (std::size_t k = 0; k < half.size(); ++k) half[k] = {log_magnitude[k], 0.0};
  std::vector<double> cep(n);
  fft.inverse(half, cep);
  for (std::size_t q = lifter_order + 1; q + lifter_order < n; ++q) cep[q] = 0.0;
  fft.forward(cep, half);
  std::vector<double> env(fft.bins());
  for (std::size_t k = 0; k < env.size(); ++k) env[k] = half[k].real();
  return env;
}

std::vector<double> resample(std::span<const double> x, double step, std::size_t out_length) {
  if (!(step > 0.0)) fail_validation("resample: step must be positive");
  constexpr double kZeroCrossings = 24.0;
  const double cutoff = std::min(1.0, 1.0 / step);
  const double half_width = kZeroCrossings / cutoff;
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> out(out_length, 0.0);
  for (std::size_t m = 0; m < out_length; ++m) {
    const double pos = static_cast<double>(m) * step;
    const auto lo = static_cast<std::ptrdiff_t>(std::ceil(pos - half_width));
    const auto hi = static_cast<std::ptrdiff_t>(std::floor(pos + half_width));
    double acc = 0.0;
    for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(lo, 0); k <= std::min(hi, n - 1); ++k) {
      const double t = pos - static_cast<double>(k);
      const double arg = std::numbers::pi * cutoff * t;
      const double sinc = std::abs(t) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      const double win = 0.5 + 0.5 * std::cos(std::numbers::pi * t / half_width);
      acc += x[static_cast<std::size_t>(k)] * cutoff * sinc * win;
    }
    out[m] = acc;
  }
  return out;
}

double peak_frequency(std::span<const double> signal, double sample_rate) {
  std::size_t n = 1;
  while (n < signal.size()) n <<= 1;
  RealFft fft(n);
  const auto w = hann_window(signal.size());
  std::vector<double> buf(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i) buf[i] = signal[i] * w[i];
  std::vector<Complex> spec(fft.bins());
  fft.forward(buf, spec);
  std::size_t best = 1;
  for (std::size_t k = 1; k + 1 < spec.size(); ++k) {
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  }
  double offset = 0.0;
  if (best > 0 && best + 1 < spec.size()) {
    const double a = std::log(std::abs(spec[best - 1]) + 1e-300);
    const double b = std::log(std::abs(spec[best]) + 1e-300);
    const double c = std::log(std::abs(spec[best + 1]) + 1e-300);
    const double denom = a - 2.0 * b + c;
    if (denom < 0.0) offset = 0.5 * (a - c) / denom;
  }
  return (static_cast<double>(best) + offset) * sample_rate / static_cast<double>(n);
}

}  // namespace lprobe::dsp
