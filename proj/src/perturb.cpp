#include "lprobe/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lprobe/error.hpp"

namespace lprobe {
namespace {

using dsp::Complex;

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kMinSamples = 1024;
constexpr double kMaxEnvelopeCorrection = 4.605170185988091;  // ln(100), i.e. +-40 dB

void check_wave(const Waveform& wave, const char* stage) {
  if (wave.samples.size() < kMinSamples) {
    fail_validation(std::string(stage) + ": waveform needs at least 1024 samples");
  }
  if (wave.sample_rate == 0) fail_validation(std::string(stage) + ": sample rate is zero");
  for (double s : wave.samples) {
    if (!std::isfinite(s)) fail_validation(std::string(stage) + ": non-finite sample");
  }
}

void check_factor(double beta, const char* stage) {
  if (!(beta >= 0.5 && beta <= 2.0)) {
    fail_validation(std::string(stage) + ": factor must lie in [0.5, 2]");
  }
}

double wrap_phase(double p) { return p - 2.0 * kPi * std::round(p / (2.0 * kPi)); }

double spectrum_floor(const dsp::Stft& s) {
  double peak = 0.0;
  for (const auto& f : s.frames) {
    for (const auto& c : f) peak = std::max(peak, std::abs(c));
  }
  return std::max(1e-12, 1e-7 * peak);
}

std::vector<double> log_magnitude(const std::vector<Complex>& frame, double floor) {
  std::vector<double> out(frame.size());
  for (std::size_t k = 0; k < frame.size(); ++k) out[k] = std::log(std::max(std::abs(frame[k]), floor));
  return out;
}

/// Linear interpolation of v at fractional index x, holding the end values.
double interp_held(const std::vector<double>& v, double x) {
  if (x <= 0.0) return v.front();
  const double last = static_cast<double>(v.size() - 1);
  if (x >= last) return v.back();
  const auto i = static_cast<std::size_t>(x);
  const double f = x - static_cast<double>(i);
  return (1.0 - f) * v[i] + f * v[i + 1];
}

std::vector<double> time_stretch(std::span<const double> x, double factor,
                                 const dsp::StftConfig& cfg) {
  const dsp::Stft in = stft(x, cfg);
  const std::size_t bins = cfg.fft_size / 2 + 1;
  const std::size_t frames_in = in.frames.size();
  const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(x.size()) * factor));
  dsp::Stft out;
  out.config = cfg;
  out.length = out_len;
  const std::size_t frames_out = (out_len + cfg.window / 2) / cfg.hop + 1;
  out.frames.assign(frames_out, std::vector<Complex>(bins));

  std::vector<double> phase(bins);
  for (std::size_t k = 0; k < bins; ++k) phase[k] = std::arg(in.frames[0][k]);
  for (std::size_t m = 0; m < frames_out; ++m) {
    const double t = std::min(static_cast<double>(m) / factor, static_cast<double>(frames_in - 1));
    const auto i0 = static_cast<std::size_t>(t);
    const std::size_t i1 = std::min(i0 + 1, frames_in - 1);
    const double frac = t - static_cast<double>(i0);
    for (std::size_t k = 0; k < bins; ++k) {
      const double mag = (1.0 - frac) * std::abs(in.frames[i0][k]) + frac * std::abs(in.frames[i1][k]);
      out.frames[m][k] = std::polar(mag, phase[k]);
      const double omega = 2.0 * kPi * static_cast<double>(k) * static_cast<double>(cfg.hop) /
                           static_cast<double>(cfg.fft_size);
      const double dphi = std::arg(in.frames[i1][k]) - std::arg(in.frames[i0][k]) - omega;
      phase[k] += omega + wrap_phase(dphi);
    }
  }
  return istft(out, out_len);
}

}  // namespace

void PerturbConfig::validate() const {
  if (!(beta_low >= 1.0 && beta_low < beta_high)) {
    fail_validation("perturb: need 1 <= beta_low < beta_high");
  }
  if (beta_high > 2.0) fail_validation("perturb: beta_high must not exceed 2");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) fail_validation("perturb: flip_prob outside [0, 1]");
  if (!(apply_threshold >= 0.0 && apply_threshold <= 1.0)) {
    fail_validation("perturb: apply_threshold outside [0, 1]");
  }
  if (!(eq_gain_db >= 0.0)) fail_validation("perturb: eq_gain_db must be non-negative");
  if (!(eq_min_hz > 0.0 && eq_min_hz < eq_max_hz)) fail_validation("perturb: bad EQ frequency range");
}

AnalysisConfig AnalysisConfig::for_rate(std::uint32_t sample_rate) {
  AnalysisConfig a;
  const double sr = static_cast<double>(sample_rate);
  a.stft.window = static_cast<std::size_t>(std::llround(0.025 * sr));
  a.stft.hop = static_cast<std::size_t>(std::llround(0.005 * sr));
  std::size_t fft = 1;
  while (fft < 2 * a.stft.window) fft <<= 1;
  a.stft.fft_size = fft;
  a.lifter_order = static_cast<std::size_t>(std::llround(60.0 * sr / 16000.0));
  return a;
}

std::vector<double> eq_curve_from_bands(std::span<const EqBand> bands, std::size_t bins,
                                        std::size_t fft_size, double sample_rate,
                                        double max_abs_db) {
  std::vector<double> curve(bins, 0.0);
  const double bin_hz = sample_rate / static_cast<double>(fft_size);
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = std::max(static_cast<double>(k) * bin_hz, 0.5 * bin_hz);
    double g = 0.0;
    for (const auto& b : bands) {
      const double octaves = std::log2(f / b.center_hz) / b.width_octaves;
      g += b.gain_db * std::exp(-0.5 * octaves * octaves);
    }
    curve[k] = std::clamp(g, -max_abs_db, max_abs_db);
  }
  return curve;
}

PerturbDraw draw(const PerturbConfig& config, SplitMix64& rng, std::uint32_t sample_rate) {
  config.validate();
  PerturbDraw d;
  d.alpha = rng.uniform();
  d.applied = d.alpha > config.apply_threshold;
  auto factor = [&] {
    double beta = rng.uniform(config.beta_low, config.beta_high);
    if (rng.uniform() < config.flip_prob) beta = 1.0 / beta;
    return beta;
  };
  d.beta1 = factor();
  d.beta2 = factor();

  const double lo = std::log2(config.eq_min_hz), hi = std::log2(config.eq_max_hz);
  const double span = (hi - lo) / static_cast<double>(std::max<std::uint32_t>(config.eq_bands, 1));
  for (std::uint32_t b = 0; b < config.eq_bands; ++b) {
    EqBand band;
    band.center_hz = std::exp2(lo + span * (static_cast<double>(b) + rng.uniform()));
    band.gain_db = rng.uniform(-config.eq_gain_db, config.eq_gain_db);
    band.width_octaves = span;
    d.eq_bands.push_back(band);
  }
  const AnalysisConfig a = AnalysisConfig::for_rate(sample_rate);
  d.eq_curve_db = eq_curve_from_bands(d.eq_bands, a.stft.fft_size / 2 + 1, a.stft.fft_size,
                                      sample_rate, config.eq_gain_db);
  return d;
}

bool has_voicing(const Waveform& wave) {
  const double sr = wave.sample_rate;
  const auto frame = static_cast<std::size_t>(0.04 * sr);
  const auto min_lag = static_cast<std::size_t>(sr / 400.0);
  const auto max_lag = static_cast<std::size_t>(sr / 60.0);
  const auto& x = wave.samples;
  for (std::size_t start = 0; start + frame + max_lag <= x.size(); start += frame / 2) {
    double e0 = 0.0;
    for (std::size_t i = 0; i < frame; ++i) e0 += x[start + i] * x[start + i];
    if (e0 < 1e-8) continue;
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
      double r = 0.0, e1 = 0.0;
      for (std::size_t i = 0; i < frame; ++i) {
        r += x[start + i] * x[start + i + lag];
        e1 += x[start + i + lag] * x[start + i + lag];
      }
      if (r / std::sqrt(e0 * e1 + 1e-30) > 0.5) return true;
    }
  }
  return false;
}

Waveform scale_f0(const Waveform& wave, double beta2, StageReport* report) {
  check_wave(wave, "scale_f0");
  check_factor(beta2, "scale_f0");
  if (!has_voicing(wave)) {
    if (report) report->warnings.push_back("scale_f0: no voiced frames; input passed through");
    return wave;
  }
  const AnalysisConfig a = AnalysisConfig::for_rate(wave.sample_rate);
  const std::size_t n = wave.samples.size();
  const auto stretched = time_stretch(wave.samples, beta2, a.stft);
  const auto shifted = dsp::resample(stretched, beta2, n);

  // Restore the input's spectral envelope frame by frame.
  const dsp::Stft ref = stft(wave.samples, a.stft);
  dsp::Stft out = stft(shifted, a.stft);
  const double floor_ref = spectrum_floor(ref), floor_out = spectrum_floor(out);
  dsp::RealFft fft(a.stft.fft_size);
  for (std::size_t m = 0; m < out.frames.size(); ++m) {
    const auto env_ref = dsp::cepstral_envelope(log_magnitude(ref.frames[m], floor_ref), a.lifter_order, fft);
    const auto env_out = dsp::cepstral_envelope(log_magnitude(out.frames[m], floor_out), a.lifter_order, fft);
    for (std::size_t k = 0; k < out.frames[m].size(); ++k) {
      const double corr = std::clamp(env_ref[k] - env_out[k], -kMaxEnvelopeCorrection, kMaxEnvelopeCorrection);
      out.frames[m][k] *= std::exp(corr);
    }
  }
  return {istft(out, n), wave.sample_rate};
}

Waveform scale_formants(const Waveform& wave, double beta1) {
  check_wave(wave, "scale_formants");
  check_factor(beta1, "scale_formants");
  const AnalysisConfig a = AnalysisConfig::for_rate(wave.sample_rate);
  dsp::Stft s = stft(wave.samples, a.stft);
  const double floor = spectrum_floor(s);
  dsp::RealFft fft(a.stft.fft_size);
  for (auto& frame : s.frames) {
    const auto logmag = log_magnitude(frame, floor);
    const auto env = dsp::cepstral_envelope(logmag, a.lifter_order, fft);
    for (std::size_t k = 0; k < frame.size(); ++k) {
      const double warped = interp_held(env, static_cast<double>(k) / beta1);
      const double excitation = logmag[k] - env[k];
      frame[k] = std::polar(std::exp(warped + excitation), std::arg(frame[k]));
    }
  }
  return {istft(s, wave.samples.size()), wave.sample_rate};
}

Waveform apply_eq(const Waveform& wave, std::span<const double> eq_curve_db) {
  check_wave(wave, "apply_eq");
  const AnalysisConfig a = AnalysisConfig::for_rate(wave.sample_rate);
  const std::size_t bins = a.stft.fft_size / 2 + 1;
  if (eq_curve_db.size() != bins) {
    fail_validation("apply_eq: curve has " + std::to_string(eq_curve_db.size()) +
                    " bins, analysis uses " + std::to_string(bins));
  }
  std::vector<double> gain(bins);
  for (std::size_t k = 0; k < bins; ++k) gain[k] = std::pow(10.0, eq_curve_db[k] / 20.0);
  dsp::Stft s = stft(wave.samples, a.stft);
  for (auto& frame : s.frames) {
    for (std::size_t k = 0; k < bins; ++k) frame[k] *= gain[k];
  }
  return {istft(s, wave.samples.size()), wave.sample_rate};
}

PerturbResult perturb_waveform(const Waveform& wave, const PerturbConfig& config, SplitMix64& rng) {
  PerturbResult r;
  r.draw = draw(config, rng, wave.sample_rate);
  if (!r.draw.applied) {
    r.wave = wave;
    return r;
  }
  StageReport report;
  Waveform w = scale_formants(wave, r.draw.beta1);
  w = scale_f0(w, r.draw.beta2, &report);
  w = apply_eq(w, r.draw.eq_curve_db);
  for (double& s : w.samples) {
    if (s > 1.0 || s < -1.0) {
      ++r.clipped;
      s = std::clamp(s, -1.0, 1.0);
    }
  }
  r.wave = std::move(w);
  r.warnings = std::move(report.warnings);
  return r;
}

std::uint64_t file_seed(std::uint64_t seed, std::string_view file_name) {
  return derive_seed(seed, file_name);
}

}  // namespace lprobe
