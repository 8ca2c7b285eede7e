#include <doctest.h>

#include <cmath>

#include "lprobe/error.hpp"
#include "lprobe/perturb.hpp"
#include "synth.hpp"

using namespace lprobe;

namespace {

Waveform tone(double hz, double seconds, double amp = 0.5) {
  Waveform w;
  const auto n = static_cast<std::size_t>(seconds * w.sample_rate);
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(amp * std::sin(2 * M_PI * hz * static_cast<double>(i) / w.sample_rate));
  return w;
}

std::span<const double> middle(const Waveform& w, double seconds) {
  const auto n = static_cast<std::size_t>(seconds * w.sample_rate);
  return std::span<const double>(w.samples).subspan((w.samples.size() - n) / 2, n);
}

}  // namespace

TEST_CASE("analysis configuration") {
  const auto a = AnalysisConfig::for_rate(16000);
  CHECK(a.stft.window == 400);
  CHECK(a.stft.hop == 80);
  CHECK(a.stft.fft_size == 1024);
  CHECK(a.lifter_order == 60);
  CHECK(AnalysisConfig::for_rate(8000).stft.fft_size == 512);
}

TEST_CASE("f0 scaling moves a tone and keeps the length") {
  for (double beta : {1.5, 1.2, 1.0 / 1.3}) {
    const Waveform w = tone(200.0, 1.0);
    const Waveform out = scale_f0(w, beta);
    CHECK(out.samples.size() == w.samples.size());
    CHECK(dsp::peak_frequency(middle(out, 0.6), 16000) == doctest::Approx(200.0 * beta).epsilon(0.03));
  }
}

TEST_CASE("formant scaling shifts envelope peaks and keeps F0") {
  const double sr = 16000.0;
  Waveform v{testing::synth_vowel(100.0, {700, 1220, 2600}, {80, 90, 120}, sr, 1.0), 16000};
  const auto before = testing::lpc_formants(middle(v, 0.5), sr, 18);
  REQUIRE(before.size() >= 3);
  const Waveform out = scale_formants(v, 1.2);
  CHECK(out.samples.size() == v.samples.size());
  const auto after = testing::lpc_formants(middle(out, 0.5), sr, 18);
  REQUIRE(after.size() >= 2);
  for (std::size_t i = 0; i < 2; ++i) {
    // Nearest shifted formant to 1.2x each original.
    double best = 1e9;
    for (double f : after) best = std::min(best, std::abs(f / (1.2 * before[i]) - 1.0));
    CHECK(best < 0.05);
  }
  CHECK(testing::autocorr_f0(middle(out, 0.5), sr) == doctest::Approx(100.0).epsilon(0.02));
}

TEST_CASE("eq curve and application") {
  const std::vector<EqBand> bands{{1000.0, 6.0, 1.0}, {1100.0, 6.0, 1.0}};
  const auto c = eq_curve_from_bands(bands, 513, 1024, 16000, 6.0);
  CHECK(c[64] == doctest::Approx(6.0));  // 1000 Hz clamped
  CHECK(std::abs(c[2]) < 0.5);

  const Waveform w = tone(1000.0, 0.5, 0.2);
  const Waveform flat = apply_eq(w, std::vector<double>(513, 0.0));
  for (std::size_t i = 0; i < w.samples.size(); i += 101) CHECK(flat.samples[i] == doctest::Approx(w.samples[i]).epsilon(1e-9).scale(1.0));
  const Waveform up = apply_eq(w, std::vector<double>(513, 6.0));
  CHECK(up.samples[4000] == doctest::Approx(w.samples[4000] * std::pow(10.0, 0.3)).epsilon(1e-6));
  CHECK_THROWS_AS(apply_eq(w, std::vector<double>(10, 0.0)), Error);
}

TEST_CASE("draws: order, application rate and determinism") {
  PerturbConfig cfg;
  SplitMix64 a(7), b(7);
  const PerturbDraw d = draw(cfg, a);
  // Replay the documented order by hand.
  const double alpha = b.uniform();
  double beta1 = b.uniform(1.0, 1.4);
  if (b.uniform() < 0.5) beta1 = 1.0 / beta1;
  CHECK(d.alpha == alpha);
  CHECK(d.beta1 == beta1);
  CHECK(d.eq_bands.size() == 8);
  CHECK(d.eq_curve_db.size() == 513);
  for (const auto& band : d.eq_bands) {
    CHECK(band.center_hz >= 60.0);
    CHECK(band.center_hz <= 7600.0);
    CHECK(std::abs(band.gain_db) <= 6.0);
  }
  for (double g : d.eq_curve_db) CHECK(std::abs(g) <= 6.0);

  SplitMix64 rng(8);
  int applied = 0;
  for (int i = 0; i < 20000; ++i) applied += draw(cfg, rng).applied ? 1 : 0;
  CHECK(applied / 20000.0 == doctest::Approx(0.75).epsilon(0.02));
  CHECK(file_seed(1, "a.wav") != file_seed(1, "b.wav"));

  PerturbConfig bad;
  bad.beta_high = 2.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.flip_prob = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("perturb_waveform branches") {
  const Waveform v{testing::synth_vowel(120.0, {600, 1500}, {90, 110}, 16000, 0.6), 16000};
  PerturbConfig cfg;
  // Find seeds on both sides of the threshold.
  std::uint64_t skip = 0, apply = 0;
  for (std::uint64_t s = 1; s < 200 && (!skip || !apply); ++s) {
    SplitMix64 r(s);
    (draw(cfg, r).applied ? apply : skip) = s;
  }
  REQUIRE(skip);
  REQUIRE(apply);
  SplitMix64 r1(skip);
  const auto same = perturb_waveform(v, cfg, r1);
  CHECK_FALSE(same.draw.applied);
  CHECK(same.wave.samples == v.samples);
  SplitMix64 r2(apply), r3(apply);
  const auto changed = perturb_waveform(v, cfg, r2);
  CHECK(changed.draw.applied);
  CHECK(changed.wave.samples.size() == v.samples.size());
  CHECK(changed.wave.samples != v.samples);
  CHECK(perturb_waveform(v, cfg, r3).wave.samples == changed.wave.samples);
  for (double s : changed.wave.samples) CHECK(std::abs(s) <= 1.0);
}

TEST_CASE("unvoiced input passes f0 scaling with a warning") {
  SplitMix64 rng(9);
  Waveform noise;
  for (int i = 0; i < 8000; ++i) noise.samples.push_back(0.1 * rng.normal());
  CHECK_FALSE(has_voicing(noise));
  CHECK(has_voicing(tone(150.0, 0.3)));
  StageReport report;
  const Waveform out = scale_f0(noise, 1.3, &report);
  CHECK(out.samples == noise.samples);
  CHECK(report.warnings.size() == 1);
  Waveform tiny;
  tiny.samples.assign(100, 0.0);
  CHECK_THROWS_AS(scale_f0(tiny, 1.2), Error);
  CHECK_THROWS_AS(scale_formants(tone(100, 0.2), 3.0), Error);
}
