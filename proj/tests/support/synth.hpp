#pragma once

// Synthetic dataset roots for end-to-end tests: frame features are Gaussian
// noise plus a speaker offset, with phone identity planted in one layer and
// word prosody targets planted in another.

#include <cstdint>
#include <span>
#include <filesystem>
#include <string>
#include <vector>

#include "lprobe/dumpio.hpp"
#include "lprobe/prosody.hpp"

namespace lprobe::testing {

struct SynthSpec {
  std::uint32_t layers = 12;
  std::uint32_t dim = 16;
  double hop_s = 0.02;
  std::vector<std::string> accents{"us", "uk"};
  std::uint32_t speakers_per_accent = 4;
  std::uint32_t utterances_per_speaker = 4;
  std::uint32_t words_per_utterance = 8;
  std::uint32_t phone_classes = 8;
  int phone_layer = -1;    // layer whose frames carry a per-phone mean
  int prosody_layer = -1;  // layer whose frames carry the word targets
  double phone_signal = 1.5;
  double prosody_signal = 1.0;
  double noise = 1.0;
  double short_phone_prob = 0.05;  // chance of a 1-frame phone
  bool write_labels = true;
  std::string model_tag = "synth";
  std::uint64_t seed = 1;
};

struct SynthTruth {
  Manifest manifest;
  std::vector<WordProsody> labels;
  std::size_t short_phones = 0;
};

SynthTruth write_dataset(const std::filesystem::path& root, const SynthSpec& spec);

struct ProsodyUtterance {
  ProsodyTrack track;
  AlignmentTier words{Tier::Word, {}};
  std::uint32_t planted_word = 0;
};

/// 8-14 words of 0.2-0.4 s with jittered F0 and energy; one random word gets
/// a raised F0 (+30%) and tripled energy.
ProsodyUtterance planted_prominence_utterance(std::uint64_t seed, double hop_s = 0.01);

/// Same layout with a flat contour; one non-final word is followed by a
/// 0.35 s unvoiced low-energy pause and ends with a falling F0.
ProsodyUtterance planted_boundary_utterance(std::uint64_t seed, double hop_s = 0.01);

/// Impulse train at f0 through a cascade of two-pole formant resonators,
/// scaled to a 0.5 peak.
std::vector<double> synth_vowel(double f0, const std::vector<double>& formants,
                                const std::vector<double>& bandwidths, double sample_rate, double seconds);

/// Formant frequencies from the roots of an autocorrelation LPC polynomial
/// (Hamming window, pre-emphasis 0.97), keeping roots with bandwidth below
/// max_bandwidth. Ascending.
std::vector<double> lpc_formants(std::span<const double> x, double sample_rate, int order,
                                 double max_bandwidth = 400.0);

/// F0 from the normalized autocorrelation peak in 60-400 Hz, parabolically
/// refined.
double autocorr_f0(std::span<const double> x, double sample_rate);

/// Fresh empty directory under the system temp dir.
std::filesystem::path fresh_dir(const std::string& name);

/// Whole-file byte comparison.
bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace lprobe::testing
