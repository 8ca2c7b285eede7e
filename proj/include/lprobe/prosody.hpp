#pragma once

// Word-level prosodic prominence and boundary scores from a continuous
// wavelet transform (Mexican hat) of a composite F0 / energy / duration
// signal, plus import/export of externally produced label files.

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lprobe/dumpio.hpp"
#include "lprobe/segment_table.hpp"

namespace lprobe {

struct ProsodyConfig {
  std::array<double, 3> weights{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};  // f0, energy, duration
  // Scales and bands are equivalent Fourier periods in seconds.
  std::vector<double> scales_s{0.1, 0.2, 0.4, 0.8, 1.6, 3.2};
  std::array<double, 2> prominence_band_s{0.2, 0.8};
  std::array<double, 2> boundary_band_s{0.8, 3.2};

  void validate() const;
};

struct CompositeSignal {
  std::vector<double> values;
  std::vector<double> f0_norm;
  std::vector<double> energy_norm;
  std::vector<double> duration_norm;
  std::array<double, 3> weights{};  // effective weights after any reassignment
  std::vector<std::string> warnings;
};

/// log-F0 with unvoiced gaps interpolated (edges held), log energy, and a
/// per-frame word-duration signal (frames outside words carry the mean word
/// duration); each z-scored over the utterance and mixed with the weights.
/// A fully unvoiced track moves the F0 weight onto the other components.
CompositeSignal normalize_components(const ProsodyTrack& track, const AlignmentTier& words,
                                     double hop_s, const ProsodyConfig& config = {});

/// (2 / (sqrt(3) pi^(1/4))) (1 - t^2) exp(-t^2 / 2)
double mexican_hat(double t);

/// Fourier period of the Mexican hat at width 1: 2 pi / sqrt(2.5).
inline const double kMexicanHatPeriod = 2.0 * 3.14159265358979323846 / 1.5811388300841898;

/// Sampled psi(j / s) / sqrt(s) for |j| <= ceil(5 s), shifted by a constant so
/// the taps sum to zero.
std::vector<double> mexican_hat_kernel(double scale_frames);

struct CwtPlane {
  std::vector<double> scales_frames;
  std::vector<std::vector<double>> coefficients;  // [scale][frame]

  std::size_t frames() const { return coefficients.empty() ? 0 : coefficients.front().size(); }
};

/// W(s, b) = sum_t x(t) psi((t - b) / s) / sqrt(s), with the signal extended
/// by half-sample symmetric reflection at both ends.
CwtPlane cwt(std::span<const double> signal, std::span<const double> scales_frames);

struct WordProsody {
  std::string utt_id;
  std::uint32_t word_index = 0;
  std::string word;
  double prominence = 0.0;
  double boundary = 0.0;

  bool operator==(const WordProsody&) const = default;
};

/// prominence: max positive coefficient over the prominence band within the
/// word's frames. boundary: magnitude of the most negative coefficient over
/// the boundary band within +-(mean word duration / 2) of the word's end.
std::vector<WordProsody> score_words(const CwtPlane& plane, const AlignmentTier& words, double hop_s,
                                     const std::string& utt_id, const ProsodyConfig& config = {},
                                     std::size_t* empty_words = nullptr);

/// normalize_components -> cwt -> score_words over the frames between the
/// first word's start and the last word's end.
std::vector<WordProsody> label_utterance(const ProsodyTrack& track, const AlignmentTier& words,
                                         double hop_s, const std::string& utt_id,
                                         const ProsodyConfig& config = {},
                                         std::vector<std::string>* warnings = nullptr);

/// TSV: utt_id, word_index, word, prominence, boundary (header line written).
void write_labels(std::span<const WordProsody> labels, const std::filesystem::path& path);
std::vector<WordProsody> read_labels(const std::filesystem::path& path);

/// Reads a label file and checks it against the dataset's word tiers: every
/// utt_id must be known, cover exactly that utterance's words, and match each
/// word string case-insensitively.
std::vector<WordProsody> import_labels(const std::filesystem::path& path,
                                       const std::map<std::string, AlignmentTier>& word_tiers);

TargetMap to_target_map(std::span<const WordProsody> labels);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace lprobe
