#pragma once

// Frame-level representations + alignments -> pooled segment vectors.
//
// Time-to-frame mapping: frame i covers [i*hop, (i+1)*hop) and belongs to a
// segment [start, end) when its center (i + 1/2)*hop lies inside it.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lprobe/dumpio.hpp"

namespace lprobe {

/// Inclusive frame index range; empty when last < first.
struct FrameRange {
  std::int64_t first = 0;
  std::int64_t last = -1;

  bool empty() const { return last < first; }
  std::int64_t size() const { return empty() ? 0 : last - first + 1; }
  bool operator==(const FrameRange&) const = default;
};

FrameRange segment_to_frames(double start_s, double end_s, double hop_s, std::uint32_t num_frames);

/// Offsets [floor(n/3), ceil(2n/3) - 1] of an n-frame range; n >= 2.
FrameRange central_third(FrameRange range);

struct SamplingPolicy {
  std::uint32_t per_phoneme_per_speaker = 100;
  std::uint32_t min_frames = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SegmentSpec {
  std::string utt_id;
  std::string speaker;
  std::string accent;
  Tier tier = Tier::Phone;
  std::string label;
  std::uint32_t index = 0;  // position within its tier
  double start_s = 0.0;
  double end_s = 0.0;
  FrameRange frame_range;
  FrameRange pooled_range;

  bool operator==(const SegmentSpec&) const = default;
};

struct PooledSegment {
  SegmentSpec spec;
  std::vector<double> vector;
};

struct SpecSelection {
  std::vector<SegmentSpec> kept;
  std::size_t discarded = 0;
};

/// Phone segments with at least policy.min_frames frames, pooled over their
/// central third. Shorter segments are counted in `discarded`.
SpecSelection phoneme_segment_specs(const AlignmentTier& phones, const UtteranceMeta& meta,
                                    double hop_s, const SamplingPolicy& policy);

/// Word segments pooled over their whole frame range. Words that cover no
/// frame center are counted in `discarded`.
SpecSelection word_segment_specs(const AlignmentTier& words, const UtteranceMeta& meta,
                                 double hop_s);

/// Mean of one layer's frames over `range` (non-empty, inside the dump).
std::vector<double> pool_frames(const FeatureDump& dump, std::uint32_t layer, FrameRange range);

std::vector<PooledSegment> pool_segments(const FeatureDump& dump, std::span<const SegmentSpec> specs,
                                         std::uint32_t layer);

std::vector<PooledSegment> pool_phoneme_segments(const FeatureDump& dump,
                                                 const AlignmentTier& phones,
                                                 const SamplingPolicy& policy, std::uint32_t layer,
                                                 const UtteranceMeta& meta, double hop_s,
                                                 std::size_t* discarded = nullptr);

std::vector<PooledSegment> pool_word_segments(const FeatureDump& dump, const AlignmentTier& words,
                                              std::uint32_t layer, const UtteranceMeta& meta,
                                              double hop_s, std::size_t* skipped = nullptr);

/// Uniform sampling without replacement of at most per_phoneme_per_speaker
/// segments per (speaker, label) group. Groups are visited in sorted
/// (speaker, label) order and drawn from one SplitMix64 stream seeded with
/// policy.seed, so the result depends only on the input set and the seed.
/// Output is sorted by (speaker, label, utt_id, start_s).
std::vector<SegmentSpec> sample_segments(std::vector<SegmentSpec> all, const SamplingPolicy& policy);

}  // namespace lprobe
