#include "lprobe/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "lprobe/error.hpp"
#include "lprobe/rng.hpp"
#include "lprobe/simd/kernels.hpp"

namespace lprobe {

FrameRange segment_to_frames(double start_s, double end_s, double hop_s, std::uint32_t num_frames) {
  if (!(start_s >= 0.0) || !(start_s < end_s) || !(hop_s > 0.0)) {
    fail_validation("segment_to_frames: need 0 <= start < end and hop > 0");
  }
  if (num_frames == 0) return {};
  auto center = [hop_s](std::int64_t i) { return (static_cast<double>(i) + 0.5) * hop_s; };

  // Closed-form guess, then settle on the exact comparison so rounding in the
  // division never moves a boundary frame.
  std::int64_t first = static_cast<std::int64_t>(std::ceil(start_s / hop_s - 0.5));
  while (first > 0 && center(first - 1) >= start_s) --first;
  while (center(first) < start_s) ++first;
  std::int64_t last = static_cast<std::int64_t>(std::ceil(end_s / hop_s - 0.5)) - 1;
  while (center(last + 1) < end_s) ++last;
  while (last >= 0 && center(last) >= end_s) --last;

  first = std::max<std::int64_t>(first, 0);
  last = std::min<std::int64_t>(last, static_cast<std::int64_t>(num_frames) - 1);
  if (last < first) return {};
  return {first, last};
}

FrameRange central_third(FrameRange range) {
  const std::int64_t n = range.size();
  if (n < 2) fail_validation("central_third: need at least 2 frames, got " + std::to_string(n));
  const std::int64_t lo = n / 3;
  const std::int64_t hi = (2 * n + 2) / 3 - 1;  // ceil(2n/3) - 1
  return {range.first + lo, range.first + hi};
}

void SamplingPolicy::validate() const {
  if (per_phoneme_per_speaker < 1) fail_validation("per_phoneme_per_speaker must be >= 1");
  if (min_frames < 1) fail_validation("min_frames must be >= 1");
}

namespace {

SegmentSpec make_spec(const AlignedSegment& seg, Tier tier, std::uint32_t index,
                      const UtteranceMeta& meta, FrameRange frames) {
  SegmentSpec s;
  s.utt_id = meta.utt_id;
  s.speaker = meta.speaker;
  s.accent = meta.accent;
  s.tier = tier;
  s.label = seg.label;
  s.index = index;
  s.start_s = seg.start_s;
  s.end_s = seg.end_s;
  s.frame_range = frames;
  return s;
}

void check_layer(const FeatureDump& dump, std::uint32_t layer) {
  if (layer >= dump.shape().layers) {
    fail_validation("layer " + std::to_string(layer) + " out of range (dump has " +
                    std::to_string(dump.shape().layers) + " layers)");
  }
}

auto sort_key(const SegmentSpec& s) {
  return std::tie(s.speaker, s.label, s.utt_id, s.start_s);
}

}  // namespace

SpecSelection phoneme_segment_specs(const AlignmentTier& phones, const UtteranceMeta& meta,
                                    double hop_s, const SamplingPolicy& policy) {
  policy.validate();
  SpecSelection out;
  for (std::uint32_t k = 0; k < phones.segments.size(); ++k) {
    const auto& seg = phones.segments[k];
    const FrameRange frames = segment_to_frames(seg.start_s, seg.end_s, hop_s, meta.num_frames);
    // Central-third pooling needs two frames even if min_frames is set lower.
    if (frames.size() < std::max<std::int64_t>(policy.min_frames, 2)) {
      ++out.discarded;
      continue;
    }
    SegmentSpec spec = make_spec(seg, Tier::Phone, k, meta, frames);
    spec.pooled_range = central_third(frames);
    out.kept.push_back(std::move(spec));
  }
  return out;
}

SpecSelection word_segment_specs(const AlignmentTier& words, const UtteranceMeta& meta,
                                 double hop_s) {
  SpecSelection out;
  for (std::uint32_t k = 0; k < words.segments.size(); ++k) {
    const auto& seg = words.segments[k];
    const FrameRange frames = segment_to_frames(seg.start_s, seg.end_s, hop_s, meta.num_frames);
    if (frames.empty()) {
      ++out.discarded;
      continue;
    }
    SegmentSpec spec = make_spec(seg, Tier::Word, k, meta, frames);
    spec.pooled_range = frames;
    out.kept.push_back(std::move(spec));
  }
  return out;
}

std::vector<double> pool_frames(const FeatureDump& dump, std::uint32_t layer, FrameRange range) {
  check_layer(dump, layer);
  if (range.empty() || range.first < 0 || range.last >= dump.shape().frames) {
    fail_validation("pool_frames: frame range outside the dump");
  }
  const auto& k = simd::active_kernels();
  std::vector<double> acc(dump.shape().dim, 0.0);
  for (std::int64_t t = range.first; t <= range.last; ++t) {
    const auto frame = dump.frame(layer, static_cast<std::uint32_t>(t));
    k.accumulate_f32(acc.data(), frame.data(), frame.size());
  }
  const double inv = 1.0 / static_cast<double>(range.size());
  for (double& v : acc) v *= inv;
  return acc;
}

std::vector<PooledSegment> pool_segments(const FeatureDump& dump, std::span<const SegmentSpec> specs,
                                         std::uint32_t layer) {
  check_layer(dump, layer);
  std::vector<PooledSegment> out;
  out.reserve(specs.size());
  for (const auto& spec : specs) out.push_back({spec, pool_frames(dump, layer, spec.pooled_range)});
  return out;
}

std::vector<PooledSegment> pool_phoneme_segments(const FeatureDump& dump,
                                                 const AlignmentTier& phones,
                                                 const SamplingPolicy& policy, std::uint32_t layer,
                                                 const UtteranceMeta& meta, double hop_s,
                                                 std::size_t* discarded) {
  check_layer(dump, layer);
  const SpecSelection sel = phoneme_segment_specs(phones, meta, hop_s, policy);
  if (discarded) *discarded = sel.discarded;
  return pool_segments(dump, sel.kept, layer);
}

std::vector<PooledSegment> pool_word_segments(const FeatureDump& dump, const AlignmentTier& words,
                                              std::uint32_t layer, const UtteranceMeta& meta,
                                              double hop_s, std::size_t* skipped) {
  check_layer(dump, layer);
  const SpecSelection sel = word_segment_specs(words, meta, hop_s);
  if (skipped) *skipped = sel.discarded;
  return pool_segments(dump, sel.kept, layer);
}

std::vector<SegmentSpec> sample_segments(std::vector<SegmentSpec> all, const SamplingPolicy& policy) {
  policy.validate();
  std::sort(all.begin(), all.end(),
            [](const SegmentSpec& a, const SegmentSpec& b) { return sort_key(a) < sort_key(b); });
  SplitMix64 rng(policy.seed);
  std::vector<SegmentSpec> out;
  std::size_t begin = 0;
  while (begin < all.size()) {
    std::size_t end = begin + 1;
    while (end < all.size() && all[end].speaker == all[begin].speaker &&
           all[end].label == all[begin].label) {
      ++end;
    }
    const std::size_t size = end - begin;
    const std::size_t quota = policy.per_phoneme_per_speaker;
    if (size <= quota) {
      for (std::size_t i = begin; i < end; ++i) out.push_back(std::move(all[i]));
    } else {
      // Partial Fisher-Yates over group indices.
      std::vector<std::size_t> idx(size);
      for (std::size_t i = 0; i < size; ++i) idx[i] = begin + i;
      for (std::size_t i = 0; i < quota; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(size - i));
        std::swap(idx[i], idx[j]);
      }
      std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(quota));
      for (std::size_t i = 0; i < quota; ++i) out.push_back(std::move(all[idx[i]]));
    }
    begin = end;
  }
  return out;
}

}  // namespace lprobe
