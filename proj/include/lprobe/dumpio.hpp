#pragma once

// On-disk formats for hidden-state dumps, alignments, prosody tracks and the
// dataset manifest.
//
//   feature file  "LPD1" | u32 L | u32 T | u32 D | L*T*D f32   ([layer][frame][dim])
//   track file    "LPT1" | u32 T | T f32 f0_hz | T f32 energy
//   alignment     UTF-8 TSV: tier \t label \t start_s \t end_s, '#' comments
//   manifest      JSON object (see Manifest)
//
// All integers and floats are little-endian. Readers never pad or truncate.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lprobe {

inline constexpr int kManifestFormatVersion = 1;

struct UtteranceMeta {
  std::string utt_id;
  std::string speaker;
  std::string accent;
  std::uint32_t num_frames = 0;
  std::string feature_path;    // relative to the dataset root
  std::string alignment_path;  // relative to the dataset root
  std::optional<std::string> track_path;

  bool operator==(const UtteranceMeta&) const = default;
};

struct Manifest {
  int format_version = kManifestFormatVersion;
  double frame_hop_s = 0.0;
  std::uint32_t num_layers = 0;
  std::uint32_t dim = 0;
  std::vector<std::string> accents;
  std::vector<UtteranceMeta> utterances;
  std::optional<std::string> model_tag;
  std::optional<std::string> checkpoint_hash;

  bool operator==(const Manifest&) const = default;
};

struct DumpShape {
  std::uint32_t layers = 0;
  std::uint32_t frames = 0;
  std::uint32_t dim = 0;

  bool operator==(const DumpShape&) const = default;
};

/// Hidden states of one utterance, float32 in [layer][frame][dim] order.
class FeatureDump {
 public:
  FeatureDump() = default;
  FeatureDump(DumpShape shape, std::vector<float> data);
  /// Zero-filled dump.
  explicit FeatureDump(DumpShape shape);

  const DumpShape& shape() const { return shape_; }
  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  std::span<const float> frame(std::uint32_t layer, std::uint32_t t) const {
    return std::span<const float>(data_).subspan(offset(layer, t), shape_.dim);
  }
  std::span<float> frame(std::uint32_t layer, std::uint32_t t) {
    return std::span<float>(data_).subspan(offset(layer, t), shape_.dim);
  }

  bool operator==(const FeatureDump&) const = default;

 private:
  std::size_t offset(std::uint32_t layer, std::uint32_t t) const {
    return (static_cast<std::size_t>(layer) * shape_.frames + t) * shape_.dim;
  }

  DumpShape shape_;
  std::vector<float> data_;
};

enum class Tier { Phone, Word };

std::string_view tier_name(Tier tier);

struct AlignedSegment {
  std::string label;
  double start_s = 0.0;
  double end_s = 0.0;

  bool operator==(const AlignedSegment&) const = default;
};

struct AlignmentTier {
  Tier tier = Tier::Phone;
  std::vector<AlignedSegment> segments;

  bool operator==(const AlignmentTier&) const = default;
};

struct Alignment {
  AlignmentTier phone{Tier::Phone, {}};
  AlignmentTier word{Tier::Word, {}};

  bool operator==(const Alignment&) const = default;
};

struct ProsodyTrack {
  std::vector<float> f0_hz;   // 0 marks an unvoiced frame
  std::vector<float> energy;  // non-negative

  std::size_t num_frames() const { return f0_hz.size(); }
  bool operator==(const ProsodyTrack&) const = default;
};

/// Validates manifest invariants that do not touch the filesystem.
void validate_manifest(const Manifest& manifest);

/// Parses and validates `path`. When the manifest lives in a directory, every
/// referenced feature file must exist and carry a (L, T, D) header matching
/// the manifest; alignment and track files must exist.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

FeatureDump read_features(const std::filesystem::path& path,
                          std::optional<DumpShape> expected = std::nullopt);
/// Reads only the 16-byte header.
DumpShape read_feature_shape(const std::filesystem::path& path);
void write_features(const FeatureDump& dump, const std::filesystem::path& path);

Alignment read_alignment(const std::filesystem::path& path);
void write_alignment(const Alignment& alignment, const std::filesystem::path& path);
/// Sorts by start time and checks 0 <= start < end and non-overlap.
void validate_tier(AlignmentTier& tier, const std::string& context);

ProsodyTrack read_track(const std::filesystem::path& path,
                        std::optional<std::size_t> expected_frames = std::nullopt);
void write_track(const ProsodyTrack& track, const std::filesystem::path& path);
void validate_track(const ProsodyTrack& track, const std::string& context);

}  // namespace lprobe
