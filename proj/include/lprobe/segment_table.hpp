#pragma once

// SegmentTable: the per-layer design matrix X plus row metadata, and its CSV
// interchange form
//
//   layer,tier,utt_id,speaker,accent,label,index,start_s,end_s,prominence,boundary,v0,...,v{D-1}
//
// Missing targets are empty fields. Reals are written in shortest
// round-trip form, so reading a written table reproduces it exactly.

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lprobe/pooling.hpp"

namespace lprobe {

struct SegmentRow {
  std::string utt_id;
  std::string speaker;
  std::string accent;
  std::string label;
  std::uint32_t index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::optional<double> prominence;
  std::optional<double> boundary;

  bool operator==(const SegmentRow&) const = default;
};

struct SegmentTable {
  std::uint32_t layer = 0;
  Tier tier = Tier::Phone;
  std::vector<SegmentRow> rows;
  Eigen::MatrixXd features;  // rows.size() x dim

  std::size_t size() const { return rows.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  bool has_targets() const;

  /// Rows whose accent equals `accent`, in order.
  SegmentTable filter_accent(const std::string& accent) const;
  SegmentTable filter_label(const std::string& label) const;
  SegmentTable select(std::span<const std::size_t> row_indices) const;
};

struct WordTarget {
  double prominence = 0.0;
  double boundary = 0.0;
};

/// Prosody targets keyed by (utt_id, word index).
using TargetMap = std::map<std::pair<std::string, std::uint32_t>, WordTarget>;

/// Assembles a table from pooled segments of one layer. When `targets` is
/// given, word rows are joined by (utt_id, index); a missing key is an error
/// if `require_targets`, else the row's targets stay empty.
SegmentTable build_segment_table(std::span<const PooledSegment> pooled, std::uint32_t layer,
                                 Tier tier, const TargetMap* targets = nullptr,
                                 bool require_targets = false);

void write_segment_table(const SegmentTable& table, const std::filesystem::path& path);
SegmentTable read_segment_table(const std::filesystem::path& path);

}  // namespace lprobe
