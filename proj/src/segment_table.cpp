#include "lprobe/segment_table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lprobe/error.hpp"

namespace lprobe {
namespace fs = std::filesystem;

namespace {

constexpr int kMetaColumns = 11;

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail_validation(where + ": malformed number '" + std::string(s) + "'");
  }
  return v;
}

void check_field(const std::string& field) {
  if (field.find_first_of(",\"\n\r") != std::string::npos) {
    fail_validation("table field contains a comma, quote or newline: '" + field + "'");
  }
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t pos = 0;
  while (true) {
    const std::size_t c = line.find(',', pos);
    cols.push_back(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
    if (c == std::string_view::npos) break;
    pos = c + 1;
  }
  return cols;
}

}  // namespace

bool SegmentTable::has_targets() const {
  for (const auto& r : rows) {
    if (!r.prominence || !r.boundary) return false;
  }
  return true;
}

SegmentTable SegmentTable::select(std::span<const std::size_t> row_indices) const {
  SegmentTable out;
  out.layer = layer;
  out.tier = tier;
  out.features.resize(static_cast<Eigen::Index>(row_indices.size()), features.cols());
  out.rows.reserve(row_indices.size());
  for (std::size_t k = 0; k < row_indices.size(); ++k) {
    out.rows.push_back(rows[row_indices[k]]);
    out.features.row(static_cast<Eigen::Index>(k)) =
        features.row(static_cast<Eigen::Index>(row_indices[k]));
  }
  return out;
}

SegmentTable SegmentTable::filter_accent(const std::string& accent) const {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].accent == accent) keep.push_back(i);
  }
  return select(keep);
}

SegmentTable SegmentTable::filter_label(const std::string& label) const {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].label == label) keep.push_back(i);
  }
  return select(keep);
}

SegmentTable build_segment_table(std::span<const PooledSegment> pooled, std::uint32_t layer,
                                 Tier tier, const TargetMap* targets, bool require_targets) {
  SegmentTable t;
  t.layer = layer;
  t.tier = tier;
  if (pooled.empty()) return t;
  const std::size_t dim = pooled.front().vector.size();
  t.features.resize(static_cast<Eigen::Index>(pooled.size()), static_cast<Eigen::Index>(dim));
  t.rows.reserve(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const auto& p = pooled[i];
    if (p.vector.size() != dim) {
      fail_validation("segment table: vector dimension " + std::to_string(p.vector.size()) +
                      " differs from " + std::to_string(dim) + " (" + p.spec.utt_id + ")");
    }
    SegmentRow row{p.spec.utt_id, p.spec.speaker, p.spec.accent, p.spec.label, p.spec.index,
                   p.spec.start_s, p.spec.end_s, std::nullopt, std::nullopt};
    if (targets) {
      const auto it = targets->find({p.spec.utt_id, p.spec.index});
      if (it != targets->end()) {
        row.prominence = it->second.prominence;
        row.boundary = it->second.boundary;
      } else if (require_targets) {
        fail_validation("no prosody target for utterance '" + p.spec.utt_id + "' word " +
                        std::to_string(p.spec.index) + " ('" + p.spec.label + "')");
      }
    }
    for (std::size_t d = 0; d < dim; ++d) {
      if (!std::isfinite(p.vector[d])) {
        fail_validation("segment table: non-finite pooled value (" + p.spec.utt_id + ")");
      }
      t.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = p.vector[d];
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_segment_table(const SegmentTable& table, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_io("cannot open " + path.string() + " for writing");
  std::string line = "layer,tier,utt_id,speaker,accent,label,index,start_s,end_s,prominence,boundary";
  for (std::size_t d = 0; d < table.dim(); ++d) line += ",v" + std::to_string(d);
  line += '\n';
  out << line;
  const std::string tier(tier_name(table.tier));
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& r = table.rows[i];
    for (const auto* f : {&r.utt_id, &r.speaker, &r.accent, &r.label}) check_field(*f);
    line.clear();
    line += std::to_string(table.layer) + "," + tier + "," + r.utt_id + "," + r.speaker + "," +
            r.accent + "," + r.label + "," + std::to_string(r.index) + ",";
    append_double(line, r.start_s);
    line += ',';
    append_double(line, r.end_s);
    line += ',';
    if (r.prominence) append_double(line, *r.prominence);
    line += ',';
    if (r.boundary) append_double(line, *r.boundary);
    for (std::size_t d = 0; d < table.dim(); ++d) {
      line += ',';
      append_double(line, table.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)));
    }
    line += '\n';
    out << line;
  }
  if (!out) fail_io("write failure on " + path.string());
}

SegmentTable read_segment_table(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail_validation(path.string() + ": empty table file");
  const auto header = split_commas(line);
  if (header.size() < kMetaColumns || header[0] != "layer" || header[10] != "boundary") {
    fail_validation(path.string() + ": unexpected table header");
  }
  const std::size_t dim = header.size() - kMetaColumns;
  SegmentTable t;
  std::vector<std::vector<double>> values;
  bool first = true;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto cols = split_commas(line);
    if (cols.size() != header.size()) fail_validation(where + ": wrong column count");
    const auto layer = static_cast<std::uint32_t>(parse_double(cols[0], where));
    Tier tier;
    if (cols[1] == "phone") {
      tier = Tier::Phone;
    } else if (cols[1] == "word") {
      tier = Tier::Word;
    } else {
      fail_validation(where + ": unknown tier");
    }
    if (first) {
      t.layer = layer;
      t.tier = tier;
      first = false;
    } else if (layer != t.layer || tier != t.tier) {
      fail_validation(where + ": rows from different layers or tiers in one table");
    }
    SegmentRow r;
    r.utt_id = cols[2];
    r.speaker = cols[3];
    r.accent = cols[4];
    r.label = cols[5];
    r.index = static_cast<std::uint32_t>(parse_double(cols[6], where));
    r.start_s = parse_double(cols[7], where);
    r.end_s = parse_double(cols[8], where);
    if (!cols[9].empty()) r.prominence = parse_double(cols[9], where);
    if (!cols[10].empty()) r.boundary = parse_double(cols[10], where);
    std::vector<double> v(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      v[d] = parse_double(cols[kMetaColumns + d], where);
      if (!std::isfinite(v[d])) fail_validation(where + ": non-finite feature value");
    }
    t.rows.push_back(std::move(r));
    values.push_back(std::move(v));
  }
  t.features.resize(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t d = 0; d < dim; ++d) {
      t.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = values[i][d];
    }
  }
  return t;
}

}  // namespace lprobe
