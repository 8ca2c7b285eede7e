#include "lprobe/dumpio.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lprobe/error.hpp"

namespace lprobe {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<char, 4> kFeatureMagic{'L', 'P', 'D', '1'};
constexpr std::array<char, 4> kTrackMagic{'L', 'P', 'T', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail_io("read failure on " + path.string());
  return std::move(ss).str();
}

void spit(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_io("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail_io("write failure on " + path.string());
}

std::string shape_str(const DumpShape& s) {
  return "(" + std::to_string(s.layers) + "," + std::to_string(s.frames) + "," +
         std::to_string(s.dim) + ")";
}

DumpShape parse_feature_header(const std::string& bytes, const fs::path& path) {
  if (bytes.size() < 16) fail_validation(path.string() + ": feature file shorter than its header");
  if (std::memcmp(bytes.data(), kFeatureMagic.data(), 4) != 0) {
    fail_validation(path.string() + ": bad magic (expected LPD1)");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  return {get_u32(p + 4), get_u32(p + 8), get_u32(p + 12)};
}

fs::path manifest_file(const fs::path& path) {
  return fs::is_directory(path) ? path / "manifest.json" : path;
}

}  // namespace

FeatureDump::FeatureDump(DumpShape shape, std::vector<float> data)
    : shape_(shape), data_(std::move(data)) {
  if (shape.layers == 0 || shape.frames == 0 || shape.dim == 0) {
    fail_validation("feature dump dimensions must be positive, got " + shape_str(shape));
  }
  const std::size_t expected = static_cast<std::size_t>(shape.layers) * shape.frames * shape.dim;
  if (data_.size() != expected) {
    fail_validation("feature dump " + shape_str(shape) + " needs " + std::to_string(expected) +
                    " values, got " + std::to_string(data_.size()));
  }
}

FeatureDump::FeatureDump(DumpShape shape)
    : FeatureDump(shape, std::vector<float>(static_cast<std::size_t>(shape.layers) * shape.frames *
                                            shape.dim)) {}

std::string_view tier_name(Tier tier) { return tier == Tier::Phone ? "phone" : "word"; }

// ---------------------------------------------------------------------------
// Manifest

void validate_manifest(const Manifest& m) {
  if (m.format_version != kManifestFormatVersion) {
    fail_validation("manifest format_version " + std::to_string(m.format_version) +
                    " is not supported (expected " + std::to_string(kManifestFormatVersion) + ")");
  }
  if (!(m.frame_hop_s > 0.0) || !std::isfinite(m.frame_hop_s)) {
    fail_validation("manifest frame_hop_s must be positive");
  }
  if (m.num_layers < 1) fail_validation("manifest num_layers must be >= 1");
  if (m.dim < 1) fail_validation("manifest dim must be >= 1");
  if (m.accents.empty()) fail_validation("manifest declares no accents");
  const std::set<std::string> accents(m.accents.begin(), m.accents.end());
  if (accents.size() != m.accents.size()) fail_validation("manifest accent list has duplicates");
  std::set<std::string> seen;
  for (const auto& u : m.utterances) {
    if (u.utt_id.empty()) fail_validation("manifest utterance with empty utt_id");
    if (!seen.insert(u.utt_id).second) fail_validation("duplicate utt_id '" + u.utt_id + "'");
    if (u.num_frames < 1) fail_validation(u.utt_id + ": num_frames must be >= 1");
    if (!accents.contains(u.accent)) {
      fail_validation(u.utt_id + ": accent '" + u.accent + "' not in the declared accent list");
    }
    if (u.speaker.empty()) fail_validation(u.utt_id + ": empty speaker");
    if (u.feature_path.empty() || u.alignment_path.empty()) {
      fail_validation(u.utt_id + ": feature_path and alignment_path are required");
    }
  }
}

Manifest read_manifest(const fs::path& path) {
  const fs::path file = manifest_file(path);
  json j;
  try {
    j = json::parse(slurp(file));
  } catch (const json::parse_error& e) {
    fail_validation(file.string() + ": parse failure: " + e.what());
  }
  Manifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    m.frame_hop_s = j.at("frame_hop_s").get<double>();
    m.num_layers = j.at("num_layers").get<std::uint32_t>();
    m.dim = j.at("dim").get<std::uint32_t>();
    m.accents = j.at("accents").get<std::vector<std::string>>();
    if (j.contains("model_tag")) m.model_tag = j.at("model_tag").get<std::string>();
    if (j.contains("checkpoint_hash")) m.checkpoint_hash = j.at("checkpoint_hash").get<std::string>();
    for (const auto& ju : j.at("utterances")) {
      UtteranceMeta u;
      u.utt_id = ju.at("utt_id").get<std::string>();
      try {
        u.speaker = ju.at("speaker").get<std::string>();
        u.accent = ju.at("accent").get<std::string>();
        u.num_frames = ju.at("num_frames").get<std::uint32_t>();
        u.feature_path = ju.at("feature_path").get<std::string>();
        u.alignment_path = ju.at("alignment_path").get<std::string>();
        if (ju.contains("track_path") && !ju.at("track_path").is_null()) {
          u.track_path = ju.at("track_path").get<std::string>();
        }
      } catch (const json::exception& e) {
        fail_validation(file.string() + ": utterance '" + u.utt_id + "': " + e.what());
      }
      m.utterances.push_back(std::move(u));
    }
  } catch (const json::exception& e) {
    fail_validation(file.string() + ": " + e.what());
  }
  validate_manifest(m);

  const fs::path root = file.parent_path();
  for (const auto& u : m.utterances) {
    const fs::path feat = root / u.feature_path;
    if (!fs::exists(feat)) fail_validation(u.utt_id + ": missing feature file " + feat.string());
    const DumpShape shape = read_feature_shape(feat);
    const DumpShape want{m.num_layers, u.num_frames, m.dim};
    if (shape != want) {
      fail_validation(u.utt_id + ": feature header " + shape_str(shape) +
                      " disagrees with manifest " + shape_str(want));
    }
    if (!fs::exists(root / u.alignment_path)) {
      fail_validation(u.utt_id + ": missing alignment file " + (root / u.alignment_path).string());
    }
    if (u.track_path && !fs::exists(root / *u.track_path)) {
      fail_validation(u.utt_id + ": missing track file " + (root / *u.track_path).string());
    }
  }
  return m;
}

void write_manifest(const Manifest& m, const fs::path& path) {
  validate_manifest(m);
  json j;
  j["format_version"] = m.format_version;
  j["frame_hop_s"] = m.frame_hop_s;
  j["num_layers"] = m.num_layers;
  j["dim"] = m.dim;
  j["accents"] = m.accents;
  if (m.model_tag) j["model_tag"] = *m.model_tag;
  if (m.checkpoint_hash) j["checkpoint_hash"] = *m.checkpoint_hash;
  json utts = json::array();
  for (const auto& u : m.utterances) {
    json ju;
    ju["utt_id"] = u.utt_id;
    ju["speaker"] = u.speaker;
    ju["accent"] = u.accent;
    ju["num_frames"] = u.num_frames;
    ju["feature_path"] = u.feature_path;
    ju["alignment_path"] = u.alignment_path;
    if (u.track_path) ju["track_path"] = *u.track_path;
    utts.push_back(std::move(ju));
  }
  j["utterances"] = std::move(utts);
  spit(manifest_file(path), j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Features

DumpShape read_feature_shape(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open " + path.string());
  std::string header(16, '\0');
  in.read(header.data(), 16);
  header.resize(static_cast<std::size_t>(in.gcount()));
  return parse_feature_header(header, path);
}

FeatureDump read_features(const fs::path& path, std::optional<DumpShape> expected) {
  const std::string bytes = slurp(path);
  const DumpShape shape = parse_feature_header(bytes, path);
  if (expected && shape != *expected) {
    fail_validation(path.string() + ": header " + shape_str(shape) + " does not match expected " +
                    shape_str(*expected));
  }
  if (shape.layers == 0 || shape.frames == 0 || shape.dim == 0) {
    fail_validation(path.string() + ": zero dimension in header " + shape_str(shape));
  }
  const std::size_t count = static_cast<std::size_t>(shape.layers) * shape.frames * shape.dim;
  const std::size_t payload = bytes.size() - 16;
  if (payload < count * 4) {
    fail_validation(path.string() + ": truncated payload (" + std::to_string(payload / 4) + " of " +
                    std::to_string(count) + " floats)");
  }
  if (payload > count * 4) fail_validation(path.string() + ": trailing bytes after payload");
  std::vector<float> data(count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + 16;
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = get_f32(p + 4 * i);
    if (!std::isfinite(data[i])) {
      fail_validation(path.string() + ": non-finite value at index " + std::to_string(i));
    }
  }
  return FeatureDump(shape, std::move(data));
}

void write_features(const FeatureDump& dump, const fs::path& path) {
  const DumpShape& s = dump.shape();
  if (s.layers == 0 || s.frames == 0 || s.dim == 0) {
    fail_validation("cannot write feature dump with zero dimension " + shape_str(s));
  }
  std::string out;
  out.reserve(16 + dump.data().size() * 4);
  out.append(kFeatureMagic.data(), 4);
  put_u32(out, s.layers);
  put_u32(out, s.frames);
  put_u32(out, s.dim);
  for (float f : dump.data()) {
    if (!std::isfinite(f)) fail_validation("cannot write non-finite feature value");
    put_f32(out, f);
  }
  spit(path, out);
}

// ---------------------------------------------------------------------------
// Alignment

void validate_tier(AlignmentTier& tier, const std::string& context) {
  for (const auto& s : tier.segments) {
    if (!std::isfinite(s.start_s) || !std::isfinite(s.end_s) || s.start_s < 0.0 ||
        !(s.start_s < s.end_s)) {
      fail_validation(context + ": " + std::string(tier_name(tier.tier)) + " segment '" + s.label +
                      "' has an inverted or invalid interval [" + std::to_string(s.start_s) + ", " +
                      std::to_string(s.end_s) + ")");
    }
  }
  std::stable_sort(tier.segments.begin(), tier.segments.end(),
                   [](const auto& a, const auto& b) { return a.start_s < b.start_s; });
  for (std::size_t i = 1; i < tier.segments.size(); ++i) {
    const auto& prev = tier.segments[i - 1];
    const auto& cur = tier.segments[i];
    if (cur.start_s < prev.end_s) {
      fail_validation(context + ": overlapping " + std::string(tier_name(tier.tier)) +
                      " segments '" + prev.label + "' and '" + cur.label + "'");
    }
  }
}

Alignment read_alignment(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail_io("cannot open " + path.string());
  Alignment a;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cols;
    std::size_t pos = 0;
    while (true) {
      const std::size_t tab = line.find('\t', pos);
      cols.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cols.size() != 4) fail_validation(where + ": expected 4 tab-separated columns");
    AlignedSegment seg;
    seg.label = cols[1];
    try {
      std::size_t used = 0;
      seg.start_s = std::stod(cols[2], &used);
      if (used != cols[2].size()) throw std::invalid_argument("trailing");
      seg.end_s = std::stod(cols[3], &used);
      if (used != cols[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail_validation(where + ": malformed time value");
    }
    if (cols[0] == "phone") {
      a.phone.segments.push_back(std::move(seg));
    } else if (cols[0] == "word") {
      a.word.segments.push_back(std::move(seg));
    } else {
      fail_validation(where + ": unknown tier '" + cols[0] + "'");
    }
  }
  validate_tier(a.phone, path.string());
  validate_tier(a.word, path.string());
  return a;
}

void write_alignment(const Alignment& alignment, const fs::path& path) {
  std::string out = "# tier\tlabel\tstart_s\tend_s\n";
  char buf[64];
  for (const AlignmentTier* tier : {&alignment.phone, &alignment.word}) {
    for (const auto& s : tier->segments) {
      if (s.label.find_first_of("\t\n") != std::string::npos) {
        fail_validation("alignment label contains a tab or newline: '" + s.label + "'");
      }
      out += tier_name(tier->tier);
      out += '\t';
      out += s.label;
      std::snprintf(buf, sizeof buf, "\t%.17g", s.start_s);
      out += buf;
      std::snprintf(buf, sizeof buf, "\t%.17g\n", s.end_s);
      out += buf;
    }
  }
  spit(path, out);
}

// ---------------------------------------------------------------------------
// Prosody tracks

void validate_track(const ProsodyTrack& track, const std::string& context) {
  if (track.f0_hz.size() != track.energy.size()) {
    fail_validation(context + ": f0 and energy lengths differ");
  }
  for (std::size_t i = 0; i < track.f0_hz.size(); ++i) {
    if (!std::isfinite(track.f0_hz[i]) || track.f0_hz[i] < 0.0f) {
      fail_validation(context + ": invalid f0 at frame " + std::to_string(i));
    }
    if (!std::isfinite(track.energy[i]) || track.energy[i] < 0.0f) {
      fail_validation(context + ": invalid energy at frame " + std::to_string(i));
    }
  }
}

ProsodyTrack read_track(const fs::path& path, std::optional<std::size_t> expected_frames) {
  const std::string bytes = slurp(path);
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kTrackMagic.data(), 4) != 0) {
    fail_validation(path.string() + ": bad magic (expected LPT1)");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t frames = get_u32(p + 4);
  if (expected_frames && frames != *expected_frames) {
    fail_validation(path.string() + ": track has " + std::to_string(frames) +
                    " frames, expected " + std::to_string(*expected_frames));
  }
  const std::size_t need = 8 + static_cast<std::size_t>(frames) * 8;
  if (bytes.size() != need) {
    fail_validation(path.string() + ": track payload size " + std::to_string(bytes.size()) +
                    " bytes, expected " + std::to_string(need));
  }
  ProsodyTrack track;
  track.f0_hz.resize(frames);
  track.energy.resize(frames);
  for (std::uint32_t i = 0; i < frames; ++i) {
    track.f0_hz[i] = get_f32(p + 8 + 4 * i);
    track.energy[i] = get_f32(p + 8 + 4 * (static_cast<std::size_t>(frames) + i));
  }
  validate_track(track, path.string());
  return track;
}

void write_track(const ProsodyTrack& track, const fs::path& path) {
  validate_track(track, path.string());
  std::string out(kTrackMagic.data(), 4);
  put_u32(out, static_cast<std::uint32_t>(track.num_frames()));
  for (float f : track.f0_hz) put_f32(out, f);
  for (float e : track.energy) put_f32(out, e);
  spit(path, out);
}

}  // namespace lprobe
