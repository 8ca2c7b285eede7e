#include "lprobe/prosody.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "lprobe/error.hpp"
#include "lprobe/pooling.hpp"

namespace lprobe {
namespace {

void zscore(std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= n;
  if (!(var > 1e-24 * std::max(1.0, mean * mean))) {
    std::fill(v.begin(), v.end(), 0.0);
    return;
  }
  const double inv = 1.0 / std::sqrt(var);
  for (double& x : v) x = (x - mean) * inv;
}

std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  return m < static_cast<std::ptrdiff_t>(n) ? static_cast<std::size_t>(m)
                                            : static_cast<std::size_t>(period - 1 - m);
}

bool in_band(double s, const std::array<double, 2>& band) {
  return s >= band[0] * (1.0 - 1e-9) && s <= band[1] * (1.0 + 1e-9);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t pos = 0;
  while (true) {
    const std::size_t t = line.find('\t', pos);
    cols.push_back(line.substr(pos, t == std::string::npos ? std::string::npos : t - pos));
    if (t == std::string::npos) break;
    pos = t + 1;
  }
  return cols;
}

double parse_real(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) {
    fail_validation(where + ": malformed number '" + s + "'");
  }
  return v;
}

}  // namespace

void ProsodyConfig::validate() const {
  const double wsum = weights[0] + weights[1] + weights[2];
  if (std::abs(wsum - 1.0) > 1e-9 || *std::min_element(weights.begin(), weights.end()) < 0.0) {
    fail_validation("prosody weights must be non-negative and sum to 1");
  }
  if (scales_s.size() < 3) fail_validation("prosody needs at least 3 wavelet scales");
  for (double s : scales_s) {
    if (!(s > 0.0)) fail_validation("prosody scales must be positive");
  }
}

CompositeSignal normalize_components(const ProsodyTrack& track, const AlignmentTier& words,
                                     double hop_s, const ProsodyConfig& config) {
  config.validate();
  validate_track(track, "normalize_components");
  const std::size_t n = track.num_frames();
  if (n == 0) fail_validation("normalize_components: empty track");
  CompositeSignal c;
  c.weights = config.weights;

  // log F0, unvoiced frames filled by linear interpolation between voiced neighbours.
  c.f0_norm.assign(n, 0.0);
  std::vector<std::size_t> voiced;
  for (std::size_t t = 0; t < n; ++t) {
    if (track.f0_hz[t] > 0.0f) voiced.push_back(t);
  }
  if (voiced.empty()) {
    c.warnings.push_back("fully unvoiced track; F0 weight reassigned");
    const double rest = c.weights[1] + c.weights[2];
    if (rest > 0.0) {
      c.weights = {0.0, c.weights[1] / rest, c.weights[2] / rest};
    } else {
      c.weights = {0.0, 0.5, 0.5};
    }
  } else {
    std::size_t k = 0;  // voiced[k] <= t < voiced[k + 1] once t passes the first voiced frame
    for (std::size_t t = 0; t < n; ++t) {
      while (k + 1 < voiced.size() && voiced[k + 1] <= t) ++k;
      const std::size_t a = voiced[k];
      if (t <= a || k + 1 == voiced.size()) {
        c.f0_norm[t] = std::log(static_cast<double>(track.f0_hz[a]));
        continue;
      }
      const std::size_t b = voiced[k + 1];
      const double la = std::log(static_cast<double>(track.f0_hz[a]));
      const double lb = std::log(static_cast<double>(track.f0_hz[b]));
      const double f = static_cast<double>(t - a) / static_cast<double>(b - a);
      c.f0_norm[t] = (1.0 - f) * la + f * lb;
    }
    zscore(c.f0_norm);
  }

  c.energy_norm.resize(n);
  for (std::size_t t = 0; t < n; ++t) c.energy_norm[t] = std::log(static_cast<double>(track.energy[t]) + 1e-10);
  zscore(c.energy_norm);

  double mean_dur = 0.0;
  for (const auto& w : words.segments) mean_dur += w.end_s - w.start_s;
  if (!words.segments.empty()) mean_dur /= static_cast<double>(words.segments.size());
  c.duration_norm.assign(n, mean_dur);
  for (const auto& w : words.segments) {
    const FrameRange r = segment_to_frames(w.start_s, w.end_s, hop_s, static_cast<std::uint32_t>(n));
    for (std::int64_t t = r.first; t <= r.last; ++t) c.duration_norm[static_cast<std::size_t>(t)] = w.end_s - w.start_s;
  }
  zscore(c.duration_norm);

  c.values.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    c.values[t] = c.weights[0] * c.f0_norm[t] + c.weights[1] * c.energy_norm[t] +
                  c.weights[2] * c.duration_norm[t];
  }
  return c;
}

double mexican_hat(double t) {
  const double norm = 2.0 / (std::sqrt(3.0) * std::pow(std::numbers::pi, 0.25));
  return norm * (1.0 - t * t) * std::exp(-0.5 * t * t);
}

std::vector<double> mexican_hat_kernel(double scale_frames) {
  if (!(scale_frames > 0.0)) fail_validation("wavelet scale must be positive");
  const auto half = static_cast<std::ptrdiff_t>(std::ceil(5.0 * scale_frames));
  std::vector<double> k(static_cast<std::size_t>(2 * half + 1));
  const double inv_sqrt = 1.0 / std::sqrt(scale_frames);
  for (std::ptrdiff_t j = -half; j <= half; ++j) {
    k[static_cast<std::size_t>(j + half)] = mexican_hat(static_cast<double>(j) / scale_frames) * inv_sqrt;
  }
  const double mean = std::accumulate(k.begin(), k.end(), 0.0) / static_cast<double>(k.size());
  for (double& v : k) v -= mean;
  return k;
}

CwtPlane cwt(std::span<const double> signal, std::span<const double> scales_frames) {
  if (signal.size() < 8) fail_validation("cwt: signal needs at least 8 frames");
  if (scales_frames.size() < 3) fail_validation("cwt: need at least 3 scales");
  CwtPlane plane;
  plane.scales_frames.assign(scales_frames.begin(), scales_frames.end());
  const std::size_t n = signal.size();
  for (double s : scales_frames) {
    const auto kernel = mexican_hat_kernel(s);
    const auto half = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    std::vector<double> row(n, 0.0);
    for (std::size_t b = 0; b < n; ++b) {
      double acc = 0.0;
      for (std::ptrdiff_t j = -half; j <= half; ++j) {
        acc += signal[reflect(static_cast<std::ptrdiff_t>(b) + j, n)] *
               kernel[static_cast<std::size_t>(j + half)];
      }
      row[b] = acc;
    }
    plane.coefficients.push_back(std::move(row));
  }
  return plane;
}

std::vector<WordProsody> score_words(const CwtPlane& plane, const AlignmentTier& words, double hop_s,
                                     const std::string& utt_id, const ProsodyConfig& config,
                                     std::size_t* empty_words) {
  if (words.segments.empty()) fail_validation("score_words: word tier is empty for " + utt_id);
  const std::size_t n = plane.frames();
  std::vector<std::size_t> prom_rows, bound_rows;
  for (std::size_t i = 0; i < plane.scales_frames.size(); ++i) {
    const double s = plane.scales_frames[i] * hop_s * kMexicanHatPeriod;
    if (in_band(s, config.prominence_band_s)) prom_rows.push_back(i);
    if (in_band(s, config.boundary_band_s)) bound_rows.push_back(i);
  }
  if (prom_rows.empty() || bound_rows.empty()) {
    fail_validation("score_words: a scale band contains no wavelet scale");
  }
  double mean_dur = 0.0;
  for (const auto& w : words.segments) mean_dur += w.end_s - w.start_s;
  mean_dur /= static_cast<double>(words.segments.size());
  const double half_window = 0.5 * mean_dur;

  std::size_t empty = 0;
  std::vector<WordProsody> out;
  for (std::uint32_t k = 0; k < words.segments.size(); ++k) {
    const auto& w = words.segments[k];
    WordProsody wp{utt_id, k, w.label, 0.0, 0.0};
    const FrameRange span = segment_to_frames(w.start_s, w.end_s, hop_s, static_cast<std::uint32_t>(n));
    if (span.empty()) {
      ++empty;
    } else {
      for (std::size_t r : prom_rows) {
        for (std::int64_t t = span.first; t <= span.last; ++t) {
          wp.prominence = std::max(wp.prominence, plane.coefficients[r][static_cast<std::size_t>(t)]);
        }
      }
    }
    const FrameRange around = segment_to_frames(std::max(0.0, w.end_s - half_window),
                                                w.end_s + half_window, hop_s,
                                                static_cast<std::uint32_t>(n));
    for (std::size_t r : bound_rows) {
      for (std::int64_t t = around.first; t <= around.last; ++t) {
        wp.boundary = std::max(wp.boundary, -plane.coefficients[r][static_cast<std::size_t>(t)]);
      }
    }
    out.push_back(std::move(wp));
  }
  if (empty_words) *empty_words = empty;
  return out;
}

std::vector<WordProsody> label_utterance(const ProsodyTrack& track, const AlignmentTier& words,
                                         double hop_s, const std::string& utt_id,
                                         const ProsodyConfig& config,
                                         std::vector<std::string>* warnings) {
  validate_track(track, "label_utterance");
  // Analyse only the speech span, first word start to last word end. Edge
  // silence would otherwise read as a reduction next to the outer words.
  const auto n = static_cast<std::uint32_t>(track.num_frames());
  const FrameRange span =
      words.segments.empty() ? FrameRange{}
                             : segment_to_frames(words.segments.front().start_s, words.segments.back().end_s, hop_s, n);
  if (span.size() >= 8 && static_cast<std::uint32_t>(span.size()) < n) {
    const auto first = static_cast<std::size_t>(span.first);
    const auto last = static_cast<std::size_t>(span.last) + 1;
    ProsodyTrack cropped;
    cropped.f0_hz.assign(track.f0_hz.begin() + first, track.f0_hz.begin() + last);
    cropped.energy.assign(track.energy.begin() + first, track.energy.begin() + last);
    AlignmentTier shifted = words;
    const double offset = static_cast<double>(first) * hop_s;
    for (auto& w : shifted.segments) {
      w.start_s = std::max(0.0, w.start_s - offset);
      w.end_s = std::max(w.start_s, w.end_s - offset);
    }
    return label_utterance(cropped, shifted, hop_s, utt_id, config, warnings);
  }
  const CompositeSignal c = normalize_components(track, words, hop_s, config);
  std::vector<double> scales;
  for (double s : config.scales_s) scales.push_back(s / (hop_s * kMexicanHatPeriod));
  const CwtPlane plane = cwt(c.values, scales);
  std::size_t empty = 0;
  auto out = score_words(plane, words, hop_s, utt_id, config, &empty);
  if (warnings) {
    for (const auto& w : c.warnings) warnings->push_back(utt_id + ": " + w);
    if (empty) warnings->push_back(utt_id + ": " + std::to_string(empty) + " word(s) cover no frame");
  }
  return out;
}

void write_labels(std::span<const WordProsody> labels, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_io("cannot open " + path.string() + " for writing");
  out << "utt_id\tword_index\tword\tprominence\tboundary\n";
  char buf[32];
  for (const auto& l : labels) {
    out << l.utt_id << '\t' << l.word_index << '\t' << l.word;
    for (double v : {l.prominence, l.boundary}) {
      const auto r = std::to_chars(buf, buf + sizeof buf, v);
      out << '\t' << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf));
    }
    out << '\n';
  }
  if (!out) fail_io("write failure on " + path.string());
}

std::vector<WordProsody> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_io("cannot open " + path.string());
  std::vector<WordProsody> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#' || line.rfind("utt_id\t", 0) == 0) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto cols = split_tabs(line);
    if (cols.size() != 5) fail_validation(where + ": expected 5 tab-separated columns");
    WordProsody w;
    w.utt_id = cols[0];
    const double idx = parse_real(cols[1], where);
    if (idx < 0 || idx != std::floor(idx)) fail_validation(where + ": bad word_index");
    w.word_index = static_cast<std::uint32_t>(idx);
    w.word = cols[2];
    w.prominence = parse_real(cols[3], where);
    w.boundary = parse_real(cols[4], where);
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<WordProsody> import_labels(const std::filesystem::path& path,
                                       const std::map<std::string, AlignmentTier>& word_tiers) {
  auto labels = read_labels(path);
  std::map<std::string, std::vector<const WordProsody*>> by_utt;
  for (const auto& l : labels) {
    if (!word_tiers.contains(l.utt_id)) fail_validation("labels: unknown utt_id '" + l.utt_id + "'");
    by_utt[l.utt_id].push_back(&l);
  }
  for (auto& [utt, rows] : by_utt) {
    const auto& tier = word_tiers.at(utt);
    if (rows.size() != tier.segments.size()) {
      fail_validation("labels: utterance '" + utt + "' has " + std::to_string(rows.size()) +
                      " label rows but " + std::to_string(tier.segments.size()) + " words");
    }
    std::vector<bool> seen(rows.size(), false);
    for (const WordProsody* r : rows) {
      if (r->word_index >= tier.segments.size() || seen[r->word_index]) {
        fail_validation("labels: utterance '" + utt + "' has a duplicate or out-of-range word_index " +
                        std::to_string(r->word_index));
      }
      seen[r->word_index] = true;
      const std::string& expected = tier.segments[r->word_index].label;
      if (lower(expected) != lower(r->word)) {
        fail_validation("labels: utterance '" + utt + "' word " + std::to_string(r->word_index) +
                        " is '" + r->word + "' but the alignment says '" + expected + "'");
      }
    }
  }
  std::sort(labels.begin(), labels.end(), [](const WordProsody& a, const WordProsody& b) {
    return std::tie(a.utt_id, a.word_index) < std::tie(b.utt_id, b.word_index);
  });
  return labels;
}

TargetMap to_target_map(std::span<const WordProsody> labels) {
  TargetMap m;
  for (const auto& l : labels) m[{l.utt_id, l.word_index}] = {l.prominence, l.boundary};
  return m;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) fail_validation("spearman: need two equal-length samples");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) fail_numerical("spearman: constant sample");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace lprobe
