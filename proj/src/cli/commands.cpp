#include "lprobe/cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "lprobe/error.hpp"
#include "lprobe/parallel.hpp"
#include "lprobe/rng.hpp"
#include "lprobe/wav.hpp"

namespace lprobe::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void log_line(const std::string& command, const std::string& level, const std::string& msg) {
  std::cerr << json{{"cmd", command}, {"level", level}, {"msg", msg}}.dump() << '\n';
}

void write_text(const fs::path& path, const std::string& text, const RunConfig& config) {
  if (config.no_overwrite && fs::exists(path)) {
    fail_io("refusing to overwrite " + path.string() + " (--no-overwrite)");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_io("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail_io("write failure on " + path.string());
}

void guard(const fs::path& path, const RunConfig& config) {
  if (config.no_overwrite && fs::exists(path)) {
    fail_io("refusing to overwrite " + path.string() + " (--no-overwrite)");
  }
}

std::vector<std::string> effective_accents(const RunConfig& config, const Manifest& m) {
  if (config.accents.empty()) return m.accents;
  for (const auto& a : config.accents) {
    if (std::find(m.accents.begin(), m.accents.end(), a) == m.accents.end()) {
      fail_validation("config accent '" + a + "' is not in the manifest");
    }
  }
  return config.accents;
}

std::string model_tag_of(const RunConfig& config, const Manifest& m) {
  if (config.model_tag) return *config.model_tag;
  return m.model_tag.value_or("default");
}

Manifest load_manifest(const RunConfig& config) {
  const DatasetLayout layout{config.dataset_root};
  if (!fs::exists(layout.manifest())) fail_io("no manifest.json under " + config.dataset_root.string());
  return read_manifest(layout.manifest());
}

SegmentTable load_table(const DatasetLayout& layout, Tier tier, std::uint32_t layer) {
  const fs::path p = layout.table(tier, layer);
  if (!fs::exists(p)) {
    fail_io("missing table " + p.string() + "; run `lprobe pool` first");
  }
  return read_segment_table(p);
}

SegmentTable restrict_accents(const SegmentTable& t, const std::vector<std::string>& accents) {
  const std::set<std::string> keep(accents.begin(), accents.end());
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (keep.contains(t.rows[i].accent)) idx.push_back(i);
  }
  if (idx.size() == t.size()) return t;
  return t.select(idx);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t pos = 0;
  while (true) {
    const auto c = line.find(',', pos);
    cols.push_back(line.substr(pos, c == std::string::npos ? std::string::npos : c - pos));
    if (c == std::string::npos) break;
    pos = c + 1;
  }
  return cols;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_';
  return out.empty() ? "_" : out;
}

json base_summary(const std::string& command, const RunConfig& config) {
  return json{{"command", command}, {"version", kToolVersion}, {"seed", config.seed}};
}

void finish(CommandOutput& out, const std::string& command) {
  for (const auto& w : out.warnings) log_line(command, "warn", w);
  out.summary["warnings"] = out.warnings.size();
}

}  // namespace

fs::path DatasetLayout::table(Tier tier, std::uint32_t layer) const {
  char name[32];
  std::snprintf(name, sizeof name, "%s_L%03u.csv", tier == Tier::Phone ? "phone" : "word", layer);
  return tables() / name;
}

void write_meta(const fs::path& csv, const std::string& command, const RunConfig& config,
                const std::string& model_tag, const json& extra) {
  json meta{{"command", command}, {"version", kToolVersion}, {"model_tag", model_tag}, {"config", config.to_json()}};
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  fs::path p = csv;
  p.replace_extension(".meta.json");
  write_text(p, meta.dump(2) + "\n", config);
}

CommandOutput cmd_pool(const RunConfig& config) {
  config.validate();
  const DatasetLayout layout{config.dataset_root};
  const Manifest m = load_manifest(config);
  const auto accents = effective_accents(config, m);
  const std::set<std::string> keep(accents.begin(), accents.end());
  CommandOutput out;

  std::vector<const UtteranceMeta*> utts;
  for (const auto& u : m.utterances) {
    if (keep.contains(u.accent)) utts.push_back(&u);
  }
  if (utts.empty()) fail_validation("pool: no utterance matches the configured accents");

  // Pass 1: alignments only.
  std::vector<SegmentSpec> phone_all, words;
  std::map<std::string, AlignmentTier> word_tiers;
  std::size_t phones_short = 0, words_skipped = 0;
  for (const UtteranceMeta* u : utts) {
    Alignment a;
    try {
      a = read_alignment(layout.root / u->alignment_path);
    } catch (const Error& e) {
      throw Error(e.kind(), "utterance " + u->utt_id + ": " + e.what());
    }
    auto ph = phoneme_segment_specs(a.phone, *u, m.frame_hop_s, config.sampling);
    phones_short += ph.discarded;
    phone_all.insert(phone_all.end(), ph.kept.begin(), ph.kept.end());
    auto wd = word_segment_specs(a.word, *u, m.frame_hop_s);
    words_skipped += wd.discarded;
    words.insert(words.end(), wd.kept.begin(), wd.kept.end());
    word_tiers[u->utt_id] = a.word;
  }
  const std::size_t phones_eligible = phone_all.size();
  const auto phones = sample_segments(std::move(phone_all), config.sampling);

  std::optional<TargetMap> targets;
  if (fs::exists(layout.labels())) targets = to_target_map(import_labels(layout.labels(), word_tiers));

  // Pass 2: features, one utterance at a time, every layer.
  std::map<std::string, std::vector<std::size_t>> phone_idx, word_idx;
  for (std::size_t i = 0; i < phones.size(); ++i) phone_idx[phones[i].utt_id].push_back(i);
  for (std::size_t i = 0; i < words.size(); ++i) word_idx[words[i].utt_id].push_back(i);
  std::vector<std::vector<PooledSegment>> pooled_phone(m.num_layers, std::vector<PooledSegment>(phones.size()));
  std::vector<std::vector<PooledSegment>> pooled_word(m.num_layers, std::vector<PooledSegment>(words.size()));
  for (const UtteranceMeta* u : utts) {
    const auto pi = phone_idx.find(u->utt_id);
    const auto wi = word_idx.find(u->utt_id);
    if (pi == phone_idx.end() && wi == word_idx.end()) continue;
    FeatureDump dump;
    try {
      dump = read_features(layout.root / u->feature_path, DumpShape{m.num_layers, u->num_frames, m.dim});
    } catch (const Error& e) {
      throw Error(e.kind(), "utterance " + u->utt_id + ": " + e.what());
    }
    for (std::uint32_t l = 0; l < m.num_layers; ++l) {
      if (pi != phone_idx.end()) {
        for (std::size_t i : pi->second) {
          pooled_phone[l][i] = {phones[i], pool_frames(dump, l, phones[i].pooled_range)};
        }
      }
      if (wi != word_idx.end()) {
        for (std::size_t i : wi->second) {
          pooled_word[l][i] = {words[i], pool_frames(dump, l, words[i].pooled_range)};
        }
      }
    }
  }

  std::size_t missing_targets = 0;
  if (targets) {
    for (const auto& w : words) missing_targets += targets->contains({w.utt_id, w.index}) ? 0 : 1;
  }
  for (std::uint32_t l = 0; l < m.num_layers; ++l) {
    for (Tier tier : {Tier::Phone, Tier::Word}) {
      const fs::path p = layout.table(tier, l);
      guard(p, config);
      const auto& pooled = tier == Tier::Phone ? pooled_phone[l] : pooled_word[l];
      const SegmentTable t = build_segment_table(pooled, l, tier,
                                                 tier == Tier::Word && targets ? &*targets : nullptr, false);
      write_segment_table(t, p);
    }
  }
  if (missing_targets) {
    out.warnings.push_back(std::to_string(missing_targets) + " word(s) have no prosody label");
  }

  json counts{{"utterances", utts.size()},
              {"layers", m.num_layers},
              {"phones_eligible", phones_eligible},
              {"phones_discarded_short", phones_short},
              {"phones_kept", phones.size()},
              {"words_kept", words.size()},
              {"words_skipped_empty", words_skipped},
              {"word_targets", targets.has_value()}};
  write_text(layout.tables() / "pool_summary.json",
             json{{"version", kToolVersion}, {"config", config.to_json()}, {"counts", counts}}.dump(2) + "\n",
             config);
  out.summary = base_summary("pool", config);
  out.summary["counts"] = counts;
  out.summary["sampling_seed"] = config.sampling.seed;
  finish(out, "pool");
  return out;
}

CommandOutput cmd_cca(const RunConfig& config) {
  config.validate();
  const DatasetLayout layout{config.dataset_root};
  const Manifest m = load_manifest(config);
  const auto accents = effective_accents(config, m);
  const std::string tag = model_tag_of(config, m);
  CommandOutput out;

  std::vector<SegmentTable> tables;
  for (std::uint32_t l = 0; l < m.num_layers; ++l) {
    tables.push_back(restrict_accents(load_table(layout, Tier::Phone, l), accents));
  }
  std::vector<std::string> scopes{"all"};
  scopes.insert(scopes.end(), accents.begin(), accents.end());

  struct Task {
    std::uint32_t layer;
    std::string scope;
    std::optional<CcaResult> result;
    std::string skipped;
  };
  std::vector<Task> tasks;
  for (std::uint32_t l = 0; l < m.num_layers; ++l) {
    for (const auto& s : scopes) tasks.push_back({l, s, std::nullopt, {}});
  }
  parallel_chunks(tasks.size(), config.jobs, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      Task& t = tasks[i];
      const SegmentTable& table = tables[t.layer];
      if (t.scope == "all") {
        t.result = cca_protocol(table, config.cca, "all");
        continue;
      }
      try {
        t.result = cca_protocol(table.filter_accent(t.scope), config.cca, t.scope);
      } catch (const Error& err) {
        if (err.kind() == ErrorKind::Io) throw;
        t.skipped = err.what();
      }
    }
  });

  std::ostringstream scores, summary;
  scores << "model_tag,layer,accent,fold,score\n";
  summary << "model_tag,layer,accent,score\n";
  double best = -1.0;
  std::uint32_t best_layer = 0;
  for (const Task& t : tasks) {
    if (!t.result) {
      out.warnings.push_back("layer " + std::to_string(t.layer) + " accent " + t.scope + " skipped: " + t.skipped);
      continue;
    }
    for (const auto& f : t.result->folds) {
      scores << tag << ',' << t.layer << ',' << t.scope << ',' << f.fold << ',' << num(f.score) << '\n';
    }
    summary << tag << ',' << t.layer << ',' << t.scope << ',' << num(t.result->score) << '\n';
    if (t.scope == "all" && t.result->score > best) {
      best = t.result->score;
      best_layer = t.layer;
    }
  }
  const fs::path scores_path = layout.reports() / "cca_scores.csv";
  const fs::path summary_path = layout.reports() / "cca_summary.csv";
  write_text(scores_path, scores.str(), config);
  write_text(summary_path, summary.str(), config);
  const json extra{{"best_layer", best_layer}, {"cca_seed", config.cca.seed}};
  write_meta(scores_path, "cca", config, tag, extra);
  write_meta(summary_path, "cca", config, tag, extra);

  out.summary = base_summary("cca", config);
  out.summary["model_tag"] = tag;
  out.summary["layers"] = m.num_layers;
  out.summary["best_layer"] = best_layer;
  out.summary["best_score"] = best;
  out.summary["cca_seed"] = config.cca.seed;
  finish(out, "cca");
  return out;
}

CommandOutput cmd_probe(const RunConfig& config) {
  config.validate();
  const DatasetLayout layout{config.dataset_root};
  const Manifest m = load_manifest(config);
  const auto accents = effective_accents(config, m);
  const std::string tag = model_tag_of(config, m);
  CommandOutput out;

  std::optional<TargetMap> targets;
  if (fs::exists(layout.labels())) targets = to_target_map(read_labels(layout.labels()));

  FoldAssignment assignment;
  assignment.folds = config.probe.folds;
  if (!config.probe.speaker_folds.empty()) {
    assignment.speaker_to_fold = config.probe.speaker_folds;
  } else {
    std::map<std::string, std::string> speaker_accent;
    for (const auto& u : m.utterances) speaker_accent[u.speaker] = u.accent;
    assignment = auto_assign_folds(speaker_accent, config.probe.folds);
  }
  assignment.validate();

  std::vector<SegmentTable> tables;
  for (std::uint32_t l = 0; l < m.num_layers; ++l) {
    SegmentTable t = restrict_accents(load_table(layout, Tier::Word, l), accents);
    if (targets) {
      for (auto& r : t.rows) {
        const auto it = targets->find({r.utt_id, r.index});
        if (it == targets->end()) {
          fail_validation("probe: no prosody label for " + r.utt_id + " word " + std::to_string(r.index));
        }
        r.prominence = it->second.prominence;
        r.boundary = it->second.boundary;
      }
    } else if (!t.has_targets()) {
      fail_validation("probe: word tables carry no prosody targets and " + layout.labels().string() +
                      " does not exist; run `lprobe prosody-label` first");
    }
    tables.push_back(std::move(t));
  }

  std::vector<std::pair<ProsodyTarget, std::uint32_t>> jobs_list;
  for (auto target : config.probe.targets) {
    for (std::uint32_t l = 0; l < m.num_layers; ++l) jobs_list.emplace_back(target, l);
  }
  std::vector<ProbeResult> results(jobs_list.size());
  parallel_chunks(jobs_list.size(), config.jobs, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      results[i] = grouped_cv(tables[jobs_list[i].second], jobs_list[i].first, assignment, config.probe.lambda);
    }
  });

  std::ostringstream scores, summary;
  scores << "model_tag,target,layer,fold,accent,mse\n";
  summary << "model_tag,target,layer,accent,mse\n";
  json best = json::object();
  std::map<ProsodyTarget, std::pair<double, std::uint32_t>> argmin;
  for (const ProbeResult& r : results) {
    const std::string tname(target_name(r.target));
    for (const auto& f : r.folds) {
      scores << tag << ',' << tname << ',' << r.layer << ',' << f.fold << ",all," << num(f.mse) << '\n';
      for (const auto& a : accents) {
        const auto it = f.per_accent_mse.find(a);
        if (it != f.per_accent_mse.end()) {
          scores << tag << ',' << tname << ',' << r.layer << ',' << f.fold << ',' << a << ',' << num(it->second) << '\n';
        }
      }
    }
    summary << tag << ',' << tname << ',' << r.layer << ",all," << num(r.overall_mse) << '\n';
    for (const auto& a : accents) {
      const auto it = r.per_accent_mse.find(a);
      if (it != r.per_accent_mse.end()) {
        summary << tag << ',' << tname << ',' << r.layer << ',' << a << ',' << num(it->second) << '\n';
      }
    }
    auto [pos, inserted] = argmin.try_emplace(r.target, r.overall_mse, r.layer);
    if (!inserted && r.overall_mse < pos->second.first) pos->second = {r.overall_mse, r.layer};
  }
  for (const auto& [t, v] : argmin) best[std::string(target_name(t))] = {{"layer", v.second}, {"mse", v.first}};

  const fs::path scores_path = layout.reports() / "probe_scores.csv";
  const fs::path summary_path = layout.reports() / "probe_summary.csv";
  write_text(scores_path, scores.str(), config);
  write_text(summary_path, summary.str(), config);
  const json extra{{"best_layer", best}, {"speaker_folds", assignment.speaker_to_fold}};
  write_meta(scores_path, "probe", config, tag, extra);
  write_meta(summary_path, "probe", config, tag, extra);

  out.summary = base_summary("probe", config);
  out.summary["model_tag"] = tag;
  out.summary["best_layer"] = best;
  finish(out, "probe");
  return out;
}

CommandOutput cmd_prosody_label(const RunConfig& config, const ProsodyLabelOptions& options) {
  config.validate();
  const DatasetLayout layout{config.dataset_root};
  const Manifest m = load_manifest(config);
  const auto accents = effective_accents(config, m);
  const std::set<std::string> keep(accents.begin(), accents.end());
  const std::string tag = model_tag_of(config, m);
  CommandOutput out;

  std::map<std::string, AlignmentTier> word_tiers;
  for (const auto& u : m.utterances) {
    if (keep.contains(u.accent)) word_tiers[u.utt_id] = read_alignment(layout.root / u.alignment_path).word;
  }

  std::vector<WordProsody> labels;
  std::size_t unlabeled = 0;
  if (options.import_path) {
    labels = import_labels(*options.import_path, word_tiers);
  } else {
    for (const auto& u : m.utterances) {
      if (!keep.contains(u.accent)) continue;
      if (!u.track_path) {
        ++unlabeled;
        out.warnings.push_back("utterance " + u.utt_id + " has no prosody track; skipped");
        continue;
      }
      const ProsodyTrack track = read_track(layout.root / *u.track_path, u.num_frames);
      const auto& words = word_tiers.at(u.utt_id);
      if (words.segments.empty()) {
        ++unlabeled;
        out.warnings.push_back("utterance " + u.utt_id + " has no words; skipped");
        continue;
      }
      auto rows = label_utterance(track, words, m.frame_hop_s, u.utt_id, config.prosody, &out.warnings);
      labels.insert(labels.end(), rows.begin(), rows.end());
    }
  }
  guard(layout.labels(), config);
  write_labels(labels, layout.labels());

  out.summary = base_summary("prosody-label", config);
  out.summary["words"] = labels.size();
  out.summary["utterances_skipped"] = unlabeled;
  out.summary["source"] = options.import_path ? "import" : "cwt";

  if (options.compare_path) {
    const auto external = import_labels(*options.compare_path, word_tiers);
    std::map<std::pair<std::string, std::uint32_t>, double> ours;
    for (const auto& l : labels) ours[{l.utt_id, l.word_index}] = l.prominence;
    std::vector<double> a, b;
    std::set<std::string> utts;
    for (const auto& l : external) {
      const auto it = ours.find({l.utt_id, l.word_index});
      if (it == ours.end()) continue;
      a.push_back(it->second);
      b.push_back(l.prominence);
      utts.insert(l.utt_id);
    }
    const double rho = spearman(a, b);
    const fs::path p = layout.reports() / "prosody_agreement.csv";
    write_text(p, "model_tag,utterances,words,spearman\n" + tag + "," + std::to_string(utts.size()) + "," +
                      std::to_string(a.size()) + "," + num(rho) + "\n",
               config);
    write_meta(p, "prosody-label", config, tag, json::object());
    out.summary["spearman"] = rho;
    out.summary["compared_words"] = a.size();
    out.summary["compared_utterances"] = utts.size();
  }
  finish(out, "prosody-label");
  return out;
}

CommandOutput cmd_perturb(const RunConfig& config, const PerturbOptions& options) {
  config.validate();
  CommandOutput out;
  std::vector<fs::path> inputs;
  if (fs::is_directory(options.input)) {
    for (const auto& e : fs::directory_iterator(options.input)) {
      if (e.is_regular_file() && e.path().extension() == ".wav") inputs.push_back(e.path());
    }
    std::sort(inputs.begin(), inputs.end());
  } else if (fs::is_regular_file(options.input)) {
    inputs.push_back(options.input);
  } else {
    fail_io("perturb input " + options.input.string() + " does not exist");
  }
  if (inputs.empty()) fail_validation("perturb: no .wav files in " + options.input.string());

  std::ostringstream tsv;
  tsv << "file\talpha\tapplied\tbeta1\tbeta2\tclipped\teq_bands\n";
  std::size_t applied = 0, clipped = 0;
  for (const auto& in : inputs) {
    const std::string name = in.filename().string();
    const fs::path dst = options.output / name;
    if (fs::exists(dst) && fs::equivalent(dst, in)) fail_validation("perturb would overwrite its input " + name);
    guard(dst, config);
    const Waveform w = read_wav(in);
    SplitMix64 rng(file_seed(config.perturb.seed, name));
    PerturbResult r = perturb_waveform(w, config.perturb, rng);
    write_wav(r.wave, dst);
    applied += r.draw.applied ? 1 : 0;
    clipped += r.clipped;
    for (const auto& msg : r.warnings) out.warnings.push_back(name + ": " + msg);
    tsv << name << '\t' << num(r.draw.alpha) << '\t' << (r.draw.applied ? 1 : 0) << '\t' << num(r.draw.beta1)
        << '\t' << num(r.draw.beta2) << '\t' << r.clipped << '\t';
    for (std::size_t b = 0; b < r.draw.eq_bands.size(); ++b) {
      const auto& band = r.draw.eq_bands[b];
      tsv << (b ? ";" : "") << num(band.center_hz) << ':' << num(band.gain_db) << ':' << num(band.width_octaves);
    }
    tsv << '\n';
  }
  write_text(options.output / "perturb_draws.tsv", tsv.str(), config);

  out.summary = base_summary("perturb", config);
  out.summary["files"] = inputs.size();
  out.summary["applied"] = applied;
  out.summary["clipped_samples"] = clipped;
  out.summary["perturb_seed"] = config.perturb.seed;
  finish(out, "perturb");
  return out;
}

CommandOutput cmd_embed(const RunConfig& config, const EmbedOptions& options) {
  config.validate();
  const DatasetLayout layout{config.dataset_root};
  const Manifest m = load_manifest(config);
  const auto accents = effective_accents(config, m);
  const std::string tag = options.model_tag.value_or(model_tag_of(config, m));
  if (options.layer >= m.num_layers) {
    fail_validation("embed: layer " + std::to_string(options.layer) + " out of range (dump has " +
                    std::to_string(m.num_layers) + " layers)");
  }
  if (options.phoneme.empty()) fail_validation("embed: --phoneme is required");
  CommandOutput out;

  const SegmentTable table =
      restrict_accents(load_table(layout, Tier::Phone, options.layer), accents).filter_label(options.phoneme);
  char name[64];
  std::snprintf(name, sizeof name, "_L%03u.csv", options.layer);
  const fs::path p = layout.reports() / ("embed_" + sanitize(tag) + "_" + sanitize(options.phoneme) + name);
  guard(p, config);

  json extra{{"phoneme", options.phoneme}, {"layer", options.layer}, {"points", table.size()},
             {"embed_seed", config.embed.seed}};
  out.summary = base_summary("embed", config);
  out.summary["model_tag"] = tag;
  out.summary["points"] = table.size();
  if (table.size() == 0) {
    EmbedResult empty;
    empty.points.resize(0, 2);
    export_points(empty, p, &out.warnings);
  } else {
    const EmbedResult r = embed_table(table, config.embed);
    export_points(r, p, &out.warnings);
    std::vector<std::string> labels;
    for (const auto& row : table.rows) labels.push_back(row.accent);
    const double purity = knn_purity(r.points, labels, std::min<std::size_t>(10, table.size() - 1));
    extra["final_kl"] = r.final_kl;
    extra["knn_accent_purity"] = purity;
    out.summary["final_kl"] = r.final_kl;
    out.summary["knn_accent_purity"] = purity;
  }
  write_meta(p, "embed", config, tag, extra);
  out.summary["output"] = p.filename().string();
  finish(out, "embed");
  return out;
}

CommandOutput cmd_report(const RunConfig& config, const ReportOptions& options) {
  if (options.inputs.empty()) fail_validation("report: give at least one TAG=ROOT input");
  std::set<std::string> tags;
  for (const auto& [tag, root] : options.inputs) {
    if (tag.empty() || tag.find_first_of(",\"\n") != std::string::npos) {
      fail_validation("report: bad model tag '" + tag + "'");
    }
    if (!tags.insert(tag).second) fail_validation("report: duplicate model tag '" + tag + "'");
  }
  CommandOutput out;
  struct Merge {
    const char* source;
    const char* target;
    const char* header;
  };
  const Merge merges[] = {{"cca_summary.csv", "cca_layers.csv", "model_tag,layer,accent,score"},
                          {"probe_summary.csv", "probe_layers.csv", "model_tag,target,layer,accent,mse"}};
  json written = json::array();
  for (const Merge& fig : merges) {
    std::ostringstream merged;
    merged << fig.header << '\n';
    std::size_t found = 0, rows = 0;
    for (const auto& [tag, root] : options.inputs) {
      const fs::path src = DatasetLayout{root}.reports() / fig.source;
      if (!fs::exists(src)) {
        out.warnings.push_back("model " + tag + " has no " + fig.source);
        continue;
      }
      ++found;
      std::ifstream in(src);
      std::string line;
      if (!std::getline(in, line) || line != fig.header) fail_validation(src.string() + ": unexpected header");
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cols = split_csv(line);
        merged << tag << line.substr(cols[0].size()) << '\n';
        ++rows;
      }
    }
    if (found == 0) continue;
    const fs::path dst = options.output / fig.target;
    write_text(dst, merged.str(), config);
    json inputs = json::array();
    for (const auto& [tag, root] : options.inputs) inputs.push_back(tag);
    write_meta(dst, "report", config, "", {{"series", inputs}, {"rows", rows}});
    written.push_back(fig.target);
  }
  if (written.empty()) fail_io("report: no input root has cca or probe summaries");
  out.summary = base_summary("report", config);
  out.summary["outputs"] = written;
  out.summary["series"] = options.inputs.size();
  finish(out, "report");
  return out;
}

}  // namespace lprobe::cli
