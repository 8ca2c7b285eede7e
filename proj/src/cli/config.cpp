#include "lprobe/cli/config.hpp"

#include <fstream>
#include <set>

#include "lprobe/error.hpp"
#include "lprobe/rng.hpp"

namespace lprobe::cli {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) fail_validation("config: '" + where + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.contains(k)) fail_validation("config: unknown key '" + k + "' in " + where);
  }
}

template <class T>
void get(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail_validation("config: bad value for " + where + "." + key + ": " + e.what());
  }
}

ProsodyTarget parse_target(const std::string& s) {
  if (s == "prominence") return ProsodyTarget::Prominence;
  if (s == "boundary") return ProsodyTarget::Boundary;
  fail_validation("config: unknown probe target '" + s + "'");
}

}  // namespace

void RunConfig::derive_stage_settings() {
  sampling.seed = derive_seed(seed, "sampling");
  cca.seed = derive_seed(seed, "cca");
  embed.seed = derive_seed(seed, "embed");
  perturb.seed = derive_seed(seed, "perturb");
  embed.jobs = jobs;
}

void RunConfig::validate() const {
  if (jobs == 0) fail_validation("config: jobs must be >= 1");
  sampling.validate();
  if (cca.folds < 2 || cca.eval_folds == 0 || cca.eval_folds > cca.folds) {
    fail_validation("config: need cca.folds >= 2 and 1 <= cca.eval_folds <= cca.folds");
  }
  if (!(cca.cca.ridge_eps >= 0.0) || !(cca.cca.rank_tol > 0.0)) {
    fail_validation("config: cca.ridge_eps must be >= 0 and cca.rank_tol > 0");
  }
  if (probe.folds < 2) fail_validation("config: probe.folds must be >= 2");
  if (probe.lambda && !(*probe.lambda > 0.0)) fail_validation("config: probe.lambda must be positive");
  if (probe.targets.empty()) fail_validation("config: probe.targets is empty");
  prosody.validate();
  perturb.validate();
  std::set<std::string> seen;
  for (const auto& a : accents) {
    if (!seen.insert(a).second) fail_validation("config: duplicate accent '" + a + "'");
  }
}

json RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["accents"] = accents;
  if (model_tag) j["model_tag"] = *model_tag;
  j["sampling"] = {{"per_phoneme_per_speaker", sampling.per_phoneme_per_speaker},
                   {"min_frames", sampling.min_frames}};
  j["cca"] = {{"folds", cca.folds},
              {"eval_folds", cca.eval_folds},
              {"ridge_eps", cca.cca.ridge_eps},
              {"rank_tol", cca.cca.rank_tol},
              {"stratify_by_label", cca.stratify_by_label}};
  json targets = json::array();
  for (auto t : probe.targets) targets.push_back(std::string(target_name(t)));
  j["probe"] = {{"folds", probe.folds},
                {"lambda", probe.lambda ? json(*probe.lambda) : json(nullptr)},
                {"speaker_folds", probe.speaker_folds},
                {"targets", targets}};
  j["prosody"] = {{"weights", prosody.weights},
                  {"scales_s", prosody.scales_s},
                  {"prominence_band_s", prosody.prominence_band_s},
                  {"boundary_band_s", prosody.boundary_band_s}};
  j["embed"] = {{"perplexity", embed.perplexity},
                {"iterations", embed.iterations},
                {"early_exaggeration", embed.early_exaggeration},
                {"exaggeration_iterations", embed.exaggeration_iterations},
                {"learning_rate", embed.learning_rate}};
  j["perturb"] = {{"beta_low", perturb.beta_low},         {"beta_high", perturb.beta_high},
                  {"flip_prob", perturb.flip_prob},       {"apply_threshold", perturb.apply_threshold},
                  {"eq_bands", perturb.eq_bands},         {"eq_gain_db", perturb.eq_gain_db},
                  {"eq_min_hz", perturb.eq_min_hz},       {"eq_max_hz", perturb.eq_max_hz}};
  return j;
}

RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, {"dataset_root", "accents", "model_tag", "seed", "jobs", "no_overwrite", "sampling", "cca",
                 "probe", "prosody", "embed", "perturb"},
             "config");
  RunConfig c;
  std::string root;
  get(j, "dataset_root", root, "config");
  if (!root.empty()) {
    std::filesystem::path p(root);
    c.dataset_root = p.is_absolute() ? p : base_dir / p;
  }
  get(j, "accents", c.accents, "config");
  if (j.contains("model_tag")) {
    std::string tag;
    get(j, "model_tag", tag, "config");
    c.model_tag = tag;
  }
  get(j, "seed", c.seed, "config");
  get(j, "jobs", c.jobs, "config");
  get(j, "no_overwrite", c.no_overwrite, "config");
  if (j.contains("sampling")) {
    const auto& s = j["sampling"];
    check_keys(s, {"per_phoneme_per_speaker", "min_frames"}, "sampling");
    get(s, "per_phoneme_per_speaker", c.sampling.per_phoneme_per_speaker, "sampling");
    get(s, "min_frames", c.sampling.min_frames, "sampling");
  }
  if (j.contains("cca")) {
    const auto& s = j["cca"];
    check_keys(s, {"folds", "eval_folds", "ridge_eps", "rank_tol", "stratify_by_label"}, "cca");
    get(s, "folds", c.cca.folds, "cca");
    get(s, "eval_folds", c.cca.eval_folds, "cca");
    get(s, "ridge_eps", c.cca.cca.ridge_eps, "cca");
    get(s, "rank_tol", c.cca.cca.rank_tol, "cca");
    get(s, "stratify_by_label", c.cca.stratify_by_label, "cca");
  }
  if (j.contains("probe")) {
    const auto& s = j["probe"];
    check_keys(s, {"folds", "lambda", "speaker_folds", "targets"}, "probe");
    get(s, "folds", c.probe.folds, "probe");
    if (s.contains("lambda") && !s["lambda"].is_null()) {
      double l = 0.0;
      get(s, "lambda", l, "probe");
      c.probe.lambda = l;
    }
    get(s, "speaker_folds", c.probe.speaker_folds, "probe");
    if (s.contains("targets")) {
      std::vector<std::string> names;
      get(s, "targets", names, "probe");
      c.probe.targets.clear();
      for (const auto& n : names) c.probe.targets.push_back(parse_target(n));
    }
  }
  if (j.contains("prosody")) {
    const auto& s = j["prosody"];
    check_keys(s, {"weights", "scales_s", "prominence_band_s", "boundary_band_s"}, "prosody");
    get(s, "weights", c.prosody.weights, "prosody");
    get(s, "scales_s", c.prosody.scales_s, "prosody");
    get(s, "prominence_band_s", c.prosody.prominence_band_s, "prosody");
    get(s, "boundary_band_s", c.prosody.boundary_band_s, "prosody");
  }
  if (j.contains("embed")) {
    const auto& s = j["embed"];
    check_keys(s, {"perplexity", "iterations", "early_exaggeration", "exaggeration_iterations", "learning_rate"},
               "embed");
    get(s, "perplexity", c.embed.perplexity, "embed");
    get(s, "iterations", c.embed.iterations, "embed");
    get(s, "early_exaggeration", c.embed.early_exaggeration, "embed");
    get(s, "exaggeration_iterations", c.embed.exaggeration_iterations, "embed");
    get(s, "learning_rate", c.embed.learning_rate, "embed");
  }
  if (j.contains("perturb")) {
    const auto& s = j["perturb"];
    check_keys(s, {"beta_low", "beta_high", "flip_prob", "apply_threshold", "eq_bands", "eq_gain_db", "eq_min_hz",
                   "eq_max_hz"},
               "perturb");
    get(s, "beta_low", c.perturb.beta_low, "perturb");
    get(s, "beta_high", c.perturb.beta_high, "perturb");
    get(s, "flip_prob", c.perturb.flip_prob, "perturb");
    get(s, "apply_threshold", c.perturb.apply_threshold, "perturb");
    get(s, "eq_bands", c.perturb.eq_bands, "perturb");
    get(s, "eq_gain_db", c.perturb.eq_gain_db, "perturb");
    get(s, "eq_min_hz", c.perturb.eq_min_hz, "perturb");
    get(s, "eq_max_hz", c.perturb.eq_max_hz, "perturb");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_io("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    fail_validation("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

}  // namespace lprobe::cli
