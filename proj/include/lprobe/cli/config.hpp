#pragma once

// Run configuration for the lprobe command line: one JSON file, overridable
// by flags. Stage seeds are derived from the global seed with
// derive_seed(seed, "<stage>") for stages "sampling", "cca", "embed" and
// "perturb".

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lprobe/cca.hpp"
#include "lprobe/embed.hpp"
#include "lprobe/perturb.hpp"
#include "lprobe/pooling.hpp"
#include "lprobe/probes.hpp"
#include "lprobe/prosody.hpp"

namespace lprobe::cli {

struct ProbeSettings {
  std::uint32_t folds = 4;
  std::optional<double> lambda;  // nullopt: default_ridge_lambda per fit
  std::map<std::string, std::uint32_t> speaker_folds;  // empty: auto_assign_folds
  std::vector<ProsodyTarget> targets{ProsodyTarget::Prominence, ProsodyTarget::Boundary};
};

struct RunConfig {
  std::filesystem::path dataset_root = ".";
  std::vector<std::string> accents;  // empty: the manifest's accent list
  std::optional<std::string> model_tag;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  bool no_overwrite = false;

  SamplingPolicy sampling;
  CcaProtocolOptions cca;
  ProbeSettings probe;
  ProsodyConfig prosody;
  EmbedConfig embed;
  PerturbConfig perturb;

  /// Copies the global seed / jobs into every stage.
  void derive_stage_settings();
  void validate() const;

  /// Effective settings, excluding dataset_root, jobs and no_overwrite so the
  /// echo is identical across checkouts and worker counts.
  nlohmann::json to_json() const;
};

/// Unknown keys are rejected. Relative dataset_root resolves against the
/// config file's directory.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

}  // namespace lprobe::cli
