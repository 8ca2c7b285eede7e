#pragma once

// Pipeline subcommands over a dataset root:
//
//   <root>/manifest.json
//   <root>/feats/ align/ tracks/          inputs named by the manifest
//   <root>/labels/word_prosody.tsv        prosody-label output (or import)
//   <root>/tables/phone_L007.csv ...      pool output, one per tier and layer
//   <root>/reports/*.csv + *.meta.json    cca / probe / embed / prosody reports
//
// Each command returns a machine-readable summary; the CLI prints it.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lprobe/cli/config.hpp"

namespace lprobe::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct DatasetLayout {
  std::filesystem::path root;

  std::filesystem::path manifest() const { return root / "manifest.json"; }
  std::filesystem::path tables() const { return root / "tables"; }
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path labels() const { return root / "labels" / "word_prosody.tsv"; }
  std::filesystem::path table(Tier tier, std::uint32_t layer) const;
};

struct CommandOutput {
  nlohmann::json summary;
  std::vector<std::string> warnings;
};

CommandOutput cmd_pool(const RunConfig& config);
CommandOutput cmd_cca(const RunConfig& config);
CommandOutput cmd_probe(const RunConfig& config);

struct ProsodyLabelOptions {
  std::optional<std::filesystem::path> import_path;   // use external labels instead of computing
  std::optional<std::filesystem::path> compare_path;  // external labels to rank-correlate against
};
CommandOutput cmd_prosody_label(const RunConfig& config, const ProsodyLabelOptions& options = {});

struct PerturbOptions {
  std::filesystem::path input;   // a .wav file or a directory of them
  std::filesystem::path output;  // directory
};
CommandOutput cmd_perturb(const RunConfig& config, const PerturbOptions& options);

struct EmbedOptions {
  std::string phoneme;
  std::uint32_t layer = 0;
  std::optional<std::string> model_tag;
};
CommandOutput cmd_embed(const RunConfig& config, const EmbedOptions& options);

struct ReportOptions {
  std::vector<std::pair<std::string, std::filesystem::path>> inputs;  // (model tag, dataset root)
  std::filesystem::path output;
};
CommandOutput cmd_report(const RunConfig& config, const ReportOptions& options);

/// Writes `<stem>.meta.json` next to `csv`: command, version, model tag,
/// effective config and any extra fields. No timestamps or absolute paths.
void write_meta(const std::filesystem::path& csv, const std::string& command, const RunConfig& config,
                const std::string& model_tag, const nlohmann::json& extra);

}  // namespace lprobe::cli
