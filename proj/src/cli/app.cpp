#include "lprobe/cli/app.hpp"

#include <CLI11.hpp>
#include <iostream>

#include "lprobe/cli/commands.hpp"
#include "lprobe/error.hpp"

namespace lprobe::cli {

namespace {

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Validation: return 2;
    case ErrorKind::Io: return 3;
    case ErrorKind::Numerical: return 4;
  }
  return 4;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out) {
  CLI::App app{"Layer-wise probing of speech representations", "lprobe"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string config_path, root;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  bool no_overwrite = false;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--root", root, "dataset root (overrides config)");
  app.add_option("--seed", seed, "global seed (overrides config)");
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--no-overwrite", no_overwrite, "refuse to replace existing outputs");

  auto* pool = app.add_subcommand("pool", "pool phone and word segments into per-layer tables");
  auto* cca = app.add_subcommand("cca", "PWCCA scores against phoneme labels, per layer and accent");
  auto* probe = app.add_subcommand("probe", "ridge prosody probes with speaker-grouped CV");

  auto* prosody = app.add_subcommand("prosody-label", "word prominence and boundary labels");
  ProsodyLabelOptions prosody_opts;
  std::string import_path, compare_path;
  prosody->add_option("--import", import_path, "use an external label TSV instead")->check(CLI::ExistingFile);
  prosody->add_option("--compare", compare_path, "external label TSV to rank-correlate with")
      ->check(CLI::ExistingFile);

  auto* perturb = app.add_subcommand("perturb", "random speaker-voice perturbation of .wav files");
  PerturbOptions perturb_opts;
  std::optional<double> beta_low, beta_high, flip_prob, apply_threshold, eq_gain;
  std::optional<std::uint32_t> eq_bands;
  perturb->add_option("--input", perturb_opts.input, "a .wav file or directory")->required();
  perturb->add_option("--output", perturb_opts.output, "output directory")->required();
  perturb->add_option("--beta-low", beta_low);
  perturb->add_option("--beta-high", beta_high);
  perturb->add_option("--flip-prob", flip_prob);
  perturb->add_option("--apply-threshold", apply_threshold);
  perturb->add_option("--eq-bands", eq_bands);
  perturb->add_option("--eq-gain-db", eq_gain);

  auto* embed = app.add_subcommand("embed", "t-SNE of one phoneme's pooled vectors at one layer");
  EmbedOptions embed_opts;
  std::string embed_tag;
  embed->add_option("--phoneme", embed_opts.phoneme)->required();
  embed->add_option("--layer", embed_opts.layer, "0-based layer index")->required();
  embed->add_option("--model-tag", embed_tag);

  auto* report = app.add_subcommand("report", "merge layer summaries of several model roots, one series per tag");
  std::vector<std::string> report_inputs;
  ReportOptions report_opts;
  report->add_option("inputs", report_inputs, "TAG=ROOT pairs")->required();
  report->add_option("--out", report_opts.output, "output directory")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, std::cerr);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (!root.empty()) config.dataset_root = root;
    if (seed) config.seed = *seed;
    if (jobs) config.jobs = *jobs;
    if (no_overwrite) config.no_overwrite = true;
    if (beta_low) config.perturb.beta_low = *beta_low;
    if (beta_high) config.perturb.beta_high = *beta_high;
    if (flip_prob) config.perturb.flip_prob = *flip_prob;
    if (apply_threshold) config.perturb.apply_threshold = *apply_threshold;
    if (eq_bands) config.perturb.eq_bands = *eq_bands;
    if (eq_gain) config.perturb.eq_gain_db = *eq_gain;
    config.derive_stage_settings();

    CommandOutput result;
    if (*pool) {
      result = cmd_pool(config);
    } else if (*cca) {
      result = cmd_cca(config);
    } else if (*probe) {
      result = cmd_probe(config);
    } else if (*prosody) {
      if (!import_path.empty()) prosody_opts.import_path = import_path;
      if (!compare_path.empty()) prosody_opts.compare_path = compare_path;
      result = cmd_prosody_label(config, prosody_opts);
    } else if (*perturb) {
      result = cmd_perturb(config, perturb_opts);
    } else if (*embed) {
      if (!embed_tag.empty()) embed_opts.model_tag = embed_tag;
      result = cmd_embed(config, embed_opts);
    } else if (*report) {
      for (const auto& s : report_inputs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) fail_validation("report input '" + s + "' is not TAG=ROOT");
        report_opts.inputs.emplace_back(s.substr(0, eq), s.substr(eq + 1));
      }
      result = cmd_report(config, report_opts);
    }
    out << result.summary.dump() << std::endl;
    return 0;
  } catch (const Error& e) {
    std::cerr << "lprobe: error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "lprobe: error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "lprobe: error: " << e.what() << '\n';
    return 4;
  }
}

}  // namespace lprobe::cli
