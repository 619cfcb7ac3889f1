#include "cli.hpp"

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lol/atomic_file.hpp"
#include "lol/engine/decode.hpp"
#include "lol/engine/fusion_config.hpp"
#include "lol/error.hpp"
#include "lol/eval/harness.hpp"
#include "lol/eval/items.hpp"
#include "lol/eval/metrics.hpp"
#include "lol/providers/replay.hpp"
#include "lol/providers/toy_provider.hpp"
#include "lol/toymodel/checkpoint.hpp"
#include "lol/toymodel/corpus.hpp"
#include "lol/toymodel/trainer.hpp"

namespace lol::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Logging

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_st>(err);
  auto logger = std::make_shared<spdlog::logger>("lol", sink);
  logger->set_pattern("[%l] %v");
  logger->set_level(spdlog::level::info);
  if (const char* env = std::getenv("LOL_LOG_LEVEL")) {
    const std::string level = env;
    if (level == "error") {
      logger->set_level(spdlog::level::err);
    } else if (level == "warn") {
      logger->set_level(spdlog::level::warn);
    } else if (level == "info") {
      logger->set_level(spdlog::level::info);
    } else if (level == "debug") {
      logger->set_level(spdlog::level::debug);
    } else {
      logger->warn("ignoring unknown LOL_LOG_LEVEL '{}'", level);
    }
  }
  return logger;
}

// ---------------------------------------------------------------------------
// Shared option groups

struct FusionOptions {
  std::string config_path;
  std::vector<std::string> settings;
  std::string preset;
};

void add_fusion_options(CLI::App* cmd, FusionOptions& opts) {
  cmd->add_option("--config", opts.config_path, "Fusion config file (key = value lines)");
  cmd->add_option("--set", opts.settings, "Override one config key, KEY=VALUE (repeatable)")
      ->allow_extra_args(false);
  cmd->add_option("--preset", opts.preset, "greedy | icd | dola_like | lol");
}

struct ProviderOptions {
  std::string base;
  std::string amateur;
};

void add_provider_options(CLI::App* cmd, ProviderOptions& opts, bool amateur_required) {
  cmd->add_option("--base", opts.base, "Base model checkpoint or .lolr archive")->required();
  auto* amateur = cmd->add_option("--amateur", opts.amateur, "Amateur checkpoint or .lolr archive");
  if (amateur_required) amateur->required();
}

void require_input(const std::string& path, std::string_view what) {
  if (!fs::exists(path)) throw ValidationError(std::string(what) + " not found: " + path);
}

// Config precedence: defaults < --config file < --preset < --set.
engine::FusionConfig resolve_config(const FusionOptions& opts) {
  engine::FusionConfig config;
  if (!opts.config_path.empty()) {
    require_input(opts.config_path, "config");
    config = engine::load_fusion_config(opts.config_path);
  }
  if (!opts.preset.empty()) config.preset = engine::parse_preset(opts.preset);
  for (const auto& setting : opts.settings) {
    const auto eq = setting.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ValidationError("--set expects KEY=VALUE, got '" + setting + "'");
    }
    engine::apply_setting(config, setting.substr(0, eq), setting.substr(eq + 1));
  }
  return config;
}

bool is_replay_path(const std::string& path) { return fs::path(path).extension() == ".lolr"; }

// Providers plus the text codec matching their token space.
struct Models {
  providers::ProviderPtr base;
  providers::ProviderPtr amateur;
  std::shared_ptr<const eval::TextCodec> codec;
  std::optional<toymodel::Vocabulary> vocab;  // toy checkpoints only

  engine::ContrastSession session() const {
    return engine::ContrastSession(base, amateur, eval::instruction_encoder(codec));
  }
};

providers::ProviderPtr open_provider(const std::string& path, std::string_view role,
                                     std::optional<toymodel::Vocabulary>& vocab) {
  require_input(path, std::string(role) + " model");
  if (is_replay_path(path)) return providers::ReplayProvider::open(path);
  auto params = std::make_shared<const toymodel::ModelParams>(toymodel::load_checkpoint(path));
  if (vocab && !(*vocab == params->vocab)) {
    throw ValidationError(std::string(role) + " model vocabulary differs from the base vocabulary");
  }
  vocab = params->vocab;
  return std::make_shared<providers::ToyProvider>(params);
}

Models open_models(const ProviderOptions& opts) {
  Models models;
  if (!opts.amateur.empty() && is_replay_path(opts.base) != is_replay_path(opts.amateur)) {
    throw ValidationError("--base and --amateur must both be checkpoints or both be .lolr archives");
  }
  models.base = open_provider(opts.base, "base", models.vocab);
  if (!opts.amateur.empty()) models.amateur = open_provider(opts.amateur, "amateur", models.vocab);
  if (models.vocab) {
    models.codec = std::make_shared<eval::VocabularyCodec>(*models.vocab);
  } else {
    models.codec = std::make_shared<eval::NumericCodec>();
  }
  return models;
}

fs::path prepare_out_dir(const std::string& dir) {
  fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  return out;
}

std::string format_metric(const std::optional<double>& value) {
  if (!value) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *value);
  return buf;
}

std::string json_text(const ordered_json& j) { return j.dump(2) + "\n"; }

ordered_json report_json(const toymodel::TrainReport& report) {
  ordered_json j;
  j["epoch_loss"] = report.epoch_loss;
  j["initial_heldout_loss"] = report.initial_heldout_loss;
  j["final_heldout_loss"] = report.final_heldout_loss;
  j["steps"] = report.steps;
  return j;
}

void apply_epochs(toymodel::TrainHyper& hyper, const std::optional<int>& epochs) {
  if (!epochs) return;
  if (*epochs < 0) throw ValidationError("--epochs must be non-negative");
  hyper.epochs = *epochs;
}

// MC evaluation of one configuration; the report carries the fingerprint.
eval::MetricReport run_mc(const Models& models, const std::vector<eval::McItem>& items,
                          const engine::FusionConfig& config, eval::Mc2Mode mode) {
  auto session = models.session();
  engine::validate(config, session.n_layers());
  auto report = eval::evaluate_mc(items, eval::make_scorer(session, config, *models.codec), mode);
  report.fingerprint = eval::config_fingerprint(config, session);
  return report;
}

// ---------------------------------------------------------------------------
// Subcommands

struct TrainOptions {
  std::string corpus;
  std::uint64_t seed = 1;
  std::string out;
  std::optional<int> epochs;
};

int cmd_train(const TrainOptions& o, std::ostream& out, spdlog::logger& log) {
  if (!o.corpus.empty()) require_input(o.corpus, "corpus");
  const auto corpus = o.corpus.empty()
                          ? toymodel::make_synthetic_corpus({.seed = o.seed})
                          : toymodel::load_corpus(o.corpus);
  toymodel::TrainHyper hyper;
  apply_epochs(hyper, o.epochs);
  const auto dir = prepare_out_dir(o.out);

  log.info("training base model on {} facts for {} epochs", corpus.size(), hyper.epochs);
  auto result = toymodel::train_base(corpus, toymodel::ModelConfig{}, hyper, o.seed);
  const double accuracy =
      toymodel::object_accuracy(result.params, corpus.select(toymodel::Split::held_out));

  toymodel::save_corpus(corpus, dir / "corpus.jsonl");
  toymodel::save_checkpoint(result.params, dir / "base.ckpt");
  write_file_atomic(dir / "mc.jsonl",
                    eval::serialize_mc_dataset(eval::build_synthetic_mc(corpus, o.seed)));
  write_file_atomic(dir / "completion.jsonl", eval::serialize_completion_dataset(
                                                  eval::build_synthetic_completion(corpus, o.seed)));
  auto j = report_json(result.report);
  j["heldout_object_accuracy"] = accuracy;
  j["checksum"] = hex64(result.params.checksum());
  write_file_atomic(dir / "train_report.json", json_text(j));

  out << "trained base model: " << result.report.steps << " steps, held-out loss "
      << result.report.initial_heldout_loss << " -> " << result.report.final_heldout_loss
      << ", held-out object accuracy " << format_metric(accuracy) << "\n";
  return kExitOk;
}

struct CorruptOptions {
  std::string corpus;
  double fraction = 1.0;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_corrupt(const CorruptOptions& o, std::ostream& out, spdlog::logger&) {
  require_input(o.corpus, "corpus");
  const auto corpus = toymodel::load_corpus(o.corpus);
  const auto corrupted = toymodel::corrupt(corpus, o.fraction, o.seed);
  const auto dir = prepare_out_dir(o.out);
  toymodel::save_corpus(corrupted, dir / "corrupted.jsonl");
  std::size_t changed = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    changed += corpus.records[i] == corrupted.records[i] ? 0 : 1;
  }
  out << "corrupted " << changed << " of " << corpus.size() << " records\n";
  return kExitOk;
}

struct FinetuneOptions {
  std::string base;
  std::string corpus;
  std::string out;
  std::optional<int> epochs;
};

int cmd_finetune(const FinetuneOptions& o, std::ostream& out, spdlog::logger& log) {
  require_input(o.base, "base model");
  require_input(o.corpus, "corpus");
  const auto base = toymodel::load_checkpoint(o.base);
  const auto corpus = toymodel::load_corpus(o.corpus);
  auto hyper = toymodel::default_finetune_hyper();
  apply_epochs(hyper, o.epochs);
  const auto dir = prepare_out_dir(o.out);

  log.info("fine-tuning amateur on {} facts for {} epochs", corpus.size(), hyper.epochs);
  auto result = toymodel::finetune_amateur(base, corpus, hyper);
  toymodel::save_checkpoint(result.params, dir / "amateur.ckpt");
  auto j = report_json(result.report);
  j["checksum"] = hex64(result.params.checksum());
  write_file_atomic(dir / "finetune_report.json", json_text(j));
  out << "fine-tuned amateur: " << result.report.steps << " steps, held-out loss "
      << result.report.initial_heldout_loss << " -> " << result.report.final_heldout_loss << "\n";
  return kExitOk;
}

struct DumpOptions {
  std::string model;
  std::string prefixes;
  std::vector<int> layers;
  std::string out;
  std::string inspect;
};

int cmd_dump(const DumpOptions& o, std::ostream& out, spdlog::logger& log) {
  if (!o.inspect.empty()) {
    require_input(o.inspect, "archive");
    const auto archive = providers::ReplayArchive::load(o.inspect);
    const auto& h = archive.header();
    ordered_json j;
    j["version"] = h.version;
    j["vocab_size"] = h.vocab_size;
    j["n_layers"] = h.n_layers;
    j["layers"] = h.layers;
    j["source"] = h.source;
    j["count"] = h.count;
    out << j.dump() << "\n";
    for (const auto& record : archive.records()) out << format_tokens(record.prefix) << "\n";
    return kExitOk;
  }
  if (o.model.empty() || o.prefixes.empty() || o.out.empty()) {
    throw ValidationError("dump needs --model, --prefixes and --out (or --inspect ARCHIVE)");
  }
  require_input(o.prefixes, "prefixes file");
  std::optional<toymodel::Vocabulary> vocab;
  const auto provider = open_provider(o.model, "source", vocab);
  std::unique_ptr<eval::TextCodec> codec;
  if (vocab) {
    codec = std::make_unique<eval::VocabularyCodec>(*vocab);
  } else {
    codec = std::make_unique<eval::NumericCodec>();
  }

  std::vector<TokenSequence> prefixes;
  std::istringstream lines(read_file(o.prefixes));
  for (std::string line; std::getline(lines, line);) {
    if (split_words(line).empty()) continue;
    prefixes.push_back(codec->prompt(line));
  }
  if (prefixes.empty()) throw ValidationError("prefixes file has no prompts: " + o.prefixes);

  const fs::path sink(o.out);
  if (sink.has_parent_path()) prepare_out_dir(sink.parent_path().string());
  const auto summary = providers::dump_replay(*provider, prefixes, o.layers, sink);
  log.info("wrote {}", sink.string());
  out << "dumped " << summary.records << " records (" << summary.duplicates_dropped
      << " duplicates dropped) at layers";
  for (auto layer : summary.header.layers) out << " " << layer;
  out << "\n";
  return kExitOk;
}

struct GenerateOptions {
  ProviderOptions models;
  FusionOptions fusion;
  std::string prompt;
  std::size_t max_new_tokens = 4;
};

int cmd_generate(const GenerateOptions& o, std::ostream& out, spdlog::logger&) {
  const auto config = resolve_config(o.fusion);
  const auto models = open_models(o.models);
  auto session = models.session();
  engine::validate(config, session.n_layers());
  const auto prompt = models.codec->prompt(o.prompt);
  std::vector<TokenId> stops;
  if (models.vocab) stops.push_back(toymodel::Vocabulary::kEnd);

  const auto tokens = engine::greedy_generate(session, prompt, config, o.max_new_tokens, stops);
  const TokenSequence generated(tokens.begin() + static_cast<std::ptrdiff_t>(prompt.size()),
                                tokens.end());
  out << (models.vocab ? models.vocab->decode(generated) : format_tokens(generated)) << "\n";
  return kExitOk;
}

struct EvalOptions {
  ProviderOptions models;
  FusionOptions fusion;
  std::string dataset;
  std::string out;
  std::string mc2_mode = "mass";
};

void write_report(const fs::path& dir, std::string_view stem, const eval::MetricReport& report,
                  const engine::FusionConfig& config) {
  write_file_atomic(dir / (std::string(stem) + "_report.csv"), eval::report_csv(report));
  write_file_atomic(dir / (std::string(stem) + "_summary.json"),
                    eval::report_summary_json(report, {{"preset", std::string(to_string(config.preset))},
                                                       {"config", engine::to_config_text(config)}}));
}

int cmd_eval_mc(const EvalOptions& o, std::ostream& out, spdlog::logger& log) {
  require_input(o.dataset, "dataset");
  const auto config = resolve_config(o.fusion);
  const auto models = open_models(o.models);
  const auto items = eval::load_mc_dataset(o.dataset);
  const auto mode = o.mc2_mode == "boolean" ? eval::Mc2Mode::boolean : eval::Mc2Mode::mass;
  const auto dir = prepare_out_dir(o.out);

  log.info("scoring {} items with preset {}", items.size(), to_string(config.preset));
  const auto report = run_mc(models, items, config, mode);
  write_report(dir, "mc", report, config);
  out << "preset " << to_string(config.preset) << ": mc1 " << format_metric(report.mc1) << " mc2 "
      << format_metric(report.mc2) << " mc3 " << format_metric(report.mc3) << " (n=" << report.n_items
      << ")\n";
  return kExitOk;
}

int cmd_eval_completion(const EvalOptions& o, std::ostream& out, spdlog::logger& log) {
  require_input(o.dataset, "dataset");
  const auto config = resolve_config(o.fusion);
  const auto models = open_models(o.models);
  const auto items = eval::load_completion_dataset(o.dataset);
  const auto dir = prepare_out_dir(o.out);

  log.info("scoring {} completion items with preset {}", items.size(), to_string(config.preset));
  auto session = models.session();
  engine::validate(config, session.n_layers());
  auto report =
      eval::evaluate_completion(items, eval::make_scorer(session, config, *models.codec));
  report.fingerprint = eval::config_fingerprint(config, session);
  write_report(dir, "completion", report, config);
  out << "preset " << to_string(config.preset) << ": accuracy " << format_metric(report.accuracy)
      << " (n=" << report.n_items << ")\n";
  return kExitOk;
}

struct SweepOptions {
  ProviderOptions models;
  FusionOptions fusion;
  std::string dataset;
  std::string out;
  std::vector<int> layers;
  std::vector<double> omega_primes{0.1, 0.3, 0.5, 0.7, 1.0};
};

int cmd_sweep(const SweepOptions& o, bool layer_sweep, std::ostream& out, spdlog::logger& log) {
  require_input(o.dataset, "dataset");
  const auto config = resolve_config(o.fusion);
  const auto models = open_models(o.models);
  const auto items = eval::load_mc_dataset(o.dataset);
  const auto dir = prepare_out_dir(o.out);
  auto session = models.session();

  std::string csv;
  std::string stem;
  if (layer_sweep) {
    std::vector<LayerIndex> layers = o.layers;
    if (layers.empty()) {
      for (int l = 1; l <= session.n_layers(); ++l) layers.push_back(l);
    }
    log.info("layer sweep over {} layers, {} items", layers.size(), items.size());
    csv = eval::sweep_csv(eval::sweep_layers(session, items, config, layers, *models.codec), "L");
    stem = "sweep_layer";
  } else {
    log.info("omega_prime sweep over {} values, {} items", o.omega_primes.size(), items.size());
    csv = eval::sweep_csv(
        eval::sweep_omega_prime(session, items, config, o.omega_primes, *models.codec), "omega_prime");
    stem = "sweep_omega";
  }
  write_file_atomic(dir / (stem + ".csv"), csv);
  write_file_atomic(dir / (stem + "_config.txt"), engine::to_config_text(config));
  out << csv;
  return kExitOk;
}

struct DemoOptions {
  FusionOptions fusion;
  std::uint64_t seed = 1;
  std::string out;
  std::optional<int> epochs;
  std::optional<int> amateur_epochs;
  double fraction = 1.0;
};

int cmd_demo(const DemoOptions& o, std::ostream& out, spdlog::logger& log) {
  const auto base_config = resolve_config(o.fusion);
  const auto dir = prepare_out_dir(o.out);

  const auto corpus = toymodel::make_synthetic_corpus({.seed = o.seed});
  toymodel::TrainHyper base_hyper;
  apply_epochs(base_hyper, o.epochs);
  log.info("training base model on {} facts for {} epochs", corpus.size(), base_hyper.epochs);
  auto base = toymodel::train_base(corpus, toymodel::ModelConfig{}, base_hyper, o.seed);

  const auto corrupted = toymodel::corrupt(corpus, o.fraction, o.seed + 1);
  auto ft_hyper = toymodel::default_finetune_hyper();
  apply_epochs(ft_hyper, o.amateur_epochs);
  log.info("fine-tuning amateur on corrupted facts for {} epochs", ft_hyper.epochs);
  auto amateur = toymodel::finetune_amateur(base.params, corrupted, ft_hyper);

  const auto items = eval::build_synthetic_mc(corpus, o.seed + 2);
  toymodel::save_corpus(corpus, dir / "corpus.jsonl");
  toymodel::save_corpus(corrupted, dir / "corrupted.jsonl");
  toymodel::save_checkpoint(base.params, dir / "base.ckpt");
  toymodel::save_checkpoint(amateur.params, dir / "amateur.ckpt");
  write_file_atomic(dir / "mc.jsonl", eval::serialize_mc_dataset(items));

  Models models;
  models.base = std::make_shared<providers::ToyProvider>(
      std::make_shared<const toymodel::ModelParams>(base.params));
  models.amateur = std::make_shared<providers::ToyProvider>(
      std::make_shared<const toymodel::ModelParams>(amateur.params));
  models.codec = std::make_shared<eval::VocabularyCodec>(base.params.vocab);
  Models amateur_only{models.amateur, nullptr, models.codec, std::nullopt};

  struct Row {
    std::string system;
    eval::MetricReport report;
  };
  std::vector<Row> rows;
  auto greedy = base_config;
  greedy.preset = engine::Preset::greedy;
  log.info("scoring {} items", items.size());
  rows.push_back({"amateur_greedy", run_mc(amateur_only, items, greedy, eval::Mc2Mode::mass)});
  for (auto preset : {engine::Preset::greedy, engine::Preset::icd, engine::Preset::lol}) {
    auto config = base_config;
    config.preset = preset;
    rows.push_back({std::string(to_string(preset)), run_mc(models, items, config, eval::Mc2Mode::mass)});
  }

  std::string csv = "system,mc1,mc2,mc3\n";
  for (const auto& row : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%s,%.12g,%.12g,%.12g\n", row.system.c_str(), *row.report.mc1,
                  *row.report.mc2, *row.report.mc3);
    csv += line;
  }
  write_file_atomic(dir / "demo_report.csv", csv);
  ordered_json summary;
  summary["seed"] = o.seed;
  summary["facts"] = corpus.size();
  summary["mc_items"] = items.size();
  summary["base_train"] = report_json(base.report);
  summary["amateur_train"] = report_json(amateur.report);
  summary["base_checksum"] = hex64(base.params.checksum());
  summary["amateur_checksum"] = hex64(amateur.params.checksum());
  summary["config"] = engine::to_config_text(base_config);
  write_file_atomic(dir / "demo_summary.json", json_text(summary));

  out << "system            mc1     mc2     mc3\n";
  for (const auto& row : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%-16s  %s  %s  %s\n", row.system.c_str(),
                  format_metric(row.report.mc1).c_str(), format_metric(row.report.mc2).c_str(),
                  format_metric(row.report.mc3).c_str());
    out << line;
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Layer-fused contrastive decoding toolkit", "lol"};
  app.require_subcommand(1);

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a base toy model on a fact corpus");
  train_cmd->add_option("--corpus", train.corpus, "Corpus JSON-lines (default: synthetic)");
  train_cmd->add_option("--seed", train.seed, "Seed for corpus, datasets and initialization");
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train_cmd->add_option("--epochs", train.epochs, "Training epochs");

  CorruptOptions corrupt;
  auto* corrupt_cmd = app.add_subcommand("corrupt", "Swap fact objects to build a hallucination corpus");
  corrupt_cmd->add_option("--corpus", corrupt.corpus, "Corpus JSON-lines")->required();
  corrupt_cmd->add_option("--fraction", corrupt.fraction, "Fraction of records to corrupt");
  corrupt_cmd->add_option("--seed", corrupt.seed, "Corruption seed");
  corrupt_cmd->add_option("--out", corrupt.out, "Output directory")->required();

  FinetuneOptions finetune;
  auto* finetune_cmd = app.add_subcommand("finetune", "Fine-tune the amateur model from a base checkpoint");
  finetune_cmd->add_option("--base", finetune.base, "Base checkpoint")->required();
  finetune_cmd->add_option("--corpus", finetune.corpus, "Corrupted corpus JSON-lines")->required();
  finetune_cmd->add_option("--out", finetune.out, "Output directory")->required();
  finetune_cmd->add_option("--epochs", finetune.epochs, "Fine-tune epochs");

  DumpOptions dump;
  auto* dump_cmd = app.add_subcommand("dump", "Write or inspect a .lolr replay archive");
  dump_cmd->add_option("--model", dump.model, "Checkpoint or .lolr archive to query");
  dump_cmd->add_option("--prefixes", dump.prefixes, "One prompt per line");
  dump_cmd->add_option("--layers", dump.layers, "Layers to dump, comma separated")->delimiter(',');
  dump_cmd->add_option("--out", dump.out, "Archive path");
  dump_cmd->add_option("--inspect", dump.inspect, "Print an archive's header and prefixes");

  GenerateOptions generate;
  auto* generate_cmd = app.add_subcommand("generate", "Greedy generation under a decoding preset");
  add_provider_options(generate_cmd, generate.models, false);
  add_fusion_options(generate_cmd, generate.fusion);
  generate_cmd->add_option("--prompt", generate.prompt, "Prompt text")->required();
  generate_cmd->add_option("--max-new-tokens", generate.max_new_tokens, "Generation budget");

  EvalOptions eval_mc;
  auto* eval_mc_cmd = app.add_subcommand("eval-mc", "MC1/MC2/MC3 on a multiple-choice dataset");
  add_provider_options(eval_mc_cmd, eval_mc.models, false);
  add_fusion_options(eval_mc_cmd, eval_mc.fusion);
  eval_mc_cmd->add_option("--dataset", eval_mc.dataset, "MC JSON-lines")->required();
  eval_mc_cmd->add_option("--out", eval_mc.out, "Output directory")->required();
  eval_mc_cmd->add_option("--mc2-mode", eval_mc.mc2_mode, "mass | boolean")
      ->check(CLI::IsMember({"mass", "boolean"}));

  EvalOptions eval_completion;
  auto* eval_completion_cmd =
      app.add_subcommand("eval-completion", "Completion accuracy on a completion dataset");
  add_provider_options(eval_completion_cmd, eval_completion.models, false);
  add_fusion_options(eval_completion_cmd, eval_completion.fusion);
  eval_completion_cmd->add_option("--dataset", eval_completion.dataset, "Completion JSON-lines")
      ->required();
  eval_completion_cmd->add_option("--out", eval_completion.out, "Output directory")->required();

  SweepOptions sweep_layer;
  auto* sweep_layer_cmd = app.add_subcommand("sweep-layer", "MC metrics per exit layer");
  add_provider_options(sweep_layer_cmd, sweep_layer.models, true);
  add_fusion_options(sweep_layer_cmd, sweep_layer.fusion);
  sweep_layer_cmd->add_option("--dataset", sweep_layer.dataset, "MC JSON-lines")->required();
  sweep_layer_cmd->add_option("--out", sweep_layer.out, "Output directory")->required();
  sweep_layer_cmd->add_option("--layers", sweep_layer.layers, "Exit layers, comma separated")
      ->delimiter(',');

  SweepOptions sweep_omega;
  auto* sweep_omega_cmd = app.add_subcommand("sweep-omega", "MC metrics per refocus weight");
  add_provider_options(sweep_omega_cmd, sweep_omega.models, true);
  add_fusion_options(sweep_omega_cmd, sweep_omega.fusion);
  sweep_omega_cmd->add_option("--dataset", sweep_omega.dataset, "MC JSON-lines")->required();
  sweep_omega_cmd->add_option("--out", sweep_omega.out, "Output directory")->required();
  sweep_omega_cmd
      ->add_option("--omega-prime-values", sweep_omega.omega_primes, "Refocus weights, comma separated")
      ->delimiter(',');

  DemoOptions demo;
  auto* demo_cmd = app.add_subcommand("demo", "Train, corrupt, fine-tune and compare presets");
  add_fusion_options(demo_cmd, demo.fusion);
  demo_cmd->add_option("--seed", demo.seed, "Seed for the whole pipeline");
  demo_cmd->add_option("--out", demo.out, "Output directory")->required();
  demo_cmd->add_option("--epochs", demo.epochs, "Base training epochs");
  demo_cmd->add_option("--amateur-epochs", demo.amateur_epochs, "Amateur fine-tune epochs");
  demo_cmd->add_option("--fraction", demo.fraction, "Fraction of facts to corrupt");

  // CLI11 consumes arguments from the back of the vector.
  std::vector<std::string> rest(args.empty() ? args.end() : args.begin() + 1, args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error[usage]: " << e.what() << "\n";
    return kExitUsage;
  }

  auto logger = make_logger(err);
  try {
    if (*train_cmd) return cmd_train(train, out, *logger);
    if (*corrupt_cmd) return cmd_corrupt(corrupt, out, *logger);
    if (*finetune_cmd) return cmd_finetune(finetune, out, *logger);
    if (*dump_cmd) return cmd_dump(dump, out, *logger);
    if (*generate_cmd) return cmd_generate(generate, out, *logger);
    if (*eval_mc_cmd) return cmd_eval_mc(eval_mc, out, *logger);
    if (*eval_completion_cmd) return cmd_eval_completion(eval_completion, out, *logger);
    if (*sweep_layer_cmd) return cmd_sweep(sweep_layer, true, out, *logger);
    if (*sweep_omega_cmd) return cmd_sweep(sweep_omega, false, out, *logger);
    if (*demo_cmd) return cmd_demo(demo, out, *logger);
  } catch (const Error& e) {
    err << "error[" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return e.is_validation() ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error[runtime]: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace lol::cli
