#include "nertag/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "nertag/conll_io.hpp"
#include "nertag/errors.hpp"
#include "nertag/metrics.hpp"
#include "nertag/training.hpp"

namespace nertag::cli {
namespace {

struct FormatOptions {
  std::size_t token_col = 0;
  int tag_col = -1;
  std::string types = "PER,LOC,GRP,CORP,PROD,CW";
};

struct Options {
  FormatOptions format;
  std::string config;

  // train
  std::string train_file;
  std::string dev_file;
  std::string embeddings;
  std::string checkpoint;
  std::string log_file;
  train::TrainConfig train;
  std::string arch = "crf";

  // predict
  std::string input;
  std::string output = "-";
  bool constrained = false;
  CLI::Option* constrained_opt = nullptr;
  std::string repair = "convert";
  CLI::Option* repair_opt = nullptr;

  // evaluate / inspect
  std::string gold;
  std::string pred;
  std::string report_format = "text";
};

void require_file(const std::string& path, const char* what) {
  if (!std::filesystem::is_regular_file(path)) {
    throw ParseError(fmt::format("{} '{}' does not exist", what, path));
  }
}

TagVocabulary vocabulary(const FormatOptions& format) {
  return TagVocabulary(EntityTypeSet::FromCsv(format.types));
}

ParseOptions parse_options(const FormatOptions& format, bool has_labels) {
  ParseOptions options;
  options.token_column = format.token_col;
  options.tag_column = format.tag_col;
  options.has_labels = has_labels;
  return options;
}

void print_report(const metrics::MetricsReport& report, const std::string& format, std::ostream& out) {
  if (format == "kv") {
    metrics::write_report_kv(report, out);
  } else {
    metrics::write_report_text(report, out);
  }
}

void add_format_options(CLI::App* cmd, Options& o, bool with_tags) {
  cmd->add_option("--config", o.config, "Flat key=value config file; command-line flags win");
  cmd->add_option("--token-col", o.format.token_col, "Zero-based token column")
      ->capture_default_str();
  if (with_tags) {
    cmd->add_option("--tag-col", o.format.tag_col, "Tag column; negative counts from the end")
        ->capture_default_str();
  }
  cmd->add_option("--types", o.format.types, "Comma-separated entity types (label space)")
      ->capture_default_str();
}

int cmd_train(Options& o, std::ostream& out, std::ostream& err) {
  require_file(o.train_file, "training file");
  require_file(o.dev_file, "dev file");
  if (!o.embeddings.empty()) require_file(o.embeddings, "embedding file");
  o.train.arch = train::parse_architecture(o.arch);
  o.train.validate();

  const TagVocabulary tags = vocabulary(o.format);
  const Corpus train_corpus = read_conll_file(o.train_file, tags, parse_options(o.format, true));
  const Corpus dev_corpus = read_conll_file(o.dev_file, tags, parse_options(o.format, true));
  std::optional<EmbeddingSet> embeddings;
  if (!o.embeddings.empty()) {
    embeddings = load_embeddings_file(o.embeddings, {&train_corpus, &dev_corpus});
  }

  const std::string log_path = o.log_file.empty() ? o.checkpoint + ".log" : o.log_file;
  std::ofstream log(log_path);
  if (!log) throw ParseError(fmt::format("cannot write training log '{}'", log_path));
  const EmbeddingSet* ingested = embeddings ? &*embeddings : nullptr;
  const auto result = train::train(train_corpus, dev_corpus, o.train, ingested, &log);
  train::save_checkpoint(result.checkpoint, o.checkpoint);

  const train::Tagger tagger = result.checkpoint.tagger();
  const auto predictions = train::predict_corpus(tagger, dev_corpus, ingested,
                                                 train::default_decode(o.train.arch));
  const auto report = metrics::score(dev_corpus, predictions);
  err << fmt::format("best dev epoch {} (macro F1 {:.4f}); checkpoint written to {}\n",
                     result.checkpoint.best_epoch, result.checkpoint.best_dev_f1, o.checkpoint);
  print_report(report, o.report_format, out);
  return kOk;
}

int cmd_predict(Options& o, std::ostream& out) {
  require_file(o.checkpoint, "checkpoint");
  require_file(o.input, "input file");
  const TagVocabulary tags = vocabulary(o.format);
  const train::Checkpoint checkpoint = train::load_checkpoint(o.checkpoint, &tags);
  const Corpus corpus = read_conll_file(o.input, tags, parse_options(o.format, false));

  std::optional<EmbeddingSet> embeddings;
  if (!checkpoint.tokens) {
    if (o.embeddings.empty()) {
      throw ValidationError("checkpoint uses ingested embeddings; pass --embeddings");
    }
    require_file(o.embeddings, "embedding file");
    embeddings = load_embeddings_file(o.embeddings, {&corpus});
  }

  train::DecodeOptions decode = train::default_decode(checkpoint.config.arch);
  if (o.constrained_opt->count() > 0) decode.constrained = o.constrained;
  if (o.repair_opt->count() > 0) decode.repair = parse_repair_mode(o.repair);

  const train::Tagger tagger = checkpoint.tagger();
  const auto predictions =
      train::predict_corpus(tagger, corpus, embeddings ? &*embeddings : nullptr, decode);
  if (o.output == "-") {
    write_conll(corpus, predictions, out);
  } else {
    const std::string temp = o.output + ".tmp";
    {
      std::ofstream file(temp);
      if (!file) throw ParseError(fmt::format("cannot write '{}'", o.output));
      write_conll(corpus, predictions, file);
    }
    std::filesystem::rename(temp, o.output);
  }
  return kOk;
}

// Gold and predicted corpora aligned by sentence id, in gold order.
struct Aligned {
  Corpus gold;
  std::vector<std::vector<TagIndex>> predicted;
};

Aligned align(const Options& o) {
  require_file(o.gold, "gold file");
  require_file(o.pred, "prediction file");
  const TagVocabulary tags = vocabulary(o.format);
  Corpus gold = read_conll_file(o.gold, tags, parse_options(o.format, true));
  const Corpus pred = read_conll_file(o.pred, tags, parse_options(o.format, true));
  if (gold.size() != pred.size()) {
    throw ValidationError(fmt::format("gold has {} sentences, predictions have {}", gold.size(),
                                      pred.size()));
  }
  std::vector<std::vector<TagIndex>> predicted;
  predicted.reserve(gold.size());
  for (const auto& sentence : gold.sentences()) {
    const Sentence* match = pred.find(sentence.id);
    if (match == nullptr) {
      throw ValidationError(fmt::format("sentence '{}' missing from predictions", sentence.id));
    }
    if (match->tokens.size() != sentence.tokens.size()) {
      throw ValidationError(fmt::format("sentence '{}': {} gold tokens, {} predicted", sentence.id,
                                        sentence.size(), match->size()));
    }
    predicted.push_back(*match->gold_tags);
  }
  return {std::move(gold), std::move(predicted)};
}

int cmd_evaluate(Options& o, std::ostream& out) {
  const Aligned aligned = align(o);
  metrics::ScoreOptions options;
  options.repair = parse_repair_mode(o.repair);
  print_report(metrics::score(aligned.gold, aligned.predicted, options), o.report_format, out);
  return kOk;
}

int cmd_inspect(Options& o, std::ostream& out) {
  const Aligned aligned = align(o);
  metrics::ScoreOptions options;
  options.repair = parse_repair_mode(o.repair);
  const auto report = metrics::score(aligned.gold, aligned.predicted, options);
  const auto breakdown = metrics::error_breakdown(aligned.gold, aligned.predicted, options);
  if (o.report_format == "kv") {
    for (const auto& cell : breakdown.confusion) {
      out << fmt::format("confusion.{}.{}={}\n", cell.gold_type, cell.predicted_type, cell.count);
    }
    out << fmt::format("boundary_errors={}\ntotal.tp={}\ntotal.fp={}\ntotal.fn={}\n",
                       breakdown.boundary_errors.size(), breakdown.true_positives,
                       breakdown.false_positives.size(), breakdown.false_negatives.size());
  } else {
    metrics::write_breakdown_text(breakdown, report, out);
  }
  return kOk;
}

// Inserts "--config" file entries directly after the subcommand name so
// that later command-line flags override them.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path || args.empty()) return args;
  std::vector<std::string> out{args[0]};
  const auto extra = read_config_args(*path);
  out.insert(out.end(), extra.begin(), extra.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

}  // namespace

std::vector<std::string> read_config_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open config file '{}'", path));
  std::vector<std::string> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(fmt::format("{}:{}: expected key=value", path, line_number));
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    out.push_back(fmt::format("--{}={}", key, trim(line.substr(eq + 1))));
  }
  return out;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Neural sequence labeling for named entities: CRF, BiLSTM-CRF and softmax heads",
               "nertag"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* train_cmd = app.add_subcommand("train", "Train a tagger and write a checkpoint");
  add_format_options(train_cmd, o, true);
  train_cmd->add_option("--train-file", o.train_file, "Labeled training file (CoNLL)")->required();
  train_cmd->add_option("--dev-file", o.dev_file, "Labeled dev file used for model selection")
      ->required();
  train_cmd->add_option("--embeddings", o.embeddings,
                        "Precomputed token embeddings covering train and dev; omit to train a "
                        "lookup table");
  train_cmd->add_option("--checkpoint", o.checkpoint, "Output checkpoint path")->required();
  train_cmd->add_option("--log-file", o.log_file, "Training log path (default <checkpoint>.log)");
  train_cmd->add_option("--arch", o.arch, "Architecture: crf, bilstm-crf or linear")
      ->check(CLI::IsMember({"crf", "bilstm-crf", "linear"}))
      ->capture_default_str();
  train_cmd->add_option("--epochs", o.train.epochs, "Training epochs (10: best epoch count reported)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--dropout", o.train.dropout, "Dropout rate (0.3; useful range 0.2-0.5)")
      ->check(CLI::Range(0.0, 0.999999))
      ->capture_default_str();
  train_cmd->add_option("--lr-min", o.train.lr_min, "Cyclic learning rate lower bound (1e-6)")
      ->capture_default_str();
  train_cmd->add_option("--lr-max", o.train.lr_max, "Cyclic learning rate upper bound (1e-4)")
      ->capture_default_str();
  train_cmd->add_option("--cycle-length", o.train.cycle_length,
                        "Steps per triangular lr cycle; 0 = two epochs")
      ->capture_default_str();
  train_cmd->add_option("--hidden", o.train.hidden, "BiLSTM hidden size per direction (256)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--fc-size", o.train.fc_size, "Width of the linear head's FC layer (512)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--embedding-dim", o.train.embedding_dim,
                        "Lookup table width when no embeddings are given")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--clip-norm", o.train.clip_norm, "Global gradient norm cap")
      ->capture_default_str();
  train_cmd->add_option("--min-count", o.train.min_count, "Minimum token frequency for the lookup table")
      ->capture_default_str();
  train_cmd->add_option("--seed", o.train.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--format", o.report_format, "Dev report format: text or kv")
      ->check(CLI::IsMember({"text", "kv"}))
      ->capture_default_str();

  auto* predict_cmd = app.add_subcommand("predict", "Tag a CoNLL file with a trained checkpoint");
  add_format_options(predict_cmd, o, false);
  predict_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint to load")->required();
  predict_cmd->add_option("--input", o.input, "Input file; tag columns are ignored")->required();
  predict_cmd->add_option("--embeddings", o.embeddings, "Embeddings for the input sentences");
  predict_cmd->add_option("--output", o.output, "Output CoNLL path, '-' for stdout")
      ->capture_default_str();
  o.constrained_opt = predict_cmd->add_flag(
      "--constrained,!--unconstrained", o.constrained,
      "BIO-constrained Viterbi (default: off for CRF heads, on for the linear head)");
  o.repair_opt = predict_cmd->add_option("--repair", o.repair,
                                         "Post-decoding BIO repair: strict, convert or ignore "
                                         "(default: none)")
                     ->check(CLI::IsMember({"strict", "convert", "ignore"}));

  std::vector<CLI::App*> scoring;
  for (const auto& [name, help] : {std::pair{"evaluate", "Entity-level precision/recall/F1"},
                                   std::pair{"inspect", "Error breakdown: confusions and boundaries"}}) {
    auto* cmd = app.add_subcommand(name, help);
    add_format_options(cmd, o, true);
    cmd->add_option("--gold", o.gold, "Gold CoNLL file")->required();
    cmd->add_option("--pred", o.pred, "Predicted CoNLL file, aligned by sentence id")->required();
    cmd->add_option("--repair", o.repair, "Repair of invalid predicted BIO: strict, convert or ignore")
        ->check(CLI::IsMember({"strict", "convert", "ignore"}))
        ->capture_default_str();
    cmd->add_option("--format", o.report_format, "Report format: text or kv")
        ->check(CLI::IsMember({"text", "kv"}))
        ->capture_default_str();
    scoring.push_back(cmd);
  }

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(o, out, err);
    if (predict_cmd->parsed()) return cmd_predict(o, out);
    if (scoring[0]->parsed()) return cmd_evaluate(o, out);
    if (scoring[1]->parsed()) return cmd_inspect(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::kUsage: return kUsageError;
      case ErrorKind::kData: return kDataError;
      case ErrorKind::kNumeric: return kNumericError;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}

}  // namespace nertag::cli
