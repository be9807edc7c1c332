#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/core.h>

#include "nertag/errors.hpp"
#include "nertag/training.hpp"

namespace nertag::train {

std::vector<std::vector<TagIndex>> predict_corpus(const Tagger& tagger, const Corpus& corpus,
                                                  const EmbeddingSet* ingested,
                                                  const DecodeOptions& options) {
  std::vector<std::vector<TagIndex>> out;
  out.reserve(corpus.size());
  for (const auto& sentence : corpus.sentences()) {
    out.push_back(tagger.predict(sentence, ingested, options));
  }
  return out;
}

TrainResult train(const Corpus& train_corpus, const Corpus& dev_corpus, const TrainConfig& config,
                  const EmbeddingSet* ingested, std::ostream* log) {
  config.validate();
  if (train_corpus.empty()) throw ValidationError("training corpus is empty");
  if (!train_corpus.labeled() || !dev_corpus.labeled()) {
    throw ValidationError("training and dev corpora must carry gold tags");
  }
  if (!(train_corpus.tags() == dev_corpus.tags())) {
    throw ValidationError("training and dev corpora use different tag vocabularies");
  }

  enc::Rng rng(config.seed);
  std::optional<TokenVocabulary> tokens;
  std::optional<std::size_t> ingested_dim;
  if (ingested != nullptr) {
    ingested_dim = ingested->dimension();
  } else {
    tokens = build_token_vocabulary(train_corpus, config.min_count);
  }
  Tagger tagger(config, train_corpus.tags(), std::move(tokens), ingested_dim, rng);

  LrSchedule schedule{config.lr_min, config.lr_max,
                      config.cycle_length != 0 ? config.cycle_length
                                               : std::max<std::size_t>(2, 2 * train_corpus.size())};
  schedule.validate();
  AdamState adam;
  const DecodeOptions decode = default_decode(config.arch);

  std::vector<std::size_t> order(train_corpus.size());
  std::iota(order.begin(), order.end(), 0);
  ModelParams grads = tagger.params().zeros_like();

  TrainResult result;
  double best_f1 = -1.0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total_loss = 0.0;
    for (const std::size_t index : order) {
      const Sentence& sentence = train_corpus[index];
      for (auto& view : tensors(grads)) std::fill(view.values().begin(), view.values().end(), 0.0);
      const double loss = tagger.loss_and_grads(sentence, ingested, rng, grads);
      if (!std::isfinite(loss)) {
        throw NumericError(fmt::format("non-finite loss {} at epoch {} on sentence '{}' (step {})",
                                       loss, epoch, sentence.id, adam.step));
      }
      total_loss += loss;
      const auto grad_views = tensors(grads);
      clip_global_norm(grad_views, config.clip_norm);
      adam_step(tensors(tagger.mutable_params()), tensors(std::as_const(grads)), adam,
                lr_at(schedule, adam.step));
      if (auto& transitions = tagger.mutable_params().transitions) {
        transitions = crf::TransitionMatrix(std::move(*transitions)).scores();
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = total_loss / static_cast<double>(train_corpus.size());
    if (!dev_corpus.empty()) {
      const auto predictions = predict_corpus(tagger, dev_corpus, ingested, decode);
      const auto report = metrics::score(dev_corpus, predictions);
      stats.dev_precision = report.macro_precision;
      stats.dev_recall = report.macro_recall;
      stats.dev_f1 = report.macro_f1;
    }
    result.history.push_back(stats);
    if (log != nullptr) {
      *log << fmt::format("epoch {} loss {:.6f} dev_precision {:.4f} dev_recall {:.4f} dev_f1 {:.4f}\n",
                          stats.epoch, stats.mean_loss, stats.dev_precision, stats.dev_recall,
                          stats.dev_f1);
      log->flush();
    }
    // Ties go to the later epoch.
    if (stats.dev_f1 >= best_f1) {
      best_f1 = stats.dev_f1;
      result.checkpoint = Checkpoint::FromTagger(tagger, stats.dev_f1, epoch);
    }
  }
  return result;
}

}  // namespace nertag::train
