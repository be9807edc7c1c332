#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nertag/conll_io.hpp"
#include "nertag/crf.hpp"
#include "nertag/encoders.hpp"
#include "nertag/errors.hpp"
#include "nertag/metrics.hpp"

namespace nertag::train {

enum class Architecture { kCrf, kBiLstmCrf, kLinear };

Architecture parse_architecture(std::string_view text);
std::string_view to_string(Architecture arch);
bool uses_crf(Architecture arch);

struct TrainConfig {
  Architecture arch = Architecture::kCrf;
  int epochs = 10;
  double dropout = 0.3;
  std::size_t hidden = 256;   // BiLSTM hidden size per direction
  std::size_t fc_size = 512;  // linear head hidden width
  // Width of the trainable lookup table; ignored for ingested embeddings.
  std::size_t embedding_dim = 64;
  double lr_min = 1e-6;
  double lr_max = 1e-4;
  // Steps per triangular cycle; 0 means two epochs' worth of steps.
  std::size_t cycle_length = 0;
  double clip_norm = 5.0;
  std::size_t min_count = 1;
  std::uint64_t seed = 42;

  void validate() const;
  // Flat key/value rendering stored in checkpoints.
  std::map<std::string, std::string> to_kv() const;
  static TrainConfig FromKv(const std::map<std::string, std::string>& kv);

  bool operator==(const TrainConfig&) const = default;
};

// Every trainable tensor; absent members are unused by the architecture.
// Gradients use the same layout.
struct ModelParams {
  std::optional<Matrix> embeddings;  // |V| x d
  std::optional<enc::BiLstmParams> bilstm;
  std::optional<enc::ProjectionParams> projection;
  std::optional<enc::FcHeadParams> fc_head;
  std::optional<Matrix> transitions;  // (k+2) x (k+2)

  // Same shapes, all zeros.
  ModelParams zeros_like() const;
};

struct TensorView {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  double* data = nullptr;

  std::span<double> values() const { return {data, static_cast<std::size_t>(rows * cols)}; }
};

struct ConstTensorView {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  const double* data = nullptr;

  std::span<const double> values() const {
    return {data, static_cast<std::size_t>(rows * cols)};
  }
};

// Named tensors in a fixed order.
std::vector<TensorView> tensors(ModelParams& params);
std::vector<ConstTensorView> tensors(const ModelParams& params);

bool bit_equal(const ModelParams& a, const ModelParams& b);

// ---------------------------------------------------------------------------
// Optimization

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;
};

// Bias-corrected Adam. Moments are created on the first call.
void adam_step(const std::vector<TensorView>& params, const std::vector<ConstTensorView>& grads,
               AdamState& state, double lr);

struct LrSchedule {
  double lr_min = 1e-6;
  double lr_max = 1e-4;
  std::size_t cycle_length = 2;

  void validate() const;
};

// Triangular wave: lr_min at the start of every cycle, lr_max half way.
double lr_at(const LrSchedule& schedule, std::uint64_t step);

// Scales `grads` in place so their global L2 norm is at most `max_norm`.
// Returns the norm before scaling.
double clip_global_norm(const std::vector<TensorView>& grads, double max_norm);

// ---------------------------------------------------------------------------
// Model

struct DecodeOptions {
  bool constrained = false;
  // Applied after decoding when set.
  std::optional<RepairMode> repair;
};

// Default decode options for an architecture: hard BIO mask for the softmax
// head, soft CRF transitions otherwise.
DecodeOptions default_decode(Architecture arch);

class Tagger {
 public:
  // Freshly initialized parameters. `tokens` is required when `ingested_dim`
  // is absent (trainable lookup table).
  Tagger(TrainConfig config, TagVocabulary tags, std::optional<TokenVocabulary> tokens,
         std::optional<std::size_t> ingested_dim, enc::Rng& rng);
  Tagger(TrainConfig config, TagVocabulary tags, std::optional<TokenVocabulary> tokens,
         std::size_t embedding_dim, ModelParams params);

  const TrainConfig& config() const { return config_; }
  const TagVocabulary& tags() const { return tags_; }
  const std::optional<TokenVocabulary>& tokens() const { return tokens_; }
  bool trainable_embeddings() const { return tokens_.has_value(); }
  std::size_t embedding_dim() const { return embedding_dim_; }
  const ModelParams& params() const { return params_; }
  ModelParams& mutable_params() { return params_; }

  // Emission scores (CRF architectures) or log-probabilities (linear head).
  Matrix scores(const Sentence& sentence, const EmbeddingSet* ingested) const;

  // Per-sentence training loss (CRF: -log likelihood; linear: mean token
  // cross-entropy) with gradients accumulated into `grads`.
  double loss_and_grads(const Sentence& sentence, const EmbeddingSet* ingested, enc::Rng& rng,
                        ModelParams& grads, enc::Mode mode = enc::Mode::kTrain) const;

  // Evaluation-mode loss, no gradients.
  double loss(const Sentence& sentence, const EmbeddingSet* ingested) const;

  std::vector<TagIndex> predict(const Sentence& sentence, const EmbeddingSet* ingested,
                                const DecodeOptions& options) const;

 private:
  enc::EmbeddingSource source(const EmbeddingSet* ingested) const;

  TrainConfig config_;
  TagVocabulary tags_;
  std::optional<TokenVocabulary> tokens_;
  std::size_t embedding_dim_ = 0;
  ModelParams params_;
};

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public ParseError {
 public:
  using ParseError::ParseError;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  TrainConfig config;
  EntityTypeSet types = EntityTypeSet::Defaults();
  std::optional<TokenVocabulary> tokens;  // present for trainable embeddings
  std::size_t embedding_dim = 0;
  ModelParams params;
  double best_dev_f1 = 0.0;
  int best_epoch = 0;

  Tagger tagger() const;
  static Checkpoint FromTagger(const Tagger& tagger, double best_dev_f1, int best_epoch);

  // Bit-level equality of every field and tensor.
  bool operator==(const Checkpoint& other) const;
};

void write_checkpoint(const Checkpoint& checkpoint, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);

// Writes through a temporary file renamed into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
// Throws CheckpointError (corrupt, version mismatch) or ShapeError (the
// stored tensors disagree with the stored tag set, or with `expected`).
Checkpoint load_checkpoint(const std::string& path, const TagVocabulary* expected = nullptr);
void check_compatible(const Checkpoint& checkpoint, const TagVocabulary& tags);

// ---------------------------------------------------------------------------
// Training loop

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double dev_precision = 0.0;
  double dev_recall = 0.0;
  double dev_f1 = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;  // best dev epoch
  std::vector<EpochStats> history;
};

// Decodes every sentence of `corpus` with `options`.
std::vector<std::vector<TagIndex>> predict_corpus(const Tagger& tagger, const Corpus& corpus,
                                                  const EmbeddingSet* ingested,
                                                  const DecodeOptions& options);

// Shuffled per-sentence Adam updates for config.epochs epochs, selecting the
// epoch with the best dev macro-F1 (the later one on ties). `ingested` is
// null for a trainable lookup table built from the training corpus. One line
// per epoch goes to `log` when given.
TrainResult train(const Corpus& train_corpus, const Corpus& dev_corpus, const TrainConfig& config,
                  const EmbeddingSet* ingested, std::ostream* log = nullptr);

}  // namespace nertag::train
