#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <variant>
#include <vector>

#include "nertag/conll_io.hpp"
#include "nertag/tagscheme.hpp"
#include "nertag/tensor.hpp"

namespace nertag::enc {

using Rng = std::mt19937_64;

enum class Mode { kTrain, kEval };

// Fills `m` with uniform(-scale, scale) draws in row-major order.
void init_uniform(Matrix& m, Rng& rng, double scale = 0.1);
void init_uniform(Vector& v, Rng& rng, double scale = 0.1);

// Inverted-dropout mask: entries are 0 with probability `rate`, otherwise
// 1 / (1 - rate). Returns an empty matrix when rate is 0.
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

// ---------------------------------------------------------------------------
// Token embeddings

// Trainable |V| x d lookup table addressed through a token vocabulary.
struct TableLookup {
  std::reference_wrapper<const TokenVocabulary> vocabulary;
  std::reference_wrapper<const Matrix> table;
};

// Precomputed per-sentence matrices, read-only.
using EmbeddingSource = std::variant<std::reference_wrapper<const EmbeddingSet>, TableLookup>;

struct EmbedCache {
  std::vector<std::size_t> rows;  // table rows used, trainable source only
  Matrix mask;                    // empty when no dropout was applied
};

struct Embedded {
  Matrix values;  // n x d
  EmbedCache cache;
};

Embedded embed(const Sentence& sentence, const EmbeddingSource& source, double dropout_rate,
               Rng& rng, Mode mode);

// Scatters `grad_values` (n x d) into the table gradient rows used by the
// forward call.
void embed_backward(const EmbedCache& cache, const Matrix& grad_values, Matrix& table_grad);

// ---------------------------------------------------------------------------
// BiLSTM

// One direction. Gate blocks are stacked [input; forget; cell; output].
struct LstmParams {
  Matrix input_weights;      // 4h x d
  Matrix recurrent_weights;  // 4h x h
  Vector bias;               // 4h

  static LstmParams Zero(std::size_t input_dim, std::size_t hidden);
  // uniform(-0.1, 0.1) weights, zero bias except forget gate = 1.
  static LstmParams Random(std::size_t input_dim, std::size_t hidden, Rng& rng);

  std::size_t hidden() const { return static_cast<std::size_t>(recurrent_weights.cols()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(input_weights.cols()); }
};

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;

  static BiLstmParams Zero(std::size_t input_dim, std::size_t hidden);
  static BiLstmParams Random(std::size_t input_dim, std::size_t hidden, Rng& rng);

  std::size_t hidden() const { return forward.hidden(); }
  std::size_t input_dim() const { return forward.input_dim(); }
  std::size_t output_dim() const { return 2 * hidden(); }
};

struct LstmTrace {
  Matrix gates;   // n x 4h post-activation, row t = position t
  Matrix cells;   // n x h
  Matrix hidden;  // n x h
};

struct BiLstmCache {
  Matrix input;
  LstmTrace forward;
  LstmTrace backward;
};

struct BiLstmOutput {
  Matrix values;  // n x 2h, row t = [forward h_t ; backward h_t]
  BiLstmCache cache;
};

struct BiLstmGrads {
  Matrix input;  // n x d
  BiLstmParams params;
};

BiLstmOutput bilstm_forward(const Matrix& input, const BiLstmParams& params);
BiLstmGrads bilstm_backward(const BiLstmCache& cache, const BiLstmParams& params,
                            const Matrix& grad_output);

// ---------------------------------------------------------------------------
// Linear projection to emission scores

struct ProjectionParams {
  Matrix weight;  // k x m
  Vector bias;    // k

  static ProjectionParams Zero(std::size_t input_dim, std::size_t num_tags);
  static ProjectionParams Random(std::size_t input_dim, std::size_t num_tags, Rng& rng);
};

struct ProjectionGrads {
  Matrix input;
  ProjectionParams params;
};

Matrix project(const Matrix& features, const ProjectionParams& params);
ProjectionGrads project_backward(const Matrix& features, const ProjectionParams& params,
                                 const Matrix& grad_output);

// ---------------------------------------------------------------------------
// Two-layer softmax head

struct FcHeadParams {
  Matrix hidden_weight;  // H x d
  Vector hidden_bias;    // H
  Matrix output_weight;  // k x H
  Vector output_bias;    // k

  static FcHeadParams Zero(std::size_t input_dim, std::size_t hidden, std::size_t num_tags);
  static FcHeadParams Random(std::size_t input_dim, std::size_t hidden, std::size_t num_tags,
                             Rng& rng);
};

struct FcHeadCache {
  Matrix input;
  Matrix pre_activation;  // n x H
  Matrix hidden;          // after ReLU and dropout
  Matrix mask;            // empty when no dropout was applied
};

struct FcHeadOutput {
  Matrix logits;
  Matrix log_probs;
  FcHeadCache cache;
};

struct FcHeadLoss {
  double loss = 0.0;
  Matrix grad_input;
  FcHeadParams grads;
};

FcHeadOutput fc_head_forward(const Matrix& input, const FcHeadParams& params, double dropout_rate,
                             Rng& rng, Mode mode);

// Mean token cross-entropy of `gold` under `log_probs` and its exact
// gradients through the head.
FcHeadLoss cross_entropy_and_grads(const Matrix& log_probs, const std::vector<TagIndex>& gold,
                                   const FcHeadCache& cache, const FcHeadParams& params);

}  // namespace nertag::enc
