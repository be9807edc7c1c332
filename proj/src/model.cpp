#include <cstring>

#include <fmt/core.h>

#include "nertag/errors.hpp"
#include "nertag/training.hpp"

namespace nertag::train {
namespace {

template <class T>
void add_view(std::vector<T>& out, std::string name, auto& tensor) {
  out.push_back({std::move(name), tensor.rows(), tensor.cols(), tensor.data()});
}

template <class Views, class Params>
Views collect(Params& p) {
  Views out;
  if (p.embeddings) add_view(out, "embeddings", *p.embeddings);
  if (p.bilstm) {
    add_view(out, "bilstm.forward.input_weights", p.bilstm->forward.input_weights);
    add_view(out, "bilstm.forward.recurrent_weights", p.bilstm->forward.recurrent_weights);
    add_view(out, "bilstm.forward.bias", p.bilstm->forward.bias);
    add_view(out, "bilstm.backward.input_weights", p.bilstm->backward.input_weights);
    add_view(out, "bilstm.backward.recurrent_weights", p.bilstm->backward.recurrent_weights);
    add_view(out, "bilstm.backward.bias", p.bilstm->backward.bias);
  }
  if (p.projection) {
    add_view(out, "projection.weight", p.projection->weight);
    add_view(out, "projection.bias", p.projection->bias);
  }
  if (p.fc_head) {
    add_view(out, "fc.hidden_weight", p.fc_head->hidden_weight);
    add_view(out, "fc.hidden_bias", p.fc_head->hidden_bias);
    add_view(out, "fc.output_weight", p.fc_head->output_weight);
    add_view(out, "fc.output_bias", p.fc_head->output_bias);
  }
  if (p.transitions) add_view(out, "transitions", *p.transitions);
  return out;
}

void accumulate(enc::LstmParams& dst, const enc::LstmParams& src) {
  dst.input_weights += src.input_weights;
  dst.recurrent_weights += src.recurrent_weights;
  dst.bias += src.bias;
}

}  // namespace

Architecture parse_architecture(std::string_view text) {
  if (text == "crf") return Architecture::kCrf;
  if (text == "bilstm-crf") return Architecture::kBiLstmCrf;
  if (text == "linear") return Architecture::kLinear;
  throw ValidationError(fmt::format("unknown architecture '{}' (crf, bilstm-crf, linear)", text));
}

std::string_view to_string(Architecture arch) {
  switch (arch) {
    case Architecture::kCrf: return "crf";
    case Architecture::kBiLstmCrf: return "bilstm-crf";
    case Architecture::kLinear: return "linear";
  }
  return "crf";
}

bool uses_crf(Architecture arch) { return arch != Architecture::kLinear; }

ModelParams ModelParams::zeros_like() const {
  ModelParams out = *this;
  for (auto& view : tensors(out)) std::fill(view.values().begin(), view.values().end(), 0.0);
  return out;
}

std::vector<TensorView> tensors(ModelParams& params) {
  return collect<std::vector<TensorView>>(params);
}

std::vector<ConstTensorView> tensors(const ModelParams& params) {
  return collect<std::vector<ConstTensorView>>(params);
}

bool bit_equal(const ModelParams& a, const ModelParams& b) {
  const auto lhs = tensors(a);
  const auto rhs = tensors(b);
  if (lhs.size() != rhs.size()) return false;
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    if (lhs[i].name != rhs[i].name || lhs[i].rows != rhs[i].rows || lhs[i].cols != rhs[i].cols) {
      return false;
    }
    const auto bytes = static_cast<std::size_t>(lhs[i].rows * lhs[i].cols) * sizeof(double);
    if (bytes > 0 && std::memcmp(lhs[i].data, rhs[i].data, bytes) != 0) return false;
  }
  return true;
}

DecodeOptions default_decode(Architecture arch) {
  DecodeOptions options;
  options.constrained = !uses_crf(arch);
  return options;
}

Tagger::Tagger(TrainConfig config, TagVocabulary tags, std::optional<TokenVocabulary> tokens,
               std::optional<std::size_t> ingested_dim, enc::Rng& rng)
    : config_(std::move(config)), tags_(std::move(tags)), tokens_(std::move(tokens)) {
  config_.validate();
  if (ingested_dim.has_value() == tokens_.has_value()) {
    throw ValidationError("exactly one of an ingested dimension or a token vocabulary is required");
  }
  embedding_dim_ = ingested_dim ? *ingested_dim : config_.embedding_dim;
  const auto k = static_cast<std::size_t>(tags_.size());
  if (tokens_) {
    params_.embeddings = Matrix::Zero(static_cast<Eigen::Index>(tokens_->size()),
                                      static_cast<Eigen::Index>(embedding_dim_));
    enc::init_uniform(*params_.embeddings, rng);
  }
  switch (config_.arch) {
    case Architecture::kCrf:
      params_.projection = enc::ProjectionParams::Random(embedding_dim_, k, rng);
      break;
    case Architecture::kBiLstmCrf:
      params_.bilstm = enc::BiLstmParams::Random(embedding_dim_, config_.hidden, rng);
      params_.projection = enc::ProjectionParams::Random(params_.bilstm->output_dim(), k, rng);
      break;
    case Architecture::kLinear:
      params_.fc_head = enc::FcHeadParams::Random(embedding_dim_, config_.fc_size, k, rng);
      break;
  }
  if (uses_crf(config_.arch)) params_.transitions = crf::TransitionMatrix(tags_.size()).scores();
}

Tagger::Tagger(TrainConfig config, TagVocabulary tags, std::optional<TokenVocabulary> tokens,
               std::size_t embedding_dim, ModelParams params)
    : config_(std::move(config)),
      tags_(std::move(tags)),
      tokens_(std::move(tokens)),
      embedding_dim_(embedding_dim),
      params_(std::move(params)) {}

enc::EmbeddingSource Tagger::source(const EmbeddingSet* ingested) const {
  if (tokens_) return enc::TableLookup{*tokens_, *params_.embeddings};
  if (ingested == nullptr) throw ValidationError("model needs ingested embeddings");
  if (ingested->dimension() != embedding_dim_) {
    throw ShapeError(fmt::format("embeddings have dimension {}, model expects {}",
                                 ingested->dimension(), embedding_dim_));
  }
  return std::cref(*ingested);
}

double Tagger::loss_and_grads(const Sentence& sentence, const EmbeddingSet* ingested,
                              enc::Rng& rng, ModelParams& grads, enc::Mode mode) const {
  if (!sentence.gold_tags) {
    throw ValidationError(fmt::format("sentence '{}' has no gold tags", sentence.id));
  }
  const auto& gold = *sentence.gold_tags;
  const double dropout = config_.dropout;
  const enc::Embedded embedded = enc::embed(sentence, source(ingested), dropout, rng, mode);

  Matrix grad_input;
  double loss = 0.0;
  if (config_.arch == Architecture::kLinear) {
    const auto head = enc::fc_head_forward(embedded.values, *params_.fc_head, dropout, rng, mode);
    auto result = enc::cross_entropy_and_grads(head.log_probs, gold, head.cache, *params_.fc_head);
    loss = result.loss;
    grads.fc_head->hidden_weight += result.grads.hidden_weight;
    grads.fc_head->hidden_bias += result.grads.hidden_bias;
    grads.fc_head->output_weight += result.grads.output_weight;
    grads.fc_head->output_bias += result.grads.output_bias;
    grad_input = std::move(result.grad_input);
  } else {
    std::optional<enc::BiLstmOutput> recurrent;
    Matrix features = embedded.values;
    Matrix feature_mask;
    if (params_.bilstm) {
      recurrent = enc::bilstm_forward(embedded.values, *params_.bilstm);
      features = recurrent->values;
      if (mode == enc::Mode::kTrain && dropout > 0.0) {
        feature_mask = enc::dropout_mask(features.rows(), features.cols(), dropout, rng);
        features.array() *= feature_mask.array();
      }
    }
    const Matrix emissions = enc::project(features, *params_.projection);
    const crf::TransitionMatrix transitions(*params_.transitions);
    const crf::LabelPath path(gold.begin(), gold.end());
    loss = -crf::log_likelihood(emissions, transitions, path);
    const crf::Gradients crf_grads = crf::nll_gradients(emissions, transitions, path);
    *grads.transitions += crf_grads.transitions;
    auto projected = enc::project_backward(features, *params_.projection, crf_grads.emissions);
    grads.projection->weight += projected.params.weight;
    grads.projection->bias += projected.params.bias;
    grad_input = std::move(projected.input);
    if (recurrent) {
      if (feature_mask.size() > 0) grad_input.array() *= feature_mask.array();
      auto lstm = enc::bilstm_backward(recurrent->cache, *params_.bilstm, grad_input);
      accumulate(grads.bilstm->forward, lstm.params.forward);
      accumulate(grads.bilstm->backward, lstm.params.backward);
      grad_input = std::move(lstm.input);
    }
  }
  if (tokens_) enc::embed_backward(embedded.cache, grad_input, *grads.embeddings);
  return loss;
}

double Tagger::loss(const Sentence& sentence, const EmbeddingSet* ingested) const {
  enc::Rng unused(0);
  ModelParams scratch = params_.zeros_like();
  return loss_and_grads(sentence, ingested, unused, scratch, enc::Mode::kEval);
}

Matrix Tagger::scores(const Sentence& sentence, const EmbeddingSet* ingested) const {
  enc::Rng unused(0);
  const auto embedded = enc::embed(sentence, source(ingested), 0.0, unused, enc::Mode::kEval);
  if (config_.arch == Architecture::kLinear) {
    return enc::fc_head_forward(embedded.values, *params_.fc_head, 0.0, unused, enc::Mode::kEval)
        .log_probs;
  }
  if (params_.bilstm) {
    return enc::project(enc::bilstm_forward(embedded.values, *params_.bilstm).values,
                        *params_.projection);
  }
  return enc::project(embedded.values, *params_.projection);
}

std::vector<TagIndex> Tagger::predict(const Sentence& sentence, const EmbeddingSet* ingested,
                                      const DecodeOptions& options) const {
  const Matrix scores = this->scores(sentence, ingested);
  // The softmax head decodes with zero transitions: per-token argmax, or the
  // best BIO-valid path by total log-probability under the mask.
  const crf::TransitionMatrix transitions =
      params_.transitions ? crf::TransitionMatrix(*params_.transitions)
                          : crf::TransitionMatrix(tags_.size());
  std::optional<TransitionMask> mask;
  if (options.constrained) mask.emplace(tags_);
  auto path = crf::viterbi_decode(scores, transitions, mask ? &*mask : nullptr).path;
  if (options.repair) path = repair_bio(tags_, path, *options.repair);
  return path;
}

}  // namespace nertag::train
