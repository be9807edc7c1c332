#include "nertag/encoders.hpp"

#include <cmath>

#include <fmt/core.h>

#include "nertag/errors.hpp"

namespace nertag::enc {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require(bool ok, const char* what, Eigen::Index got, Eigen::Index expected) {
  if (!ok) throw ShapeError(fmt::format("{}: got {}, expected {}", what, got, expected));
}

// Runs one LSTM direction over `input`, right to left when `reverse`.
LstmTrace run_direction(const Matrix& input, const LstmParams& p, bool reverse) {
  const Eigen::Index n = input.rows();
  const Eigen::Index h = static_cast<Eigen::Index>(p.hidden());
  LstmTrace trace{Matrix(n, 4 * h), Matrix(n, h), Matrix(n, h)};
  Vector h_prev = Vector::Zero(h);
  Vector c_prev = Vector::Zero(h);
  for (Eigen::Index step = 0; step < n; ++step) {
    const Eigen::Index t = reverse ? n - 1 - step : step;
    Vector z = p.input_weights * input.row(t).transpose() + p.recurrent_weights * h_prev + p.bias;
    for (Eigen::Index j = 0; j < h; ++j) {
      z(j) = sigmoid(z(j));
      z(h + j) = sigmoid(z(h + j));
      z(2 * h + j) = std::tanh(z(2 * h + j));
      z(3 * h + j) = sigmoid(z(3 * h + j));
    }
    const Vector c = z.segment(h, h).cwiseProduct(c_prev) +
                     z.segment(0, h).cwiseProduct(z.segment(2 * h, h));
    const Vector hidden = z.segment(3 * h, h).cwiseProduct(c.array().tanh().matrix());
    trace.gates.row(t) = z.transpose();
    trace.cells.row(t) = c.transpose();
    trace.hidden.row(t) = hidden.transpose();
    h_prev = hidden;
    c_prev = c;
  }
  return trace;
}

// Backpropagation through time for one direction. `grad_hidden` is n x h.
void backprop_direction(const Matrix& input, const LstmParams& p, const LstmTrace& trace,
                        const Matrix& grad_hidden, bool reverse, LstmParams& grads,
                        Matrix& grad_input) {
  const Eigen::Index n = input.rows();
  const Eigen::Index h = static_cast<Eigen::Index>(p.hidden());
  Vector dh_next = Vector::Zero(h);
  Vector dc_next = Vector::Zero(h);
  Vector dz(4 * h);
  for (Eigen::Index step = n - 1; step >= 0; --step) {
    const Eigen::Index t = reverse ? n - 1 - step : step;
    const bool first = step == 0;
    const Eigen::Index prev = reverse ? t + 1 : t - 1;
    const auto gates = trace.gates.row(t);
    const Vector dh = grad_hidden.row(t).transpose() + dh_next;
    for (Eigen::Index j = 0; j < h; ++j) {
      const double i = gates(j), f = gates(h + j), g = gates(2 * h + j), o = gates(3 * h + j);
      const double tanh_c = std::tanh(trace.cells(t, j));
      const double c_prev = first ? 0.0 : trace.cells(prev, j);
      const double dc = dh(j) * o * (1.0 - tanh_c * tanh_c) + dc_next(j);
      dz(j) = dc * g * i * (1.0 - i);
      dz(h + j) = dc * c_prev * f * (1.0 - f);
      dz(2 * h + j) = dc * i * (1.0 - g * g);
      dz(3 * h + j) = dh(j) * tanh_c * o * (1.0 - o);
      dc_next(j) = dc * f;
    }
    grads.input_weights.noalias() += dz * input.row(t);
    if (!first) grads.recurrent_weights.noalias() += dz * trace.hidden.row(prev);
    grads.bias += dz;
    grad_input.row(t).noalias() += (p.input_weights.transpose() * dz).transpose();
    dh_next = p.recurrent_weights.transpose() * dz;
  }
}

void check_lstm(const LstmParams& p, Eigen::Index input_dim) {
  const Eigen::Index h = p.recurrent_weights.cols();
  require(p.input_weights.rows() == 4 * h, "LSTM input weight rows", p.input_weights.rows(), 4 * h);
  require(p.input_weights.cols() == input_dim, "LSTM input width", input_dim, p.input_weights.cols());
  require(p.recurrent_weights.rows() == 4 * h, "LSTM recurrent weight rows",
          p.recurrent_weights.rows(), 4 * h);
  require(p.bias.size() == 4 * h, "LSTM bias size", p.bias.size(), 4 * h);
}

}  // namespace

void init_uniform(Matrix& m, Rng& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

void init_uniform(Vector& v, Rng& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = dist(rng);
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ValidationError(fmt::format("dropout rate {} outside [0, 1)", rate));
  if (rate == 0.0) return {};
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  const double keep = 1.0 / (1.0 - rate);
  Matrix mask(rows, cols);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = dist(rng) < rate ? 0.0 : keep;
  return mask;
}

Embedded embed(const Sentence& sentence, const EmbeddingSource& source, double dropout_rate,
               Rng& rng, Mode mode) {
  Embedded out;
  if (const auto* ingested = std::get_if<std::reference_wrapper<const EmbeddingSet>>(&source)) {
    const Matrix* stored = ingested->get().find(sentence.id);
    if (stored == nullptr) {
      throw ValidationError(fmt::format("no embeddings for sentence '{}'", sentence.id));
    }
    if (static_cast<std::size_t>(stored->rows()) != sentence.size()) {
      throw ShapeError(fmt::format("embeddings for '{}' have {} rows, sentence has {} tokens",
                                   sentence.id, stored->rows(), sentence.size()));
    }
    out.values = *stored;
  } else {
    const auto& lookup = std::get<TableLookup>(source);
    const Matrix& table = lookup.table.get();
    const TokenVocabulary& vocabulary = lookup.vocabulary.get();
    if (static_cast<std::size_t>(table.rows()) != vocabulary.size()) {
      throw ShapeError(fmt::format("embedding table has {} rows, vocabulary has {} entries",
                                   table.rows(), vocabulary.size()));
    }
    out.values.resize(static_cast<Eigen::Index>(sentence.size()), table.cols());
    out.cache.rows.reserve(sentence.size());
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      const std::size_t row = vocabulary.lookup(sentence.tokens[i]);
      out.cache.rows.push_back(row);
      out.values.row(static_cast<Eigen::Index>(i)) = table.row(static_cast<Eigen::Index>(row));
    }
  }
  if (mode == Mode::kTrain && dropout_rate > 0.0) {
    out.cache.mask = dropout_mask(out.values.rows(), out.values.cols(), dropout_rate, rng);
    out.values.array() *= out.cache.mask.array();
  }
  return out;
}

void embed_backward(const EmbedCache& cache, const Matrix& grad_values, Matrix& table_grad) {
  if (cache.rows.size() != static_cast<std::size_t>(grad_values.rows())) {
    throw ShapeError("embedding gradient does not match the forward call");
  }
  for (std::size_t i = 0; i < cache.rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const auto row = static_cast<Eigen::Index>(cache.rows[i]);
    if (cache.mask.size() > 0) {
      table_grad.row(row) += grad_values.row(r).cwiseProduct(cache.mask.row(r));
    } else {
      table_grad.row(row) += grad_values.row(r);
    }
  }
}

LstmParams LstmParams::Zero(std::size_t input_dim, std::size_t hidden) {
  const auto d = static_cast<Eigen::Index>(input_dim);
  const auto h = static_cast<Eigen::Index>(hidden);
  return {Matrix::Zero(4 * h, d), Matrix::Zero(4 * h, h), Vector::Zero(4 * h)};
}

LstmParams LstmParams::Random(std::size_t input_dim, std::size_t hidden, Rng& rng) {
  LstmParams p = Zero(input_dim, hidden);
  init_uniform(p.input_weights, rng);
  init_uniform(p.recurrent_weights, rng);
  const auto h = static_cast<Eigen::Index>(hidden);
  p.bias.segment(h, h).setOnes();
  return p;
}

BiLstmParams BiLstmParams::Zero(std::size_t input_dim, std::size_t hidden) {
  return {LstmParams::Zero(input_dim, hidden), LstmParams::Zero(input_dim, hidden)};
}

BiLstmParams BiLstmParams::Random(std::size_t input_dim, std::size_t hidden, Rng& rng) {
  LstmParams forward = LstmParams::Random(input_dim, hidden, rng);
  LstmParams backward = LstmParams::Random(input_dim, hidden, rng);
  return {std::move(forward), std::move(backward)};
}

BiLstmOutput bilstm_forward(const Matrix& input, const BiLstmParams& params) {
  if (input.rows() < 1) throw ShapeError("BiLSTM input has no rows");
  check_lstm(params.forward, input.cols());
  check_lstm(params.backward, input.cols());
  require(params.backward.hidden() == params.forward.hidden(), "backward LSTM hidden size",
          static_cast<Eigen::Index>(params.backward.hidden()),
          static_cast<Eigen::Index>(params.forward.hidden()));
  BiLstmOutput out;
  out.cache.input = input;
  out.cache.forward = run_direction(input, params.forward, false);
  out.cache.backward = run_direction(input, params.backward, true);
  const Eigen::Index h = static_cast<Eigen::Index>(params.hidden());
  out.values.resize(input.rows(), 2 * h);
  out.values.leftCols(h) = out.cache.forward.hidden;
  out.values.rightCols(h) = out.cache.backward.hidden;
  return out;
}

BiLstmGrads bilstm_backward(const BiLstmCache& cache, const BiLstmParams& params,
                            const Matrix& grad_output) {
  const Eigen::Index n = cache.input.rows();
  const Eigen::Index h = static_cast<Eigen::Index>(params.hidden());
  require(grad_output.rows() == n, "BiLSTM output gradient rows", grad_output.rows(), n);
  require(grad_output.cols() == 2 * h, "BiLSTM output gradient width", grad_output.cols(), 2 * h);
  require(cache.forward.hidden.rows() == n && cache.forward.hidden.cols() == h,
          "BiLSTM cache hidden width", cache.forward.hidden.cols(), h);
  BiLstmGrads grads{Matrix::Zero(n, cache.input.cols()),
                    BiLstmParams::Zero(params.input_dim(), params.hidden())};
  backprop_direction(cache.input, params.forward, cache.forward, grad_output.leftCols(h), false,
                     grads.params.forward, grads.input);
  backprop_direction(cache.input, params.backward, cache.backward, grad_output.rightCols(h), true,
                     grads.params.backward, grads.input);
  return grads;
}

ProjectionParams ProjectionParams::Zero(std::size_t input_dim, std::size_t num_tags) {
  return {Matrix::Zero(static_cast<Eigen::Index>(num_tags), static_cast<Eigen::Index>(input_dim)),
          Vector::Zero(static_cast<Eigen::Index>(num_tags))};
}

ProjectionParams ProjectionParams::Random(std::size_t input_dim, std::size_t num_tags, Rng& rng) {
  ProjectionParams p = Zero(input_dim, num_tags);
  init_uniform(p.weight, rng);
  return p;
}

Matrix project(const Matrix& features, const ProjectionParams& params) {
  require(features.cols() == params.weight.cols(), "projection input width", features.cols(),
          params.weight.cols());
  require(params.bias.size() == params.weight.rows(), "projection bias size", params.bias.size(),
          params.weight.rows());
  Matrix out = features * params.weight.transpose();
  out.rowwise() += params.bias.transpose();
  return out;
}

ProjectionGrads project_backward(const Matrix& features, const ProjectionParams& params,
                                 const Matrix& grad_output) {
  require(grad_output.rows() == features.rows(), "projection gradient rows", grad_output.rows(),
          features.rows());
  require(grad_output.cols() == params.weight.rows(), "projection gradient width",
          grad_output.cols(), params.weight.rows());
  ProjectionGrads grads;
  grads.input = grad_output * params.weight;
  grads.params.weight = grad_output.transpose() * features;
  grads.params.bias = grad_output.colwise().sum().transpose();
  return grads;
}

FcHeadParams FcHeadParams::Zero(std::size_t input_dim, std::size_t hidden, std::size_t num_tags) {
  const auto d = static_cast<Eigen::Index>(input_dim);
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto k = static_cast<Eigen::Index>(num_tags);
  return {Matrix::Zero(h, d), Vector::Zero(h), Matrix::Zero(k, h), Vector::Zero(k)};
}

FcHeadParams FcHeadParams::Random(std::size_t input_dim, std::size_t hidden, std::size_t num_tags,
                                  Rng& rng) {
  FcHeadParams p = Zero(input_dim, hidden, num_tags);
  init_uniform(p.hidden_weight, rng);
  init_uniform(p.output_weight, rng);
  return p;
}

FcHeadOutput fc_head_forward(const Matrix& input, const FcHeadParams& params, double dropout_rate,
                             Rng& rng, Mode mode) {
  require(input.cols() == params.hidden_weight.cols(), "FC head input width", input.cols(),
          params.hidden_weight.cols());
  require(params.output_weight.cols() == params.hidden_weight.rows(), "FC head output weight width",
          params.output_weight.cols(), params.hidden_weight.rows());
  FcHeadOutput out;
  out.cache.input = input;
  out.cache.pre_activation = input * params.hidden_weight.transpose();
  out.cache.pre_activation.rowwise() += params.hidden_bias.transpose();
  out.cache.hidden = out.cache.pre_activation.cwiseMax(0.0);
  if (mode == Mode::kTrain && dropout_rate > 0.0) {
    out.cache.mask = dropout_mask(out.cache.hidden.rows(), out.cache.hidden.cols(), dropout_rate, rng);
    out.cache.hidden.array() *= out.cache.mask.array();
  }
  out.logits = out.cache.hidden * params.output_weight.transpose();
  out.logits.rowwise() += params.output_bias.transpose();
  out.log_probs.resize(out.logits.rows(), out.logits.cols());
  for (Eigen::Index i = 0; i < out.logits.rows(); ++i) {
    const double max = out.logits.row(i).maxCoeff();
    const double log_z = max + std::log((out.logits.row(i).array() - max).exp().sum());
    out.log_probs.row(i) = out.logits.row(i).array() - log_z;
  }
  return out;
}

FcHeadLoss cross_entropy_and_grads(const Matrix& log_probs, const std::vector<TagIndex>& gold,
                                   const FcHeadCache& cache, const FcHeadParams& params) {
  const Eigen::Index n = log_probs.rows();
  require(static_cast<Eigen::Index>(gold.size()) == n, "gold label count",
          static_cast<Eigen::Index>(gold.size()), n);
  require(cache.hidden.rows() == n, "FC head cache rows", cache.hidden.rows(), n);
  require(log_probs.cols() == params.output_weight.rows(), "log-probability width", log_probs.cols(),
          params.output_weight.rows());

  FcHeadLoss out;
  Matrix grad_logits = log_probs.array().exp().matrix();
  for (Eigen::Index i = 0; i < n; ++i) {
    const TagIndex tag = gold[static_cast<std::size_t>(i)];
    if (tag < 0 || tag >= log_probs.cols()) {
      throw ShapeError(fmt::format("gold label {} outside [0, {})", tag, log_probs.cols()));
    }
    out.loss -= log_probs(i, tag);
    grad_logits(i, tag) -= 1.0;
  }
  const double scale = 1.0 / static_cast<double>(n);
  out.loss *= scale;
  grad_logits *= scale;

  out.grads.output_weight = grad_logits.transpose() * cache.hidden;
  out.grads.output_bias = grad_logits.colwise().sum().transpose();
  Matrix grad_hidden = grad_logits * params.output_weight;
  if (cache.mask.size() > 0) grad_hidden.array() *= cache.mask.array();
  grad_hidden.array() *= (cache.pre_activation.array() > 0.0).cast<double>();
  out.grads.hidden_weight = grad_hidden.transpose() * cache.input;
  out.grads.hidden_bias = grad_hidden.colwise().sum().transpose();
  out.grad_input = grad_hidden * params.hidden_weight;
  return out;
}

}  // namespace nertag::enc
