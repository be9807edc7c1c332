#include "nertag/crf.hpp"

#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "nertag/errors.hpp"

namespace nertag::crf {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const Vector& values) {
  const double max = values.maxCoeff();
  if (max == kNegInf) return kNegInf;
  return max + std::log((values.array() - max).exp().sum());
}

void check_shapes(const EmissionMatrix& emissions, const TransitionMatrix& transitions) {
  if (emissions.rows() < 1) throw ShapeError("emission matrix has no rows");
  if (emissions.cols() != transitions.num_tags()) {
    throw ShapeError(fmt::format("emission matrix has {} tag columns, transitions expect {}",
                                 emissions.cols(), transitions.num_tags()));
  }
  if (!emissions.allFinite()) throw NumericError("emission matrix contains non-finite values");
}

void check_path(const EmissionMatrix& emissions, const LabelPath& path) {
  if (static_cast<Eigen::Index>(path.size()) != emissions.rows()) {
    throw ShapeError(fmt::format("label path has length {}, emissions have {} rows", path.size(),
                                 emissions.rows()));
  }
  for (const TagIndex tag : path) {
    if (tag < 0 || tag >= emissions.cols()) {
      throw ShapeError(fmt::format("label {} outside [0, {})", tag, emissions.cols()));
    }
  }
}

// alpha(t, j): log-sum of scores of all prefixes ending in tag j at t,
// including the emission at t.
Matrix forward_scores(const EmissionMatrix& emissions, const TransitionMatrix& transitions) {
  const Eigen::Index n = emissions.rows();
  const int k = transitions.num_tags();
  const Matrix& a = transitions.scores();
  Matrix alpha(n, k);
  for (int j = 0; j < k; ++j) alpha(0, j) = a(transitions.start(), j) + emissions(0, j);
  Vector scratch(k);
  for (Eigen::Index t = 1; t < n; ++t) {
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < k; ++i) scratch(i) = alpha(t - 1, i) + a(i, j);
      alpha(t, j) = log_sum_exp(scratch) + emissions(t, j);
    }
  }
  return alpha;
}

// beta(t, i): log-sum of scores of all suffixes after tag i at t, through STOP.
Matrix backward_scores(const EmissionMatrix& emissions, const TransitionMatrix& transitions) {
  const Eigen::Index n = emissions.rows();
  const int k = transitions.num_tags();
  const Matrix& a = transitions.scores();
  Matrix beta(n, k);
  for (int i = 0; i < k; ++i) beta(n - 1, i) = a(i, transitions.stop());
  Vector scratch(k);
  for (Eigen::Index t = n - 2; t >= 0; --t) {
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) scratch(j) = a(i, j) + emissions(t + 1, j) + beta(t + 1, j);
      beta(t, i) = log_sum_exp(scratch);
    }
  }
  return beta;
}

double final_log_sum(const Matrix& alpha, const TransitionMatrix& transitions) {
  const int k = transitions.num_tags();
  Vector scratch(k);
  for (int j = 0; j < k; ++j) {
    scratch(j) = alpha(alpha.rows() - 1, j) + transitions(j, transitions.stop());
  }
  return log_sum_exp(scratch);
}

}  // namespace

TransitionMatrix::TransitionMatrix(int num_tags) {
  if (num_tags < 1) throw ShapeError("transition matrix needs at least one tag");
  scores_ = Matrix::Zero(num_tags + 2, num_tags + 2);
  pin_boundary();
}

TransitionMatrix::TransitionMatrix(Matrix scores) : scores_(std::move(scores)) {
  if (scores_.rows() != scores_.cols() || scores_.rows() < 3) {
    throw ShapeError(fmt::format("transition matrix must be square with k >= 1, got {}x{}",
                                 scores_.rows(), scores_.cols()));
  }
  pin_boundary();
}

void TransitionMatrix::pin_boundary() {
  scores_.col(start()).setConstant(kForbidden);
  scores_.row(stop()).setConstant(kForbidden);
  scores_(start(), stop()) = kForbidden;
}

double sequence_score(const EmissionMatrix& emissions, const TransitionMatrix& transitions,
                      const LabelPath& path) {
  check_shapes(emissions, transitions);
  check_path(emissions, path);
  double score = transitions(transitions.start(), path[0]) + emissions(0, path[0]);
  for (std::size_t i = 1; i < path.size(); ++i) {
    score = score + transitions(path[i - 1], path[i]) +
            emissions(static_cast<Eigen::Index>(i), path[i]);
  }
  return score + transitions(path.back(), transitions.stop());
}

double log_partition(const EmissionMatrix& emissions, const TransitionMatrix& transitions) {
  check_shapes(emissions, transitions);
  return final_log_sum(forward_scores(emissions, transitions), transitions);
}

double log_likelihood(const EmissionMatrix& emissions, const TransitionMatrix& transitions,
                      const LabelPath& path) {
  return sequence_score(emissions, transitions, path) - log_partition(emissions, transitions);
}

Marginals forward_backward(const EmissionMatrix& emissions, const TransitionMatrix& transitions) {
  check_shapes(emissions, transitions);
  const Eigen::Index n = emissions.rows();
  const int k = transitions.num_tags();
  const Matrix alpha = forward_scores(emissions, transitions);
  const Matrix beta = backward_scores(emissions, transitions);
  const double log_z = final_log_sum(alpha, transitions);

  Marginals out;
  out.node = ((alpha + beta).array() - log_z).exp().matrix();
  out.edge.reserve(static_cast<std::size_t>(n - 1));
  for (Eigen::Index t = 0; t + 1 < n; ++t) {
    Matrix slab(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        slab(i, j) = std::exp(alpha(t, i) + transitions(i, j) + emissions(t + 1, j) +
                              beta(t + 1, j) - log_z);
      }
    }
    out.edge.push_back(std::move(slab));
  }
  out.start = out.node.row(0).transpose();
  out.stop = out.node.row(n - 1).transpose();
  return out;
}

Gradients nll_gradients(const EmissionMatrix& emissions, const TransitionMatrix& transitions,
                        const LabelPath& path) {
  check_shapes(emissions, transitions);
  check_path(emissions, path);
  const Marginals marginals = forward_backward(emissions, transitions);
  const int k = transitions.num_tags();

  Gradients grads;
  grads.emissions = marginals.node;
  grads.transitions = Matrix::Zero(k + 2, k + 2);
  for (const Matrix& slab : marginals.edge) grads.transitions.topLeftCorner(k, k) += slab;
  grads.transitions.row(transitions.start()).head(k) = marginals.start.transpose();
  grads.transitions.col(transitions.stop()).head(k) = marginals.stop;

  for (std::size_t i = 0; i < path.size(); ++i) {
    grads.emissions(static_cast<Eigen::Index>(i), path[i]) -= 1.0;
    if (i > 0) grads.transitions(path[i - 1], path[i]) -= 1.0;
  }
  grads.transitions(transitions.start(), path.front()) -= 1.0;
  grads.transitions(path.back(), transitions.stop()) -= 1.0;
  return grads;
}

Decoded viterbi_decode(const EmissionMatrix& emissions, const TransitionMatrix& transitions,
                       const TransitionMask* mask) {
  check_shapes(emissions, transitions);
  const Eigen::Index n = emissions.rows();
  const int k = transitions.num_tags();
  if (mask != nullptr && mask->num_tags() != k) {
    throw ShapeError(fmt::format("transition mask covers {} tags, model has {}", mask->num_tags(), k));
  }
  auto allowed = [&](TagIndex from, TagIndex to) {
    return mask == nullptr || mask->allowed(from, to);
  };

  Matrix best(n, k);
  Eigen::Matrix<TagIndex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> back(n, k);
  back.setZero();
  for (int j = 0; j < k; ++j) {
    best(0, j) = allowed(transitions.start(), j)
                     ? transitions(transitions.start(), j) + emissions(0, j)
                     : kNegInf;
  }
  for (Eigen::Index t = 1; t < n; ++t) {
    for (int j = 0; j < k; ++j) {
      double top = kNegInf;
      TagIndex arg = -1;
      for (int i = 0; i < k; ++i) {
        if (best(t - 1, i) == kNegInf || !allowed(i, j)) continue;
        const double candidate = best(t - 1, i) + transitions(i, j);
        if (arg < 0 || candidate > top) {
          top = candidate;
          arg = i;
        }
      }
      back(t, j) = arg;
      best(t, j) = arg < 0 ? kNegInf : top + emissions(t, j);
    }
  }

  double top = kNegInf;
  TagIndex last = -1;
  for (int j = 0; j < k; ++j) {
    if (best(n - 1, j) == kNegInf || !allowed(j, transitions.stop())) continue;
    const double candidate = best(n - 1, j) + transitions(j, transitions.stop());
    if (last < 0 || candidate > top) {
      top = candidate;
      last = j;
    }
  }
  if (last < 0) throw ValidationError("no label path satisfies the transition mask");

  Decoded out;
  out.score = top;
  out.path.resize(static_cast<std::size_t>(n));
  out.path[static_cast<std::size_t>(n - 1)] = last;
  for (Eigen::Index t = n - 1; t > 0; --t) {
    out.path[static_cast<std::size_t>(t - 1)] = back(t, out.path[static_cast<std::size_t>(t)]);
  }
  return out;
}

}  // namespace nertag::crf
