#pragma once

#include <optional>
#include <vector>

#include "nertag/tagscheme.hpp"
#include "nertag/tensor.hpp"

namespace nertag::crf {

// Finite stand-in for -inf on transitions into START and out of STOP.
inline constexpr double kForbidden = -1e4;

// n x k per-token tag scores.
using EmissionMatrix = Matrix;

using LabelPath = std::vector<TagIndex>;

// (k+2) x (k+2) transition scores. Row = from, column = to; index k is START
// and k + 1 is STOP. Column START, row STOP and the START -> STOP cell are
// pinned at kForbidden and never reach any path.
class TransitionMatrix {
 public:
  // All-zero transitions with the boundary cells pinned.
  explicit TransitionMatrix(int num_tags);
  // Takes explicit scores; boundary cells are overwritten with kForbidden.
  explicit TransitionMatrix(Matrix scores);

  int num_tags() const { return static_cast<int>(scores_.rows()) - 2; }
  TagIndex start() const { return num_tags(); }
  TagIndex stop() const { return num_tags() + 1; }

  double operator()(TagIndex from, TagIndex to) const { return scores_(from, to); }
  const Matrix& scores() const { return scores_; }
  // Mutable access for optimizers; call pin_boundary() after writing.
  Matrix& mutable_scores() { return scores_; }

  // True for the cells that are never part of a path.
  bool is_fixed(TagIndex from, TagIndex to) const {
    return to == start() || from == stop() || (from == start() && to == stop());
  }
  void pin_boundary();

  bool operator==(const TransitionMatrix& other) const { return scores_ == other.scores_; }

 private:
  Matrix scores_;
};

struct Marginals {
  Matrix node;               // n x k, node(i, j) = p(y_i = j)
  std::vector<Matrix> edge;  // n - 1 slabs of k x k, edge[i](j, j') = p(y_i = j, y_{i+1} = j')
  Vector start;              // p(START -> j)
  Vector stop;               // p(j -> STOP)
};

struct Gradients {
  Matrix emissions;    // n x k
  Matrix transitions;  // (k+2) x (k+2), zero on fixed cells
};

struct Decoded {
  LabelPath path;
  double score = 0.0;
};

// Sum of transition scores START -> y_1 -> ... -> y_n -> STOP plus the
// emission score of every y_i, accumulated left to right.
double sequence_score(const EmissionMatrix& emissions, const TransitionMatrix& transitions,
                      const LabelPath& path);

// log of the sum of exp(sequence_score) over all k^n paths (forward algorithm).
double log_partition(const EmissionMatrix& emissions, const TransitionMatrix& transitions);

double log_likelihood(const EmissionMatrix& emissions, const TransitionMatrix& transitions,
                      const LabelPath& path);

Marginals forward_backward(const EmissionMatrix& emissions, const TransitionMatrix& transitions);

// Gradients of -log_likelihood with respect to emissions and transitions.
Gradients nll_gradients(const EmissionMatrix& emissions, const TransitionMatrix& transitions,
                        const LabelPath& path);

// Highest-scoring path, optionally restricted to transitions allowed by
// `mask`. Ties go to the lowest tag index at every backtracking step.
// Throws ValidationError when the mask admits no path.
Decoded viterbi_decode(const EmissionMatrix& emissions, const TransitionMatrix& transitions,
                       const TransitionMask* mask = nullptr);

}  // namespace nertag::crf
