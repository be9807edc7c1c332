// Independent reference implementations used as test oracles. Nothing here
// calls into the DP code it checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "nertag/tensor.hpp"

namespace oracle {

using nertag::Matrix;
using Path = std::vector<int>;

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                            double lo = -5.0, double hi = 5.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

// Every path of length n over k tags, in lexicographic order.
inline std::vector<Path> all_paths(int n, int k) {
  std::vector<Path> out;
  Path path(static_cast<std::size_t>(n), 0);
  while (true) {
    out.push_back(path);
    int pos = n - 1;
    while (pos >= 0 && path[static_cast<std::size_t>(pos)] == k - 1) {
      path[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++path[static_cast<std::size_t>(pos)];
  }
  return out;
}

// Term-by-term path score with START = k and STOP = k + 1, reading order.
inline double path_score(const Matrix& emissions, const Matrix& transitions, const Path& path) {
  const int k = static_cast<int>(emissions.cols());
  const int start = k;
  const int stop = k + 1;
  double total = transitions(start, path[0]) + emissions(0, path[0]);
  for (std::size_t i = 1; i < path.size(); ++i) {
    total = total + transitions(path[i - 1], path[i]) + emissions(static_cast<Eigen::Index>(i), path[i]);
  }
  return total + transitions(path.back(), stop);
}

inline double log_sum(const std::vector<double>& xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (const double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline double enumerate_log_partition(const Matrix& emissions, const Matrix& transitions) {
  std::vector<double> scores;
  for (const auto& path : all_paths(static_cast<int>(emissions.rows()), static_cast<int>(emissions.cols()))) {
    scores.push_back(path_score(emissions, transitions, path));
  }
  return log_sum(scores);
}

struct EnumeratedMarginals {
  Matrix node;
  std::vector<Matrix> edge;
};

inline EnumeratedMarginals enumerate_marginals(const Matrix& emissions, const Matrix& transitions) {
  const int n = static_cast<int>(emissions.rows());
  const int k = static_cast<int>(emissions.cols());
  const double log_z = enumerate_log_partition(emissions, transitions);
  EnumeratedMarginals out{Matrix::Zero(n, k), std::vector<Matrix>(static_cast<std::size_t>(n - 1), Matrix::Zero(k, k))};
  for (const auto& path : all_paths(n, k)) {
    const double p = std::exp(path_score(emissions, transitions, path) - log_z);
    for (int i = 0; i < n; ++i) out.node(i, path[static_cast<std::size_t>(i)]) += p;
    for (int i = 0; i + 1 < n; ++i) {
      out.edge[static_cast<std::size_t>(i)](path[static_cast<std::size_t>(i)], path[static_cast<std::size_t>(i + 1)]) += p;
    }
  }
  return out;
}

struct EnumeratedBest {
  Path path;
  double score = -std::numeric_limits<double>::infinity();
};

// Best path among those accepted by `allowed(from, to)` (START = k,
// STOP = k + 1). Among equal scores, prefers the smallest last tag, then the
// smallest second-to-last tag, and so on.
inline EnumeratedBest enumerate_best(const Matrix& emissions, const Matrix& transitions,
                                     const std::function<bool(int, int)>& allowed = {}) {
  const int n = static_cast<int>(emissions.rows());
  const int k = static_cast<int>(emissions.cols());
  EnumeratedBest best;
  bool found = false;
  auto reversed_less = [](const Path& a, const Path& b) {
    return std::lexicographical_compare(a.rbegin(), a.rend(), b.rbegin(), b.rend());
  };
  for (const auto& path : all_paths(n, k)) {
    if (allowed) {
      bool ok = allowed(k, path[0]) && allowed(path.back(), k + 1);
      for (std::size_t i = 1; ok && i < path.size(); ++i) ok = allowed(path[i - 1], path[i]);
      if (!ok) continue;
    }
    const double s = path_score(emissions, transitions, path);
    if (!found || s > best.score || (s == best.score && reversed_less(path, best.path))) {
      best = {path, s};
      found = true;
    }
  }
  return best;
}

// Central difference of f at x along coordinate `i` of `values`.
inline double central_difference(const std::function<double()>& f, double& coordinate, double step = 1e-5) {
  const double saved = coordinate;
  coordinate = saved + step;
  const double plus = f();
  coordinate = saved - step;
  const double minus = f();
  coordinate = saved;
  return (plus - minus) / (2.0 * step);
}

// |a - b| / max(|a|, |b|, floor). The floor keeps coordinates whose true
// gradient is zero from dividing by round-off.
inline double relative_error(double a, double b, double floor = 1e-4) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Scalar-loop LSTM step-through over rows of x (n x d); W is 4h x d, U is
// 4h x h, b is 4h, gates stacked i, f, g, o. Returns n x h hidden states
// in position order.
inline std::vector<std::vector<double>> scalar_lstm(const std::vector<std::vector<double>>& x,
                                                    const Matrix& w, const Matrix& u,
                                                    const std::vector<double>& b, bool reverse) {
  const std::size_t n = x.size();
  const std::size_t d = x.empty() ? 0 : x[0].size();
  const std::size_t h = static_cast<std::size_t>(u.cols());
  std::vector<std::vector<double>> out(n, std::vector<double>(h, 0.0));
  std::vector<double> hprev(h, 0.0), cprev(h, 0.0);
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    std::vector<double> hnew(h), cnew(h);
    for (std::size_t j = 0; j < h; ++j) {
      double z[4];
      for (std::size_t gate = 0; gate < 4; ++gate) {
        const std::size_t row = gate * h + j;
        double acc = b[row];
        for (std::size_t c = 0; c < d; ++c) acc += w(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c)) * x[t][c];
        for (std::size_t c = 0; c < h; ++c) acc += u(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c)) * hprev[c];
        z[gate] = acc;
      }
      const double i = sig(z[0]), f = sig(z[1]), g = std::tanh(z[2]), o = sig(z[3]);
      cnew[j] = f * cprev[j] + i * g;
      hnew[j] = o * std::tanh(cnew[j]);
    }
    out[t] = hnew;
    hprev = hnew;
    cprev = cnew;
  }
  return out;
}

}  // namespace oracle
