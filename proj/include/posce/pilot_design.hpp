#pragma once

// Pilot placement by average-coherence minimization of F_L(w, :).

#include "posce/bem.hpp"
#include "posce/core.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace posce {

struct PilotPattern {
  int K = 0;
  std::vector<int> indices;  // strictly increasing

  int size() const { return static_cast<int>(indices.size()); }

  void validate() const {
    detail::require(K > 0, "PilotPattern: K must be positive");
    for (std::size_t i = 0; i < indices.size(); ++i) {
      detail::require(indices[i] >= 0 && indices[i] < K, "PilotPattern: index out of range");
      detail::require(i == 0 || indices[i - 1] < indices[i], "PilotPattern: indices must be strictly increasing");
    }
  }
};

struct CoherenceParams {
  double delta = 0.1;

  void validate() const { detail::require(delta > 0.0 && delta < 1.0, "CoherenceParams: delta must be in (0, 1)"); }
};

/// Mean of |<z_i, z_j>| / (||z_i|| ||z_j||) over ordered pairs i != j whose
/// value is at least delta; 0 when no pair qualifies.
inline double average_coherence(const CMat& matrix, const CoherenceParams& params) {
  params.validate();
  const Eigen::Index n = matrix.cols();
  CMat z = matrix;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double norm = z.col(j).norm();
    if (norm == 0.0) throw Error("degenerate column");
    z.col(j) /= norm;
  }
  const CMat gram = z.adjoint() * z;
  double sum = 0.0;
  long count = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double g = std::abs(gram(i, j));
      if (g >= params.delta) sum += g, ++count;
    }
  return count ? sum / static_cast<double>(count) : 0.0;
}

/// Same value for F_L(w, :) in O(P L). Columns i and j of a partial Fourier
/// matrix have normalized inner product |sum_p exp(-i 2 pi w_p d / K)| / P with
/// d = j - i, and 2 (L - d) ordered pairs share each |d|.
inline double pattern_coherence(const std::vector<int>& pattern, int K, int L, const CoherenceParams& params) {
  params.validate();
  detail::require(!pattern.empty(), "degenerate column");
  const double P = static_cast<double>(pattern.size());
  double sum = 0.0, count = 0.0;
  for (int d = 1; d < L; ++d) {
    cplx acc = 0.0;
    for (int w : pattern)
      acc += std::polar(1.0, -kTwoPi * static_cast<double>((static_cast<long>(w) * d) % K) / K);
    const double g = std::abs(acc) / P;
    if (g >= params.delta) {
      const double pairs = 2.0 * (L - d);
      sum += pairs * g;
      count += pairs;
    }
  }
  return count > 0.0 ? sum / count : 0.0;
}

/// w_i = round(i K / P) mod K, collisions pushed forward to the next free index.
inline PilotPattern equidistant_pattern(int K, int P) {
  detail::require(K > 0 && P >= 0 && P <= K, "equidistant_pattern: need 0 <= P <= K");
  std::vector<char> used(static_cast<std::size_t>(K), 0);
  PilotPattern out{K, {}};
  for (int i = 0; i < P; ++i) {
    int w = static_cast<int>(std::lround(static_cast<double>(i) * K / P)) % K;
    while (used[static_cast<std::size_t>(w)]) w = (w + 1) % K;
    used[static_cast<std::size_t>(w)] = 1;
    out.indices.push_back(w);
  }
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

/// Replaces the element at `position` (in sorted order) by a uniform pick from
/// the subcarriers not in the pattern.
template <class Rng>
PilotPattern mutate(const PilotPattern& pattern, int position, Rng& rng) {
  const int P = pattern.size();
  detail::require(pattern.K > P, "mutate: need K > P");
  detail::require(position >= 0 && position < P, "mutate: position out of range");
  std::vector<int> complement;
  complement.reserve(static_cast<std::size_t>(pattern.K - P));
  std::size_t next = 0;
  for (int k = 0; k < pattern.K; ++k) {
    if (next < pattern.indices.size() && pattern.indices[next] == k)
      ++next;
    else
      complement.push_back(k);
  }
  std::uniform_int_distribution<std::size_t> pick(0, complement.size() - 1);
  PilotPattern out = pattern;
  out.indices[static_cast<std::size_t>(position)] = complement[pick(rng)];
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

/// Search trace. gamma has one entry per step label 0..M P; label kappa names
/// the step at which the current pattern was adopted.
struct SearchState {
  std::vector<double> gamma;
  PilotPattern current, tilde, best;
  int m = 0;
  int kappa = 0;
  int iota = 0;
  double current_coherence = 0.0;
  double best_coherence = 0.0;
  double initial_coherence = 0.0;
  std::vector<double> accepted_coherences;  // objective after each accepted move, in order
};

/// Stochastic search over M P single-element replacements. A move is taken
/// only when it strictly lowers the coherence. The occupation vector is a
/// running average of the indicator of the current state, and the reported
/// pattern is the one with the largest occupation (first maximum on ties).
template <class Rng>
SearchState run_pilot_search(int K, int L, int P, int M, const CoherenceParams& params, Rng& rng,
                             const PilotPattern* initial = nullptr) {
  params.validate();
  detail::require(P >= 1 && P < K, "design_pilots: need 1 <= P < K");
  detail::require(L >= 1 && L <= K, "design_pilots: need 1 <= L <= K");
  detail::require(M >= 1, "design_pilots: M must be at least 1");
  const int iterations = M * P;

  SearchState s;
  s.current = initial ? *initial : equidistant_pattern(K, P);
  s.current.validate();
  detail::require(s.current.size() == P && s.current.K == K, "design_pilots: initial pattern has wrong shape");
  s.best = s.current;
  s.gamma.assign(static_cast<std::size_t>(iterations) + 1, 0.0);
  s.gamma[0] = 1.0;
  s.current_coherence = pattern_coherence(s.current.indices, K, L, params);
  s.best_coherence = s.current_coherence;
  s.initial_coherence = s.current_coherence;

  for (int n = 0; n < M; ++n) {
    for (int p = 0; p < P; ++p) {
      const int m = n * P + p;
      s.m = m;
      s.tilde = mutate(s.current, p, rng);
      const double candidate = pattern_coherence(s.tilde.indices, K, L, params);
      if (candidate < s.current_coherence) {
        s.current = s.tilde;
        s.current_coherence = candidate;
        s.kappa = m + 1;
        s.accepted_coherences.push_back(candidate);
      }
      const double eta = 1.0 / (m + 1);
      for (double& g : s.gamma) g *= (1.0 - eta);
      s.gamma[static_cast<std::size_t>(s.kappa)] += eta;
      if (s.gamma[static_cast<std::size_t>(s.kappa)] > s.gamma[static_cast<std::size_t>(s.iota)]) {
        s.best = s.current;
        s.best_coherence = s.current_coherence;
        s.iota = s.kappa;
      }
    }
  }
  s.m = iterations;
  return s;
}

template <class Rng>
PilotPattern design_pilots(int K, int L, int P, int M, const CoherenceParams& params, Rng& rng) {
  return run_pilot_search(K, L, P, M, params, rng).best;
}

/// Every P-subset of [0, K) with the smallest coherence (lexicographically
/// first on ties). Only for toy sizes.
inline PilotPattern exhaustive_optimum(int K, int L, int P, const CoherenceParams& params, double* value = nullptr) {
  detail::require(P >= 1 && P <= K && K <= 24, "exhaustive_optimum: toy sizes only");
  std::vector<int> idx(static_cast<std::size_t>(P));
  for (int i = 0; i < P; ++i) idx[static_cast<std::size_t>(i)] = i;
  PilotPattern best{K, idx};
  double best_val = pattern_coherence(idx, K, L, params);
  while (true) {
    int i = P - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == K - P + i) --i;
    if (i < 0) break;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < P; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    const double v = pattern_coherence(idx, K, L, params);
    if (v < best_val) best_val = v, best.indices = idx;
  }
  if (value) *value = best_val;
  return best;
}

}  // namespace posce
