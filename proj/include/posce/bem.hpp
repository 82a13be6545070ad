#pragma once

// Complex-exponential basis expansion of a time-varying channel over one
// K-sample symbol, and the frequency-domain operators it induces.

#include "posce/core.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace posce {

enum class BemKind { ce, gce };

inline std::string to_string(BemKind kind) { return kind == BemKind::ce ? "CE" : "GCE"; }

struct BemConfig {
  BemKind kind = BemKind::ce;
  int K = 512;
  int Q = 4;
  int oversample = 1;  // ignored (forced to 1) for CE

  int effective_oversample() const { return kind == BemKind::ce ? 1 : oversample; }

  void validate() const {
    detail::require(K > 0, "BemConfig: K must be positive");
    detail::require(Q >= 0 && Q % 2 == 0, "BemConfig: Q must be even and non-negative");
    detail::require(Q + 1 <= K, "BemConfig: Q + 1 must not exceed K");
    detail::require(oversample >= 1, "BemConfig: oversample must be at least 1");
  }
};

/// Q = 2 ceil(a f_max T_d), clamped to at least 2.
inline int bem_order(double f_max, double packet_duration, int oversample = 1) {
  detail::require(f_max >= 0.0 && packet_duration > 0.0 && oversample >= 1,
                  "bem_order: inputs must be positive");
  const int q = 2 * static_cast<int>(std::ceil(oversample * f_max * packet_duration));
  return q < 2 ? 2 : q;
}

struct BasisSet {
  BemConfig config;
  std::vector<CVec> vectors;  // b_0 ... b_Q, each of length K

  int size() const { return static_cast<int>(vectors.size()); }
  /// Normalized frequency of b_q in subcarrier spacings: (q - Q/2) / a.
  double offset(int q) const {
    return static_cast<double>(q - config.Q / 2) / config.effective_oversample();
  }
};

inline BasisSet build_basis(const BemConfig& config) {
  config.validate();
  BasisSet basis{config, {}};
  const int a = config.effective_oversample();
  basis.vectors.reserve(static_cast<std::size_t>(config.Q + 1));
  for (int q = 0; q <= config.Q; ++q) {
    CVec b(config.K);
    const double step = kTwoPi * static_cast<double>(q - config.Q / 2) /
                        (static_cast<double>(a) * config.K);
    for (int k = 0; k < config.K; ++k) b(k) = std::polar(1.0, step * k);
    basis.vectors.push_back(std::move(b));
  }
  return basis;
}

/// D_q = F diag(b_q) F^H and its inverse G_q = F diag(1/b_q) F^H, stored densely.
/// Both are circulant; the basis is kept for O(K log K) application.
struct FreqBasis {
  BasisSet basis;
  std::vector<CMat> d_matrices;
  std::vector<CMat> g_matrices;

  int Q() const { return basis.config.Q; }
  int K() const { return basis.config.K; }

  CVec apply_d(int q, const CVec& v) const { return apply_circulant(basis.vectors.at(q), v); }
  CVec apply_g(int q, const CVec& v) const {
    return apply_circulant(basis.vectors.at(q).cwiseInverse(), v);
  }
};

inline FreqBasis freq_basis(const BasisSet& basis) {
  FreqBasis fb{basis, {}, {}};
  for (const CVec& b : basis.vectors) {
    for (Eigen::Index k = 0; k < b.size(); ++k)
      if (std::abs(b(k)) < 1e-12) throw Error("non-invertible basis");
    fb.d_matrices.push_back(circulant_matrix(circulant_column(b)));
    fb.g_matrices.push_back(circulant_matrix(circulant_column(b.cwiseInverse())));
  }
  return fb;
}

inline std::shared_ptr<const FreqBasis> make_freq_basis(const BemConfig& config) {
  return std::make_shared<const FreqBasis>(freq_basis(build_basis(config)));
}

/// First L columns of sqrt(K) F: entry (k, l) = exp(-i 2 pi k l / K).
struct PartialFourier {
  CMat matrix;

  int K() const { return static_cast<int>(matrix.rows()); }
  int L() const { return static_cast<int>(matrix.cols()); }

  CMat rows(const std::vector<int>& indices) const {
    CMat out(static_cast<Eigen::Index>(indices.size()), matrix.cols());
    for (std::size_t i = 0; i < indices.size(); ++i)
      out.row(static_cast<Eigen::Index>(i)) = matrix.row(indices[i]);
    return out;
  }

  /// Frequency response F_L c of delay-domain coefficients.
  CVec response(const CVec& coefficients) const { return matrix * coefficients; }
};

inline PartialFourier partial_fourier(int K, int L) {
  detail::require(K > 0 && L >= 0, "partial_fourier: bad dimensions");
  if (L > K) throw Error("partial_fourier: L must not exceed K");
  PartialFourier pf{CMat(K, L)};
  for (int l = 0; l < L; ++l)
    for (int k = 0; k < K; ++k)
      pf.matrix(k, l) = std::polar(1.0, -kTwoPi * static_cast<double>((static_cast<long>(k) * l) % K) / K);
  return pf;
}

}  // namespace posce
