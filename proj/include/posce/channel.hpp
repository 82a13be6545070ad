#pragma once

// Sparse single-Doppler channel realizations and their frequency-domain
// matrices. All taps of one link share one Doppler shift, so the time-varying
// taps factor as h(k, l) = phase(k) c(l) and the K x K matrix factors as
// H = F diag(phase) F^H diag(F_L c).

#include "posce/bem.hpp"
#include "posce/core.hpp"
#include "posce/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace posce {

using Rng = std::mt19937_64;

enum class ChannelMode { strict_bem, continuous_doppler };
enum class DelayProfile { uniform, exponential };

struct SparseBemChannel {
  std::vector<int> support;  // sorted delay indices in [0, L)
  std::vector<cplx> gains;
  int dominant_index = 0;
  int L = 0;
  double doppler_hz = 0.0;

  bool empty() const { return support.empty(); }

  /// The L-vector c* with the gains placed on the support.
  CVec coefficients() const {
    CVec c = CVec::Zero(L);
    for (std::size_t i = 0; i < support.size(); ++i) c(support[i]) = gains[i];
    return c;
  }
};

inline cplx complex_normal(Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  const double re = normal(rng);
  return {re, normal(rng)};
}

/// Draws S distinct delays uniformly from [0, L) and circular-normal gains
/// scaled by the delay profile, normalized to unit total power.
inline SparseBemChannel sample_channel(Rng& rng, int L, int S, int q_star, double doppler_hz,
                                       DelayProfile profile = DelayProfile::uniform,
                                       double exponential_decay_taps = 16.0) {
  if (S > L) throw Error("sample_channel: S must not exceed L");
  detail::require(S >= 0 && L > 0, "sample_channel: bad sizes");
  SparseBemChannel ch{{}, {}, q_star, L, doppler_hz};
  if (S == 0) return ch;

  std::vector<int> pool(static_cast<std::size_t>(L));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < S; ++i) {
    std::uniform_int_distribution<int> pick(i, L - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  ch.support.assign(pool.begin(), pool.begin() + S);
  std::sort(ch.support.begin(), ch.support.end());

  double total = 0.0;
  for (int delay : ch.support) {
    cplx g = complex_normal(rng);
    if (profile == DelayProfile::exponential) g *= std::exp(-0.5 * delay / exponential_decay_taps);
    total += std::norm(g);
    ch.gains.push_back(g);
  }
  const double scale = total > 0.0 ? 1.0 / std::sqrt(total) : 0.0;
  for (cplx& g : ch.gains) g *= scale;
  return ch;
}

/// Theorem-1 style realization for an antenna at local offset alpha: a sparse
/// channel with the position-derived dominant index inside coverage, the zero
/// channel outside.
inline SparseBemChannel sample_link_channel(Rng& rng, double alpha, double speed,
                                            const CellLayout& layout, const DopplerParams& params,
                                            const BemConfig& bem, int L, int S,
                                            DelayProfile profile = DelayProfile::uniform) {
  if (!in_coverage(alpha, layout)) return SparseBemChannel{{}, {}, bem.Q / 2, L, 0.0};
  const double f = doppler_shift(alpha, speed, params, layout);
  const int q = dominant_index_from_doppler(f, params, bem.Q, bem.effective_oversample());
  return sample_channel(rng, L, S, q, f, profile);
}

/// Per-sample phase of the link: the dominant basis vector in strict mode, the
/// exact Doppler rotation exp(i 2 pi f T_d k / K) in continuous mode.
inline CVec link_phase(const SparseBemChannel& ch, const BasisSet& basis, ChannelMode mode,
                       double packet_duration) {
  if (mode == ChannelMode::strict_bem) return basis.vectors.at(ch.dominant_index);
  const int K = basis.config.K;
  CVec phase(K);
  const double step = kTwoPi * ch.doppler_hz * packet_duration / K;
  for (int k = 0; k < K; ++k) phase(k) = std::polar(1.0, step * k);
  return phase;
}

/// K x L array of time-varying taps h(k, l).
inline CMat time_taps(const SparseBemChannel& ch, const BasisSet& basis, ChannelMode mode,
                      double packet_duration) {
  const CVec phase = link_phase(ch, basis, mode, packet_duration);
  return phase * ch.coefficients().transpose();
}

class FreqChannel {
 public:
  FreqChannel() = default;
  explicit FreqChannel(CMat matrix) : matrix_(std::move(matrix)) {
    diagonal_ = matrix_.diagonal();
    ici_ = matrix_;
    ici_.diagonal().setZero();
  }

  const CMat& matrix() const { return matrix_; }
  const CVec& diagonal() const { return diagonal_; }
  const CMat& ici() const { return ici_; }
  int K() const { return static_cast<int>(matrix_.rows()); }

  CVec apply(const CVec& x) const { return matrix_ * x; }

 private:
  CMat matrix_;
  CVec diagonal_;
  CMat ici_;
};

/// H = F Htilde F^H with Htilde(k, d) = h(k, (k - d) mod K).
inline FreqChannel freq_channel(const CMat& taps) {
  const Eigen::Index K = taps.rows();
  const Eigen::Index L = taps.cols();
  detail::require(L <= K, "freq_channel: more taps than samples");
  detail::require(taps.allFinite(), "freq_channel: taps must be finite");
  CMat time_matrix = CMat::Zero(K, K);
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index l = 0; l < L; ++l) time_matrix(k, (k - l + K) % K) = taps(k, l);

  // Right-multiplying by F^H is sqrt(K) idft per row, left-multiplying by F is
  // dft / sqrt(K) per column.
  CMat partial(K, K);
  for (Eigen::Index k = 0; k < K; ++k) partial.row(k) = idft(time_matrix.row(k).transpose()).transpose();
  CMat h(K, K);
  for (Eigen::Index n = 0; n < K; ++n) h.col(n) = dft(partial.col(n));
  return FreqChannel(std::move(h));
}

inline std::pair<CVec, CMat> split_ici(const FreqChannel& h) { return {h.diagonal(), h.ici()}; }

/// H = F diag(phase) F^H diag(response), applied in O(K log K).
struct FactoredChannel {
  CVec phase;     // time-domain rotation, length K
  CVec response;  // per-subcarrier gain F_L c, length K

  int K() const { return static_cast<int>(phase.size()); }

  CVec apply(const CVec& x) const { return apply_circulant(phase, response.cwiseProduct(x)); }

  CMat dense() const {
    CMat m = circulant_matrix(circulant_column(phase));
    for (Eigen::Index n = 0; n < m.cols(); ++n) m.col(n) *= response(n);
    return m;
  }

  FreqChannel to_freq_channel() const { return FreqChannel(dense()); }

  static FactoredChannel zero(int K) { return {CVec::Ones(K), CVec::Zero(K)}; }
};

inline FactoredChannel factored_channel(const SparseBemChannel& ch, const BasisSet& basis,
                                        ChannelMode mode, double packet_duration,
                                        const PartialFourier& fl) {
  return {link_phase(ch, basis, mode, packet_duration), fl.response(ch.coefficients())};
}

/// ||A - B||_F^2 for two factored channels in O(K log K). Each circulant column
/// is a cyclic shift of the first, so column n contributes
/// |a_n|^2 ||u||^2 + |b_n|^2 ||v||^2 - 2 Re(conj(a_n) b_n <u, v>).
inline double squared_distance(const FactoredChannel& a, const FactoredChannel& b) {
  detail::require(a.K() == b.K(), "squared_distance: dimension mismatch");
  const CVec u = circulant_column(a.phase);
  const CVec v = circulant_column(b.phase);
  const double uu = u.squaredNorm();
  const double vv = v.squaredNorm();
  const cplx uv = u.dot(v);  // conj(u)^T v
  double total = 0.0;
  for (Eigen::Index n = 0; n < a.response.size(); ++n) {
    const cplx an = a.response(n);
    const cplx bn = b.response(n);
    total += std::norm(an) * uu + std::norm(bn) * vv - 2.0 * std::real(std::conj(an) * bn * uv);
  }
  return total > 0.0 ? total : 0.0;
}

}  // namespace posce
