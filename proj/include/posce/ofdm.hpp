#pragma once

// Frequency-domain OFDM frames, the multi-cell received signal and its
// pilot-row interference split, and QAM4 mapping with zero-forcing detection.

#include "posce/channel.hpp"
#include "posce/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace posce {

enum class Modulation { qam4 };

struct FrameSpec {
  int K = 512;
  std::vector<int> pilots;  // sorted
  std::vector<int> guards;  // zero subcarriers, disjoint from pilots
  double pilot_power = 1.0;
  bool random_pilot_phase = false;
  Modulation modulation = Modulation::qam4;

  void validate() const {
    detail::require(K > 0, "FrameSpec: K must be positive");
    detail::require(pilot_power > 0.0, "FrameSpec: pilot power must be positive");
    std::vector<char> used(static_cast<std::size_t>(K), 0);
    for (int w : pilots) {
      detail::require(w >= 0 && w < K, "FrameSpec: pilot index out of range");
      detail::require(!used[static_cast<std::size_t>(w)], "FrameSpec: duplicate pilot index");
      used[static_cast<std::size_t>(w)] = 1;
    }
    for (int g : guards) {
      detail::require(g >= 0 && g < K, "FrameSpec: guard index out of range");
      detail::require(!used[static_cast<std::size_t>(g)], "FrameSpec: guard overlaps a pilot");
      used[static_cast<std::size_t>(g)] = 2;
    }
  }

  /// Subcarriers carrying data: everything that is neither pilot nor guard.
  std::vector<int> data_pattern() const {
    std::vector<char> used(static_cast<std::size_t>(K), 0);
    for (int w : pilots) used[static_cast<std::size_t>(w)] = 1;
    for (int g : guards) used[static_cast<std::size_t>(g)] = 1;
    std::vector<int> data;
    for (int k = 0; k < K; ++k)
      if (!used[static_cast<std::size_t>(k)]) data.push_back(k);
    return data;
  }
};

struct TxFrame {
  CVec symbols;
  std::vector<std::uint8_t> payload_bits;  // two per data subcarrier, in data-pattern order

  /// The frame with data subcarriers zeroed.
  CVec pilot_only(const std::vector<int>& pilots) const {
    CVec out = CVec::Zero(symbols.size());
    for (int w : pilots) out(w) = symbols(w);
    return out;
  }
};

/// Gray-mapped unit-power QPSK: bit 0 picks the in-phase sign, bit 1 the quadrature sign.
inline cplx qam4_map(std::uint8_t b0, std::uint8_t b1) {
  const double s = 1.0 / std::sqrt(2.0);
  return {b0 ? -s : s, b1 ? -s : s};
}

inline void qam4_demap(cplx symbol, std::uint8_t& b0, std::uint8_t& b1) {
  b0 = symbol.real() < 0.0 ? 1 : 0;
  b1 = symbol.imag() < 0.0 ? 1 : 0;
}

inline TxFrame build_frame(Rng& rng, const FrameSpec& spec) {
  spec.validate();
  TxFrame frame{CVec::Zero(spec.K), {}};
  const double amplitude = std::sqrt(spec.pilot_power);
  std::uniform_int_distribution<int> quadrant(0, 3);
  for (int w : spec.pilots) {
    cplx symbol = amplitude;
    if (spec.random_pilot_phase) symbol *= std::polar(1.0, kTwoPi * (quadrant(rng) + 0.5) / 4.0);
    frame.symbols(w) = symbol;
  }
  std::bernoulli_distribution bit(0.5);
  const std::vector<int> data = spec.data_pattern();
  frame.payload_bits.reserve(2 * data.size());
  for (int d : data) {
    const std::uint8_t b0 = bit(rng) ? 1 : 0;
    const std::uint8_t b1 = bit(rng) ? 1 : 0;
    frame.payload_bits.push_back(b0);
    frame.payload_bits.push_back(b1);
    frame.symbols(d) = qam4_map(b0, b1);
  }
  return frame;
}

struct RxSignal {
  CVec samples;
  double noise_variance = 0.0;
};

/// Circular complex Gaussian vector with the given per-entry variance.
inline CVec complex_noise(Rng& rng, Eigen::Index K, double variance) {
  CVec n(K);
  const double scale = std::sqrt(variance);
  for (Eigen::Index k = 0; k < K; ++k) n(k) = scale * complex_normal(rng);
  return n;
}

/// Received signal split into its per-cell terms H_t x_t and the noise.
struct Reception {
  std::vector<CVec> per_cell;
  CVec noise;
  double noise_variance = 0.0;

  CVec noiseless() const {
    CVec sum = CVec::Zero(noise.size());
    for (const CVec& c : per_cell) sum += c;
    return sum;
  }
  RxSignal composite() const { return {noiseless() + noise, noise_variance}; }
};

template <class Channel>
Reception receive(const std::vector<Channel>& channels, const std::vector<TxFrame>& frames,
                  double noise_variance, Rng& rng) {
  if (channels.size() != frames.size()) throw Error("transmit: dimension mismatch");
  detail::require(noise_variance >= 0.0, "transmit: noise variance must be non-negative");
  detail::require(!frames.empty(), "transmit: need at least one cell");
  const Eigen::Index K = frames.front().symbols.size();
  Reception rx;
  for (std::size_t t = 0; t < channels.size(); ++t) {
    if (channels[t].K() != K || frames[t].symbols.size() != K) throw Error("transmit: dimension mismatch");
    rx.per_cell.push_back(channels[t].apply(frames[t].symbols));
  }
  rx.noise = complex_noise(rng, K, noise_variance);
  rx.noise_variance = noise_variance;
  return rx;
}

/// y = sum_t H_t x_t + n.
template <class Channel>
RxSignal transmit(const std::vector<Channel>& channels, const std::vector<TxFrame>& frames,
                  double noise_variance, Rng& rng) {
  return receive(channels, frames, noise_variance, rng).composite();
}

/// Pilot-row split of the received signal for serving cell t: the own pilot
/// term, ICI from the own data, everything from the other cells, and noise.
/// The four vectors add up to y on the pilot rows.
struct InterferenceDecomposition {
  double desired_power = 0.0;
  double self_ici_power = 0.0;
  double mci_power = 0.0;
  double noise_power = 0.0;
  CVec desired, self_ici, mci, noise;

  CVec total() const { return desired + self_ici + mci + noise; }
};

inline InterferenceDecomposition make_decomposition(CVec desired, CVec self_ici, CVec mci, CVec noise) {
  InterferenceDecomposition out;
  out.desired_power = power(desired);
  out.self_ici_power = power(self_ici);
  out.mci_power = power(mci);
  out.noise_power = power(noise);
  out.desired = std::move(desired);
  out.self_ici = std::move(self_ici);
  out.mci = std::move(mci);
  out.noise = std::move(noise);
  return out;
}

template <class Channel>
InterferenceDecomposition decompose_interference(const std::vector<Channel>& channels,
                                                 const std::vector<TxFrame>& frames,
                                                 const std::vector<int>& pilots, std::size_t cell,
                                                 const CVec* noise = nullptr) {
  if (channels.size() != frames.size() || cell >= channels.size())
    throw Error("decompose_interference: dimension mismatch");
  const CVec& x = frames[cell].symbols;
  const CVec pilot_part = frames[cell].pilot_only(pilots);
  const CVec data_part = x - pilot_part;
  CVec other = CVec::Zero(x.size());
  for (std::size_t t = 0; t < channels.size(); ++t)
    if (t != cell) other += channels[t].apply(frames[t].symbols);
  const CVec n = noise ? *noise : CVec::Zero(x.size());
  return make_decomposition(gather(channels[cell].apply(pilot_part), pilots),
                            gather(channels[cell].apply(data_part), pilots), gather(other, pilots),
                            gather(n, pilots));
}

struct Detection {
  std::vector<std::uint8_t> bits;
  int erasures = 0;
};

/// X(d) = y(d) / Delta(d) on the data subcarriers, then nearest-point QAM4
/// demapping. A zero estimate is an erasure and decodes as bits (0, 0).
inline Detection zf_detect(const CVec& equalized, const CVec& diag_estimates,
                           const std::vector<int>& data_pattern) {
  detail::require(equalized.size() == diag_estimates.size(), "zf_detect: dimension mismatch");
  Detection out;
  out.bits.reserve(2 * data_pattern.size());
  for (int d : data_pattern) {
    std::uint8_t b0 = 0, b1 = 0;
    const cplx h = diag_estimates(d);
    const cplx symbol = h == cplx(0.0, 0.0) ? cplx(0.0, 0.0) : equalized(d) / h;
    if (h == cplx(0.0, 0.0) || !std::isfinite(symbol.real()) || !std::isfinite(symbol.imag()))
      ++out.erasures;
    else
      qam4_demap(symbol, b0, b1);
    out.bits.push_back(b0);
    out.bits.push_back(b1);
  }
  return out;
}

inline std::size_t count_bit_errors(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  detail::require(a.size() == b.size(), "count_bit_errors: length mismatch");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < a.size(); ++i) errors += (a[i] != b[i]) ? 1 : 0;
  return errors;
}

/// Uncoded Gray QPSK over AWGN with SNR = E_s / sigma^2: Q(sqrt(SNR)).
inline double qpsk_awgn_ber(double snr_linear) { return 0.5 * std::erfc(std::sqrt(snr_linear / 2.0)); }

}  // namespace posce
