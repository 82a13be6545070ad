#pragma once

// Position-driven interference removal: pick the component of the received
// signal that belongs to one cell (MCI step), then undo that link's Doppler
// mixing with G_{q*} (ICI step).

#include "posce/bem.hpp"
#include "posce/core.hpp"
#include "posce/ofdm.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace posce {

enum class EliminationKind { none, oracle, physical };

inline std::string to_string(EliminationKind kind) {
  switch (kind) {
    case EliminationKind::none: return "none";
    case EliminationKind::oracle: return "oracle";
    case EliminationKind::physical: return "physical";
  }
  return "unknown";
}

struct EliminationMode {
  EliminationKind kind = EliminationKind::oracle;
  int band_radius = 0;  // physical mode only

  static EliminationMode none() { return {EliminationKind::none, 0}; }
  static EliminationMode oracle() { return {EliminationKind::oracle, 0}; }
  static EliminationMode physical(int rho) {
    detail::require(rho >= 0, "EliminationMode: band radius must be non-negative");
    return {EliminationKind::physical, rho};
  }
  /// 0 for CE, 2 for GCE.
  static int default_band_radius(BemKind kind) { return kind == BemKind::ce ? 0 : 2; }
};

/// G_q for every q plus, for physical mode, one row mask per q marking the
/// subcarriers within rho of a pilot's Doppler image w_p + (q - Q/2)/a.
class EliminatorBank {
 public:
  EliminatorBank(std::shared_ptr<const FreqBasis> basis, std::vector<int> pilots, int band_radius)
      : basis_(std::move(basis)), pilots_(std::move(pilots)), band_radius_(band_radius) {
    detail::require(basis_ != nullptr, "EliminatorBank: missing basis");
    detail::require(band_radius >= 0, "EliminatorBank: band radius must be non-negative");
    const int K = basis_->K();
    for (int w : pilots_) detail::require(w >= 0 && w < K, "EliminatorBank: pilot out of range");
    for (int q = 0; q <= basis_->Q(); ++q) {
      std::vector<char> mask(static_cast<std::size_t>(K), 0);
      const double offset = basis_->basis.offset(q);
      const double reach = band_radius + 0.5 + 1e-9;
      for (int m = 0; m < K; ++m) {
        for (int w : pilots_) {
          double dist = std::fmod(std::abs(m - (w + offset)), static_cast<double>(K));
          dist = std::min(dist, K - dist);
          if (dist <= reach) {
            mask[static_cast<std::size_t>(m)] = 1;
            break;
          }
        }
      }
      masks_.push_back(std::move(mask));
    }
  }

  const FreqBasis& basis() const { return *basis_; }
  int Q() const { return basis_->Q(); }
  int K() const { return basis_->K(); }
  int band_radius() const { return band_radius_; }
  const std::vector<int>& pilots() const { return pilots_; }
  const std::vector<char>& mask(int q) const {
    check_index(q);
    return masks_[static_cast<std::size_t>(q)];
  }

  void check_index(int q) const {
    if (q < 0 || q > basis_->Q()) throw Error("eliminator: dominant index out of range");
  }

  CVec apply_mask(int q, const CVec& v) const {
    const std::vector<char>& m = mask(q);
    CVec out = v;
    for (Eigen::Index k = 0; k < out.size(); ++k)
      if (!m[static_cast<std::size_t>(k)]) out(k) = 0.0;
    return out;
  }

 private:
  std::shared_ptr<const FreqBasis> basis_;
  std::vector<int> pilots_;
  int band_radius_;
  std::vector<std::vector<char>> masks_;
};

/// MCI step. Oracle mode keeps the cell's own term plus the full noise (noise
/// is duplicated into every branch); physical mode masks the composite signal;
/// none passes the composite through.
inline CVec select_component(const Reception& rx, std::size_t cell, int q_star,
                             const EliminationMode& mode, const EliminatorBank& bank) {
  bank.check_index(q_star);
  detail::require(cell < rx.per_cell.size(), "select_component: cell out of range");
  switch (mode.kind) {
    case EliminationKind::none: return rx.composite().samples;
    case EliminationKind::oracle: return rx.per_cell[cell] + rx.noise;
    case EliminationKind::physical: return bank.apply_mask(q_star, rx.composite().samples);
  }
  return rx.composite().samples;
}

/// ICI step: G_{q*} y.
inline CVec ici_eliminate(const CVec& y, int q_star, const EliminatorBank& bank) {
  bank.check_index(q_star);
  detail::require(y.size() == bank.K(), "ici_eliminate: dimension mismatch");
  return bank.basis().apply_g(q_star, y);
}

/// Full pipeline for one (cell, antenna) branch. Mode none skips G as well.
inline CVec eliminate(const Reception& rx, std::size_t cell, int q_star, const EliminationMode& mode,
                      const EliminatorBank& bank) {
  CVec y = select_component(rx, cell, q_star, mode, bank);
  if (mode.kind == EliminationKind::none) return y;
  return ici_eliminate(y, q_star, bank);
}

/// The elimination pipeline as a linear map on one signal term. Oracle mode
/// removes other-cell terms outright, so `own_cell` says which side v is on.
inline CVec apply_elimination(const CVec& v, bool own_cell, int q_star, const EliminationMode& mode,
                              const EliminatorBank& bank) {
  switch (mode.kind) {
    case EliminationKind::none: return v;
    case EliminationKind::oracle:
      return own_cell ? ici_eliminate(v, q_star, bank) : CVec::Zero(v.size());
    case EliminationKind::physical: return ici_eliminate(bank.apply_mask(q_star, v), q_star, bank);
  }
  return v;
}

struct ResidualReport {
  InterferenceDecomposition before;
  InterferenceDecomposition after;
};

/// Pilot-row desired / ICI / MCI / noise terms before and after elimination,
/// from simulator ground truth.
template <class Channel>
ResidualReport residual_report(const std::vector<Channel>& channels, const std::vector<TxFrame>& frames,
                               const CVec& noise, const std::vector<int>& pilots, std::size_t cell,
                               int q_star, const EliminationMode& mode, const EliminatorBank& bank) {
  ResidualReport report;
  report.before = decompose_interference(channels, frames, pilots, cell, &noise);

  const CVec& x = frames.at(cell).symbols;
  const CVec pilot_part = frames[cell].pilot_only(pilots);
  const CVec desired = channels[cell].apply(pilot_part);
  const CVec ici = channels[cell].apply(x - pilot_part);
  CVec mci = CVec::Zero(x.size());
  for (std::size_t t = 0; t < channels.size(); ++t)
    if (t != cell) mci += apply_elimination(channels[t].apply(frames[t].symbols), false, q_star, mode, bank);
  report.after = make_decomposition(gather(apply_elimination(desired, true, q_star, mode, bank), pilots),
                                    gather(apply_elimination(ici, true, q_star, mode, bank), pilots),
                                    gather(mci, pilots),
                                    gather(apply_elimination(noise, true, q_star, mode, bank), pilots));
  return report;
}

}  // namespace posce
