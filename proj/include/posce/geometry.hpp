#pragma once

// Railway geometry: base stations spaced d_s apart along a straight track,
// each at distance d_min from it and covering a radius d_max. Cell t's
// coverage starts at A_t = (t-1) d_s, is closest to the station at
// B_t = A_t + d0, and ends at C_t = A_t + 2 d0.

#include "posce/core.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace posce {

class CellLayout {
 public:
  CellLayout(double d_max, double d_min, double d_s, double d_c, int num_cells)
      : d_max_(d_max), d_min_(d_min), d_s_(d_s), d_c_(d_c), num_cells_(num_cells) {
    detail::require(d_min > 0.0, "CellLayout: d_min must be positive");
    detail::require(d_max > d_min, "CellLayout: d_max must exceed d_min");
    detail::require(d_s > 0.0, "CellLayout: d_s must be positive");
    detail::require(num_cells >= 1, "CellLayout: need at least one cell");
    d0_ = std::sqrt(d_max * d_max - d_min * d_min);
  }

  /// 1200 m coverage, 50 m to track, 2000 m spacing, 400 m overlap, two cells.
  static CellLayout defaults() { return {1200.0, 50.0, 2000.0, 400.0, 2}; }

  double d_max() const { return d_max_; }
  double d_min() const { return d_min_; }
  double d_s() const { return d_s_; }
  double d_c() const { return d_c_; }
  int num_cells() const { return num_cells_; }
  double d0() const { return d0_; }

  /// Track coordinate of A_t (cells are numbered from 1).
  double cell_origin(int cell) const { return (cell - 1) * d_s_; }
  /// Overlap implied by the geometry; positive when adjacent cells overlap.
  double overlap_length() const { return 2.0 * d0_ - d_s_; }

 private:
  double d_max_, d_min_, d_s_, d_c_;
  int num_cells_;
  double d0_;
};

struct TrainState {
  double track_position = 0.0;  // m, reference point measured from A_1
  double speed = 0.0;           // m/s
  std::vector<double> antenna_offsets{0.0};
  double length = 240.0;

  void validate() const {
    detail::require(speed >= 0.0, "TrainState: speed must be non-negative");
    detail::require(!antenna_offsets.empty(), "TrainState: need at least one antenna");
    detail::require(std::is_sorted(antenna_offsets.begin(), antenna_offsets.end()),
                    "TrainState: antenna offsets must be sorted");
    detail::require(antenna_offsets.back() - antenna_offsets.front() <= length,
                    "TrainState: antennas span more than the train length");
  }

  double antenna_position(std::size_t r) const { return track_position + antenna_offsets.at(r); }
};

struct DopplerParams {
  double carrier_hz = 2.35e9;
  double lightspeed = 3.0e8;
  double packet_duration = 1.2e-3;

  void validate() const {
    detail::require(carrier_hz > 0.0 && lightspeed > 0.0 && packet_duration > 0.0,
                    "DopplerParams: all fields must be positive");
  }
  double max_doppler(double speed) const { return speed / lightspeed * carrier_hz; }
};

inline double kmh_to_ms(double kmh) { return kmh / 3.6; }

inline double local_offset(double track_position, int cell, const CellLayout& layout) {
  return track_position - layout.cell_origin(cell);
}

inline bool in_coverage(double alpha, const CellLayout& layout) {
  return alpha >= 0.0 && alpha <= 2.0 * layout.d0();
}

/// cos of the angle between the direction of travel and the line to the station.
inline double approach_cosine(double alpha, const CellLayout& layout) {
  const double along = layout.d0() - alpha;
  return along / std::hypot(along, layout.d_min());
}

/// Signed Doppler shift seen at local offset alpha; positive while approaching.
inline double doppler_shift(double alpha, double speed, const DopplerParams& params,
                            const CellLayout& layout) {
  if (!in_coverage(alpha, layout)) throw Error("antenna outside cell coverage");
  return params.max_doppler(speed) * approach_cosine(alpha, layout);
}

namespace detail {

// ceil for the approaching half (scaled >= 0 or position up to B_t), floor otherwise.
inline int quantize_index(double scaled, bool ceil_branch, int Q) {
  const double shifted = ceil_branch ? std::ceil(scaled) : std::floor(scaled);
  const long q = static_cast<long>(shifted) + Q / 2;
  if (q < 0 || q > Q) throw Error("Doppler exceeds model order");
  return static_cast<int>(q);
}

}  // namespace detail

inline int dominant_index_from_doppler(double doppler_hz, const DopplerParams& params, int Q,
                                       int oversample = 1) {
  detail::require(Q % 2 == 0, "dominant_index: Q must be even");
  const double scaled = oversample * params.packet_duration * doppler_hz;
  return detail::quantize_index(scaled, doppler_hz >= 0.0, Q);
}

/// Position form of the index mapping. F is T_d * f_max; the boundary alpha == d0
/// takes the ceil branch.
inline int dominant_index_from_position(double alpha, const CellLayout& layout, double F, int Q,
                                        int oversample = 1) {
  detail::require(Q % 2 == 0, "dominant_index: Q must be even");
  if (!in_coverage(alpha, layout)) throw Error("antenna outside cell coverage");
  const double scaled = oversample * F * approach_cosine(alpha, layout);
  return detail::quantize_index(scaled, alpha <= layout.d0(), Q);
}

inline std::vector<int> serving_cells(double track_position, const CellLayout& layout) {
  std::vector<int> cells;
  for (int t = 1; t <= layout.num_cells(); ++t)
    if (in_coverage(local_offset(track_position, t, layout), layout)) cells.push_back(t);
  return cells;
}

inline double perturb_position(double track_position, double error) { return track_position + error; }

}  // namespace posce
