#pragma once

// Experiment configuration: a flat JSON object whose keys all have defaults.
// Unknown keys are rejected. The canonical dump (sorted keys, fixed number
// formatting) is hashed with FNV-1a and stamped on every CSV row.

#include "posce/bem.hpp"
#include "posce/channel.hpp"
#include "posce/eliminator.hpp"
#include "posce/geometry.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace posce::harness {

using json = nlohmann::json;

struct ExperimentConfig {
  // railway layout
  double d_max = 1200.0;
  double d_min = 50.0;
  double d_s = 2000.0;
  double d_c = 400.0;
  int num_cells = 2;

  // OFDM and channel
  int K = 512;
  int P = 30;
  int L = 64;
  int S = 8;
  std::string modulation = "QAM4";
  double packet_duration = 1.2e-3;
  double carrier_hz = 2.35e9;
  double lightspeed = 3.0e8;
  double speed_kmh = 500.0;
  double train_length = 240.0;
  std::vector<double> antenna_offsets{-120.0, 120.0};
  std::string bem = "CE";
  int oversample = 2;
  int bem_order = 0;  // 0: derived from the speed
  std::string channel_mode = "strict";
  std::string delay_profile = "uniform";
  double pilot_power = 1.0;
  bool random_pilot_phase = false;

  // receiver
  std::string elimination = "oracle";
  int band_radius = -1;  // -1: 0 for CE, 2 for GCE
  std::vector<std::string> schemes{"proposed:omp", "proposed:bp", "ici_free:omp", "no_elimination:omp", "ls:ls"};
  int omp_sparsity = 0;  // 0: use S
  double omp_residual_tol = -1.0;
  double bpdn_epsilon_scale = 1.0;
  int bpdn_max_iterations = 5000;

  // pilot design
  double delta = 0.2;
  int design_M = 100;
  std::string pilot_pattern_file;
  int scheme1_pilots = 48;

  // sweeps
  std::vector<double> snr_grid_db{0, 5, 10, 15, 20, 25, 30, 35, 40};
  double snr_db = 25.0;
  bool noiseless = false;
  std::vector<double> position_grid_m{1300, 1400, 1500, 1600, 1700, 1800, 1900, 2000, 2100, 2200,
                                      2300, 2400, 2500, 2600, 2700, 2800, 2900, 3000, 3100};
  std::vector<double> velocity_grid_kmh{100, 200, 300, 400, 500};
  double track_position_m = 2200.0;
  double position_error_m = 0.0;
  int trials = 500;
  std::uint64_t seed = 1;

  CellLayout layout() const { return {d_max, d_min, d_s, d_c, num_cells}; }
  DopplerParams doppler() const { return {carrier_hz, lightspeed, packet_duration}; }
  BemKind bem_kind() const { return bem == "GCE" ? BemKind::gce : BemKind::ce; }
  ChannelMode mode() const {
    return channel_mode == "continuous" ? ChannelMode::continuous_doppler : ChannelMode::strict_bem;
  }
  DelayProfile profile() const { return delay_profile == "exponential" ? DelayProfile::exponential : DelayProfile::uniform; }
  EliminationMode elimination_mode() const {
    if (elimination == "none") return EliminationMode::none();
    if (elimination == "physical")
      return EliminationMode::physical(band_radius >= 0 ? band_radius : EliminationMode::default_band_radius(bem_kind()));
    return EliminationMode::oracle();
  }
  int omp_sparsity_bound() const { return omp_sparsity > 0 ? omp_sparsity : S; }

  /// BEM configuration for a given speed (m/s).
  BemConfig bem_config(double speed) const {
    BemConfig c{bem_kind(), K, bem_order, oversample};
    if (c.kind == BemKind::ce) c.oversample = 1;
    if (bem_order == 0) c.Q = posce::bem_order(doppler().max_doppler(speed), packet_duration, c.effective_oversample());
    return c;
  }

  void validate() const;
};

inline void check(bool ok, const std::string& message) {
  if (!ok) throw Error("config: " + message);
}

inline void ExperimentConfig::validate() const {
  layout();
  doppler().validate();
  check(K > 0 && P >= 1 && P < K, "need 1 <= P < K");
  check(L >= 1 && L <= K, "need 1 <= L <= K");
  check(S >= 0 && S <= L, "need 0 <= S <= L");
  check(modulation == "QAM4", "only QAM4 modulation is supported");
  check(speed_kmh >= 0.0, "speed must be non-negative");
  check(!antenna_offsets.empty(), "need at least one antenna");
  TrainState{0.0, 0.0, antenna_offsets, train_length}.validate();
  check(bem == "CE" || bem == "GCE", "bem must be CE or GCE");
  check(oversample >= 1, "oversample must be at least 1");
  check(bem_order == 0 || (bem_order >= 2 && bem_order % 2 == 0), "bem_order must be 0 (auto) or even >= 2");
  check(channel_mode == "strict" || channel_mode == "continuous", "channel_mode must be strict or continuous");
  check(delay_profile == "uniform" || delay_profile == "exponential", "delay_profile must be uniform or exponential");
  check(pilot_power > 0.0, "pilot_power must be positive");
  check(elimination == "oracle" || elimination == "physical" || elimination == "none",
        "elimination must be oracle, physical or none");
  check(band_radius >= -1, "band_radius must be -1 (auto) or non-negative");
  check(!schemes.empty(), "schemes must be nonempty");
  check(omp_sparsity >= 0 && omp_sparsity <= L, "omp_sparsity out of range");
  check(bpdn_epsilon_scale >= 0.0, "bpdn_epsilon_scale must be non-negative");
  check(bpdn_max_iterations >= 1, "bpdn_max_iterations must be positive");
  check(delta > 0.0 && delta < 1.0, "delta must be in (0, 1)");
  check(design_M >= 1, "design_M must be positive");
  check(scheme1_pilots >= 2 && scheme1_pilots < K, "scheme1_pilots out of range");
  check(!snr_grid_db.empty() && !position_grid_m.empty() && !velocity_grid_kmh.empty(), "grids must be nonempty");
  check(trials >= 1, "trials must be at least 1");
}

#define POSCE_CONFIG_FIELDS(X)                                                                          \
  X(d_max) X(d_min) X(d_s) X(d_c) X(num_cells) X(K) X(P) X(L) X(S) X(modulation) X(packet_duration)     \
  X(carrier_hz) X(lightspeed) X(speed_kmh) X(train_length) X(antenna_offsets) X(bem) X(oversample)      \
  X(bem_order) X(channel_mode) X(delay_profile) X(pilot_power) X(random_pilot_phase) X(elimination)     \
  X(band_radius) X(schemes) X(omp_sparsity) X(omp_residual_tol) X(bpdn_epsilon_scale)                   \
  X(bpdn_max_iterations) X(delta) X(design_M) X(pilot_pattern_file) X(scheme1_pilots) X(snr_grid_db)    \
  X(snr_db) X(noiseless) X(position_grid_m) X(velocity_grid_kmh) X(track_position_m)                    \
  X(position_error_m) X(trials) X(seed)

inline json to_json(const ExperimentConfig& c) {
  json j = json::object();
#define POSCE_WRITE(name) j[#name] = c.name;
  POSCE_CONFIG_FIELDS(POSCE_WRITE)
#undef POSCE_WRITE
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  check(j.is_object(), "top level must be an object");
  ExperimentConfig c;
  std::set<std::string> known;
#define POSCE_READ(name)                                                                    \
  known.insert(#name);                                                                      \
  if (j.contains(#name)) {                                                                  \
    try {                                                                                   \
      j.at(#name).get_to(c.name);                                                           \
    } catch (const json::exception& e) {                                                    \
      throw Error(std::string("config: bad value for '") + #name + "': " + e.what());       \
    }                                                                                       \
  }
  POSCE_CONFIG_FIELDS(POSCE_READ)
#undef POSCE_READ
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw Error("config: unknown key '" + it.key() + "'");
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(std::string("config: parse error: ") + e.what());
  }
  return config_from_json(j);
}

/// Sorted keys, numbers printed with 17 significant digits.
inline std::string canonical_dump(const ExperimentConfig& c) { return to_json(c).dump(); }

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_dump(c))));
  return buf;
}

}  // namespace posce::harness
