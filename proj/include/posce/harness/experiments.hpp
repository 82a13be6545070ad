#pragma once

// Monte Carlo sweeps. A sweep point fixes the geometry (track position and
// speed); every trial draws channels, frames and unit noise from its own
// streams, runs each configured receiver scheme, and evaluates all SNR values
// at once by scaling the noise part of the (linear) observation.

#include "posce/bem.hpp"
#include "posce/channel.hpp"
#include "posce/eliminator.hpp"
#include "posce/estimator.hpp"
#include "posce/geometry.hpp"
#include "posce/harness/config.hpp"
#include "posce/harness/csv.hpp"
#include "posce/harness/rng.hpp"
#include "posce/harness/runner.hpp"
#include "posce/ofdm.hpp"
#include "posce/pilot_design.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace posce::harness {

// ---------------------------------------------------------------- schemes

enum class SchemeKind { proposed, ici_free, no_elimination, ls, scheme1, perfect_csi };

struct SchemeSpec {
  SchemeKind kind = SchemeKind::proposed;
  std::string scheme;
  std::string estimator;

  std::string name() const { return scheme + "-" + estimator; }
};

/// "scheme:estimator", e.g. "proposed:omp". perfect_csi takes no estimator.
inline SchemeSpec parse_scheme(const std::string& text) {
  const auto colon = text.find(':');
  SchemeSpec s;
  s.scheme = text.substr(0, colon);
  s.estimator = colon == std::string::npos ? "" : text.substr(colon + 1);
  static const std::map<std::string, SchemeKind> kinds{
      {"proposed", SchemeKind::proposed}, {"ici_free", SchemeKind::ici_free},
      {"no_elimination", SchemeKind::no_elimination}, {"ls", SchemeKind::ls},
      {"scheme1", SchemeKind::scheme1}, {"perfect_csi", SchemeKind::perfect_csi}};
  const auto it = kinds.find(s.scheme);
  if (it == kinds.end()) throw Error("config: unknown scheme '" + s.scheme + "'");
  s.kind = it->second;
  if (s.kind == SchemeKind::perfect_csi) {
    if (!s.estimator.empty() && s.estimator != "genie") throw Error("config: perfect_csi takes no estimator");
    s.estimator = "genie";
  } else if (s.estimator != "omp" && s.estimator != "bp" && s.estimator != "ls") {
    throw Error("config: unknown estimator '" + s.estimator + "' in '" + text + "'");
  }
  return s;
}

inline std::vector<SchemeSpec> parse_schemes(const std::vector<std::string>& entries) {
  std::vector<SchemeSpec> out;
  for (const std::string& e : entries) out.push_back(parse_scheme(e));
  return out;
}

// ---------------------------------------------------------------- pilots

struct PilotPlan {
  std::vector<int> designed;
  std::vector<int> equidistant;
  std::vector<std::vector<int>> scheme1;  // per cell, alternating split of a designed set
  double designed_coherence = 0.0;
  double equidistant_coherence = 0.0;
};

inline std::vector<int> load_pattern_file(const std::string& path, int K, int P) {
  std::ifstream in(path);
  if (!in) throw Error("pilot pattern: cannot open " + path);
  json j;
  in >> j;
  std::vector<int> pattern = j.at("pattern").get<std::vector<int>>();
  if (j.contains("K") && j.at("K").get<int>() != K) throw Error("pilot pattern: K mismatch");
  if (static_cast<int>(pattern.size()) != P) throw Error("pilot pattern: P mismatch");
  PilotPattern{K, pattern}.validate();
  return pattern;
}

inline PilotPlan make_pilot_plan(const ExperimentConfig& cfg, bool with_scheme1) {
  const CoherenceParams params{cfg.delta};
  PilotPlan plan;
  if (!cfg.pilot_pattern_file.empty()) {
    plan.designed = load_pattern_file(cfg.pilot_pattern_file, cfg.K, cfg.P);
  } else {
    auto rng = make_stream(cfg.seed, 0, Stream::pilots);
    plan.designed = design_pilots(cfg.K, cfg.L, cfg.P, cfg.design_M, params, rng).indices;
  }
  plan.equidistant = equidistant_pattern(cfg.K, cfg.P).indices;
  plan.designed_coherence = pattern_coherence(plan.designed, cfg.K, cfg.L, params);
  plan.equidistant_coherence = pattern_coherence(plan.equidistant, cfg.K, cfg.L, params);
  plan.scheme1.assign(static_cast<std::size_t>(cfg.num_cells), {});
  if (with_scheme1) {
    auto rng = make_stream(cfg.seed, 1, Stream::pilots);
    const PilotPattern joint = design_pilots(cfg.K, cfg.L, cfg.scheme1_pilots, cfg.design_M, params, rng);
    for (std::size_t i = 0; i < joint.indices.size(); ++i)
      plan.scheme1[i % static_cast<std::size_t>(cfg.num_cells)].push_back(joint.indices[i]);
  }
  return plan;
}

// ---------------------------------------------------------------- geometry

struct LinkGeometry {
  int cell = 0;     // 0-based
  int antenna = 0;  // 0-based
  double alpha = 0.0;
  bool served = false;
  double doppler_hz = 0.0;
  int q_true = 0;
  bool rx_served = false;  // as seen from the (possibly perturbed) position
  int q_rx = 0;
  int ce_shift = 0;  // integer subcarrier shift used by the guard-pilot scheme
};

struct Scenario {
  double track_position = 0.0;
  double speed = 0.0;  // m/s
  BemConfig bem;
  BemConfig ce;  // order-matched CE basis for the guard-pilot scheme
  std::shared_ptr<const FreqBasis> freq;
  BasisSet ce_basis;
  PartialFourier fl;
  std::vector<LinkGeometry> links;  // antenna-major
  std::vector<int> guard_shift;     // per cell, from the train reference point; INT_MIN when not serving
  int num_cells = 0;
  int num_antennas = 0;

  const LinkGeometry& link(int cell, int antenna) const {
    return links[static_cast<std::size_t>(antenna * num_cells + cell)];
  }
};

inline constexpr int kNoShift = -1000000;

inline Scenario make_scenario(const ExperimentConfig& cfg, double track_position, double speed) {
  Scenario sc;
  sc.track_position = track_position;
  sc.speed = speed;
  sc.bem = cfg.bem_config(speed);
  sc.ce = BemConfig{BemKind::ce, cfg.K, 0, 1};
  sc.ce.Q = cfg.bem_order ? cfg.bem_order : bem_order(cfg.doppler().max_doppler(speed), cfg.packet_duration, 1);
  sc.freq = make_freq_basis(sc.bem);
  sc.ce_basis = build_basis(sc.ce);
  sc.fl = partial_fourier(cfg.K, cfg.L);
  sc.num_cells = cfg.num_cells;
  sc.num_antennas = static_cast<int>(cfg.antenna_offsets.size());

  const CellLayout layout = cfg.layout();
  const DopplerParams dp = cfg.doppler();
  const int a = sc.bem.effective_oversample();
  const double F = cfg.packet_duration * dp.max_doppler(speed);
  for (int r = 0; r < sc.num_antennas; ++r) {
    const double pos = track_position + cfg.antenna_offsets[static_cast<std::size_t>(r)];
    for (int t = 0; t < cfg.num_cells; ++t) {
      LinkGeometry g;
      g.cell = t;
      g.antenna = r;
      g.alpha = local_offset(pos, t + 1, layout);
      g.served = in_coverage(g.alpha, layout);
      g.q_true = sc.bem.Q / 2;
      if (g.served) {
        g.doppler_hz = doppler_shift(g.alpha, speed, dp, layout);
        g.q_true = dominant_index_from_doppler(g.doppler_hz, dp, sc.bem.Q, a);
      }
      const double alpha_rx = local_offset(perturb_position(pos, cfg.position_error_m), t + 1, layout);
      g.rx_served = in_coverage(alpha_rx, layout);
      g.q_rx = sc.bem.Q / 2;
      if (g.rx_served) {
        g.q_rx = dominant_index_from_position(alpha_rx, layout, F, sc.bem.Q, a);
        g.ce_shift = dominant_index_from_position(alpha_rx, layout, F, sc.ce.Q, 1) - sc.ce.Q / 2;
      }
      sc.links.push_back(g);
    }
  }
  for (int t = 0; t < cfg.num_cells; ++t) {
    const double alpha = local_offset(perturb_position(track_position, cfg.position_error_m), t + 1, layout);
    sc.guard_shift.push_back(in_coverage(alpha, layout)
                                 ? dominant_index_from_position(alpha, layout, F, sc.ce.Q, 1) - sc.ce.Q / 2
                                 : kNoShift);
  }
  return sc;
}

/// out(k) = v(k - s mod K): moves content s subcarriers up.
inline CVec cyclic_shift(const CVec& v, int s) {
  const Eigen::Index K = v.size();
  CVec out(K);
  for (Eigen::Index k = 0; k < K; ++k) out(((k + s) % K + K) % K) = v(k);
  return out;
}

/// Frame specs of the guard-pilot scheme: each cell's own pilots, plus zeros
/// wherever another cell's shifted pilots land after this cell's shift.
inline std::vector<FrameSpec> scheme1_specs(const ExperimentConfig& cfg, const PilotPlan& plan, const Scenario& sc) {
  std::vector<FrameSpec> specs;
  for (int v = 0; v < cfg.num_cells; ++v) {
    FrameSpec spec{cfg.K, plan.scheme1[static_cast<std::size_t>(v)], {}, cfg.pilot_power, cfg.random_pilot_phase};
    std::vector<char> taken(static_cast<std::size_t>(cfg.K), 0);
    for (int w : spec.pilots) taken[static_cast<std::size_t>(w)] = 1;
    const int sv = sc.guard_shift[static_cast<std::size_t>(v)];
    for (int t = 0; t < cfg.num_cells; ++t) {
      const int st = sc.guard_shift[static_cast<std::size_t>(t)];
      if (t == v || st == kNoShift || sv == kNoShift) continue;
      for (int w : plan.scheme1[static_cast<std::size_t>(t)]) {
        const int g = ((w + st - sv) % cfg.K + cfg.K) % cfg.K;
        if (!taken[static_cast<std::size_t>(g)]) {
          taken[static_cast<std::size_t>(g)] = 2;
          spec.guards.push_back(g);
        }
      }
    }
    std::sort(spec.guards.begin(), spec.guards.end());
    specs.push_back(std::move(spec));
  }
  return specs;
}

// ---------------------------------------------------------------- one trial

struct PointResult {
  std::vector<double> sq_error;  // [scheme][snr], summed over served links, divided by K^2
  std::vector<double> bit_errors;
  std::vector<double> bits;
  std::vector<double> warnings;
  int links = 0;
};

struct TrialContext {
  const ExperimentConfig& cfg;
  const Scenario& sc;
  const PilotPlan& plan;
  const std::vector<SchemeSpec>& schemes;
  const std::vector<double>& sigmas;
  bool want_ber = false;
  bool want_mse = true;
};

namespace detail {

enum FrameSet { kDesigned = 0, kEquidistant = 1, kScheme1 = 2, kPilotOnly = 3, kNumSets = 4 };

inline FrameSet frame_set(SchemeKind k) {
  switch (k) {
    case SchemeKind::ls: return kEquidistant;
    case SchemeKind::scheme1: return kScheme1;
    case SchemeKind::ici_free: return kPilotOnly;
    default: return kDesigned;
  }
}

inline CVec solve_one(const std::string& estimator, const ExperimentConfig& cfg, const CMat& a, const CVec& y,
                      double sigma, bool& warning) {
  MeasurementSystem sys{{a}, {y}, {{}}};
  EstimateResult res;
  if (estimator == "omp") {
    res = solve_omp(sys, OmpOptions{cfg.omp_sparsity_bound(), cfg.omp_residual_tol});
  } else if (estimator == "bp") {
    double eps = cfg.bpdn_epsilon_scale * default_bpdn_epsilon(static_cast<double>(a.rows()), sigma);
    if (sigma == 0.0) eps = 1e-8 * y.norm();
    res = solve_bpdn(sys, BpdnOptions{eps, cfg.bpdn_max_iterations, 1e-8, true});
  } else {
    res = solve_ls(sys);
    warning = false;
    return res.coefficients.front();
  }
  warning = !res.meta.front().converged;
  return res.coefficients.front();
}

}  // namespace detail

inline PointResult simulate_trial(const TrialContext& ctx, int trial) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Scenario& sc = ctx.sc;
  const int K = cfg.K;
  const int T = sc.num_cells;
  const std::size_t n_snr = ctx.sigmas.size();
  const std::size_t n_slots = ctx.schemes.size() * n_snr;
  PointResult out{std::vector<double>(n_slots, 0.0), std::vector<double>(n_slots, 0.0),
                  std::vector<double>(n_slots, 0.0), std::vector<double>(n_slots, 0.0), 0};

  // Channels. Every link draws, served or not, so streams line up across sweep points.
  auto rng_ch = make_stream(cfg.seed, static_cast<std::uint64_t>(trial), Stream::channel);
  const BasisSet& basis = sc.freq->basis;
  std::vector<SparseBemChannel> taps;
  std::vector<FactoredChannel> truth;
  for (const LinkGeometry& g : sc.links) {
    SparseBemChannel ch = sample_channel(rng_ch, cfg.L, cfg.S, g.q_true, g.doppler_hz, cfg.profile());
    if (!g.served) ch = SparseBemChannel{{}, {}, g.q_true, cfg.L, 0.0};
    truth.push_back(ch.empty() ? FactoredChannel::zero(K)
                               : factored_channel(ch, basis, cfg.mode(), cfg.packet_duration, sc.fl));
    taps.push_back(std::move(ch));
  }

  // Frames, always all sets in a fixed order.
  auto rng_data = make_stream(cfg.seed, static_cast<std::uint64_t>(trial), Stream::data);
  std::vector<std::vector<FrameSpec>> specs(detail::kNumSets);
  std::vector<std::vector<TxFrame>> frames(detail::kNumSets);
  const std::vector<FrameSpec> s1 = scheme1_specs(cfg, ctx.plan, sc);
  for (int t = 0; t < T; ++t) {
    specs[detail::kDesigned].push_back(FrameSpec{K, ctx.plan.designed, {}, cfg.pilot_power, cfg.random_pilot_phase});
    specs[detail::kEquidistant].push_back(
        FrameSpec{K, ctx.plan.equidistant, {}, cfg.pilot_power, cfg.random_pilot_phase});
    specs[detail::kScheme1].push_back(s1[static_cast<std::size_t>(t)]);
  }
  for (int set : {detail::kDesigned, detail::kEquidistant, detail::kScheme1})
    for (int t = 0; t < T; ++t) frames[set].push_back(build_frame(rng_data, specs[set][static_cast<std::size_t>(t)]));
  specs[detail::kPilotOnly] = specs[detail::kDesigned];
  for (int t = 0; t < T; ++t) {
    const TxFrame& f = frames[detail::kDesigned][static_cast<std::size_t>(t)];
    frames[detail::kPilotOnly].push_back(TxFrame{f.pilot_only(ctx.plan.designed), {}});
  }

  auto rng_noise = make_stream(cfg.seed, static_cast<std::uint64_t>(trial), Stream::noise);
  std::vector<CVec> unit_noise;
  for (int r = 0; r < sc.num_antennas; ++r) unit_noise.push_back(complex_noise(rng_noise, K, 1.0));

  const EliminationMode mode = cfg.elimination_mode();
  const int rho = mode.band_radius;
  const EliminatorBank bank_designed(sc.freq, ctx.plan.designed, rho);
  const EliminatorBank bank_equi(sc.freq, ctx.plan.equidistant, rho);

  for (int r = 0; r < sc.num_antennas; ++r) {
    const CVec& n = unit_noise[static_cast<std::size_t>(r)];
    // Per-cell received terms for every frame set.
    std::vector<std::vector<CVec>> comp(detail::kNumSets);
    std::vector<CVec> composite(detail::kNumSets, CVec::Zero(K));
    for (int set = 0; set < detail::kNumSets; ++set)
      for (int t = 0; t < T; ++t) {
        CVec c = truth[static_cast<std::size_t>(r * T + t)].apply(frames[set][static_cast<std::size_t>(t)].symbols);
        composite[set] += c;
        comp[set].push_back(std::move(c));
      }

    for (int t = 0; t < T; ++t) {
      const LinkGeometry& g = sc.link(t, r);
      if (!g.served) continue;
      ++out.links;
      const FactoredChannel& h = truth[static_cast<std::size_t>(r * T + t)];
      const double h_energy = squared_distance(h, FactoredChannel::zero(K));

      for (std::size_t si = 0; si < ctx.schemes.size(); ++si) {
        const SchemeSpec& scheme = ctx.schemes[si];
        const int set = detail::frame_set(scheme.kind);
        const std::vector<int>& pattern = specs[set][static_cast<std::size_t>(t)].pilots;
        const TxFrame& frame = frames[set][static_cast<std::size_t>(t)];
        const FreqBasis& fb = *sc.freq;

        // Linear maps from the received terms to the estimator input (obs) and
        // to the detector input (det), split into signal and unit-noise parts.
        CVec obs_sig, obs_noise, det_sig, det_noise;
        auto oracle_g = [&](int q, const CVec& v) { return fb.apply_g(q, v); };
        switch (scheme.kind) {
          case SchemeKind::proposed:
          case SchemeKind::ls: {
            const EliminatorBank& bank = scheme.kind == SchemeKind::ls ? bank_equi : bank_designed;
            obs_sig = CVec::Zero(K);
            for (int u = 0; u < T; ++u)
              obs_sig += apply_elimination(comp[set][static_cast<std::size_t>(u)], u == t, g.q_rx, mode, bank);
            obs_noise = apply_elimination(n, true, g.q_rx, mode, bank);
            det_sig = oracle_g(g.q_rx, comp[set][static_cast<std::size_t>(t)]);
            det_noise = oracle_g(g.q_rx, n);
            break;
          }
          case SchemeKind::ici_free:
            obs_sig = oracle_g(g.q_rx, comp[set][static_cast<std::size_t>(t)]);
            obs_noise = oracle_g(g.q_rx, n);
            break;
          case SchemeKind::no_elimination:
            obs_sig = composite[set];
            obs_noise = n;
            det_sig = comp[set][static_cast<std::size_t>(t)];
            det_noise = n;
            break;
          case SchemeKind::scheme1:
            obs_sig = cyclic_shift(composite[set], -g.ce_shift);
            obs_noise = cyclic_shift(n, -g.ce_shift);
            det_sig = cyclic_shift(comp[set][static_cast<std::size_t>(t)], -g.ce_shift);
            det_noise = obs_noise;
            break;
          case SchemeKind::perfect_csi:
            det_sig = oracle_g(g.q_true, comp[set][static_cast<std::size_t>(t)]);
            det_noise = oracle_g(g.q_true, n);
            break;
        }
        const CMat a = measurement_block(frame.symbols, pattern, sc.fl);
        const CVec y_sig = obs_sig.size() ? gather(obs_sig, pattern) : CVec();
        const CVec y_noise = obs_noise.size() ? gather(obs_noise, pattern) : CVec();
        const std::vector<int> data = specs[set][static_cast<std::size_t>(t)].data_pattern();

        for (std::size_t i = 0; i < n_snr; ++i) {
          const double sigma = ctx.sigmas[i];
          const std::size_t slot = si * n_snr + i;
          CVec response;
          if (scheme.kind == SchemeKind::perfect_csi) {
            response = sc.fl.response(taps[static_cast<std::size_t>(r * T + t)].coefficients());
          } else {
            CVec c = CVec::Zero(cfg.L);
            if (g.rx_served) {
              bool warn = false;
              c = detail::solve_one(scheme.estimator, cfg, a, y_sig + sigma * y_noise, sigma, warn);
              out.warnings[slot] += warn ? 1.0 : 0.0;
            }
            if (ctx.want_mse) {
              const FactoredChannel est =
                  scheme.kind == SchemeKind::scheme1
                      ? reconstruct_factored(c, sc.ce_basis, g.ce_shift + sc.ce.Q / 2, sc.fl)
                      : reconstruct_factored(c, basis, g.q_rx, sc.fl);
              out.sq_error[slot] += (g.rx_served ? squared_distance(h, est) : h_energy) / (double(K) * K);
            }
            response = sc.fl.response(c);
          }
          if (ctx.want_ber && det_sig.size()) {
            const Detection det = zf_detect(det_sig + sigma * det_noise, response, data);
            out.bit_errors[slot] += static_cast<double>(count_bit_errors(det.bits, frame.payload_bits));
            out.bits[slot] += static_cast<double>(det.bits.size());
          }
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- sweeps

struct RunOptions {
  int threads = 0;  // 0: hardware concurrency
};

inline std::vector<double> noise_sigmas(const ExperimentConfig& cfg, const std::vector<double>& snr_db) {
  std::vector<double> s;
  for (double db : snr_db) s.push_back(cfg.noiseless ? 0.0 : std::sqrt(1.0 / from_db(db)));
  return s;
}

struct PointSummary {
  std::vector<double> mse;  // [scheme][snr]
  std::vector<double> ber;
  std::vector<double> bit_errors;
  std::vector<double> bits;
  std::vector<double> warnings;
  int links = 0;
};

inline PointSummary run_point(const ExperimentConfig& cfg, const Scenario& sc, const PilotPlan& plan,
                              const std::vector<SchemeSpec>& schemes, const std::vector<double>& sigmas, bool want_ber,
                              bool want_mse, const RunOptions& opt) {
  const TrialContext ctx{cfg, sc, plan, schemes, sigmas, want_ber, want_mse};
  const std::vector<PointResult> results =
      run_trials<PointResult>(cfg.trials, opt.threads, [&](int i) { return simulate_trial(ctx, i); });
  const std::size_t n = schemes.size() * sigmas.size();
  std::vector<KahanSum> err(n), be(n), bits(n), warn(n);
  for (const PointResult& r : results)
    for (std::size_t i = 0; i < n; ++i) {
      err[i].add(r.sq_error[i]);
      be[i].add(r.bit_errors[i]);
      bits[i].add(r.bits[i]);
      warn[i].add(r.warnings[i]);
    }
  PointSummary s;
  s.links = results.empty() ? 0 : results.front().links;
  for (std::size_t i = 0; i < n; ++i) {
    const double denom = static_cast<double>(cfg.trials) * std::max(1, s.links);
    s.mse.push_back(err[i].value() / denom);
    s.bit_errors.push_back(be[i].value());
    s.bits.push_back(bits[i].value());
    s.ber.push_back(bits[i].value() > 0 ? be[i].value() / bits[i].value() : 0.0);
    s.warnings.push_back(warn[i].value());
  }
  return s;
}

struct RowFactory {
  const ExperimentConfig& cfg;
  std::string experiment;
  std::string hash;
  std::string bem;

  ResultRow operator()(const std::string& scheme, const std::string& mode, const std::string& var, double x,
                       const std::string& metric, double value) const {
    return ResultRow{experiment, scheme, bem, mode, var, x, metric, value, cfg.trials, cfg.seed, hash};
  }
};

inline RowFactory row_factory(const ExperimentConfig& cfg, const std::string& experiment) {
  return RowFactory{cfg, experiment, config_hash(cfg), cfg.bem};
}

inline bool has_scheme1(const std::vector<SchemeSpec>& schemes) {
  for (const SchemeSpec& s : schemes)
    if (s.kind == SchemeKind::scheme1) return true;
  return false;
}

inline void append_point_rows(std::vector<ResultRow>& rows, const RowFactory& row, const ExperimentConfig& cfg,
                              const std::vector<SchemeSpec>& schemes, const PointSummary& s,
                              const std::string& var, const std::vector<double>& xs, bool mse, bool ber) {
  const std::string mode = cfg.elimination + "/" + cfg.channel_mode;
  for (std::size_t si = 0; si < schemes.size(); ++si)
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const std::size_t k = si * xs.size() + i;
      const SchemeSpec& sch = schemes[si];
      if (mse && sch.kind != SchemeKind::perfect_csi) {
        rows.push_back(row(sch.name(), mode, var, xs[i], "mse", s.mse[k]));
        rows.push_back(row(sch.name(), mode, var, xs[i], "mse_db", to_db(s.mse[k])));
        rows.push_back(row(sch.name(), mode, var, xs[i], "solver_warnings", s.warnings[k]));
      }
      if (ber && sch.kind != SchemeKind::ici_free) {
        rows.push_back(row(sch.name(), mode, var, xs[i], "ber", s.ber[k]));
        rows.push_back(row(sch.name(), mode, var, xs[i], "bit_errors", s.bit_errors[k]));
        rows.push_back(row(sch.name(), mode, var, xs[i], "bits", s.bits[k]));
      }
    }
}

inline void append_geometry_rows(std::vector<ResultRow>& rows, const RowFactory& row, const Scenario& sc,
                                 const std::string& var, double x) {
  const std::string mode = "geometry";
  rows.push_back(row("geometry", mode, var, x, "bem_order", sc.bem.Q));
  bool separable = true;
  int flipped = 0;
  for (int r = 0; r < sc.num_antennas; ++r) {
    int serving = 0;
    std::vector<int> qs;
    for (int t = 0; t < sc.num_cells; ++t) {
      const LinkGeometry& g = sc.link(t, r);
      const std::string tag = "cell" + std::to_string(t + 1) + "_ant" + std::to_string(r);
      rows.push_back(row("geometry", mode, var, x, "doppler_" + tag + "_hz", g.doppler_hz));
      rows.push_back(row("geometry", mode, var, x, "served_" + tag, g.served ? 1.0 : 0.0));
      rows.push_back(row("geometry", mode, var, x, "q_" + tag, g.served ? g.q_true : -1.0));
      if (g.served) {
        ++serving;
        for (int q : qs) separable = separable && q != g.q_true;
        qs.push_back(g.q_true);
        flipped += (g.rx_served && g.q_rx != g.q_true) || !g.rx_served ? 1 : 0;
      }
    }
    rows.push_back(row("geometry", mode, var, x, "serving_cells_ant" + std::to_string(r), serving));
  }
  rows.push_back(row("geometry", mode, var, x, "mci_separable", separable ? 1.0 : 0.0));
  rows.push_back(row("geometry", mode, var, x, "q_flipped_links", flipped));
}

inline double speed_ms(const ExperimentConfig& cfg) { return kmh_to_ms(cfg.speed_kmh); }

/// MSE versus SNR at a fixed track position and speed.
inline std::vector<ResultRow> run_mse_vs_snr(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  cfg.validate();
  const std::vector<SchemeSpec> schemes = parse_schemes(cfg.schemes);
  const PilotPlan plan = make_pilot_plan(cfg, has_scheme1(schemes));
  const Scenario sc = make_scenario(cfg, cfg.track_position_m, speed_ms(cfg));
  const PointSummary s = run_point(cfg, sc, plan, schemes, noise_sigmas(cfg, cfg.snr_grid_db), false, true, opt);
  std::vector<ResultRow> rows;
  const RowFactory row = row_factory(cfg, "mse_snr");
  append_point_rows(rows, row, cfg, schemes, s, "snr_db", cfg.snr_grid_db, true, false);
  append_geometry_rows(rows, row, sc, "track_position_m", cfg.track_position_m);
  return rows;
}

/// MSE at snr_db versus track position; Doppler shifts and serving cells per position.
inline std::vector<ResultRow> run_mse_vs_position(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  cfg.validate();
  const std::vector<SchemeSpec> schemes = parse_schemes(cfg.schemes);
  const PilotPlan plan = make_pilot_plan(cfg, has_scheme1(schemes));
  const std::vector<double> sigmas = noise_sigmas(cfg, {cfg.snr_db});
  std::vector<ResultRow> rows;
  const RowFactory row = row_factory(cfg, "mse_position");
  for (double x : cfg.position_grid_m) {
    const Scenario sc = make_scenario(cfg, x, speed_ms(cfg));
    const PointSummary s = run_point(cfg, sc, plan, schemes, sigmas, false, true, opt);
    append_point_rows(rows, row, cfg, schemes, s, "position_m", {x}, true, false);
    append_geometry_rows(rows, row, sc, "position_m", x);
  }
  return rows;
}

/// MSE at snr_db versus speed at track_position_m; the BEM order follows the speed.
inline std::vector<ResultRow> run_mse_vs_velocity(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  cfg.validate();
  const std::vector<SchemeSpec> schemes = parse_schemes(cfg.schemes);
  const PilotPlan plan = make_pilot_plan(cfg, has_scheme1(schemes));
  const std::vector<double> sigmas = noise_sigmas(cfg, {cfg.snr_db});
  std::vector<ResultRow> rows;
  const RowFactory row = row_factory(cfg, "mse_velocity");
  for (double v : cfg.velocity_grid_kmh) {
    posce::detail::require(v >= 0.0, "velocity grid must be non-negative");
    const Scenario sc = make_scenario(cfg, cfg.track_position_m, kmh_to_ms(v));
    const PointSummary s = run_point(cfg, sc, plan, schemes, sigmas, false, true, opt);
    append_point_rows(rows, row, cfg, schemes, s, "velocity_kmh", {v}, true, false);
    append_geometry_rows(rows, row, sc, "velocity_kmh", v);
  }
  return rows;
}

/// BER versus SNR with ZF detection on the data subcarriers.
inline std::vector<ResultRow> run_ber_vs_snr(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  cfg.validate();
  const std::vector<SchemeSpec> schemes = parse_schemes(cfg.schemes);
  const PilotPlan plan = make_pilot_plan(cfg, has_scheme1(schemes));
  const Scenario sc = make_scenario(cfg, cfg.track_position_m, speed_ms(cfg));
  const PointSummary s = run_point(cfg, sc, plan, schemes, noise_sigmas(cfg, cfg.snr_grid_db), true, false, opt);
  std::vector<ResultRow> rows;
  const RowFactory row = row_factory(cfg, "ber_snr");
  append_point_rows(rows, row, cfg, schemes, s, "snr_db", cfg.snr_grid_db, false, true);
  for (double db : cfg.snr_grid_db)
    rows.push_back(row("closed_form", "awgn", "snr_db", db, "ber", qpsk_awgn_ber(from_db(db))));
  return rows;
}

struct PilotDesignOutput {
  std::vector<int> pattern;
  double coherence = 0.0;
  double equidistant_coherence = 0.0;
  std::vector<ResultRow> report;
  json pattern_json;
};

/// Runs the search once and reports designed versus equidistant coherence.
inline PilotDesignOutput run_pilot_design(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentConfig local = cfg;
  local.pilot_pattern_file.clear();
  const PilotPlan plan = make_pilot_plan(local, false);
  PilotDesignOutput out;
  out.pattern = plan.designed;
  out.coherence = plan.designed_coherence;
  out.equidistant_coherence = plan.equidistant_coherence;
  const RowFactory row = row_factory(cfg, "pilot_design");
  char delta[32];
  std::snprintf(delta, sizeof delta, "delta=%g", cfg.delta);
  const std::string mode = delta;
  out.report.push_back(row("designed", mode, "P", cfg.P, "coherence", plan.designed_coherence));
  out.report.push_back(row("equidistant", mode, "P", cfg.P, "coherence", plan.equidistant_coherence));
  out.pattern_json = json{{"K", cfg.K},       {"L", cfg.L},         {"P", cfg.P},
                          {"M", cfg.design_M}, {"delta", cfg.delta}, {"seed", cfg.seed},
                          {"coherence", plan.designed_coherence},   {"pattern", plan.designed}};
  return out;
}

/// Average pilot-row term powers (dB) before and after elimination, per cell,
/// over antennas and trials, along the position grid.
inline std::vector<ResultRow> run_diagnose_elimination(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  cfg.validate();
  const PilotPlan plan = make_pilot_plan(cfg, false);
  const EliminationMode mode = cfg.elimination_mode();
  const double sigma = cfg.noiseless ? 0.0 : std::sqrt(1.0 / from_db(cfg.snr_db));
  std::vector<ResultRow> rows;
  const RowFactory row = row_factory(cfg, "diagnose_elimination");
  const std::string mode_name = to_string(mode.kind) + "/" + cfg.channel_mode;
  const char* terms[4] = {"desired", "ici", "mci", "noise"};
  for (double x : cfg.position_grid_m) {
    const Scenario sc = make_scenario(cfg, x, speed_ms(cfg));
    const EliminatorBank bank(sc.freq, plan.designed, mode.band_radius);
    const int T = sc.num_cells;
    // slot: cell * 8 + stage * 4 + term
    const std::size_t n_slots = static_cast<std::size_t>(T) * 8;
    auto results = run_trials<std::vector<double>>(cfg.trials, opt.threads, [&](int trial) {
      std::vector<double> acc(n_slots + static_cast<std::size_t>(T), 0.0);
      auto rng_ch = make_stream(cfg.seed, static_cast<std::uint64_t>(trial), Stream::channel);
      std::vector<FactoredChannel> truth;
      for (const LinkGeometry& g : sc.links) {
        SparseBemChannel ch = sample_channel(rng_ch, cfg.L, cfg.S, g.q_true, g.doppler_hz, cfg.profile());
        truth.push_back(g.served ? factored_channel(ch, sc.freq->basis, cfg.mode(), cfg.packet_duration, sc.fl)
                                 : FactoredChannel::zero(cfg.K));
      }
      auto rng_data = make_stream(cfg.seed, static_cast<std::uint64_t>(trial), Stream::data);
      std::vector<TxFrame> frames;
      for (int t = 0; t < T; ++t)
        frames.push_back(build_frame(rng_data, FrameSpec{cfg.K, plan.designed, {}, cfg.pilot_power, cfg.random_pilot_phase}));
      auto rng_noise = make_stream(cfg.seed, static_cast<std::uint64_t>(trial), Stream::noise);
      for (int r = 0; r < sc.num_antennas; ++r) {
        const CVec noise = sigma * complex_noise(rng_noise, cfg.K, 1.0);
        const std::vector<FactoredChannel> chans(truth.begin() + r * T, truth.begin() + (r + 1) * T);
        for (int t = 0; t < T; ++t) {
          const LinkGeometry& g = sc.link(t, r);
          if (!g.served || !g.rx_served) continue;
          const ResidualReport rep = residual_report(chans, frames, noise, plan.designed, static_cast<std::size_t>(t),
                                                     g.q_rx, mode, bank);
          const double b[4] = {rep.before.desired_power, rep.before.self_ici_power, rep.before.mci_power,
                               rep.before.noise_power};
          const double a[4] = {rep.after.desired_power, rep.after.self_ici_power, rep.after.mci_power,
                               rep.after.noise_power};
          for (int k = 0; k < 4; ++k) {
            acc[static_cast<std::size_t>(t * 8 + k)] += b[k];
            acc[static_cast<std::size_t>(t * 8 + 4 + k)] += a[k];
          }
          acc[n_slots + static_cast<std::size_t>(t)] += 1.0;
        }
      }
      return acc;
    });
    std::vector<KahanSum> sums(n_slots + static_cast<std::size_t>(T));
    for (const auto& acc : results)
      for (std::size_t i = 0; i < acc.size(); ++i) sums[i].add(acc[i]);
    for (int t = 0; t < T; ++t) {
      const double count = sums[n_slots + static_cast<std::size_t>(t)].value();
      if (count == 0.0) continue;
      for (int stage = 0; stage < 2; ++stage)
        for (int k = 0; k < 4; ++k) {
          const double p = sums[static_cast<std::size_t>(t * 8 + stage * 4 + k)].value() / count;
          rows.push_back(row(mode_name, mode_name, "position_m", x,
                             "cell" + std::to_string(t + 1) + "_" + terms[k] + "_db_" + (stage ? "after" : "before"),
                             to_db(p)));
        }
    }
  }
  return rows;
}

}  // namespace posce::harness
