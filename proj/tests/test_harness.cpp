#include "catch_amalgamated.hpp"

#include "posce/harness/config.hpp"
#include "posce/harness/csv.hpp"
#include "posce/harness/experiments.hpp"
#include "posce/harness/rng.hpp"
#include "posce/harness/runner.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

using namespace posce;
using namespace posce::harness;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.K = 64;
  c.L = 16;
  c.P = 8;
  c.S = 2;
  c.trials = 6;
  c.design_M = 2;
  c.scheme1_pilots = 8;
  c.snr_grid_db = {10, 20};
  c.position_grid_m = {1500, 2200};
  c.velocity_grid_kmh = {0, 300};
  c.schemes = {"proposed:omp", "proposed:bp", "ici_free:omp", "no_elimination:omp", "ls:ls", "scheme1:omp"};
  return c;
}

std::string value_of(const std::vector<ResultRow>& rows, const std::string& scheme, const std::string& metric,
                     double x) {
  for (const ResultRow& r : rows)
    if (r.scheme == scheme && r.metric == metric && r.sweep_value == x) return format_double(r.value);
  return "missing";
}

}  // namespace

TEST_CASE("config defaults and validation", "[harness]") {
  const ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.K == 512);
  CHECK(c.P == 30);
  CHECK(c.L == 64);
  CHECK(c.S == 8);
  CHECK(c.trials == 500);
  CHECK(c.bem_config(kmh_to_ms(500)).Q == 4);
  CHECK(c.bem_config(kmh_to_ms(500)).oversample == 1);
  ExperimentConfig g = c;
  g.bem = "GCE";
  CHECK(g.bem_config(kmh_to_ms(500)).Q == 6);
  CHECK(g.elimination_mode().kind == EliminationKind::oracle);
  g.elimination = "physical";
  CHECK(g.elimination_mode().band_radius == 2);
  CHECK(c.omp_sparsity_bound() == 8);

  CHECK_THROWS_WITH(config_from_json(json{{"nonsense", 1}}), "config: unknown key 'nonsense'");
  CHECK_THROWS_WITH(config_from_json(json{{"K", "many"}}), Catch::Matchers::StartsWith("config: bad value for 'K'"));
  CHECK_THROWS_AS(config_from_json(json{{"bem", "XYZ"}}), Error);
  CHECK_THROWS_AS(config_from_json(json{{"P", 600}}), Error);
  CHECK_THROWS_AS(config_from_json(json::array()), Error);
  CHECK(config_from_json(json{{"seed", 9}, {"bem", "GCE"}}).seed == 9);
}

TEST_CASE("config files and hashes", "[harness]") {
  const ExperimentConfig c;
  const std::string path = "posce_test_config.json";
  {
    std::ofstream out(path);
    out << to_json(c).dump(2);
  }
  const ExperimentConfig back = load_config(path);
  CHECK(canonical_dump(back) == canonical_dump(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 16);
  ExperimentConfig other = c;
  other.seed = 2;
  CHECK(config_hash(other) != config_hash(c));
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_WITH(load_config(path), Catch::Matchers::StartsWith("config: parse error"));
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("csv round trip", "[harness]") {
  std::vector<ResultRow> rows{{"mse_snr", "proposed-omp", "CE", "oracle/strict", "snr_db", 20.0, "mse", 1.0 / 3.0, 5,
                               7, "00000000deadbeef"},
                              {"mse_snr", "ls-ls", "CE", "oracle/strict", "snr_db", 25.0, "mse_db", -42.125, 5, 7,
                               "00000000deadbeef"}};
  const std::string text = to_csv(rows);
  CHECK(text.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
  std::istringstream in(text);
  const std::vector<ResultRow> back = read_csv(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0].value == 1.0 / 3.0);
  CHECK(back[1].scheme == "ls-ls");
  CHECK(to_csv(back) == text);

  rows[1].config_hash = "0000000000000001";
  std::istringstream mixed(to_csv(rows));
  CHECK_THROWS_WITH(read_csv(mixed), "csv: mixed config hashes cannot be aggregated");
  std::istringstream bad("wrong,header\n");
  CHECK_THROWS_AS(read_csv(bad), Error);
  std::istringstream short_row(std::string(kCsvHeader) + "\na,b,c\n");
  CHECK_THROWS_AS(read_csv(short_row), Error);
}

TEST_CASE("random streams and the trial runner", "[harness]") {
  CHECK(stream_seed(1, 0, Stream::channel) == stream_seed(1, 0, Stream::channel));
  std::set<std::uint64_t> seeds;
  for (std::uint64_t trial = 0; trial < 50; ++trial)
    for (Stream s : {Stream::channel, Stream::data, Stream::noise, Stream::pilots}) seeds.insert(stream_seed(1, trial, s));
  CHECK(seeds.size() == 200);
  CHECK(stream_seed(1, 0, Stream::noise) != stream_seed(2, 0, Stream::noise));
  auto a = make_stream(3, 4, Stream::data);
  auto b = make_stream(3, 4, Stream::data);
  CHECK(a() == b());

  auto square = [](int i) { return static_cast<double>(i) * i; };
  const std::vector<double> one = run_trials<double>(37, 1, square);
  const std::vector<double> four = run_trials<double>(37, 4, square);
  CHECK(one == four);
  CHECK(one[6] == 36.0);
  CHECK(run_trials<double>(0, 4, square).empty());
  CHECK_THROWS_AS(run_trials<double>(10, 3,
                                     [](int i) -> double {
                                       if (i == 7) throw Error("boom");
                                       return i;
                                     }),
                  Error);
  CHECK(resolve_threads(3) == 3);
  CHECK(resolve_threads(0) >= 1);

  KahanSum k;
  double naive = 1.0;
  k.add(1.0);
  for (int i = 0; i < 1000; ++i) k.add(1e-16), naive += 1e-16;
  CHECK(naive == 1.0);
  CHECK(std::abs(k.value() - (1.0 + 1e-13)) < 1e-15);
}

TEST_CASE("scheme parsing", "[harness]") {
  const SchemeSpec p = parse_scheme("proposed:omp");
  CHECK(p.kind == SchemeKind::proposed);
  CHECK(p.name() == "proposed-omp");
  CHECK(parse_scheme("perfect_csi").estimator == "genie");
  CHECK(parse_scheme("scheme1:bp").kind == SchemeKind::scheme1);
  CHECK_THROWS_WITH(parse_scheme("magic:omp"), "config: unknown scheme 'magic'");
  CHECK_THROWS_AS(parse_scheme("proposed:magic"), Error);
  CHECK_THROWS_AS(parse_scheme("proposed"), Error);
  CHECK_THROWS_AS(parse_scheme("perfect_csi:omp"), Error);
  CHECK(parse_schemes({"ls:ls", "ici_free:bp"}).size() == 2);
}

TEST_CASE("cyclic shift", "[harness]") {
  CVec v(4);
  v << 1.0, 2.0, 3.0, 4.0;
  CHECK(cyclic_shift(v, 1) == (CVec(4) << 4.0, 1.0, 2.0, 3.0).finished());
  CHECK(cyclic_shift(v, -1) == (CVec(4) << 2.0, 3.0, 4.0, 1.0).finished());
  CHECK(cyclic_shift(cyclic_shift(v, 3), -3) == v);
  CHECK(cyclic_shift(v, 4) == v);
}

TEST_CASE("scenario geometry", "[harness]") {
  const ExperimentConfig c;
  const Scenario sc = make_scenario(c, 2200.0, kmh_to_ms(500));
  CHECK(sc.num_cells == 2);
  CHECK(sc.num_antennas == 2);
  CHECK(sc.bem.Q == 4);
  for (int r = 0; r < 2; ++r) {
    CHECK(sc.link(0, r).served);
    CHECK(sc.link(1, r).served);
    CHECK(sc.link(0, r).q_true != sc.link(1, r).q_true);
    CHECK(sc.link(0, r).q_true == sc.link(0, r).q_rx);
  }
  CHECK(sc.link(0, 0).alpha == 2080.0);
  CHECK(sc.link(1, 1).alpha == 320.0);

  std::vector<ResultRow> rows;
  append_geometry_rows(rows, row_factory(c, "t"), sc, "position_m", 2200.0);
  CHECK(value_of(rows, "geometry", "mci_separable", 2200.0) == "1");
  CHECK(value_of(rows, "geometry", "q_flipped_links", 2200.0) == "0");

  const Scenario still = make_scenario(c, 2200.0, 0.0);
  CHECK(still.bem.Q == 2);
  std::vector<ResultRow> still_rows;
  append_geometry_rows(still_rows, row_factory(c, "t"), still, "velocity_kmh", 0.0);
  CHECK(value_of(still_rows, "geometry", "mci_separable", 0.0) == "0");

  const Scenario single = make_scenario(c, 1200.0, kmh_to_ms(500));
  CHECK_FALSE(single.link(1, 0).served);
  CHECK(single.guard_shift[1] == kNoShift);
}

TEST_CASE("guard pilots sit where the other cell's shifted pilots land", "[harness]") {
  ExperimentConfig c = small_config();
  const PilotPlan plan = make_pilot_plan(c, true);
  REQUIRE(plan.scheme1[0].size() == 4);
  REQUIRE(plan.scheme1[1].size() == 4);
  const Scenario sc = make_scenario(c, 2200.0, kmh_to_ms(500));
  const std::vector<FrameSpec> specs = scheme1_specs(c, plan, sc);
  for (int v = 0; v < 2; ++v) {
    CHECK_NOTHROW(specs[v].validate());
    std::set<int> reserved(specs[v].pilots.begin(), specs[v].pilots.end());
    reserved.insert(specs[v].guards.begin(), specs[v].guards.end());
    const int t = 1 - v;
    for (int w : plan.scheme1[t]) {
      const int g = ((w + sc.guard_shift[t] - sc.guard_shift[v]) % c.K + c.K) % c.K;
      CHECK(reserved.count(g) == 1);
    }
  }
}

TEST_CASE("pilot plans", "[harness]") {
  const ExperimentConfig c;
  const PilotDesignOutput out = run_pilot_design(c);
  CHECK(out.pattern.size() == 30);
  CHECK_NOTHROW((PilotPattern{512, out.pattern}.validate()));
  CHECK(out.coherence <= out.equidistant_coherence);
  CHECK(out.pattern_json.at("pattern").get<std::vector<int>>() == out.pattern);
  CHECK(out.report.size() == 2);

  const std::string path = "posce_test_pattern.json";
  {
    std::ofstream f(path);
    f << out.pattern_json.dump();
  }
  ExperimentConfig from_file = c;
  from_file.pilot_pattern_file = path;
  CHECK(make_pilot_plan(from_file, false).designed == out.pattern);
  from_file.P = 29;
  CHECK_THROWS_AS(make_pilot_plan(from_file, false), Error);
  std::remove(path.c_str());
}

TEST_CASE("experiment output does not depend on the thread count", "[harness]") {
  const ExperimentConfig c = small_config();
  const std::string one = to_csv(run_mse_vs_snr(c, RunOptions{1}));
  const std::string three = to_csv(run_mse_vs_snr(c, RunOptions{3}));
  CHECK(one == three);
  CHECK(to_csv(run_ber_vs_snr(c, RunOptions{2})) == to_csv(run_ber_vs_snr(c, RunOptions{1})));

  std::istringstream in(one);
  const std::vector<ResultRow> rows = read_csv(in);
  CHECK(value_of(rows, "proposed-omp", "mse", 20.0) != "missing");
  CHECK(value_of(rows, "scheme1-omp", "mse", 20.0) != "missing");
  for (const ResultRow& r : rows) {
    CHECK(r.trials == 6);
    CHECK(r.config_hash == config_hash(c));
  }
}

TEST_CASE("sweeps emit one point per grid value", "[harness]") {
  ExperimentConfig c = small_config();
  c.schemes = {"proposed:omp"};
  const std::vector<ResultRow> pos = run_mse_vs_position(c, RunOptions{1});
  CHECK(value_of(pos, "proposed-omp", "mse", 1500.0) != "missing");
  CHECK(value_of(pos, "proposed-omp", "mse", 2200.0) != "missing");
  CHECK(value_of(pos, "geometry", "serving_cells_ant0", 1500.0) == "1");
  CHECK(value_of(pos, "geometry", "serving_cells_ant0", 2200.0) == "2");

  const std::vector<ResultRow> vel = run_mse_vs_velocity(c, RunOptions{1});
  CHECK(value_of(vel, "geometry", "bem_order", 0.0) == "2");
  CHECK(value_of(vel, "geometry", "bem_order", 300.0) == "2");

  c.schemes = {"perfect_csi", "proposed:omp"};
  const std::vector<ResultRow> ber = run_ber_vs_snr(c, RunOptions{1});
  for (const ResultRow& r : ber)
    if (r.metric == "ber") {
      CHECK(r.value >= 0.0);
      CHECK(r.value <= 0.5);
    }
  CHECK(value_of(ber, "closed_form", "ber", 10.0) == format_double(qpsk_awgn_ber(10.0)));

  c.noiseless = true;
  const std::vector<ResultRow> diag = run_diagnose_elimination(c, RunOptions{1});
  CHECK(value_of(diag, "oracle/strict", "cell1_mci_db_before", 2200.0) != "missing");
  for (const ResultRow& r : diag)
    if (r.metric.find("mci_db_after") != std::string::npos) CHECK(std::isinf(r.value));
}
