#include "catch_amalgamated.hpp"

#include "posce/geometry.hpp"

#include <cmath>

using namespace posce;

namespace {

const CellLayout layout = CellLayout::defaults();
const DopplerParams params{};
const double v500 = kmh_to_ms(500.0);
const double d0 = std::sqrt(1200.0 * 1200.0 - 50.0 * 50.0);

}  // namespace

TEST_CASE("cell layout derives the half coverage", "[geometry]") {
  CHECK(std::abs(layout.d0() - d0) < 1e-9 * d0);
  CHECK(std::abs(layout.d0() - 1198.9579) < 1e-3);
  // 2 d0 - d_s, slightly short of the nominal 400 m
  CHECK(layout.overlap_length() > 0.0);
  CHECK(std::abs(layout.overlap_length() - 397.9159) < 1e-3);

  CHECK_THROWS_AS(CellLayout(1200, 0, 2000, 400, 2), Error);
  CHECK_THROWS_AS(CellLayout(40, 50, 2000, 400, 2), Error);
  CHECK_THROWS_AS(CellLayout(1200, 50, 0, 400, 2), Error);
  CHECK_THROWS_AS(CellLayout(1200, 50, 2000, 400, 0), Error);
}

TEST_CASE("local offset is measured from the cell origin", "[geometry]") {
  CHECK(local_offset(0.0, 1, layout) == 0.0);
  CHECK(local_offset(2200.0, 2, layout) == 200.0);
  CHECK(local_offset(2200.0, 1, layout) == 2200.0);
  CHECK(in_coverage(2200.0, layout));
  CHECK_FALSE(in_coverage(-1.0, layout));
  CHECK_FALSE(in_coverage(2.0 * d0 + 1e-6, layout));
}

TEST_CASE("Doppler shift magnitudes", "[geometry]") {
  CHECK(std::abs(params.max_doppler(v500) - 1088.0) < 0.05);
  const double f_a1 = doppler_shift(0.0, v500, params, layout);
  CHECK(std::abs(f_a1 - params.max_doppler(v500) * d0 / 1200.0) < 1e-9);
  CHECK(std::abs(f_a1 - 1087.1) < 0.1);
  CHECK(std::abs(doppler_shift(d0, v500, params, layout)) < 1e-9);
  CHECK(doppler_shift(100.0, v500, params, layout) > 0.0);
  CHECK(doppler_shift(1500.0, v500, params, layout) < 0.0);
  CHECK_THROWS_WITH(doppler_shift(-5.0, v500, params, layout), "antenna outside cell coverage");
  CHECK_THROWS_WITH(doppler_shift(2.0 * d0 + 1.0, v500, params, layout), "antenna outside cell coverage");
}

TEST_CASE("Doppler shift is bounded and antisymmetric about the station", "[geometry]") {
  const double fmax = params.max_doppler(v500);
  for (int i = 0; i <= 1000; ++i) {
    const double x = d0 * i / 1000.0;
    const double ahead = doppler_shift(d0 - x, v500, params, layout);
    const double behind = doppler_shift(d0 + x, v500, params, layout);
    CHECK(std::abs(ahead) <= fmax);
    CHECK(std::abs(ahead + behind) <= 1e-9 * std::max(1.0, std::abs(ahead)));
  }
}

TEST_CASE("dominant index from Doppler", "[geometry]") {
  CHECK(dominant_index_from_doppler(0.0, params, 4) == 2);
  CHECK(dominant_index_from_doppler(1087.1, params, 4) == 4);
  CHECK(dominant_index_from_doppler(-1087.1, params, 4) == 0);
  CHECK(dominant_index_from_doppler(1087.1, params, 6, 2) == 6);
  CHECK(dominant_index_from_doppler(-1087.1, params, 6, 2) == 0);
  // 1.2 ms * 2000 Hz = 2.4, ceil 3 does not fit Q/2 = 2
  CHECK_THROWS_WITH(dominant_index_from_doppler(2000.0, params, 4), "Doppler exceeds model order");
  CHECK_THROWS_WITH(dominant_index_from_doppler(-2000.0, params, 4), "Doppler exceeds model order");
}

TEST_CASE("dominant index from position", "[geometry]") {
  const double F = params.packet_duration * params.max_doppler(v500);
  CHECK(dominant_index_from_position(d0, layout, F, 4) == 2);
  CHECK(dominant_index_from_position(2200.0, layout, F, 4) == 0);
  CHECK(dominant_index_from_position(200.0, layout, F, 4) == 4);
  CHECK_THROWS_WITH(dominant_index_from_position(-1.0, layout, F, 4), "antenna outside cell coverage");

  // agrees with the Doppler route away from the branch point
  for (int a : {1, 2}) {
    const int Q = 2 * static_cast<int>(std::ceil(a * F));
    for (int i = 0; i <= 2000; ++i) {
      const double alpha = 2.0 * d0 * i / 2000.0;
      if (alpha == d0) continue;
      const double f = doppler_shift(alpha, v500, params, layout);
      CHECK(dominant_index_from_position(alpha, layout, F, Q, a) == dominant_index_from_doppler(f, params, Q, a));
    }
  }
}

TEST_CASE("serving cells along the track", "[geometry]") {
  CHECK(serving_cells(1200.0, layout) == std::vector<int>{1});
  CHECK(serving_cells(2200.0, layout) == std::vector<int>{1, 2});
  CHECK(serving_cells(2500.0, layout) == std::vector<int>{2});
  CHECK(serving_cells(-10.0, layout).empty());
  // overlap edges: A_2 at 2000, C_1 at 2 d0
  CHECK(serving_cells(1999.0, layout).size() == 1);
  CHECK(serving_cells(2001.0, layout).size() == 2);
  CHECK(serving_cells(2.0 * d0 - 0.5, layout).size() == 2);
  CHECK(serving_cells(2.0 * d0 + 0.5, layout).size() == 1);
}

TEST_CASE("the two cells give distinct indices everywhere in the overlap", "[geometry]") {
  const double F = params.packet_duration * params.max_doppler(v500);
  for (double x = 2000.5; x < 2.0 * d0; x += 5.0) {
    const double f1 = doppler_shift(local_offset(x, 1, layout), v500, params, layout);
    const double f2 = doppler_shift(local_offset(x, 2, layout), v500, params, layout);
    CHECK(f1 < 0.0);
    CHECK(f2 > 0.0);
    CHECK(dominant_index_from_position(local_offset(x, 1, layout), layout, F, 4) !=
          dominant_index_from_position(local_offset(x, 2, layout), layout, F, 4));
  }
}

TEST_CASE("position error perturbs the mapped index near the station", "[geometry]") {
  CHECK(perturb_position(2200.0, 0.0) == 2200.0);
  CHECK(perturb_position(2200.0, 15.0) == 2215.0);
  const double F = params.packet_duration * params.max_doppler(v500);
  const int at = dominant_index_from_position(d0, layout, F, 4);
  const int moved = dominant_index_from_position(perturb_position(d0, 15.0), layout, F, 4);
  // F cos at d0 + 15 m is about -0.016, which floors to -1
  CHECK(at == 2);
  CHECK(moved == 1);
}

TEST_CASE("train state validation", "[geometry]") {
  TrainState ok{2200.0, v500, {-120.0, 120.0}, 240.0};
  CHECK_NOTHROW(ok.validate());
  CHECK(ok.antenna_position(0) == 2080.0);
  CHECK_THROWS_AS((TrainState{0.0, -1.0, {0.0}, 240.0}.validate()), Error);
  CHECK_THROWS_AS((TrainState{0.0, 1.0, {120.0, -120.0}, 240.0}.validate()), Error);
  CHECK_THROWS_AS((TrainState{0.0, 1.0, {-150.0, 150.0}, 240.0}.validate()), Error);
  CHECK_THROWS_AS((DopplerParams{0.0, 3e8, 1e-3}.validate()), Error);
}
