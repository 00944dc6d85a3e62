#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "pseudolat/errors.hpp"
#include "pseudolat/io.hpp"
#include "pseudolat/ranging.hpp"

using namespace pseudolat;
namespace fs = std::filesystem;

namespace {

// Independent occlusion oracle: dense sampling of the closed segment.
bool segment_hits_box_sampled(const Position3& a, const Position3& b, const Obstacle& box) {
  constexpr int kSteps = 20000;
  for (int i = 0; i <= kSteps; ++i) {
    const Position3 p = a + (b - a) * (static_cast<double>(i) / kSteps);
    if (p.x >= box.min.x && p.x <= box.max.x && p.y >= box.min.y && p.y <= box.max.y && p.z >= box.min.z &&
        p.z <= box.max.z) {
      return true;
    }
  }
  return false;
}

WaypointSeries static_target(const WaypointSeries& anchor, const Position3& p) {
  return WaypointSeries(anchor.times(), std::vector<Position3>(anchor.size(), p));
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("pseudolat_test_" + name); }

}  // namespace

TEST_CASE("los_blocked examples") {
  const std::vector<Obstacle> through{{{-1, -1, 40}, {1, 1, 60}}};
  const std::vector<Obstacle> aside{{{10, 10, 40}, {12, 12, 60}}};
  CHECK(los_blocked({0, 0, 100}, {0, 0, 0}, through));
  CHECK_FALSE(los_blocked({0, 0, 100}, {0, 0, 0}, aside));
  // Vertical segment grazing the corner edge of the box top face.
  const std::vector<Obstacle> corner{{{0, 0, 40}, {2, 2, 60}}};
  CHECK(los_blocked({0, 0, 100}, {0, 0, 0}, corner));
  CHECK_FALSE(los_blocked({0, 0, 100}, {0, 0, 0}, {}));
  CHECK_THROWS_AS(los_blocked({1, 2, 3}, {1, 2, 3}, through), InvalidArgument);
}

TEST_CASE("los_blocked agrees with a sampled segment oracle") {
  Rng rng(17);
  std::uniform_real_distribution<double> u(-50, 50);
  std::uniform_real_distribution<double> s(1, 30);
  int blocked = 0;
  for (int i = 0; i < 400; ++i) {
    const Position3 a{u(rng), u(rng), 100};
    const Position3 b{u(rng), u(rng), 0};
    const Position3 lo{u(rng), u(rng), 20 + std::abs(u(rng))};
    const Obstacle box{lo, lo + Position3{s(rng), s(rng), s(rng)}};
    const bool expect = segment_hits_box_sampled(a, b, box);
    const std::vector<Obstacle> boxes{box};
    CHECK(los_blocked(a, b, boxes) == expect);
    blocked += expect ? 1 : 0;
  }
  CHECK(blocked > 20);
}

TEST_CASE("obstacle validation") {
  CHECK_THROWS_AS((Obstacle{{0, 0, 0}, {0, 1, 1}}.validate()), InvalidArgument);
  CHECK_NOTHROW((Obstacle{{0, 0, 0}, {1, 1, 1}}.validate()));
}

TEST_CASE("noiseless range sample is exact") {
  NoiseModel m{0, 0, 0, 0};
  Rng rng(1);
  CHECK(sample_range(120, true, m, rng) == 120);
  CHECK(sample_range(120, false, m, rng) == 120);
  CHECK_THROWS_AS(sample_range(-1, true, m, rng), InvalidArgument);
}

TEST_CASE("LoS range noise std grows with distance") {
  NoiseModel m;
  m.sigma0 = 1;
  m.eta = 0.01;
  Rng rng(2024);
  constexpr int kDraws = 100000;
  double sum = 0;
  double sq = 0;
  for (int i = 0; i < kDraws; ++i) {
    const double e = sample_range(200, true, m, rng) - 200;
    sum += e;
    sq += e * e;
  }
  const double mean = sum / kDraws;
  const double sd = std::sqrt(sq / kDraws - mean * mean);
  CHECK(sd == doctest::Approx(3.0).epsilon(0.05 / 3.0));
  CHECK(std::abs(mean) < 0.05);
}

TEST_CASE("noise std matches sigma0 + eta d within 2% across distances") {
  Rng rng(99);
  for (double d : {50.0, 150.0, 400.0}) {
    NoiseModel m{0.5, 0.02, 0, 0};
    constexpr int kDraws = 100000;
    double sum = 0;
    double sq = 0;
    for (int i = 0; i < kDraws; ++i) {
      const double e = sample_range(d, true, m, rng) - d;
      sum += e;
      sq += e * e;
    }
    const double mean = sum / kDraws;
    CHECK(std::sqrt(sq / kDraws - mean * mean) == doctest::Approx(m.sigma(d)).epsilon(0.02));
  }
}

TEST_CASE("NLoS bias mean and positivity") {
  NoiseModel m{0, 0, 5, 0};
  Rng rng(7);
  constexpr int kDraws = 100000;
  double sum = 0;
  for (int i = 0; i < kDraws; ++i) {
    const double d = sample_range(100, false, m, rng);
    CHECK(d >= 100);
    sum += d;
  }
  CHECK(std::abs(sum / kDraws - 105) < 0.1);
}

TEST_CASE("noisy ranges clamp at zero") {
  NoiseModel m{50, 0, 0, 0};
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) CHECK(sample_range(1, true, m, rng) >= 0);
}

TEST_CASE("collect_measurements: noiseless, moving target and seeding") {
  const auto spec = TrajectorySpec::circular({0, 0, 100}, 50, 2 * kPi / 60);
  const auto anchor = sample_trajectory(spec, 0, 1, 60);
  const Position3 target{20, -10, 0};
  const auto meas = collect_measurements(anchor, static_target(anchor, target), {}, NoiseModel{0, 0, 0, 0});
  REQUIRE(meas.size() == 60);
  for (std::size_t k = 0; k < 60; ++k) {
    CHECK(meas[k].d_meas == distance(anchor.p(k), target));
    CHECK(meas[k].los);
    CHECK(meas[k].t == anchor.t(k));
  }

  std::vector<Position3> moving;
  for (double t : anchor.times()) moving.push_back(target + Position3{0.5, 0.2, 0} * t);
  const WaypointSeries mt(anchor.times(), moving);
  const auto mm = collect_measurements(anchor, mt, {}, NoiseModel{0, 0, 0, 0});
  for (std::size_t k = 0; k < 60; ++k) {
    const double t = anchor.t(k);
    const Position3 p{50 * std::cos(2 * kPi / 60 * t), 50 * std::sin(2 * kPi / 60 * t), 100};
    const Position3 q{20 + 0.5 * t, -10 + 0.2 * t, 0};
    CHECK(mm[k].d_meas == doctest::Approx(distance(p, q)).epsilon(1e-12));
  }

  NoiseModel noisy;
  noisy.seed = 123;
  const auto a = collect_measurements(anchor, static_target(anchor, target), {}, noisy);
  const auto b = collect_measurements(anchor, static_target(anchor, target), {}, noisy);
  noisy.seed = 124;
  const auto c = collect_measurements(anchor, static_target(anchor, target), {}, noisy);
  bool differs = false;
  for (std::size_t k = 0; k < 60; ++k) {
    CHECK(a[k].d_meas == b[k].d_meas);
    differs = differs || a[k].d_meas != c[k].d_meas;
  }
  CHECK(differs);
}

TEST_CASE("collect_measurements rejects mismatched grids") {
  const auto spec = TrajectorySpec::circular({0, 0, 100}, 50, 2 * kPi / 60);
  const auto anchor = sample_trajectory(spec, 0, 1, 10);
  const auto shorter = sample_trajectory(spec, 0, 1, 9);
  const auto shifted = sample_trajectory(spec, 0.5, 1, 10);
  CHECK_THROWS_AS(collect_measurements(anchor, shorter, {}, NoiseModel{}), InvalidArgument);
  CHECK_THROWS_AS(collect_measurements(anchor, shifted, {}, NoiseModel{}), InvalidArgument);
}

TEST_CASE("an obstacle over part of the circle produces one contiguous NLoS stripe") {
  const auto spec = TrajectorySpec::circular({0, 0, 100}, 50, 2 * kPi / 60);
  const auto anchor = sample_trajectory(spec, 0, 1, 180);
  const Position3 target{0, 0, 0};
  const Obstacle box{{20, -5, 50}, {60, 30, 90}};
  const std::vector<Obstacle> boxes{box};
  NoiseModel model{0, 0, 5, 77};
  const auto meas = collect_measurements(anchor, static_target(anchor, target), boxes, model);
  const auto mats = build_measurement_matrix(meas, spec, static_target(anchor, target));
  REQUIRE(mats.size() == 3);

  const auto& m = mats[1];
  REQUIRE(m.rows.size() == 60);
  int n_nlos = 0;
  int transitions = 0;
  for (std::size_t i = 0; i < 60; ++i) {
    const Position3 a{m.rows[i][0], m.rows[i][1], m.rows[i][2]};
    const bool oracle_nlos = segment_hits_box_sampled(a, target, box);
    CHECK(m.los[i] == !oracle_nlos);
    const double d_true = distance(a, target);
    if (oracle_nlos) {
      ++n_nlos;
      CHECK(m.rows[i][3] >= d_true);
    } else {
      CHECK(m.rows[i][3] == d_true);
    }
    transitions += m.los[i] != m.los[(i + 59) % 60] ? 1 : 0;
  }
  CHECK(n_nlos >= 6);
  CHECK(n_nlos <= 20);
  CHECK(transitions == 2);  // a single cyclic run
}

TEST_CASE("measurement matrices partition whole revolutions") {
  const auto spec = TrajectorySpec::circular({0, 0, 100}, 50, 2 * kPi / 60);
  const Position3 target{20, -10, 0};
  for (auto [n, expected] : {std::pair{180, 3}, std::pair{150, 2}}) {
    const auto anchor = sample_trajectory(spec, 0, 1, static_cast<std::size_t>(n));
    const auto meas = collect_measurements(anchor, static_target(anchor, target), {}, NoiseModel{0, 0, 0, 0});
    const auto mats = build_measurement_matrix(meas, spec, static_target(anchor, target));
    CHECK(mats.size() == static_cast<std::size_t>(expected));
    for (std::size_t r = 0; r < mats.size(); ++r) {
      CHECK(mats[r].revolution == static_cast<int>(r));
      CHECK(mats[r].rows.size() == 60);
      CHECK(mats[r].label == target);
    }
  }
  CHECK(samples_per_revolution(spec, 1.0) == 60);
  CHECK(samples_per_revolution(spec, 7.0) == 8);
  const auto line = TrajectorySpec::linear({0, 0, 100}, {10, 0, 0});
  const auto la = sample_trajectory(line, 0, 1, 10);
  const auto lm = collect_measurements(la, static_target(la, target), {}, NoiseModel{0, 0, 0, 0});
  CHECK_THROWS_AS(build_measurement_matrix(lm, line, static_target(la, target)), UnsupportedOperation);
}

TEST_CASE("matrix labels follow a moving target") {
  const auto spec = TrajectorySpec::circular({0, 0, 100}, 50, 2 * kPi / 60);
  const auto anchor = sample_trajectory(spec, 0, 1, 120);
  std::vector<Position3> p;
  for (double t : anchor.times()) p.push_back(Position3{t, 0, 0});
  const WaypointSeries target(anchor.times(), p);
  const auto meas = collect_measurements(anchor, target, {}, NoiseModel{0, 0, 0, 0});
  const auto mats = build_measurement_matrix(meas, spec, target);
  REQUIRE(mats.size() == 2);
  CHECK(mats[0].label.x == 30);
  CHECK(mats[1].label.x == 90);
}

TEST_CASE("dataset export round-trips bit-exactly") {
  const auto spec = TrajectorySpec::circular({3, 4, 100}, 50, 2 * kPi / 60, 0.1);
  const auto anchor = sample_trajectory(spec, 0, 1, 120);
  const Position3 target{20.125, -10.3, 1.7};
  const std::vector<Obstacle> boxes{{{20, -5, 50}, {60, 30, 90}}};
  NoiseModel model;
  model.seed = 5;
  const auto meas = collect_measurements(anchor, static_target(anchor, target), boxes, model);
  const auto mats = build_measurement_matrix(meas, spec, static_target(anchor, target));

  const fs::path path = temp_file("dataset.csv");
  export_dataset(mats, path);
  const std::string text = read_text_file(path);
  CHECK(std::count(text.begin(), text.end(), '\n') == 121);
  CHECK(text.rfind("rev,row,x,y,z,d,los,label_x,label_y,label_z\n", 0) == 0);

  const auto back = read_dataset(path);
  REQUIRE(back.size() == mats.size());
  for (std::size_t r = 0; r < mats.size(); ++r) {
    CHECK(back[r].revolution == mats[r].revolution);
    CHECK(back[r].label == mats[r].label);
    CHECK(back[r].los == mats[r].los);
    REQUIRE(back[r].rows.size() == mats[r].rows.size());
    for (std::size_t i = 0; i < mats[r].rows.size(); ++i) CHECK(back[r].rows[i] == mats[r].rows[i]);
  }
  fs::remove(path);
}

TEST_CASE("single matrix export has one line per row plus header") {
  MeasurementMatrix m;
  for (int i = 0; i < 60; ++i) {
    m.rows.push_back({1.0 * i, 2, 100, 101.5});
    m.los.push_back(true);
  }
  const std::vector<MeasurementMatrix> mats{m};
  const fs::path path = temp_file("one.csv");
  export_dataset(mats, path);
  const std::string text = read_text_file(path);
  CHECK(std::count(text.begin(), text.end(), '\n') == 61);
  fs::remove(path);
}

TEST_CASE("dataset export errors") {
  const fs::path path = temp_file("empty.csv");
  fs::remove(path);
  CHECK_THROWS_AS(export_dataset({}, path), InvalidArgument);
  CHECK_FALSE(fs::exists(path));

  MeasurementMatrix m;
  m.rows.push_back({0, 0, 0, 1});
  m.los.push_back(true);
  const std::vector<MeasurementMatrix> mats{m};
  const fs::path bad = fs::temp_directory_path() / "pseudolat_no_such_dir" / "x.csv";
  try {
    export_dataset(mats, bad);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(e.path() == bad.string());
  }
}
