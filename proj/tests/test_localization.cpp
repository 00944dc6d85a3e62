#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "pseudolat/errors.hpp"
#include "pseudolat/localization.hpp"
#include "pseudolat/stats.hpp"

using namespace pseudolat;

namespace {

std::vector<RangeMeasurement> noiseless(const WaypointSeries& anchor, const Position3& target) {
  std::vector<RangeMeasurement> m;
  for (std::size_t k = 0; k < anchor.size(); ++k) m.push_back({anchor.t(k), anchor.p(k), distance(anchor.p(k), target), true});
  return m;
}

WaypointSeries circle60() { return sample_trajectory(TrajectorySpec::circular({0, 0, 100}, 50, 2 * kPi / 60), 0, 1, 60); }

SolveOptions planar() {
  SolveOptions o;
  o.bounds.min = {-500, -500, 0};
  o.bounds.max = {500, 500, 0};
  return o;
}

}  // namespace

TEST_CASE("residual_sum examples") {
  const std::vector<AnchorRange> one{{{0, 0, 0}, 5}};
  CHECK(residual_sum({3, 4, 0}, one) == 0);
  CHECK(residual_sum({6, 8, 0}, one) == 25);
  const Position3 target{20, 30, 40};
  std::vector<AnchorRange> exact;
  for (Position3 a : {Position3{0, 0, 0}, Position3{100, 0, 0}, Position3{0, 100, 0}}) exact.push_back({a, distance(a, target)});
  CHECK(residual_sum(target, exact) == doctest::Approx(0).epsilon(1e-24));
  CHECK_THROWS_AS(residual_sum({0, 0, 0}, {}), InvalidArgument);
  CHECK_THROWS_AS(residual_gradient({0, 0, 0}, {}), InvalidArgument);
}

TEST_CASE("analytic gradient matches central differences") {
  Rng rng(31);
  std::uniform_real_distribution<double> u(-200, 200);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<AnchorRange> r;
    for (int k = 0; k < 6; ++k) r.push_back({{u(rng), u(rng), 100 + u(rng) / 4}, 150 + u(rng) / 2});
    const Position3 p{u(rng), u(rng), u(rng) / 20};
    const Position3 g = residual_gradient(p, r);
    const double h = 1e-6;
    const Position3 fd{(residual_sum(p + Position3{h, 0, 0}, r) - residual_sum(p - Position3{h, 0, 0}, r)) / (2 * h),
                       (residual_sum(p + Position3{0, h, 0}, r) - residual_sum(p - Position3{0, h, 0}, r)) / (2 * h),
                       (residual_sum(p + Position3{0, 0, h}, r) - residual_sum(p - Position3{0, 0, h}, r)) / (2 * h)};
    CHECK((g - fd).norm() / g.norm() < 1e-5);
  }
}

TEST_CASE("multilateration from four fixed anchors") {
  const Position3 target{20, 30, 40};
  std::vector<AnchorRange> r;
  for (Position3 a : {Position3{0, 0, 0}, Position3{100, 0, 0}, Position3{0, 100, 0}, Position3{0, 0, 100}}) {
    r.push_back({a, distance(a, target)});
  }
  SolveOptions o;
  o.bounds.min = {-200, -200, -200};
  o.bounds.max = {200, 200, 200};
  const Solution s = multilaterate(r, o);
  CHECK(distance(s.p_hat, target) < 1e-6);
  CHECK(s.converged);
}

TEST_CASE("multilateration rejects degenerate anchor sets") {
  const Position3 target{20, 30, 0};
  std::vector<AnchorRange> coplanar;
  for (Position3 a : {Position3{0, 0, 50}, Position3{100, 0, 50}, Position3{0, 100, 50}, Position3{70, 70, 50}}) {
    coplanar.push_back({a, distance(a, target)});
  }
  CHECK_THROWS_AS(multilaterate(coplanar, SolveOptions{}), GeometryError);
  coplanar.pop_back();
  CHECK_THROWS_AS(multilaterate(coplanar, SolveOptions{}), GeometryError);
  // Three anchors suffice for the known-altitude problem.
  const Solution s = multilaterate(coplanar, planar());
  CHECK(distance(s.p_hat, target) < 1e-6);
  std::vector<AnchorRange> collinear;
  for (double x : {0.0, 50.0, 100.0}) collinear.push_back({{x, 0, 50}, distance({x, 0, 50}, target)});
  CHECK_THROWS_AS(multilaterate(collinear, planar()), GeometryError);
}

TEST_CASE("multilateration RMSE tracks the CRLB at sigma = 1 m") {
  const Position3 target{10, -20, 5};
  std::vector<Position3> anchors;
  for (int k = 0; k < 8; ++k) {
    const double a = 2 * kPi * k / 8;
    anchors.push_back({150 * std::cos(a), 150 * std::sin(a), k % 2 == 0 ? 0.0 : 120.0});
  }
  SolveOptions o;
  o.bounds.min = {-300, -300, -100};
  o.bounds.max = {300, 300, 100};
  o.multistart_grid = {2, 2, 1};
  Rng rng(2);
  std::normal_distribution<double> n(0, 1);
  double sq = 0;
  constexpr int kRuns = 1000;
  for (int run = 0; run < kRuns; ++run) {
    std::vector<AnchorRange> r;
    for (const auto& a : anchors) r.push_back({a, distance(a, target) + n(rng)});
    sq += std::pow(distance(multilaterate(r, o).p_hat, target), 2);
  }
  const double rmse = std::sqrt(sq / kRuns);
  const double bound = std::sqrt(crlb(anchors, target, [](double) { return 1.0; }).trace());
  CHECK(std::abs(rmse / bound - 1) < 0.25);
}

TEST_CASE("circular pseudo-multilateration recovers the target uniquely") {
  const Position3 target{20, -10, 0};
  const Solution s = pseudo_multilaterate_static(noiseless(circle60(), target), SolveOptions{});
  CHECK(distance(s.p_hat, target) < 1e-6);
  CHECK(s.alternates.empty());
  CHECK(s.converged);
  CHECK(s.residual >= 0);
}

TEST_CASE("linear flight reports the mirror solution") {
  const Position3 target{20, -10, 0};
  const auto line = sample_trajectory(TrajectorySpec::linear({-300, 0, 100}, {10, 0, 0}), 0, 1, 60);
  const Solution s = pseudo_multilaterate_static(noiseless(line, target), planar());
  const Position3 mirror = mirror_point({-300, 0, 100}, {1, 0, 0}, target);
  REQUIRE(s.alternates.size() == 1);
  const Position3 other = distance(s.p_hat, target) < distance(s.p_hat, mirror) ? s.alternates[0].p : s.p_hat;
  const Position3 found = distance(s.p_hat, target) < distance(s.p_hat, mirror) ? s.p_hat : s.alternates[0].p;
  CHECK(distance(found, target) < 1e-6);
  CHECK(distance(other, mirror) < 1e-6);
  CHECK(std::abs(s.alternates[0].residual - s.residual) < 1e-9);
}

TEST_CASE("ambiguity detection over random configurations") {
  Rng rng(12);
  std::uniform_real_distribution<double> u(-150, 150);
  std::uniform_real_distribution<double> ang(0, 2 * kPi);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = ang(rng);
    const Position3 dir{std::cos(a), std::sin(a), 0};
    const Position3 start = Position3{u(rng), u(rng), 100} - dir * 300.0;
    Position3 target{u(rng), u(rng), 0};
    const Position3 mirror = mirror_point(start, dir, target);
    if (distance(target, mirror) < 5) target = target + Position3{-dir.y, dir.x, 0} * 10.0;
    const auto line = sample_trajectory(TrajectorySpec::linear(start, dir * 10.0), 0, 1, 60);
    const Solution s = pseudo_multilaterate_static(noiseless(line, target), planar());
    REQUIRE(s.alternates.size() == 1);
    const Position3 m = mirror_point(start, dir, target);
    const double d1 = std::min(distance(s.p_hat, target) + distance(s.alternates[0].p, m),
                               distance(s.p_hat, m) + distance(s.alternates[0].p, target));
    CHECK(d1 < 2e-6);

    const Position3 center{u(rng), u(rng), 100};
    const auto circle = sample_trajectory(TrajectorySpec::circular(center, 50, 2 * kPi / 60, ang(rng)), 0, 1, 60);
    Position3 t2{u(rng), u(rng), 0};
    if (std::hypot(t2.x - center.x, t2.y - center.y) < 1) t2.x += 10;
    CHECK(pseudo_multilaterate_static(noiseless(circle, t2), SolveOptions{}).alternates.empty());
  }
}

TEST_CASE("too few measurements") {
  const auto m = noiseless(circle60(), {0, 0, 0});
  CHECK_THROWS_AS(pseudo_multilaterate_static(std::span(m).first(2), SolveOptions{}), InvalidArgument);
}

TEST_CASE("noise-free fixed point for any multistart grid density") {
  const Position3 target{-35, 42, 3};
  const auto m = noiseless(circle60(), target);
  for (std::array<int, 3> g : {std::array{2, 2, 1}, std::array{2, 2, 2}, std::array{3, 3, 1}, std::array{7, 7, 3}}) {
    SolveOptions o;
    o.multistart_grid = g;
    CHECK(distance(pseudo_multilaterate_static(m, o).p_hat, target) < 1e-6);
  }
}

TEST_CASE("median error under default noise over 500 runs") {
  const auto anchor = circle60();
  const Position3 target{20, -10, 0};
  NoiseModel model;
  std::vector<double> errors;
  for (int run = 0; run < 500; ++run) {
    model.seed = 1000 + static_cast<std::uint64_t>(run);
    std::vector<Position3> tp(anchor.size(), target);
    const auto meas = collect_measurements(anchor, WaypointSeries(anchor.times(), tp), {}, model);
    errors.push_back(distance(pseudo_multilaterate_static(meas, SolveOptions{}).p_hat, target));
  }
  CHECK(percentile(errors, 0.5) < 5.0);
}

TEST_CASE("solver residual never exceeds a 0.25 m brute-force grid") {
  Rng rng(44);
  std::uniform_real_distribution<double> u(-100, 100);
  std::normal_distribution<double> noise(0, 2);
  for (int trial = 0; trial < 10; ++trial) {
    const Position3 target{u(rng), u(rng), 0};
    std::vector<RangeMeasurement> meas;
    const int n = 3 + trial % 4;
    for (int k = 0; k < n; ++k) {
      const Position3 a{u(rng), u(rng), 100 + u(rng) / 2};
      meas.push_back({static_cast<double>(k), a, distance(a, target) + noise(rng), true});
    }
    SolveOptions o;
    o.bounds.min = {-100, -100, 0};
    o.bounds.max = {100, 100, 0};
    const Solution s = pseudo_multilaterate_static(meas, o);
    const auto ranges = to_anchor_ranges(meas);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 800; ++i) {
      for (int j = 0; j <= 800; ++j) best = std::min(best, residual_sum({-100 + 0.25 * i, -100 + 0.25 * j, 0}, ranges));
    }
    CHECK(s.residual <= best);
  }
}

TEST_CASE("huber weighting resists a gross outlier") {
  const Position3 target{20, -10, 0};
  auto meas = noiseless(circle60(), target);
  for (std::size_t k = 0; k < 6; ++k) meas[k].d_meas += 60;
  const double plain = distance(pseudo_multilaterate_static(meas, SolveOptions{}).p_hat, target);
  SolveOptions h;
  h.huber_k = 3;
  const double robust = distance(pseudo_multilaterate_static(meas, h).p_hat, target);
  CHECK(robust < 0.5 * plain);
}

TEST_CASE("solve options validation") {
  SolveOptions o;
  o.multistart_grid = {0, 1, 1};
  CHECK_THROWS_AS(o.validate(), InvalidArgument);
  o = SolveOptions{};
  o.grad_tol = 0;
  CHECK_THROWS_AS(o.validate(), InvalidArgument);
  o = SolveOptions{};
  o.bounds.min.x = 1000;
  CHECK_THROWS_AS(o.validate(), InvalidArgument);
}

TEST_CASE("moving target: static reduction") {
  const Position3 target{20, -10, 0};
  const auto anchor = sample_trajectory(TrajectorySpec::circular({0, 0, 100}, 50, 2 * kPi / 60), 0, 1, 120);
  const auto m = noiseless(anchor, target);
  for (std::size_t window : {20u, 45u, 60u}) {
    const auto track = pseudo_multilaterate_moving(m, window, 10, SolveOptions{});
    for (const auto& p : track.positions()) CHECK(distance(p, target) < 1e-6);
  }
  CHECK_THROWS_AS(pseudo_multilaterate_moving(m, 2, 1, SolveOptions{}), InvalidArgument);
  CHECK_THROWS_AS(pseudo_multilaterate_moving(m, 10, 0, SolveOptions{}), InvalidArgument);
  CHECK_THROWS_AS(pseudo_multilaterate_moving(m, 121, 1, SolveOptions{}), InvalidArgument);
}

TEST_CASE("moving target at 0.5 m/s is tracked within the in-window displacement") {
  const auto anchor = sample_trajectory(TrajectorySpec::circular({0, 0, 100}, 50, 2 * kPi / 60), 0, 1, 120);
  const Position3 start{20, -10, 0};
  const Position3 v{0.5, 0, 0};
  std::vector<RangeMeasurement> m;
  for (std::size_t k = 0; k < anchor.size(); ++k) {
    const Position3 x = start + v * anchor.t(k);
    m.push_back({anchor.t(k), anchor.p(k), distance(anchor.p(k), x), true});
  }
  const std::size_t window = 20;
  const auto track = pseudo_multilaterate_moving(m, window, 5, SolveOptions{});
  CHECK(track.size() == (120 - window) / 5 + 1);
  const double displacement = v.norm() * static_cast<double>(window - 1);
  for (std::size_t i = 0; i < track.size(); ++i) {
    CHECK(distance(track.p(i), start + v * track.t(i)) <= 2 * displacement);
  }
}

TEST_CASE("moving target: time reversal reverses the track") {
  const auto anchor = sample_trajectory(TrajectorySpec::circular({0, 0, 100}, 50, 2 * kPi / 60), 0, 1, 60);
  std::vector<RangeMeasurement> m;
  for (std::size_t k = 0; k < anchor.size(); ++k) {
    const Position3 x = Position3{20, -10, 0} + Position3{0.3, 0.1, 0} * anchor.t(k);
    m.push_back({anchor.t(k), anchor.p(k), distance(anchor.p(k), x), true});
  }
  std::vector<RangeMeasurement> rev(m.rbegin(), m.rend());
  for (auto& r : rev) r.t = -r.t;
  const auto fwd = pseudo_multilaterate_moving(m, 20, 5, SolveOptions{});
  const auto bwd = pseudo_multilaterate_moving(rev, 20, 5, SolveOptions{});
  REQUIRE(fwd.size() == bwd.size());
  const std::size_t n = fwd.size();
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(distance(fwd.p(i), bwd.p(n - 1 - i)) < 1e-6);
    CHECK(fwd.t(i) == doctest::Approx(-bwd.t(n - 1 - i)));
  }
}

TEST_CASE("CRLB examples") {
  const std::vector<Position3> axes{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const auto unit = [](double) { return 1.0; };
  const CrlbResult r = crlb(axes, {0, 0, 0}, unit);
  CHECK(r.trace() == doctest::Approx(3).epsilon(1e-12));
  CHECK_FALSE(r.rank_deficient);

  Rng rng(6);
  std::uniform_real_distribution<double> u(-100, 100);
  std::vector<Position3> a;
  for (int k = 0; k < 7; ++k) a.push_back({u(rng), u(rng), 50 + u(rng) / 3});
  std::vector<Position3> twice = a;
  twice.insert(twice.end(), a.begin(), a.end());
  const auto sigma = [](double d) { return 1 + 0.01 * d; };
  const Position3 target{5, 5, 0};
  CHECK(crlb(twice, target, sigma).trace() == doctest::Approx(0.5 * crlb(a, target, sigma).trace()).epsilon(1e-12));

  const std::vector<Position3> line{{0, 0, 0}, {10, 0, 0}, {20, 0, 0}};
  const CrlbResult c = crlb(line, {50, 0, 0}, unit);
  CHECK(c.rank_deficient);
  CHECK(c.rank == 1);
  CHECK_THROWS_AS(crlb(std::span(line).first(2), {50, 0, 0}, unit), InvalidArgument);
}

TEST_CASE("adding an anchor never loosens the bound (Loewner order)") {
  Rng rng(8);
  std::uniform_real_distribution<double> u(-200, 200);
  const auto sigma = [](double d) { return 1 + 0.01 * d; };
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Position3> a;
    for (int k = 0; k < 4; ++k) a.push_back({u(rng), u(rng), 100 + u(rng) / 4});
    const Position3 target{u(rng) / 2, u(rng) / 2, 0};
    const Eigen::Matrix3d before = crlb(a, target, sigma).covariance;
    a.push_back({u(rng), u(rng), 100 + u(rng) / 4});
    const Eigen::Matrix3d after = crlb(a, target, sigma).covariance;
    const Eigen::Matrix3d diff = before - after;
    const double smallest = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(diff).eigenvalues().minCoeff();
    CHECK(smallest >= -1e-9 * before.norm());
    for (int i = 0; i < 3; ++i) CHECK(after(i, i) <= before(i, i) * (1 + 1e-12));
  }
}
