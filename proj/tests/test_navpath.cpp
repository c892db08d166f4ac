#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ntt/navpath.hpp"
#include "oracles.hpp"

using namespace ntt;

TEST_CASE("interpolate_route examples") {
  const auto a = interpolate_route(Polyline({{0, 0}, {20, 0}}), 5.0);
  REQUIRE(a.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(a[i] == Point2{5.0 * i, 0});
  const auto b = interpolate_route(Polyline({{0, 0}, {3, 0}, {10, 0}}), 5.0);
  REQUIRE(b.size() == 3);
  CHECK(b[1] == Point2{5, 0});
  CHECK(b[2] == Point2{10, 0});
  const auto c = interpolate_route(Polyline({{0, 0}, {6, 0}, {6, 6}}), 5.0);
  REQUIRE(c.size() == 3);
  CHECK(c[1] == Point2{5, 0});
  CHECK(distance(c[2], Point2{6, 4}) < 1e-12);
  CHECK(distance(c[1], c[2]) <= 5.0);
  // trailing partial segment dropped
  CHECK(interpolate_route(Polyline({{0, 0}, {12, 0}}), 5.0).size() == 3);
  CHECK_THROWS_WITH_AS(interpolate_route(Polyline({{0, 0}, {4, 0}}), 5.0), "route too short",
                       std::invalid_argument);
}

TEST_CASE("interpolated vertices sit at exact arclength multiples") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> turn(-0.6, 0.6), len(0.5, 9.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Point2> pts{{0, 0}};
    double h = 0;
    for (int i = 0; i < 12; ++i) {
      h += turn(rng);
      pts.push_back(pts.back() + len(rng) * Point2{std::cos(h), std::sin(h)});
    }
    const Polyline route(pts);
    const double spacing = trial % 2 ? 5.0 : 3.7;
    const auto out = interpolate_route(route, spacing);
    CHECK(out.size() == static_cast<std::size_t>(std::floor(route.length() / spacing)) + 1);
    std::size_t seg = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double s = oracle::arclength_of(route, out[i], seg);
      CHECK(std::abs(s - spacing * i) < 1e-9);
      if (i > 0) CHECK(distance(out[i - 1], out[i]) <= spacing + 1e-9);
    }
  }
}

TEST_CASE("select_window examples") {
  const auto route = interpolate_route(Polyline({{0, 0}, {60, 0}}), 5.0);
  const auto w = select_window(route, {0.4, 0.2}, 2);
  REQUIRE(w.points.size() == 3);
  CHECK(w.points[0] == Point2{0, 0});
  CHECK(w.points[2] == Point2{10, 0});
  CHECK_FALSE(w.padded);
  // equidistant to (5,0) and (10,0): lower index
  CHECK(select_window(route, {7.5, 1.0}, 2).points[0] == Point2{5, 0});
  const auto beyond = select_window(route, {100, 0}, 3);
  CHECK(beyond.padded);
  REQUIRE(beyond.points.size() == 4);
  CHECK(beyond.points[0] == Point2{60, 0});
  CHECK(beyond.points[3] == Point2{75, 0});
  CHECK_THROWS_AS(select_window(route, {0, 0}, 0), std::invalid_argument);
}

TEST_CASE("select_window starts at the exhaustive nearest vertex") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 300; ++trial) {
    const Polyline route = oracle::random_polyline(rng, 3 + trial % 20, 40.0);
    const Point2 ego = oracle::random_points(rng, 1, 50.0)[0];
    const auto w = select_window(route, ego, 1 + trial % 10);
    std::size_t best = 0;
    for (std::size_t i = 0; i < route.size(); ++i)
      if (distance(route[i], ego) < distance(route[best], ego)) best = i;
    CHECK(w.points[0] == route[best]);
    CHECK(w.points.size() == w.m + 1);
  }
}

TEST_CASE("vectorize_window examples") {
  NavWindow w{{{0, 0}, {3, 4}}, 1, false};
  auto n = vectorize_window(w);
  REQUIRE(n.size() == 1);
  CHECK(n[0].d == Point2{3, 4});
  CHECK(n[0].cos_h == doctest::Approx(0.6));
  CHECK(n[0].sin_h == doctest::Approx(0.8));
  w = {{{0, 0}, {5, 0}, {10, 0}}, 2, false};
  n = vectorize_window(w);
  REQUIRE(n.size() == 2);
  for (const auto& x : n) {
    CHECK(x.d == Point2{5, 0});
    CHECK(x.cos_h == 1.0);
    CHECK(x.sin_h == 0.0);
  }
  w = {{{0, 0}, {0, 5}}, 1, false};
  n = vectorize_window(w);
  CHECK(std::abs(n[0].cos_h) < 1e-15);
  CHECK(n[0].sin_h == 1.0);
  w = {{{0, 0}, {1, 1}, {1, 1}}, 2, false};
  CHECK_THROWS_WITH_AS(vectorize_window(w), "duplicate navigation vertices", std::invalid_argument);
}

TEST_CASE("node features: unit heading, exact reconstruction, translation invariance") {
  std::mt19937_64 rng(23);
  // dyadic coordinates keep every sum exact, so translated differences are too
  std::uniform_int_distribution<int> q(-40000, 40000);
  const auto dy = [&] { return std::ldexp(static_cast<double>(q(rng)), -10); };
  for (int trial = 0; trial < 500; ++trial) {
    NavWindow w;
    w.m = 10;
    for (std::size_t i = 0; i <= w.m; ++i) w.points.push_back({dy(), dy()});
    const auto nodes = vectorize_window(w);
    Point2 p = w.points[0];
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      CHECK(std::abs(nodes[i].cos_h * nodes[i].cos_h + nodes[i].sin_h * nodes[i].sin_h - 1.0) < 1e-9);
      p = p + nodes[i].d;
      CHECK(p == w.points[i + 1]);
    }
    const Point2 t{dy(), dy()};
    NavWindow moved = w;
    for (auto& pt : moved.points) pt = pt + t;
    const auto m = vectorize_window(moved);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      CHECK(m[i].d == nodes[i].d);
      CHECK(m[i].cos_h == nodes[i].cos_h);
      CHECK(m[i].sin_h == nodes[i].sin_h);
    }
  }
}

TEST_CASE("perturb_route") {
  const Polyline route({{0, 0}, {5, 0}, {10, 0}, {15, 2}});
  const auto same = perturb_route(route, 0, 0, 9);
  CHECK(same.points() == route.points());
  CHECK(perturb_route(route, 2, 2, 9).points() == perturb_route(route, 2, 2, 9).points());
  CHECK(perturb_route(route, 2, 2, 9).points() != perturb_route(route, 2, 2, 10).points());
  CHECK_THROWS_AS(perturb_route(route, -1, 0, 0), std::invalid_argument);

  std::vector<Point2> pts;
  for (int i = 0; i < 10000; ++i) pts.push_back({5.0 * i, 0.0});
  const auto noisy = perturb_route(Polyline(pts), 2.0, 0.0, 77);
  double s2 = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) s2 += noisy[i].y * noisy[i].y;
  const double sd = std::sqrt(s2 / pts.size());
  CHECK(std::abs(sd - 2.0) < 0.1);
}

TEST_CASE("ego_in_window_frame") {
  NavWindow w{{{2, 2}, {2, 7}}, 1, false};
  const Point2 e = ego_in_window_frame(w, {0, 0});
  CHECK(e.x == doctest::Approx(-2.0));
  CHECK(e.y == doctest::Approx(2.0));
}
