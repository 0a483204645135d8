// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cdiff/domain_io.hpp"
#include "cdiff/geometry.hpp"
#include "oracles.hpp"

using namespace cdiff;

namespace {

Vec v(std::initializer_list<double> xs) {
  Vec out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out(i++) = x;
  return out;
}

ConstraintSet unit_disc() { return ConstraintSet(2, {}, {SphereConstraint(Vec::Zero(2), 1.0)}); }

template <typename F>
void expect_kind(F&& f, ErrorKind kind) {
  try {
    f();
    FAIL() << "expected " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

Vec random_interior(const ConstraintSet& set, std::mt19937_64& gen, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec x(static_cast<Eigen::Index>(set.dimension()));
  do {
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = u(gen);
  } while (!is_interior(x, set));
  return x;
}

}  // namespace

TEST(LinearConstraint, NormalIsRescaledToUnitLength) {
  LinearConstraint c(v({3.0, 4.0}), 10.0);
  EXPECT_NEAR(c.normal().norm(), 1.0, 1e-12);
  EXPECT_NEAR(c.offset(), 2.0, 1e-12);
  EXPECT_NEAR(c.normal()(0), 0.6, 1e-15);
  expect_kind([] { LinearConstraint(Vec::Zero(2), 1.0); }, ErrorKind::config_error);
}

TEST(SphereConstraint, RequiresPositiveRadius) {
  expect_kind([] { SphereConstraint(Vec::Zero(2), 0.0); }, ErrorKind::config_error);
  expect_kind([] { SphereConstraint(Vec::Zero(2), -1.0); }, ErrorKind::config_error);
}

TEST(ConstraintSet, RejectsMixedDimensions) {
  expect_kind([] { ConstraintSet(2, {LinearConstraint(v({1.0}), 1.0)}); }, ErrorKind::dimension_mismatch);
  expect_kind([] { ConstraintSet(2, {}, {SphereConstraint(Vec::Zero(3), 1.0)}); }, ErrorKind::dimension_mismatch);
}

TEST(ConstraintSet, RejectsEmptyInterior) {
  // x < 0 and x > 1
  expect_kind([] { ConstraintSet(1, {LinearConstraint(v({1.0}), 0.0), LinearConstraint(v({-1.0}), -1.0)}); },
              ErrorKind::infeasible_domain);
  // x > 2 inside the unit disc
  expect_kind([] { ConstraintSet(2, {LinearConstraint(v({-1.0, 0.0}), -2.0)}, {SphereConstraint(Vec::Zero(2), 1.0)}); },
              ErrorKind::infeasible_domain);
}

TEST(DomainSpec, NeedsAtLeastOneCoordinate) {
  expect_kind([] { DomainSpec(ConstraintSet(), 0); }, ErrorKind::config_error);
  const DomainSpec d(make_hypercube(2), 3);
  EXPECT_EQ(d.dimension(), 5u);
  EXPECT_EQ(d.constrained_dims(), 2u);
  EXPECT_EQ(d.periodic_dims(), 3u);
}

TEST(DistanceToBoundary, Examples) {
  EXPECT_DOUBLE_EQ(distance_to_boundary(v({0.3}), make_interval(0.0, 1.0)), 0.3);
  EXPECT_DOUBLE_EQ(distance_to_boundary(v({0.0, 0.0}), make_hypercube(2)), 1.0);
  EXPECT_DOUBLE_EQ(distance_to_boundary(v({0.5, 0.0}), unit_disc()), 0.5);
}

TEST(DistanceToBoundary, RejectsBoundaryAndOutsidePoints) {
  const auto set = make_interval(0.0, 1.0);
  expect_kind([&] { distance_to_boundary(v({1.0}), set); }, ErrorKind::infeasible_point);
  expect_kind([&] { distance_to_boundary(v({0.0}), set); }, ErrorKind::infeasible_point);
  expect_kind([&] { distance_to_boundary(v({1.5}), set); }, ErrorKind::infeasible_point);
  expect_kind([&] { distance_to_boundary(v({0.5, 0.5}), set); }, ErrorKind::dimension_mismatch);
}

TEST(DistanceToBoundary, EqualsAnalyticSlacks) {
  std::mt19937_64 gen(7);
  const auto set = make_simplex(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec x = random_interior(set, gen, 0.0, 1.0);
    const double want = std::min({x(0), x(1), x(2), (1.0 - x.sum()) / std::sqrt(3.0)});
    EXPECT_NEAR(distance_to_boundary(x, set), want, 1e-14);
  }
}

TEST(DistanceToBoundary, BoundedAboveByRayDistances) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> n01;
  const ConstraintSet set(2, {LinearConstraint(v({1.0, 1.0}), 1.0)}, {SphereConstraint(Vec::Zero(2), 1.0)});
  for (int trial = 0; trial < 20; ++trial) {
    const Vec x = random_interior(set, gen, -1.0, 1.0);
    const double d = distance_to_boundary(x, set);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 2; ++i) {
      best = std::min(best, ray_intersect(x, Vec::Unit(2, i), set).distance);
      best = std::min(best, ray_intersect(x, -Vec::Unit(2, i), set).distance);
    }
    for (int k = 0; k < 1000; ++k) {
      Vec s(2);
      s << n01(gen), n01(gen);
      best = std::min(best, ray_intersect(x, s.normalized(), set).distance);
    }
    EXPECT_LE(d, best + 1e-12);
  }
}

TEST(RayIntersect, Examples) {
  auto hit = ray_intersect(v({0.25}), v({1.0}), make_interval(0.0, 1.0));
  EXPECT_DOUBLE_EQ(hit.distance, 0.75);
  EXPECT_EQ(hit.hit.kind, ConstraintId::Kind::linear);
  EXPECT_EQ(hit.hit.index, 0u);  // upper wall x < 1

  const auto disc = unit_disc();
  for (double angle : {0.0, 0.4, 1.7, 3.0, 5.5}) {
    const auto h = ray_intersect(Vec::Zero(2), v({std::cos(angle), std::sin(angle)}), disc);
    EXPECT_NEAR(h.distance, 1.0, 1e-15);
    EXPECT_EQ(h.hit.kind, ConstraintId::Kind::sphere);
  }

  const auto cube = make_hypercube(2);
  hit = ray_intersect(v({0.5, 0.5}), v({1.0, 0.0}), cube);
  EXPECT_DOUBLE_EQ(hit.distance, 0.5);
  EXPECT_EQ(cube.linear()[hit.hit.index].normal(), v({1.0, 0.0}));
}

TEST(RayIntersect, OffCentreSphereChord) {
  // from (0.5, 0) heading +y the chord meets the unit circle at (0.5, sqrt(0.75))
  const auto h = ray_intersect(v({0.5, 0.0}), v({0.0, 1.0}), unit_disc());
  EXPECT_NEAR(h.distance, std::sqrt(0.75), 1e-15);
  const auto back = ray_intersect(v({0.5, 0.0}), v({-1.0, 0.0}), unit_disc());
  EXPECT_NEAR(back.distance, 1.5, 1e-15);
}

TEST(RayIntersect, UnboundedDirectionSignalsNoIntersection) {
  const ConstraintSet half(2, {LinearConstraint(v({1.0, 0.0}), 1.0)});
  expect_kind([&] { ray_intersect(v({0.0, 0.0}), v({-1.0, 0.0}), half); }, ErrorKind::no_intersection);
  expect_kind([&] { ray_intersect(v({0.0, 0.0}), v({0.0, 1.0}), half); }, ErrorKind::no_intersection);
  EXPECT_DOUBLE_EQ(ray_intersect(v({0.0, 0.0}), v({1.0, 0.0}), half).distance, 1.0);
}

TEST(RayIntersect, EndpointLiesOnHitSurfaceAndInsideTheRest) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n01;
  const std::vector<ConstraintSet> sets = {make_hypercube(3), make_simplex(3), make_birkhoff(3),
                                           make_cholesky_ball(2, 2.0), unit_disc()};
  for (const auto& set : sets) {
    const auto d = static_cast<Eigen::Index>(set.dimension());
    for (int trial = 0; trial < 300; ++trial) {
      const Vec x = random_interior(set, gen, -1.5, 1.5);
      Vec s(d);
      for (Eigen::Index i = 0; i < d; ++i) s(i) = n01(gen);
      s.normalize();
      const auto h = ray_intersect(x, s, set);
      const Vec end = x + h.distance * s;
      const double hit_slack = h.hit.kind == ConstraintId::Kind::linear ? set.linear()[h.hit.index].slack(end)
                                                                         : set.spheres()[h.hit.index].slack(end);
      EXPECT_NEAR(hit_slack, 0.0, 1e-9);
      EXPECT_GE(min_slack(end, set), -1e-9);
    }
  }
}

TEST(ReflectDirection, Examples) {
  const double r = std::sqrt(2.0) / 2.0;
  EXPECT_TRUE(reflect_direction(v({1.0, 0.0}), v({1.0, 0.0})).isApprox(v({-1.0, 0.0})));
  EXPECT_TRUE(reflect_direction(v({r, r}), v({1.0, 0.0})).isApprox(v({-r, r})));
  EXPECT_EQ(reflect_direction(v({0.0, 1.0}), v({1.0, 0.0})), v({0.0, 1.0}));
}

TEST(ReflectDirection, InvolutionAndNormPreserving) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = 1 + trial % 6;
    Vec s(d), n(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      s(i) = n01(gen);
      n(i) = n01(gen);
    }
    s.normalize();
    n.normalize();
    const Vec once = reflect_direction(s, n);
    EXPECT_NEAR(once.norm(), 1.0, 1e-12);
    EXPECT_LE((reflect_direction(once, n) - s).norm(), 1e-12);
  }
}

TEST(OutwardNormal, Examples) {
  const auto interval = make_interval(0.0, 1.0);
  EXPECT_EQ(outward_normal(interval, {ConstraintId::Kind::linear, 0}, v({1.0})), v({1.0}));

  EXPECT_TRUE(outward_normal(unit_disc(), {ConstraintId::Kind::sphere, 0}, v({0.0, 1.0})).isApprox(v({0.0, 1.0})));

  const auto cube = make_hypercube(2);
  std::size_t face = cube.size();
  for (std::size_t k = 0; k < cube.linear().size(); ++k) {
    if (cube.linear()[k].normal().isApprox(v({-1.0, 0.0}))) face = k;
  }
  ASSERT_LT(face, cube.size());
  EXPECT_EQ(outward_normal(cube, {ConstraintId::Kind::linear, face}, v({-1.0, 0.3})), v({-1.0, 0.0}));
}

TEST(OutwardNormal, RejectsPointsOffTheSurface) {
  const auto interval = make_interval(0.0, 1.0);
  expect_kind([&] { outward_normal(interval, {ConstraintId::Kind::linear, 0}, v({0.9})); }, ErrorKind::off_surface);
  expect_kind([&] { outward_normal(unit_disc(), {ConstraintId::Kind::sphere, 0}, v({0.0, 0.5})); },
              ErrorKind::off_surface);
  // within the surface tolerance is accepted
  EXPECT_NO_THROW(outward_normal(interval, {ConstraintId::Kind::linear, 0}, v({1.0 + 5e-10})));
}

TEST(Constructors, Hypercube) {
  const auto cube = make_hypercube(2);
  EXPECT_EQ(cube.dimension(), 2u);
  EXPECT_EQ(cube.linear().size(), 4u);
  EXPECT_TRUE(cube.spheres().empty());
  EXPECT_LE(cube.interior_point().norm(), 1e-6);
  // A = [I; -I], b = 1
  for (const auto& c : cube.linear()) {
    EXPECT_DOUBLE_EQ(c.offset(), 1.0);
    EXPECT_DOUBLE_EQ(c.normal().cwiseAbs().sum(), 1.0);
  }
}

TEST(Constructors, Simplex) {
  const auto s = make_simplex(3);
  EXPECT_EQ(s.dimension(), 3u);
  EXPECT_EQ(s.linear().size(), 4u);
  EXPECT_TRUE(is_interior(v({0.2, 0.2, 0.2}), s));
  EXPECT_FALSE(is_interior(v({0.5, 0.3, 0.3}), s));
  EXPECT_FALSE(is_interior(v({-0.01, 0.3, 0.3}), s));
}

TEST(Constructors, BirkhoffHasSquaredDimension) {
  for (std::size_t n = 2; n <= 5; ++n) {
    const auto b = make_birkhoff(n);
    EXPECT_EQ(b.dimension(), (n - 1) * (n - 1));
    EXPECT_EQ(b.linear().size(), n * n);
  }
  // the uniform doubly stochastic matrix sits in the interior
  const auto b3 = make_birkhoff(3);
  EXPECT_TRUE(is_interior(Vec::Constant(4, 1.0 / 3.0), b3));
  EXPECT_NEAR(distance_to_boundary(Vec::Constant(4, 1.0 / 3.0), b3), 1.0 / 6.0, 1e-12);  // bottom-right entry 1/3 over a normal of length 2
}

TEST(Constructors, BirkhoffEntriesArePositive) {
  std::mt19937_64 gen(9);
  const std::size_t n = 4;
  const auto b = make_birkhoff(n);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec x = random_interior(b, gen, 0.0, 0.7);
    Mat m(n, n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = 0; j + 1 < n; ++j) m(i, j) = x(static_cast<Eigen::Index>(i * (n - 1) + j));
    }
    for (std::size_t i = 0; i + 1 < n; ++i) m(i, n - 1) = 1.0 - m.row(i).head(n - 1).sum();
    for (std::size_t j = 0; j < n; ++j) m(n - 1, j) = 1.0 - m.col(j).head(n - 1).sum();
    EXPECT_GT(m.minCoeff(), 0.0);
    EXPECT_NEAR((m.rowwise().sum().array() - 1.0).abs().maxCoeff(), 0.0, 1e-12);
    EXPECT_NEAR((m.colwise().sum().array() - 1.0).abs().maxCoeff(), 0.0, 1e-12);
  }
}

TEST(Constructors, CholeskyBall) {
  const auto c = make_cholesky_ball(3, 4.0);
  EXPECT_EQ(c.dimension(), 6u);
  EXPECT_EQ(c.linear().size(), 3u);
  ASSERT_EQ(c.spheres().size(), 1u);
  EXPECT_DOUBLE_EQ(c.spheres()[0].radius(), 2.0);
  const Vec x = c.interior_point();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_GT(x(static_cast<Eigen::Index>(cholesky_index(i, i))), 0.0);
  EXPECT_LT(x.squaredNorm(), 4.0);
  EXPECT_EQ(cholesky_index(2, 1), 4u);
  expect_kind([] { make_cholesky_ball(2, 0.0); }, ErrorKind::config_error);
}

TEST(Constructors, LoopPolytope) {
  const auto p = make_loop_polytope({1.0, 1.0, 1.0, 1.0, 1.0}, 1.0);
  EXPECT_EQ(p.dimension(), 3u);
  EXPECT_GE(distance_to_boundary(p.interior_point(), p), 1e-6);
  expect_kind([] { make_loop_polytope({1.0, 1.0}, 1.0); }, ErrorKind::config_error);
  // a chain of total length 3 cannot close a gap of 10
  expect_kind([] { make_loop_polytope({1.0, 1.0, 1.0}, 10.0); }, ErrorKind::infeasible_domain);
  // closing exactly onto the first atom pins the last coordinate
  expect_kind([] { make_loop_polytope({1.0, 1.0, 1.0, 1.0}, 0.0); }, ErrorKind::infeasible_domain);
}

TEST(Constructors, InvalidArguments) {
  expect_kind([] { make_hypercube(0); }, ErrorKind::config_error);
  expect_kind([] { make_simplex(0); }, ErrorKind::config_error);
  expect_kind([] { make_birkhoff(1); }, ErrorKind::config_error);
  expect_kind([] { make_loop_polytope({1.0, -1.0, 1.0}, 1.0); }, ErrorKind::config_error);
}

TEST(InteriorPoint, Examples) {
  EXPECT_LE(interior_point(make_hypercube(2)).norm(), 1e-6);
  EXPECT_NEAR(interior_point(make_interval(0.0, 1.0))(0), 0.5, 1e-6);
  const Vec s = interior_point(make_simplex(2));
  EXPECT_GT(s.minCoeff(), 0.0);
  EXPECT_LT(s.sum(), 1.0);
}

TEST(InteriorPoint, MatchesBruteForceChebyshevCentre) {
  const std::vector<ConstraintSet> sets = {make_simplex(2), make_simplex(3), make_hypercube(3), make_birkhoff(3),
                                           make_loop_polytope({1.0, 1.5, 1.0, 1.2}, 1.3)};
  for (const auto& set : sets) {
    double radius = 0.0;
    const Vec want = oracle::chebyshev_center_bruteforce(set.normals(), set.offsets(), &radius);
    const Vec got = interior_point(set);
    EXPECT_NEAR(min_slack(got, set), radius, 1e-6);
  }
  // simplex chart: equal slacks x = y = (1 - 2x)/sqrt(2)
  const Vec c = oracle::chebyshev_center_bruteforce(make_simplex(2).normals(), make_simplex(2).offsets());
  EXPECT_NEAR(c(0), 1.0 / (2.0 + std::sqrt(2.0)), 1e-12);
  EXPECT_NEAR(interior_point(make_simplex(2))(0), 0.2929, 1e-4);
}

TEST(InteriorPoint, EveryConstructorSucceeds) {
  const std::vector<ConstraintSet> sets = {make_hypercube(5), make_simplex(4), make_birkhoff(4),
                                           make_cholesky_ball(3, 1.0), make_loop_polytope({1.0, 1.0, 1.0, 1.0}, 0.5)};
  for (const auto& set : sets) EXPECT_GE(distance_to_boundary(interior_point(set), set), 1e-6);
}

TEST(DomainJson, RoundTripIsExact) {
  const DomainSpec d(ConstraintSet(2, {LinearConstraint(v({3.0, 4.0}), 2.0)}, {SphereConstraint(v({0.1, 0.2}), 1.5)}),
                     2);
  const Json j = domain_to_json(d);
  EXPECT_EQ(j.at("dimension"), 2);
  EXPECT_EQ(j.at("periodic_dims"), 2);
  const DomainSpec back = domain_from_json(Json::parse(j.dump()));
  EXPECT_EQ(domain_to_json(back), j);
  EXPECT_EQ(domain_hash(back), domain_hash(d));
  EXPECT_EQ(back.constrained().linear()[0].normal(), d.constrained().linear()[0].normal());
}

TEST(DomainJson, Presets) {
  EXPECT_EQ(domain_from_json(Json::parse(R"({"preset":"simplex","dim":3})")).dimension(), 3u);
  EXPECT_EQ(domain_from_json(Json::parse(R"({"preset":"birkhoff","n":4})")).dimension(), 9u);
  EXPECT_EQ(domain_from_json(Json::parse(R"({"preset":"torus","dim":2})")).periodic_dims(), 2u);
  expect_kind([] { domain_from_json(Json::parse(R"({"preset":"moebius"})")); }, ErrorKind::config_error);
  expect_kind([] { domain_from_json(Json::parse(R"({"linear":[]})")); }, ErrorKind::config_error);
}
