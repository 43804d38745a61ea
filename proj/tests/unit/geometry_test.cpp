#include "planlab/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

using planlab::AABox;
using planlab::Points2;
using planlab::Polyline;

Polyline<double> line(std::initializer_list<std::pair<double, double>> pts) {
  Points2<double> m(2, static_cast<Eigen::Index>(pts.size()));
  Eigen::Index i = 0;
  for (const auto& [x, y] : pts) m.col(i++) << x, y;
  return Polyline<double>(m);
}

TEST(Intersects, CrossingSegment) {
  EXPECT_TRUE(intersects(line({{0, 5}, {10, 5}}), AABox<double>(3, 0, 7, 10)));
}

TEST(Intersects, Disjoint) {
  EXPECT_FALSE(intersects(line({{0, 20}, {10, 20}}), AABox<double>(3, 0, 7, 10)));
}

TEST(Intersects, BoundaryContactCounts) {
  const AABox<double> box(3, 0, 7, 10);
  // Any point of the segment at x = 5 lies on the top edge.
  EXPECT_TRUE(box.contains(planlab::Point2<double>(5, 10)));
  EXPECT_TRUE(intersects(line({{0, 10}, {10, 10}}), box));
}

TEST(Intersects, CornerTouch) {
  EXPECT_TRUE(intersects(line({{0, 4}, {4, 0}}), AABox<double>(2, 2, 5, 5)));
  EXPECT_FALSE(intersects(line({{0, 3.9}, {3.9, 0}}), AABox<double>(2, 2, 5, 5)));
}

TEST(Intersects, DegenerateSegmentInside) {
  EXPECT_TRUE(intersects(line({{4, 4}, {4, 4}}), AABox<double>(2, 2, 5, 5)));
  EXPECT_FALSE(intersects(line({{1, 1}, {1, 1}}), AABox<double>(2, 2, 5, 5)));
}

TEST(ClipLength, AxisAlignedCrossing) {
  EXPECT_DOUBLE_EQ(clip_length(line({{0, 5}, {10, 5}}), AABox<double>(3, 0, 7, 10)), 4.0);
}

TEST(ClipLength, Disjoint) {
  EXPECT_EQ(clip_length(line({{0, 20}, {10, 20}}), AABox<double>(3, 0, 7, 10)), 0.0);
}

TEST(ClipLength, Diagonal) {
  EXPECT_NEAR(clip_length(line({{0, 0}, {10, 10}}), AABox<double>(2, 2, 8, 8)),
              6.0 * std::sqrt(2.0), 1e-12);
}

TEST(ClipLength, SegmentEndingInside) {
  EXPECT_NEAR(clip_length(line({{0, 5}, {5, 5}, {5, 20}}), AABox<double>(3, 0, 7, 10)),
              2.0 + 5.0, 1e-12);
}

TEST(ClipLength, EdgeRunCountsFully) {
  EXPECT_NEAR(clip_length(line({{0, 10}, {10, 10}}), AABox<double>(3, 0, 7, 10)), 4.0,
              1e-12);
}

TEST(ClipLength, MatchesMonteCarloOnDiagonal) {
  const auto poly = line({{0, 0}, {10, 10}});
  const AABox<double> box(2, 2, 8, 8);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 1'000'000;
  int inside = 0;
  for (int i = 0; i < n; ++i) {
    const double t = u(rng);
    if (box.contains(planlab::Point2<double>(10 * t, 10 * t))) ++inside;
  }
  const double len = polyline_length(poly);
  const double p = static_cast<double>(inside) / n;
  const double se = len * std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(clip_length(poly, box), p * len, 3 * se);
}

TEST(PolylineLength, Examples) {
  EXPECT_DOUBLE_EQ(polyline_length(line({{0, 0}, {3, 4}})), 5.0);
  EXPECT_EQ(polyline_length(line({{1, 1}, {1, 1}, {1, 1}})), 0.0);
  EXPECT_DOUBLE_EQ(polyline_length(line({{0, 0}, {1, 0}, {1, 1}})), 2.0);
}

TEST(Types, RejectInvalid) {
  EXPECT_THROW(AABox<double>(1, 0, 1, 2), std::invalid_argument);
  EXPECT_THROW(AABox<double>(0, 2, 1, 1), std::invalid_argument);
  EXPECT_THROW(AABox<double>(0, 0, NAN, 1), std::invalid_argument);
  EXPECT_THROW(Polyline<double>(Points2<double>::Zero(2, 1)), std::invalid_argument);
  Points2<double> bad = Points2<double>::Zero(2, 3);
  bad(1, 2) = INFINITY;
  EXPECT_THROW(Polyline<double>{bad}, std::invalid_argument);
}

TEST(Properties, RandomPairs) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> coord(-50.0, 50.0);
  std::uniform_real_distribution<double> extent(0.5, 40.0);
  std::uniform_int_distribution<int> count(2, 8);
  for (int trial = 0; trial < 2000; ++trial) {
    Points2<double> pts(2, count(rng));
    for (Eigen::Index i = 0; i < pts.cols(); ++i) pts.col(i) << coord(rng), coord(rng);
    const Polyline<double> poly(pts);
    const double x0 = coord(rng), y0 = coord(rng);
    const AABox<double> box(x0, y0, x0 + extent(rng), y0 + extent(rng));

    const double clipped = clip_length(poly, box);
    const double total = polyline_length(poly);
    EXPECT_GE(clipped, 0.0);
    EXPECT_LE(clipped, total + 1e-9);
    if (clipped > 0) EXPECT_TRUE(intersects(poly, box));
    if (!intersects(poly, box)) EXPECT_EQ(clipped, 0.0);

    const planlab::Point2<double> shift(coord(rng) * 10, coord(rng) * 10);
    const Polyline<double> moved(pts.colwise() + shift);
    const auto moved_box = box.translated(shift);
    EXPECT_EQ(intersects(moved, moved_box), intersects(poly, box));
    EXPECT_NEAR(clip_length(moved, moved_box), clipped, 1e-9 * std::max(1.0, clipped));
  }
}

TEST(Templated, FloatScalar) {
  Points2<float> pts(2, 2);
  pts << 0.f, 10.f, 5.f, 5.f;
  EXPECT_FLOAT_EQ(clip_length(Polyline<float>(pts), AABox<float>(3, 0, 7, 10)), 4.f);
}

}  // namespace
