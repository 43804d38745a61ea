#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace planlab {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

// Column-major list of 2D points; column i is waypoint i.
template <typename Scalar>
using Points2 = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>;

using Trajectory = Points2<double>;

// Image size in pixels.
struct Resolution {
  double width = 640.0;
  double height = 480.0;
};

// Segments shorter than this contribute nothing to clipped length.
inline constexpr double kDegenerateSegment = 1e-9;

// Open chain of at least two finite points.
template <typename Scalar>
class Polyline {
 public:
  explicit Polyline(Points2<Scalar> points) : points_(std::move(points)) {
    if (points_.cols() < 2) {
      throw std::invalid_argument("polyline needs at least two points");
    }
    if (!points_.allFinite()) {
      throw std::invalid_argument("polyline has non-finite coordinates");
    }
  }

  const Points2<Scalar>& points() const { return points_; }
  Eigen::Index size() const { return points_.cols(); }
  Point2<Scalar> operator[](Eigen::Index i) const { return points_.col(i); }

 private:
  Points2<Scalar> points_;
};

// Closed axis-aligned rectangle with strictly positive extent.
template <typename Scalar>
class AABox {
 public:
  AABox(Scalar x_min, Scalar y_min, Scalar x_max, Scalar y_max)
      : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
    using std::isfinite;
    if (!(isfinite(x_min) && isfinite(y_min) && isfinite(x_max) &&
          isfinite(y_max))) {
      throw std::invalid_argument("box has non-finite bounds");
    }
    if (!(x_min < x_max) || !(y_min < y_max)) {
      throw std::invalid_argument("box needs x_min < x_max and y_min < y_max");
    }
  }

  Scalar x_min() const { return x_min_; }
  Scalar y_min() const { return y_min_; }
  Scalar x_max() const { return x_max_; }
  Scalar y_max() const { return y_max_; }

  bool contains(const Point2<Scalar>& p) const {
    return p.x() >= x_min_ && p.x() <= x_max_ && p.y() >= y_min_ &&
           p.y() <= y_max_;
  }

  AABox translated(const Point2<Scalar>& offset) const {
    return AABox(x_min_ + offset.x(), y_min_ + offset.y(), x_max_ + offset.x(),
                 y_max_ + offset.y());
  }

 private:
  Scalar x_min_, y_min_, x_max_, y_max_;
};

template <typename Derived>
typename Derived::Scalar polyline_length(const Eigen::MatrixBase<Derived>& pts) {
  using Scalar = typename Derived::Scalar;
  if (pts.cols() < 2) return Scalar(0);
  const Eigen::Index n = pts.cols();
  return (pts.rightCols(n - 1) - pts.leftCols(n - 1)).colwise().norm().sum();
}

template <typename Scalar>
Scalar polyline_length(const Polyline<Scalar>& poly) {
  return polyline_length(poly.points());
}

// Parametric interval [t_enter, t_exit] of the segment p + t (q - p), t in
// [0, 1], that lies inside the closed box (Liang-Barsky).
template <typename Scalar>
struct ClipInterval {
  bool hit = false;
  Scalar t_enter = Scalar(0);
  Scalar t_exit = Scalar(0);
};

template <typename Scalar>
ClipInterval<Scalar> clip_segment(const Point2<Scalar>& p, const Point2<Scalar>& q,
                                  const AABox<Scalar>& box) {
  const Point2<Scalar> d = q - p;
  Scalar t0 = Scalar(0);
  Scalar t1 = Scalar(1);
  const Scalar dirs[4] = {-d.x(), d.x(), -d.y(), d.y()};
  const Scalar gaps[4] = {p.x() - box.x_min(), box.x_max() - p.x(),
                          p.y() - box.y_min(), box.y_max() - p.y()};
  for (int k = 0; k < 4; ++k) {
    if (dirs[k] == Scalar(0)) {
      if (gaps[k] < Scalar(0)) return {};
      continue;
    }
    const Scalar r = gaps[k] / dirs[k];
    if (dirs[k] < Scalar(0)) {
      t0 = std::max(t0, r);
    } else {
      t1 = std::min(t1, r);
    }
    if (t0 > t1) return {};
  }
  return {true, t0, t1};
}

template <typename Scalar>
bool segment_intersects(const Point2<Scalar>& p, const Point2<Scalar>& q,
                        const AABox<Scalar>& box) {
  if ((q - p).norm() < Scalar(kDegenerateSegment)) return box.contains(p);
  return clip_segment(p, q, box).hit;
}

template <typename Scalar>
Scalar segment_clip_length(const Point2<Scalar>& p, const Point2<Scalar>& q,
                           const AABox<Scalar>& box) {
  const Scalar len = (q - p).norm();
  if (len < Scalar(kDegenerateSegment)) return Scalar(0);
  const auto iv = clip_segment(p, q, box);
  return iv.hit ? (iv.t_exit - iv.t_enter) * len : Scalar(0);
}

// True iff some segment touches or enters the closed box.
template <typename Scalar>
bool intersects(const Polyline<Scalar>& poly, const AABox<Scalar>& box) {
  const auto& pts = poly.points();
  for (Eigen::Index i = 0; i + 1 < pts.cols(); ++i) {
    if (segment_intersects<Scalar>(pts.col(i), pts.col(i + 1), box)) return true;
  }
  return false;
}

// Total length of the polyline inside the closed box, summed per segment.
template <typename Scalar>
Scalar clip_length(const Polyline<Scalar>& poly, const AABox<Scalar>& box) {
  const auto& pts = poly.points();
  Scalar total = Scalar(0);
  for (Eigen::Index i = 0; i + 1 < pts.cols(); ++i) {
    total += segment_clip_length<Scalar>(pts.col(i), pts.col(i + 1), box);
  }
  return total;
}

}  // namespace planlab
