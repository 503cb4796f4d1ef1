#pragma once

#include <algorithm>
#include <cmath>

namespace cdn {

/// Axis-aligned box in center-size form. Model-side boxes are normalized to
/// [0,1] relative to the image; evaluation converts to pixel corners.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const Box&, const Box&) = default;
};

/// Corner view (x1, y1, x2, y2) with x1 <= x2 and y1 <= y2.
struct Corners {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return std::max(0.0, x2 - x1) * std::max(0.0, y2 - y1); }

  friend bool operator==(const Corners&, const Corners&) = default;
};

/// Pixel corners for a normalized box. Throws std::invalid_argument for
/// non-positive image dimensions.
Corners to_corners(const Box& b, double img_w, double img_h);

/// Inverse of to_corners.
Box from_corners(const Corners& c, double img_w, double img_h);

/// Corners in the box's own (normalized) frame.
Corners corners_of(const Box& b);

/// Intersection over union. Degenerate boxes overlap nothing; 0/0 is 0.
double iou(const Corners& a, const Corners& b);
double iou(const Box& a, const Box& b);

/// Generalized IoU in (-1, 1].
double giou(const Corners& a, const Corners& b);
double giou(const Box& a, const Box& b);

/// Generic GIoU on center-size boxes, written against an arithmetic type so
/// the loss can instantiate it with dual numbers. `a` and `b` point at
/// (cx, cy, w, h).
template <typename T, typename U>
T giou_center_size(const T* a, const U* b) {
  using std::max;
  using std::min;
  const T ax1 = a[0] - 0.5 * a[2], ay1 = a[1] - 0.5 * a[3];
  const T ax2 = a[0] + 0.5 * a[2], ay2 = a[1] + 0.5 * a[3];
  const U bx1 = b[0] - 0.5 * b[2], by1 = b[1] - 0.5 * b[3];
  const U bx2 = b[0] + 0.5 * b[2], by2 = b[1] + 0.5 * b[3];

  const T area_a = (ax2 - ax1) * (ay2 - ay1);
  const U area_b = (bx2 - bx1) * (by2 - by1);

  const T iw = max(T(0.0), min(ax2, T(bx2)) - max(ax1, T(bx1)));
  const T ih = max(T(0.0), min(ay2, T(by2)) - max(ay1, T(by1)));
  const T inter = iw * ih;
  const T uni = area_a + area_b - inter;

  const T ew = max(ax2, T(bx2)) - min(ax1, T(bx1));
  const T eh = max(ay2, T(by2)) - min(ay1, T(by1));
  const T enclose = ew * eh;

  const T iou_v = uni > 0.0 ? inter / uni : T(0.0);
  if (!(enclose > 0.0)) return iou_v;
  return iou_v - (enclose - uni) / enclose;
}

}  // namespace cdn
