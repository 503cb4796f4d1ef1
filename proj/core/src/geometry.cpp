#include "cdn/geometry.hpp"

#include <stdexcept>

namespace cdn {

Corners to_corners(const Box& b, double img_w, double img_h) {
  if (!(img_w > 0.0) || !(img_h > 0.0)) {
    throw std::invalid_argument("to_corners: image dimensions must be positive");
  }
  return {(b.cx - 0.5 * b.w) * img_w, (b.cy - 0.5 * b.h) * img_h,
          (b.cx + 0.5 * b.w) * img_w, (b.cy + 0.5 * b.h) * img_h};
}

Box from_corners(const Corners& c, double img_w, double img_h) {
  if (!(img_w > 0.0) || !(img_h > 0.0)) {
    throw std::invalid_argument("from_corners: image dimensions must be positive");
  }
  return {0.5 * (c.x1 + c.x2) / img_w, 0.5 * (c.y1 + c.y2) / img_h, (c.x2 - c.x1) / img_w,
          (c.y2 - c.y1) / img_h};
}

Corners corners_of(const Box& b) {
  return {b.cx - 0.5 * b.w, b.cy - 0.5 * b.h, b.cx + 0.5 * b.w, b.cy + 0.5 * b.h};
}

namespace {

double intersection(const Corners& a, const Corners& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  return iw * ih;
}

}  // namespace

double iou(const Corners& a, const Corners& b) {
  const double inter = intersection(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double iou(const Box& a, const Box& b) { return iou(corners_of(a), corners_of(b)); }

double giou(const Corners& a, const Corners& b) {
  const double inter = intersection(a, b);
  const double uni = a.area() + b.area() - inter;
  const double iou_v = uni > 0.0 ? inter / uni : 0.0;
  const double enclose = (std::max(a.x2, b.x2) - std::min(a.x1, b.x1)) *
                         (std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
  if (!(enclose > 0.0)) return iou_v;
  return iou_v - (enclose - uni) / enclose;
}

double giou(const Box& a, const Box& b) { return giou(corners_of(a), corners_of(b)); }

}  // namespace cdn
