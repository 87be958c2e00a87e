#pragma once

#include <array>

namespace mhop {

/// Axis-aligned box in relative image coordinates: (x1, y1) top-left,
/// (x2, y2) bottom-right, x1 <= x2 and y1 <= y2.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const { return x1 <= x2 && y1 <= y2; }
  // Midpoint of the bottom edge.
  std::array<double, 2> bottom_mid() const { return {0.5 * (x1 + x2), y2}; }

  friend bool operator==(const Box&, const Box&) = default;
};

// true when `inner` lies completely inside `outer` (edges may touch).
bool box_contains(const Box& outer, const Box& inner);

double box_iou(const Box& a, const Box& b);

// Generalized IoU in (-1, 1]. Zero-area inputs are points with IoU 0; if
// the enclosing hull also has zero area the result is 0.
double giou(const Box& a, const Box& b);

// Sum of absolute coordinate differences.
double box_l1(const Box& a, const Box& b);

}  // namespace mhop
