#include "telm/higher_order.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace telm::higher_order {

namespace {

void require_upper_half(double v, const char* name) {
  if (!(v >= 0.5 && v <= 1.0)) {
    throw std::domain_error(std::string(name) + " must lie in [0.5, 1]");
  }
}

}  // namespace

AccuracyBounds true_accuracy_bounds(double p, double q) {
  require_upper_half(p, "p");
  require_upper_half(q, "q");
  AccuracyBounds b;
  b.p = p;
  b.q = q;
  const double lo = std::min(p, q);
  const double hi = std::max(p, q);
  // Model errors disjoint from reference errors: p + q - 1. Evaluated as
  // lo - (1 - hi) so that decimal inputs like (0.9, 0.95) land exactly.
  b.r_lower = lo - (1.0 - hi);
  // Errors nested inside each other: 1 - |p - q|.
  b.r_upper = (1.0 + lo) - hi;
  b.r_independent = p * q;
  return b;
}

OracleRange bounds_oracle(double p, double q, double grid) {
  require_upper_half(p, "p");
  require_upper_half(q, "q");
  if (!(grid > 0.0 && grid <= 0.5)) throw std::domain_error("grid must lie in (0, 0.5]");

  // Cells: both right (a), model right only (b), reference right only (c),
  // both wrong (d). With binary labels, agreement p = a + d, q = a + c and
  // r = a + b. Fixing a determines the rest.
  OracleRange out;
  const double slack = grid / 2.0;
  const auto steps = static_cast<long>(std::llround(1.0 / grid));
  for (long i = 0; i <= steps; ++i) {
    const double a = std::min(1.0, static_cast<double>(i) * grid);
    const double c = q - a;
    const double d = p - a;
    const double b = 1.0 - a - c - d;
    if (c < -slack || d < -slack || b < -slack) continue;
    const double r = a + b;
    if (!out.feasible) {
      out.feasible = true;
      out.r_min = out.r_max = r;
    } else {
      out.r_min = std::min(out.r_min, r);
      out.r_max = std::max(out.r_max, r);
    }
  }
  if (out.feasible) {
    out.r_min = std::clamp(out.r_min, 0.0, 1.0);
    out.r_max = std::clamp(out.r_max, 0.0, 1.0);
  }
  return out;
}

InflatedBounds ci_inflated_bounds(double p, double p_half_width, double q, double q_half_width) {
  if (!(p_half_width >= 0.0) || !(q_half_width >= 0.0)) {
    throw std::domain_error("half-widths must be nonnegative");
  }
  InflatedBounds out;
  out.point = true_accuracy_bounds(p, q);
  const double p_lo = std::max(0.5, p - p_half_width);
  const double p_hi = std::min(1.0, p + p_half_width);
  const double q_lo = std::max(0.5, q - q_half_width);
  const double q_hi = std::min(1.0, q + q_half_width);
  out.r_lower = std::max(0.0, p_lo + q_lo - 1.0);
  // 1 - |p - q| is maximized by bringing p and q as close as the box allows.
  const double gap = std::max({0.0, p_lo - q_hi, q_lo - p_hi});
  out.r_upper = 1.0 - gap;
  return out;
}

}  // namespace telm::higher_order
