#ifndef TELM_HIGHER_ORDER_HPP
#define TELM_HIGHER_ORDER_HPP

namespace telm::higher_order {

// True accuracy r of a model scored against a reference that is itself
// only q-accurate, given the measured agreement p with that reference.
struct AccuracyBounds {
  double p = 1.0;
  double q = 1.0;
  double r_lower = 1.0;
  double r_upper = 1.0;
  double r_independent = 1.0;  // p * q, errors independent
};

/// Extremal true accuracy for binary labels. Requires 0.5 <= p, q <= 1;
/// throws std::domain_error otherwise (flip labels first if needed).
AccuracyBounds true_accuracy_bounds(double p, double q);

struct OracleRange {
  bool feasible = false;
  double r_min = 0.0;
  double r_max = 0.0;
};

/// Enumerates joint masses over (model right/wrong) x (reference right/wrong)
/// on a grid of spacing `grid` that reproduce the marginals p and q, and
/// returns the extreme achievable r.
OracleRange bounds_oracle(double p, double q, double grid);

// Extension: bounds when p and q are only known to within confidence
// half-widths. Takes the extremes over the clipped box
// [p - p_hw, p + p_hw] x [q - q_hw, q + q_hw] intersected with [0.5, 1]^2.
struct InflatedBounds {
  AccuracyBounds point;
  double r_lower = 0.0;
  double r_upper = 1.0;
};

InflatedBounds ci_inflated_bounds(double p, double p_half_width, double q, double q_half_width);

}  // namespace telm::higher_order

#endif  // TELM_HIGHER_ORDER_HPP
