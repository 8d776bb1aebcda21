#ifndef TELM_MONOTONE_LP_HPP
#define TELM_MONOTONE_LP_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "telm/simplex.hpp"

namespace telm::mono {

enum class Direction { nonincreasing, nondecreasing };

Direction parse_direction(const std::string& s);
const char* to_string(Direction d);

// One complexity level: its label, probability mass, sample mean and the
// unclamped confidence half-width around that mean.
struct ComplexityBucket {
  int index = 0;
  double weight = 0.0;
  double mean = 0.0;
  double delta = 0.0;
};

// Throws std::invalid_argument unless weights are nonnegative and sum to 1
// (within 1e-9), deltas are nonnegative and means lie in [0, 1].
void validate(const std::vector<ComplexityBucket>& buckets);

struct FeasibilityReport {
  bool feasible = true;
  // Bucket labels (i, j), i before j, whose intervals cannot be ordered.
  std::optional<std::pair<int, int>> certificate;
};

struct MonotonicityResult {
  bool feasible = false;
  double epsilon_lb = 0.0;
  Eigen::VectorXd raise;   // s_i >= 0
  Eigen::VectorXd lower;   // r_i >= 0
  Eigen::VectorXd shifts;  // s_i - r_i
  Eigen::VectorXd adjusted;
  std::optional<std::pair<int, int>> certificate;
  double certificate_residual = 0.0;
  int iterations = 0;
};

FeasibilityReport check_feasibility(const std::vector<ComplexityBucket>& buckets,
                                    Direction direction = Direction::nonincreasing);

// The LP in the solver's form. Variables are laid out as
// [s_1..s_k, r_1..r_k]; rows are the k-1 chain constraints followed by the
// 2k box constraints.
lp::LinearProgram<double> build_program(const std::vector<ComplexityBucket>& buckets,
                                        Direction direction);

/// Minimum weighted shift sum_i weight_i (s_i + r_i) that makes the bucket
/// means monotone while keeping every shifted mean inside its interval.
/// Infeasible inputs yield feasible == false plus a certificate. Throws
/// lp::NumericalError if the optimum cannot be certified at 1e-9.
MonotonicityResult distance_to_monotonicity(const std::vector<ComplexityBucket>& buckets,
                                            Direction direction = Direction::nonincreasing);

struct OracleResult {
  bool feasible = false;
  double distance = 0.0;
  Eigen::VectorXd values;
};

inline constexpr std::size_t kOracleMaxBuckets = 5;

/// Brute-force minimum over a value grid with spacing grid_step (plus the
/// interval endpoints). Independent of the simplex path; for checking it.
OracleResult oracle_distance(const std::vector<ComplexityBucket>& buckets, Direction direction,
                             double grid_step);

// CSV rows "index,weight,mean,delta"; a header line is optional.
std::vector<ComplexityBucket> read_buckets_csv(std::istream& in);

// Columns: index,mean,lower,upper,shifted_lower,shifted_upper,solution_point
void write_solution_csv(std::ostream& out, const std::vector<ComplexityBucket>& buckets,
                        const MonotonicityResult& result);

}  // namespace telm::mono

#endif  // TELM_MONOTONE_LP_HPP
