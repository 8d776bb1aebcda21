#ifndef TELM_STATS_HPP
#define TELM_STATS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace telm::stats {

// Sample-size plan for a two-sided Hoeffding interval. half_width is the
// interval HALF-width; the interval is [mean - half_width, mean + half_width].
struct SamplePlan {
  double half_width = 0.0;
  double alpha = 0.0;
  std::int64_t n_required = 0;
};

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 1.0;
  double level = 0.0;  // 1 - alpha

  double width() const { return upper - lower; }
  bool contains(double x) const { return lower <= x && x <= upper; }
};

// Sample mean of bounded scores together with its Hoeffding interval.
// half_width is kept unclamped; interval is clamped to [0, 1].
struct PropertyEstimate {
  double mean = 0.0;
  std::int64_t n = 0;
  double half_width = 0.0;
  ConfidenceInterval interval;
  std::optional<int> bucket_label;
};

enum class Decision { reject, fail_to_reject };

struct HypothesisResult {
  std::string null_hypothesis;
  std::string method;
  double p_value = 1.0;
  double statistic = 0.0;
  double significance = 0.05;
  Decision decision = Decision::fail_to_reject;

  bool rejected() const { return decision == Decision::reject; }
};

/// Smallest N with 2 exp(-2 N half_width^2) <= alpha.
std::int64_t required_sample_size(double half_width, double alpha);

SamplePlan plan_samples(double half_width, double alpha);

/// sqrt(ln(2/alpha) / (2n)). alpha may go up to 2, where the width is 0.
double hoeffding_half_width(std::int64_t n, double alpha);

/// Mean of scores in [0, 1] with a clamped Hoeffding interval at level 1 - alpha.
PropertyEstimate estimate_property(std::span<const double> scores, double alpha);

/// Probability that k independent intervals at `level` hold jointly.
double simultaneous_confidence(double level, std::int64_t k);

/// Smallest N with 1 / (4 N half_width^2) <= alpha (Bernoulli variance <= 1/4).
std::int64_t chebyshev_sample_size(double half_width, double alpha);

// Upper tail P(X >= k) for X ~ Binomial(n, p).
double binomial_upper_tail(std::int64_t k, std::int64_t n, double p);

// Upper tail P(X >= x) of the hypergeometric law of the first-row count in
// a 2x2 table with the given margins.
double hypergeometric_upper_tail(std::int64_t x, std::int64_t row1, std::int64_t col1,
                                 std::int64_t total);

/// One-sided exact binomial test of H0: mu <= threshold against H1: mu > threshold.
HypothesisResult test_accuracy_at_least(std::int64_t successes, std::int64_t n,
                                        double threshold, double alpha);

/// One-sided comparison of H0: mu_a <= mu_b against H1: mu_a > mu_b.
/// Fisher's exact test when min(n_a, n_b) <= exact_cutoff, pooled z-test otherwise.
HypothesisResult compare_two_models(std::int64_t successes_a, std::int64_t n_a,
                                    std::int64_t successes_b, std::int64_t n_b, double alpha,
                                    std::int64_t exact_cutoff = 200);

}  // namespace telm::stats

#endif  // TELM_STATS_HPP
