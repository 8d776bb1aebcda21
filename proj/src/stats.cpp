#include "telm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace telm::stats {

namespace {

void require_open_unit(double x, const char* what) {
  if (!(x > 0.0 && x < 1.0)) {
    throw std::domain_error(std::string(what) + " must lie in (0, 1)");
  }
}

double log_choose(std::int64_t n, std::int64_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

// Smallest n >= 1 with holds(n) true, starting from an analytic guess.
// holds must be monotone in n.
template <class Pred>
std::int64_t smallest_satisfying(double guess, Pred holds) {
  auto n = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(guess)));
  while (!holds(n)) ++n;
  while (n > 1 && holds(n - 1)) --n;
  return n;
}

Decision decide(double p_value, double alpha) {
  return p_value < alpha ? Decision::reject : Decision::fail_to_reject;
}

}  // namespace

std::int64_t required_sample_size(double half_width, double alpha) {
  require_open_unit(half_width, "half_width");
  require_open_unit(alpha, "alpha");
  const double hw2 = half_width * half_width;
  return smallest_satisfying(std::log(2.0 / alpha) / (2.0 * hw2), [&](std::int64_t n) {
    return 2.0 * std::exp(-2.0 * static_cast<double>(n) * hw2) <= alpha;
  });
}

SamplePlan plan_samples(double half_width, double alpha) {
  return {half_width, alpha, required_sample_size(half_width, alpha)};
}

double hoeffding_half_width(std::int64_t n, double alpha) {
  if (n < 1) throw std::domain_error("hoeffding_half_width: n must be >= 1");
  if (!(alpha > 0.0 && alpha <= 2.0)) {
    throw std::domain_error("hoeffding_half_width: alpha must lie in (0, 2]");
  }
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
}

PropertyEstimate estimate_property(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw std::invalid_argument("estimate_property: no scores");
  require_open_unit(alpha, "alpha");
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) {
      throw std::domain_error("estimate_property: scores must lie in [0, 1]");
    }
  }
  PropertyEstimate est;
  est.n = static_cast<std::int64_t>(scores.size());
  est.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(est.n);
  est.half_width = hoeffding_half_width(est.n, alpha);
  est.interval.lower = std::clamp(est.mean - est.half_width, 0.0, 1.0);
  est.interval.upper = std::clamp(est.mean + est.half_width, 0.0, 1.0);
  est.interval.level = 1.0 - alpha;
  return est;
}

double simultaneous_confidence(double level, std::int64_t k) {
  if (!(level > 0.0 && level <= 1.0)) {
    throw std::domain_error("simultaneous_confidence: level must lie in (0, 1]");
  }
  if (k < 1) throw std::domain_error("simultaneous_confidence: k must be >= 1");
  return std::pow(level, static_cast<double>(k));
}

std::int64_t chebyshev_sample_size(double half_width, double alpha) {
  require_open_unit(half_width, "half_width");
  require_open_unit(alpha, "alpha");
  const double hw2 = half_width * half_width;
  return smallest_satisfying(1.0 / (4.0 * hw2 * alpha), [&](std::int64_t n) {
    return 1.0 / (4.0 * static_cast<double>(n) * hw2) <= alpha;
  });
}

double binomial_upper_tail(std::int64_t k, std::int64_t n, double p) {
  if (n < 0 || k > n + 1) throw std::domain_error("binomial_upper_tail: bad counts");
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  double tail = 0.0;
  // Sum from the far end so small terms accumulate first.
  for (std::int64_t i = n; i >= k; --i) {
    tail += std::exp(log_choose(n, i) + static_cast<double>(i) * lp +
                     static_cast<double>(n - i) * lq);
  }
  return std::min(tail, 1.0);
}

double hypergeometric_upper_tail(std::int64_t x, std::int64_t row1, std::int64_t col1,
                                 std::int64_t total) {
  if (row1 < 0 || col1 < 0 || row1 > total || col1 > total) {
    throw std::domain_error("hypergeometric_upper_tail: bad margins");
  }
  const std::int64_t lo = std::max<std::int64_t>(0, row1 + col1 - total);
  const std::int64_t hi = std::min(row1, col1);
  if (x <= lo) return 1.0;
  if (x > hi) return 0.0;
  const double log_denom = log_choose(total, col1);
  double tail = 0.0;
  for (std::int64_t i = hi; i >= x; --i) {
    tail += std::exp(log_choose(row1, i) + log_choose(total - row1, col1 - i) - log_denom);
  }
  return std::min(tail, 1.0);
}

HypothesisResult test_accuracy_at_least(std::int64_t successes, std::int64_t n,
                                        double threshold, double alpha) {
  if (n <= 0) throw std::invalid_argument("test_accuracy_at_least: n must be positive");
  if (successes < 0 || successes > n) {
    throw std::invalid_argument("test_accuracy_at_least: successes out of range");
  }
  require_open_unit(threshold, "threshold");
  require_open_unit(alpha, "alpha");
  HypothesisResult res;
  res.null_hypothesis = "accuracy <= " + std::to_string(threshold);
  res.method = "exact one-sided binomial";
  res.statistic = static_cast<double>(successes) / static_cast<double>(n);
  res.p_value = binomial_upper_tail(successes, n, threshold);
  res.significance = alpha;
  res.decision = decide(res.p_value, alpha);
  return res;
}

HypothesisResult compare_two_models(std::int64_t successes_a, std::int64_t n_a,
                                    std::int64_t successes_b, std::int64_t n_b, double alpha,
                                    std::int64_t exact_cutoff) {
  if (n_a <= 0 || n_b <= 0) {
    throw std::invalid_argument("compare_two_models: sample counts must be positive");
  }
  if (successes_a < 0 || successes_a > n_a || successes_b < 0 || successes_b > n_b) {
    throw std::invalid_argument("compare_two_models: successes out of range");
  }
  require_open_unit(alpha, "alpha");

  HypothesisResult res;
  res.null_hypothesis = "accuracy(a) <= accuracy(b)";
  res.significance = alpha;
  const double pa = static_cast<double>(successes_a) / static_cast<double>(n_a);
  const double pb = static_cast<double>(successes_b) / static_cast<double>(n_b);

  if (std::min(n_a, n_b) <= exact_cutoff) {
    res.method = "Fisher exact, one-sided";
    res.statistic = pa - pb;
    res.p_value =
        hypergeometric_upper_tail(successes_a, n_a, successes_a + successes_b, n_a + n_b);
  } else {
    res.method = "pooled two-proportion z-test, one-sided";
    const double pooled = static_cast<double>(successes_a + successes_b) /
                          static_cast<double>(n_a + n_b);
    const double se = std::sqrt(pooled * (1.0 - pooled) *
                                (1.0 / static_cast<double>(n_a) + 1.0 / static_cast<double>(n_b)));
    if (se == 0.0) {
      res.statistic = 0.0;
      res.p_value = 1.0;
    } else {
      res.statistic = (pa - pb) / se;
      res.p_value = 0.5 * std::erfc(res.statistic / std::sqrt(2.0));
    }
  }
  res.decision = decide(res.p_value, alpha);
  return res;
}

}  // namespace telm::stats
