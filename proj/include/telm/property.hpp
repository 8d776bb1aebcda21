#ifndef TELM_PROPERTY_HPP
#define TELM_PROPERTY_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "telm/oracles.hpp"
#include "telm/stats.hpp"

namespace telm::property {

enum class Kind { simple, compound, higher_order };
enum class Aggregation { average, lp_monotonicity, bounds_composition };

const char* to_string(Kind k);
const char* to_string(Aggregation a);
Kind parse_kind(const std::string& s);
Aggregation parse_aggregation(const std::string& s);

struct PropertySpec {
  std::string name;
  Kind kind = Kind::simple;
  std::string scorer = "parity";
  Aggregation aggregation = Aggregation::average;
  std::string direction = "nonincreasing";
  std::optional<double> threshold;
  // Accuracy of the reference answers, for higher-order properties.
  std::optional<double> reference_accuracy;

  // Throws std::invalid_argument when kind and aggregation disagree.
  void validate() const;

  nlohmann::json to_json() const;
  static PropertySpec from_json(const nlohmann::json& j);

  bool operator==(const PropertySpec&) const = default;
};

/// Fraction of responses to change for the estimate to reach mean 1.
/// Always a lower bound on the distance to the property.
double simple_distance(const stats::PropertyEstimate& estimate);

enum class Verdict { has_property, epsilon_far, inconclusive };
const char* to_string(Verdict v);

struct TesterOutcome {
  Verdict verdict = Verdict::inconclusive;
  double epsilon = 0.0;
  int repetitions = 1;
  double confidence = 2.0 / 3.0;  // guaranteed success probability
  std::int64_t samples_used = 0;  // |TD_N(eps)| per repetition
  int votes_has = 0;
  int votes_far = 0;
};

// Draws prompts from D and scores responses; nullopt means unscorable and
// counts as 0.
struct Sampler {
  std::function<std::string(std::mt19937_64&)> draw;
  std::function<std::optional<double>(std::string_view prompt, std::string_view response)> score;
};

// A tester guarantees the correct verdict with probability >= 2/3 on inputs
// that have the property or are epsilon-far from it. Between the two it may
// return anything, including inconclusive.
class PropertyTester {
 public:
  virtual ~PropertyTester() = default;
  virtual std::int64_t sample_size(double epsilon) const = 0;
  virtual Verdict decide(std::span<const double> scores, double epsilon) const = 0;
  virtual std::string name() const = 0;
};

// P = "accuracy >= threshold". Uses a Hoeffding sample of half-width eps/2 at
// failure probability 1/3 and splits at threshold - eps/2.
class AccuracyThresholdTester final : public PropertyTester {
 public:
  explicit AccuracyThresholdTester(double threshold);
  std::int64_t sample_size(double epsilon) const override;
  Verdict decide(std::span<const double> scores, double epsilon) const override;
  std::string name() const override;

 private:
  double threshold_;
};

/// One tester run on a fresh TD_N(eps) drawn with `seed`.
TesterOutcome run_property_tester(const PropertyTester& tester, double epsilon,
                                  const oracles::Responder& model, const Sampler& sampler,
                                  std::uint64_t seed);

/// Repetitions for majority amplification: ceil(18 ln(1/delta)), which pushes
/// a 2/3 tester's failure probability to <= delta. Requires 0 < delta <= 1/3.
int amplification_count(double delta);

Verdict majority_vote(std::span<const Verdict> votes);

class AmplifiedTester {
 public:
  AmplifiedTester(const PropertyTester& tester, double delta);
  int repetitions() const { return repetitions_; }
  double target_failure() const { return delta_; }
  // Each repetition draws its own sample with a seed derived from `seed`.
  TesterOutcome run(double epsilon, const oracles::Responder& model, const Sampler& sampler,
                    std::uint64_t seed) const;

 private:
  const PropertyTester& tester_;
  double delta_;
  int repetitions_;
};

inline AmplifiedTester amplify(const PropertyTester& tester, double delta) {
  return AmplifiedTester(tester, delta);
}

}  // namespace telm::property

#endif  // TELM_PROPERTY_HPP
