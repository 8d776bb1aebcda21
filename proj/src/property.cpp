#include "telm/property.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace telm::property {

const char* to_string(Kind k) {
  switch (k) {
    case Kind::simple: return "simple";
    case Kind::compound: return "compound";
    case Kind::higher_order: return "higher-order";
  }
  return "unknown";
}

const char* to_string(Aggregation a) {
  switch (a) {
    case Aggregation::average: return "average";
    case Aggregation::lp_monotonicity: return "lp-monotonicity";
    case Aggregation::bounds_composition: return "bounds-composition";
  }
  return "unknown";
}

Kind parse_kind(const std::string& s) {
  if (s == "simple") return Kind::simple;
  if (s == "compound") return Kind::compound;
  if (s == "higher-order") return Kind::higher_order;
  throw std::invalid_argument("unknown property kind '" + s + "'");
}

Aggregation parse_aggregation(const std::string& s) {
  if (s == "average") return Aggregation::average;
  if (s == "lp-monotonicity") return Aggregation::lp_monotonicity;
  if (s == "bounds-composition") return Aggregation::bounds_composition;
  throw std::invalid_argument("unknown aggregation '" + s + "'");
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::has_property: return "has-property";
    case Verdict::epsilon_far: return "epsilon-far";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

void PropertySpec::validate() const {
  if (name.empty()) throw std::invalid_argument("property: empty name");
  const bool ok = (kind == Kind::simple && aggregation == Aggregation::average) ||
                  (kind == Kind::compound && aggregation == Aggregation::lp_monotonicity) ||
                  (kind == Kind::higher_order && aggregation == Aggregation::bounds_composition);
  if (!ok) {
    throw std::invalid_argument("property '" + name + "': kind " + to_string(kind) +
                                " cannot use aggregation " + to_string(aggregation));
  }
  if (direction != "nonincreasing" && direction != "nondecreasing") {
    throw std::invalid_argument("property '" + name + "': bad direction '" + direction + "'");
  }
  if (threshold && !(*threshold >= 0.0 && *threshold <= 1.0)) {
    throw std::invalid_argument("property '" + name + "': threshold outside [0, 1]");
  }
  if (reference_accuracy && !(*reference_accuracy >= 0.5 && *reference_accuracy <= 1.0)) {
    throw std::invalid_argument("property '" + name + "': reference accuracy outside [0.5, 1]");
  }
}

nlohmann::json PropertySpec::to_json() const {
  nlohmann::json j = {{"name", name},
                      {"kind", to_string(kind)},
                      {"scorer", scorer},
                      {"aggregation", to_string(aggregation)},
                      {"direction", direction}};
  if (threshold) j["threshold"] = *threshold;
  if (reference_accuracy) j["reference_accuracy"] = *reference_accuracy;
  return j;
}

PropertySpec PropertySpec::from_json(const nlohmann::json& j) {
  PropertySpec p;
  p.name = j.at("name").get<std::string>();
  p.kind = parse_kind(j.at("kind").get<std::string>());
  p.scorer = j.value("scorer", "parity");
  if (j.contains("aggregation")) {
    p.aggregation = parse_aggregation(j.at("aggregation").get<std::string>());
  } else {
    p.aggregation = p.kind == Kind::simple     ? Aggregation::average
                    : p.kind == Kind::compound ? Aggregation::lp_monotonicity
                                               : Aggregation::bounds_composition;
  }
  p.direction = j.value("direction", "nonincreasing");
  if (j.contains("threshold")) p.threshold = j.at("threshold").get<double>();
  if (j.contains("reference_accuracy")) {
    p.reference_accuracy = j.at("reference_accuracy").get<double>();
  }
  p.validate();
  return p;
}

double simple_distance(const stats::PropertyEstimate& estimate) { return 1.0 - estimate.mean; }

AccuracyThresholdTester::AccuracyThresholdTester(double threshold) : threshold_(threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("AccuracyThresholdTester: threshold must lie in (0, 1]");
  }
}

std::int64_t AccuracyThresholdTester::sample_size(double epsilon) const {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    throw std::invalid_argument("AccuracyThresholdTester: epsilon must lie in (0, 1]");
  }
  return stats::required_sample_size(epsilon / 2.0, 1.0 / 3.0);
}

Verdict AccuracyThresholdTester::decide(std::span<const double> scores, double epsilon) const {
  if (scores.empty()) throw std::invalid_argument("AccuracyThresholdTester: no samples");
  const double mean =
      std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
  const bool accept = mean >= threshold_ - epsilon / 2.0;
  if (accept) return Verdict::has_property;
  // No accuracy can sit at or below threshold - eps < 0, so no model is
  // epsilon-far and that verdict would be vacuous.
  return threshold_ - epsilon < 0.0 ? Verdict::inconclusive : Verdict::epsilon_far;
}

std::string AccuracyThresholdTester::name() const {
  return "accuracy >= " + std::to_string(threshold_);
}

TesterOutcome run_property_tester(const PropertyTester& tester, double epsilon,
                                  const oracles::Responder& model, const Sampler& sampler,
                                  std::uint64_t seed) {
  const std::int64_t n = std::max<std::int64_t>(1, tester.sample_size(epsilon));
  std::mt19937_64 rng(seed);
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const std::string prompt = sampler.draw(rng);
    const std::string response = model(prompt);
    scores.push_back(sampler.score(prompt, response).value_or(0.0));
  }
  TesterOutcome out;
  out.verdict = tester.decide(scores, epsilon);
  out.epsilon = epsilon;
  out.samples_used = n;
  out.votes_has = out.verdict == Verdict::has_property ? 1 : 0;
  out.votes_far = out.verdict == Verdict::epsilon_far ? 1 : 0;
  return out;
}

int amplification_count(double delta) {
  if (!(delta > 0.0 && delta <= 1.0 / 3.0 + 1e-15)) {
    throw std::invalid_argument("amplification: delta must lie in (0, 1/3]");
  }
  return static_cast<int>(std::ceil(18.0 * std::log(1.0 / delta)));
}

Verdict majority_vote(std::span<const Verdict> votes) {
  std::size_t has = 0;
  std::size_t far = 0;
  for (Verdict v : votes) {
    if (v == Verdict::has_property) ++has;
    if (v == Verdict::epsilon_far) ++far;
  }
  if (2 * has > votes.size()) return Verdict::has_property;
  if (2 * far > votes.size()) return Verdict::epsilon_far;
  return Verdict::inconclusive;
}

AmplifiedTester::AmplifiedTester(const PropertyTester& tester, double delta)
    : tester_(tester), delta_(delta), repetitions_(amplification_count(delta)) {}

TesterOutcome AmplifiedTester::run(double epsilon, const oracles::Responder& model,
                                   const Sampler& sampler, std::uint64_t seed) const {
  std::vector<Verdict> votes;
  votes.reserve(static_cast<std::size_t>(repetitions_));
  TesterOutcome out;
  for (int k = 0; k < repetitions_; ++k) {
    const auto single = run_property_tester(tester_, epsilon, model, sampler,
                                            oracles::splitmix64(seed + static_cast<std::uint64_t>(k)));
    out.samples_used = single.samples_used;
    votes.push_back(single.verdict);
  }
  out.verdict = majority_vote(votes);
  out.epsilon = epsilon;
  out.repetitions = repetitions_;
  out.confidence = 1.0 - delta_;
  for (Verdict v : votes) {
    out.votes_has += v == Verdict::has_property;
    out.votes_far += v == Verdict::epsilon_far;
  }
  return out;
}

}  // namespace telm::property
