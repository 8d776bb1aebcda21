#ifndef TELM_HARNESS_HPP
#define TELM_HARNESS_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "telm/endpoint.hpp"
#include "telm/higher_order.hpp"
#include "telm/monotone_lp.hpp"
#include "telm/oracles.hpp"
#include "telm/plan.hpp"
#include "telm/stats.hpp"

namespace telm {

// B(x): nullopt when the response cannot be scored.
using Scorer = std::function<std::optional<double>(std::string_view prompt, std::string_view output)>;

// "parity": output must be "0" or "1" (surrounding whitespace ignored) and is
// compared with the parity of the prompt; anything else is unscorable.
// "exact-match": trimmed output compared verbatim with the reference answer.
Scorer make_scorer(const std::string& name);

struct TestSample {
  std::string id;
  std::string prompt;
  int bucket = 0;
  int repeat = 0;
  std::optional<std::string> response;
  std::optional<std::string> error;
  std::optional<double> score;  // present iff scoring succeeded
  double latency_ms = 0.0;      // not part of the deterministic log line

  bool unscorable() const { return response && !score; }

  nlohmann::ordered_json to_json() const;
  static TestSample from_json(const nlohmann::json& j);
};

struct RunRecord {
  std::string plan_digest;
  std::optional<std::uint64_t> seed;
  ModelMetadata model;
  nlohmann::json endpoint;
  int in_flight = 1;
  std::string started_at;
  std::string finished_at;
  double elapsed_ms = 0.0;
  std::int64_t dispatched = 0;
  std::int64_t scored = 0;
  std::int64_t unscored = 0;
  std::int64_t errors = 0;
  std::vector<std::string> warnings;
};

struct Run {
  ExperimentPlan plan;
  RunRecord record;
  std::vector<TestSample> samples;
};

struct ExecuteOptions {
  int max_in_flight = 1;
  nlohmann::json endpoint_description = nlohmann::json::object();
  // Run log (JSONL): plan header, run header, samples in id order, summary.
  std::ostream* log = nullptr;
  // Optional per-sample latencies, same order as the log.
  std::ostream* timing = nullptr;
};

/// Sends every prompt (times plan.repeats) to the endpoint and scores the
/// replies. Failed requests are kept as unscored samples. Throws
/// EndpointError when the endpoint cannot be reached or every request fails
/// at the transport level.
Run execute(const ExperimentPlan& plan, const EndpointFactory& endpoint,
            const ExecuteOptions& options = {});

// The bytes of the sample lines only, for determinism comparisons.
std::string sample_log_lines(const std::vector<TestSample>& samples);

/// Parses a run log written by execute.
Run read_run_log(std::istream& in);

/// Builds an endpoint factory; "oracle:" addresses resolve against the plan's
/// length range: exact | constant:<mu> | linear:<start>,<slope>,<floor> |
/// staircase:<cut>,<before>,<after> | <path to curve JSON>.
EndpointFactory make_endpoint(const EndpointConfig& config, const ExperimentPlan& plan,
                              std::uint64_t oracle_seed);

enum class DeterminismVerdict { deterministic, nondeterministic, insufficient_repeats };
const char* to_string(DeterminismVerdict v);

struct DeterminismReport {
  DeterminismVerdict verdict = DeterminismVerdict::insufficient_repeats;
  std::vector<int> distinct_responses;  // per probe prompt
  int transport_errors = 0;
  int repeats = 0;
};

/// Sends each probe prompt `repeats` times with repeat indices 0..repeats-1.
DeterminismReport probe_determinism(const EndpointFactory& endpoint,
                                    const std::vector<std::string>& prompts, int repeats);

struct BucketRow {
  int length = 0;
  stats::PropertyEstimate estimate;
  std::int64_t unscored = 0;
  double weight = 0.0;
  double shift = 0.0;
  std::optional<double> lp_solution;
};

struct PropertyAnalysis {
  property::PropertySpec spec;
  stats::PropertyEstimate overall;
  double simple_distance = 0.0;
  // compound
  std::vector<BucketRow> buckets;
  std::optional<mono::MonotonicityResult> monotonicity;
  double simultaneous_level = 0.0;
  // higher-order
  std::optional<higher_order::AccuracyBounds> bounds;
  std::optional<higher_order::InflatedBounds> inflated_bounds;
};

struct Analysis {
  std::string plan_digest;
  double alpha = 0.0;
  std::int64_t dispatched = 0;
  std::int64_t scored = 0;
  std::int64_t unscored = 0;
  std::vector<PropertyAnalysis> properties;
  std::vector<std::string> warnings;

  nlohmann::ordered_json to_json() const;
};

// Properties analyzed when a plan declares none.
std::vector<property::PropertySpec> default_properties();

/// Pure function of the run: per-bucket estimates at plan alpha, the
/// monotonicity LP with delta_i = unclamped half-widths, and higher-order
/// bounds. Unscored samples count as 0. Empty buckets are dropped from the LP
/// with a warning.
Analysis analyze(const Run& run);

}  // namespace telm

#endif  // TELM_HARNESS_HPP
