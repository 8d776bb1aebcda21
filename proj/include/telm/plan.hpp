#ifndef TELM_PLAN_HPP
#define TELM_PLAN_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "telm/property.hpp"

namespace telm {

// Malformed plan, metadata or CLI configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class LmType { white_box, gray_box, black_box, unknown };
const char* to_string(LmType t);
LmType parse_lm_type(const std::string& s);

// What is known about the model under test before execution.
struct ModelMetadata {
  std::string name = "unknown";
  std::string version = "unknown";
  LmType type = LmType::unknown;
  std::optional<double> temperature;
  std::string context_policy = "unknown";  // e.g. "none", "cleared per prompt"
  std::optional<bool> static_model;         // false: still being trained
  std::optional<bool> benchmarks_in_training;

  nlohmann::json to_json() const;
  static ModelMetadata from_json(const nlohmann::json& j);
};

enum class Sampling { uniform_length, stratified };

// Binary strings: length uniform over [min_length, max_length] (or a fixed
// count per length when stratified), then a uniform string of that length.
struct ExperimentPlan {
  std::string name = "experiment";
  int min_length = 8;
  int max_length = 45;
  Sampling sampling = Sampling::uniform_length;
  std::int64_t total_samples = 0;       // uniform_length
  std::int64_t per_bucket_samples = 0;  // stratified
  double alpha = 0.001;
  std::optional<double> target_half_width;
  int repeats = 1;
  std::uint64_t seed = 0;
  std::vector<double> weights;  // empty: uniform over lengths
  std::vector<property::PropertySpec> properties;
  std::optional<nlohmann::json> endpoint;
  ModelMetadata model;

  int num_buckets() const { return max_length - min_length + 1; }
  std::int64_t prompt_count() const;
  const std::string& scorer() const;

  // Throws ConfigError.
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static ExperimentPlan from_json(const nlohmann::json& j);
  std::string digest() const;  // fnv1a64 of the canonical JSON, hex
};

// Warnings about the plan itself, e.g. too few samples for its own target.
std::vector<std::string> plan_warnings(const ExperimentPlan& plan);

struct Prompt {
  std::string id;
  std::string text;
  int bucket = 0;
};

/// Prompts in dispatch order. Deterministic in plan.seed.
std::vector<Prompt> sample_dataset(const ExperimentPlan& plan);

}  // namespace telm

#endif  // TELM_PLAN_HPP
