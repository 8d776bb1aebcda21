#ifndef TELM_REPORT_HPP
#define TELM_REPORT_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "telm/harness.hpp"

namespace telm::report {

// Inadequacy categories with stable identifiers.
namespace warning_id {
inline constexpr const char* semantic_mismatch = "training-testing-semantic-mismatch";
inline constexpr const char* distribution_mismatch = "training-testing-distribution-mismatch";
inline constexpr const char* open_benchmarks = "tested-samples-drawn-from-open-source-benchmarks";
inline constexpr const char* too_few_samples = "tested-on-too-few-samples";
inline constexpr const char* no_confidence_bounds = "no-confidence-or-error-bounds";
inline constexpr const char* uninterpretable_metrics = "uninterpretable-metrics";
inline constexpr const char* ground_truth_suspect = "quality-of-ground-truth-is-suspect";
inline constexpr const char* details_missing = "experimental-details-not-included";
}  // namespace warning_id

struct Warning {
  std::string id;
  std::string category;  // human-readable inadequacy name
  std::string message;

  bool operator==(const Warning&) const = default;
};

/// Automated checks for the machine-detectable inadequacies.
std::vector<Warning> lint_run(const ExperimentPlan& plan, const RunRecord& run,
                              const Analysis& analysis);

// Inadequacies with no machine-checkable signal; rendered as an attestation
// checklist.
std::vector<Warning> manual_checklist();

struct ReportRow {
  std::string label;
  std::string value;
};

struct ReportSection {
  std::string title;
  std::vector<ReportRow> rows;
};

struct TelmReport {
  std::vector<ReportSection> sections;
  std::string lm_type = "unknown";
  std::vector<Warning> warnings;
  std::vector<Warning> checklist;
  nlohmann::ordered_json results;

  nlohmann::ordered_json to_json() const;
  std::string to_markdown() const;
};

// Row labels per section, in template order.
const std::vector<std::pair<std::string, std::vector<std::string>>>& template_layout();

/// Fills every template row from the run and analysis where derivable and
/// from `metadata` otherwise ("unknown" when neither has it). Missing
/// metadata adds an experimental-details warning. Byte-stable in its inputs.
TelmReport render_report(const Run& run, const Analysis& analysis,
                         const nlohmann::json& metadata = nlohmann::json::object());

/// One CSV per compound property; columns
/// length,mean,ci_lower,ci_upper,shifted_lower,shifted_upper,lp_solution.
std::string emit_plot_csv(const PropertyAnalysis& analysis);

}  // namespace telm::report

#endif  // TELM_REPORT_HPP
