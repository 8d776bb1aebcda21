#include "telm/report.hpp"

#include <cstdio>
#include <sstream>

namespace telm::report {

namespace {

std::string fmt(double v, const char* spec = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

const PropertyAnalysis* primary_property(const Analysis& analysis) {
  for (const auto& p : analysis.properties) {
    if (p.spec.kind == property::Kind::compound) return &p;
  }
  return analysis.properties.empty() ? nullptr : &analysis.properties.front();
}

std::string kind_label(property::Kind k) {
  switch (k) {
    case property::Kind::simple: return "Simple";
    case property::Kind::compound: return "Compound";
    case property::Kind::higher_order: return "Higher-order";
  }
  return "unknown";
}

std::string algorithm_label(property::Kind k) {
  switch (k) {
    case property::Kind::simple:
      return "Sample average with a two-sided Hoeffding confidence interval.";
    case property::Kind::compound:
      return "Lower bound on distance to monotonicity using a linear program.";
    case property::Kind::higher_order:
      return "Extremal true-accuracy bounds given the reference accuracy.";
  }
  return "unknown";
}

std::string distribution_label(const ExperimentPlan& plan) {
  const std::string range =
      std::to_string(plan.min_length) + "-" + std::to_string(plan.max_length);
  if (plan.sampling == Sampling::stratified) {
    return std::to_string(plan.per_bucket_samples) + " samples per length " + range +
           ", uniform within strings of that length.";
  }
  return "Uniform over length " + range + " and uniform within strings of that length.";
}

// Metadata lookup: metadata[section][key] as text, or nullopt.
std::optional<std::string> meta(const nlohmann::json& m, const char* section, const char* key) {
  if (!m.is_object() || !m.contains(section) || !m[section].is_object()) return std::nullopt;
  const auto& s = m[section];
  if (!s.contains(key) || s[key].is_null()) return std::nullopt;
  if (s[key].is_string()) return s[key].get<std::string>();
  return s[key].dump();
}

std::string escape_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') {
      out += "\\|";
    } else if (c == '\n') {
      out += "<br>";
    } else {
      out += c;
    }
  }
  return out;
}

}  // namespace

const std::vector<std::pair<std::string, std::vector<std::string>>>& template_layout() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> layout = {
      {"Language Model",
       {"Name", "Version", "Training details", "Benchmarks Used in Training Data",
        "Fine-tuning details (if any)", "Adaptations (if any)"}},
      {"Task tested", {"Description", "Dependencies"}},
      {"Property tested",
       {"Description", "Number of Samples", "Distribution of Samples", "Testing Algorithm"}},
      {"Property Metric", {"Description", "Type Used", "Distance Distribution"}},
      {"Test Infrastructure",
       {"Name & Location", "Description", "Time used for testing", "Post processing",
        "Benchmarks used (if any)", "Stochasticity & Temperature"}},
      {"Reproducibility",
       {"Open source model", "Open source training data", "Open source testing data"}},
  };
  return layout;
}

std::vector<Warning> manual_checklist() {
  return {
      {warning_id::semantic_mismatch, "Training-Testing Semantic Mismatch",
       "Confirm the tested task matches the task the model was trained for."},
      {warning_id::distribution_mismatch, "Training-Testing Distribution Mismatch",
       "Confirm the test distribution matches the end-use or training distribution."},
      {warning_id::uninterpretable_metrics, "Uninterpretable metrics",
       "Confirm the reported metrics are meaningful to the end user."},
  };
}

std::vector<Warning> lint_run(const ExperimentPlan& plan, const RunRecord& run,
                              const Analysis& analysis) {
  std::vector<Warning> out;

  if (plan.target_half_width) {
    const auto need = stats::required_sample_size(*plan.target_half_width, plan.alpha);
    std::int64_t have = analysis.dispatched;
    std::string unit = "samples";
    for (const auto& p : analysis.properties) {
      if (p.spec.kind != property::Kind::compound) continue;
      unit = "samples in the smallest bucket";
      have = p.buckets.empty() ? 0 : p.buckets.front().estimate.n;
      for (const auto& row : p.buckets) have = std::min(have, row.estimate.n);
    }
    if (have < need) {
      out.push_back({warning_id::too_few_samples, "Tested on too few samples",
                     "N = " + std::to_string(have) + " " + unit + " but half-width " +
                         fmt(*plan.target_half_width) + " at alpha " + fmt(plan.alpha) +
                         " requires " + std::to_string(need)});
    }
  }

  const bool has_intervals = !analysis.properties.empty() && analysis.alpha > 0.0 &&
                             analysis.alpha < 1.0;
  if (!has_intervals) {
    out.push_back({warning_id::no_confidence_bounds, "No confidence or error bounds for results",
                   "no confidence level is attached to the reported estimates"});
  }

  std::vector<std::string> missing;
  if (!run.seed) missing.push_back("seed");
  if (run.plan_digest.empty()) {
    missing.push_back("plan digest");
  } else if (run.plan_digest != plan.digest()) {
    missing.push_back("plan digest matching the plan");
  }
  if (!missing.empty()) {
    std::string what;
    for (const auto& m : missing) what += (what.empty() ? "" : ", ") + m;
    out.push_back({warning_id::details_missing, "Experimental details not included",
                   "run is missing: " + what});
  }

  if (run.model.benchmarks_in_training.value_or(false)) {
    out.push_back({warning_id::open_benchmarks, "Tested samples drawn from open source benchmarks",
                   "benchmarks used in testing were declared part of the training data"});
  }

  for (const auto& p : analysis.properties) {
    if (p.spec.kind == property::Kind::higher_order && !p.spec.reference_accuracy) {
      out.push_back({warning_id::ground_truth_suspect, "Quality of \"ground truth\" is suspect",
                     "property '" + p.spec.name + "' reports accuracy without the reference accuracy q"});
    }
  }
  return out;
}

TelmReport render_report(const Run& run, const Analysis& analysis, const nlohmann::json& metadata) {
  TelmReport rep;
  const auto& plan = run.plan;
  const auto& model = run.record.model;
  const PropertyAnalysis* primary = primary_property(analysis);
  std::vector<std::string> missing;

  auto pick = [&](const char* section, const char* key, std::optional<std::string> derived,
                  const std::string& label) {
    if (auto v = meta(metadata, section, key)) return *v;
    if (derived) return *derived;
    missing.push_back(label);
    return std::string("unknown");
  };
  auto known = [](const std::string& s) -> std::optional<std::string> {
    if (s.empty() || s == "unknown") return std::nullopt;
    return s;
  };

  std::optional<std::string> benchmarks;
  if (model.benchmarks_in_training) benchmarks = *model.benchmarks_in_training ? "Yes." : "None.";
  std::optional<std::string> stochasticity;
  if (model.temperature) {
    stochasticity = "Temperature " + fmt(*model.temperature) + ".";
  }

  std::string samples = std::to_string(analysis.dispatched);
  if (plan.repeats > 1) samples += " (" + std::to_string(plan.repeats) + " repeats per prompt)";
  char elapsed[64];
  std::snprintf(elapsed, sizeof elapsed, "Testing done in %.1f s.", run.record.elapsed_ms / 1000.0);
  const bool timed = !run.record.finished_at.empty();

  rep.sections = {
      {"Language Model",
       {{"Name", pick("language_model", "name", known(model.name), "model name")},
        {"Version", pick("language_model", "version", known(model.version), "model version")},
        {"Training details", pick("language_model", "training_details", std::nullopt, "training details")},
        {"Benchmarks Used in Training Data",
         pick("language_model", "benchmarks_in_training", benchmarks, "benchmarks in training")},
        {"Fine-tuning details (if any)", pick("language_model", "fine_tuning", std::nullopt, "fine-tuning")},
        {"Adaptations (if any)", pick("language_model", "adaptations", std::nullopt, "adaptations")}}},
      {"Task tested",
       {{"Description", pick("task", "description", std::nullopt, "task description")},
        {"Dependencies", pick("task", "dependencies", std::nullopt, "task dependencies")}}},
      {"Property tested",
       {{"Description",
         pick("property", "description",
              primary ? std::optional<std::string>(primary->spec.name) : std::nullopt,
              "property description")},
        {"Number of Samples", samples},
        {"Distribution of Samples", distribution_label(plan)},
        {"Testing Algorithm",
         primary ? algorithm_label(primary->spec.kind) : pick("property", "algorithm", std::nullopt, "testing algorithm")}}},
      {"Property Metric",
       {{"Description", pick("metric", "description", std::nullopt, "metric description")},
        {"Type Used", primary ? kind_label(primary->spec.kind) : pick("metric", "type", std::nullopt, "metric type")},
        {"Distance Distribution", distribution_label(plan)}}},
      {"Test Infrastructure",
       {{"Name & Location", pick("infrastructure", "name_location", std::nullopt, "infrastructure name")},
        {"Description", pick("infrastructure", "description", std::nullopt, "infrastructure description")},
        {"Time used for testing",
         pick("infrastructure", "time_used", timed ? std::optional<std::string>(elapsed) : std::nullopt,
              "time used")},
        {"Post processing",
         pick("infrastructure", "post_processing",
              std::string("Estimates, intervals and linear program computed by telm analyze."),
              "post processing")},
        {"Benchmarks used (if any)", pick("infrastructure", "benchmarks_used", std::nullopt, "benchmarks used")},
        {"Stochasticity & Temperature",
         pick("infrastructure", "stochasticity_temperature", stochasticity, "stochasticity")}}},
      {"Reproducibility",
       {{"Open source model", pick("reproducibility", "open_model", std::nullopt, "open model")},
        {"Open source training data",
         pick("reproducibility", "open_training_data", std::nullopt, "open training data")},
        {"Open source testing data",
         pick("reproducibility", "open_test_data", std::nullopt, "open test data")}}},
  };

  std::string lm_type = to_string(model.type);
  if (metadata.is_object() && metadata.contains("lm_type") && metadata["lm_type"].is_string()) {
    lm_type = to_string(parse_lm_type(metadata["lm_type"].get<std::string>()));
  }
  if (lm_type == "unknown") missing.push_back("LM type");
  rep.lm_type = lm_type;

  rep.warnings = lint_run(plan, run.record, analysis);
  if (!missing.empty()) {
    std::string what;
    for (const auto& m : missing) what += (what.empty() ? "" : ", ") + m;
    rep.warnings.push_back({warning_id::details_missing, "Experimental details not included",
                            "report fields without a value: " + what});
  }
  rep.checklist = manual_checklist();
  rep.results = analysis.to_json();
  return rep;
}

nlohmann::ordered_json TelmReport::to_json() const {
  nlohmann::ordered_json j;
  j["template"] = "TEL'M";
  j["lm_type"] = lm_type;
  auto secs = nlohmann::ordered_json::array();
  for (const auto& s : sections) {
    nlohmann::ordered_json sj;
    sj["section"] = s.title;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : s.rows) rows.push_back({{"label", r.label}, {"value", r.value}});
    sj["rows"] = rows;
    secs.push_back(sj);
  }
  j["sections"] = secs;
  auto warn = nlohmann::ordered_json::array();
  for (const auto& w : warnings) {
    warn.push_back({{"id", w.id}, {"category", w.category}, {"message", w.message}});
  }
  j["warnings"] = warn;
  auto check = nlohmann::ordered_json::array();
  for (const auto& w : checklist) {
    check.push_back({{"id", w.id}, {"category", w.category}, {"attestation", w.message}});
  }
  j["manual_checklist"] = check;
  j["results"] = results;
  return j;
}

std::string TelmReport::to_markdown() const {
  std::ostringstream md;
  md << "# TEL'M Report\n\n";
  md << "LM type: " << lm_type << " box\n\n";
  md << "| Section | Field | Value |\n|---|---|---|\n";
  for (const auto& s : sections) {
    bool first = true;
    for (const auto& r : s.rows) {
      md << "| " << (first ? s.title : "") << " | " << r.label << " | " << escape_cell(r.value)
         << " |\n";
      first = false;
    }
  }
  md << "\n## Results\n\n";
  if (results.contains("properties")) {
    for (const auto& p : results["properties"]) {
      md << "- " << p["name"].get<std::string>() << " (" << p["kind"].get<std::string>()
         << "): mean " << fmt(p["overall"]["mean"].get<double>(), "%.4f") << ", "
         << fmt(100.0 * p["overall"]["level"].get<double>(), "%.1f") << "% interval ["
         << fmt(p["overall"]["ci_lower"].get<double>(), "%.4f") << ", "
         << fmt(p["overall"]["ci_upper"].get<double>(), "%.4f") << "]";
      if (p.contains("feasible")) {
        if (p["feasible"].get<bool>()) {
          md << "; distance to monotonicity >= "
             << fmt(p["distance_lower_bound"].get<double>(), "%.4f");
        } else {
          md << "; no monotone sequence fits the intervals";
        }
        md << " (simultaneous confidence "
           << fmt(100.0 * p["simultaneous_confidence"].get<double>(), "%.1f") << "%)";
      }
      if (p.contains("true_accuracy")) {
        md << "; true accuracy in [" << fmt(p["true_accuracy"]["lower"].get<double>(), "%.4f")
           << ", " << fmt(p["true_accuracy"]["upper"].get<double>(), "%.4f") << "]";
      }
      md << "\n";
    }
  }
  md << "\n## Warnings\n\n";
  if (warnings.empty()) md << "None.\n";
  for (const auto& w : warnings) md << "- **" << w.category << "** (`" << w.id << "`): " << w.message << "\n";
  md << "\n## Manual attestation\n\n";
  for (const auto& w : checklist) md << "- [ ] " << w.category << ": " << w.message << "\n";
  return md.str();
}

std::string emit_plot_csv(const PropertyAnalysis& analysis) {
  std::ostringstream out;
  out << "length,mean,ci_lower,ci_upper,shifted_lower,shifted_upper,lp_solution\n";
  for (const auto& r : analysis.buckets) {
    const auto& e = r.estimate;
    out << r.length << ',' << fmt(e.mean) << ',' << fmt(e.interval.lower) << ','
        << fmt(e.interval.upper) << ',' << fmt(e.interval.lower + r.shift) << ','
        << fmt(e.interval.upper + r.shift) << ','
        << (r.lp_solution ? fmt(*r.lp_solution) : std::string()) << '\n';
  }
  return out.str();
}

}  // namespace telm::report
