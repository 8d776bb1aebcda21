#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "telm/harness.hpp"
#include "telm/report.hpp"

using namespace telm;
using report::Warning;

namespace {

Run make_run(std::int64_t per_bucket, std::uint64_t seed = 4) {
  ExperimentPlan p;
  p.name = "report-test";
  p.min_length = 8;
  p.max_length = 13;
  p.sampling = Sampling::stratified;
  p.per_bucket_samples = per_bucket;
  p.seed = seed;
  p.alpha = 0.001;
  p.target_half_width = 0.1;
  p.properties = default_properties();
  std::ostringstream log;
  ExecuteOptions opt;
  opt.log = &log;
  execute(p, make_endpoint(EndpointConfig::from_uri("oracle:linear:1,-0.01,0.5"), p, seed), opt);
  std::istringstream in(log.str());
  return read_run_log(in);
}

bool has(const std::vector<Warning>& ws, const char* id) {
  return std::any_of(ws.begin(), ws.end(), [&](const Warning& w) { return w.id == id; });
}

nlohmann::json full_metadata() {
  return nlohmann::json::parse(R"({
    "lm_type": "black",
    "language_model": {"name": "tiny", "version": "1", "training_details": "t",
                       "benchmarks_in_training": "no", "fine_tuning": "none", "adaptations": "none"},
    "task": {"description": "parity", "dependencies": "none"},
    "property": {"description": "accuracy by length"},
    "metric": {"description": "fraction correct"},
    "infrastructure": {"name_location": "ci", "description": "laptop", "time_used": "1 s",
                       "post_processing": "none", "benchmarks_used": "none",
                       "stochasticity_temperature": "greedy"},
    "reproducibility": {"open_model": "yes", "open_training_data": "yes", "open_test_data": "yes"}
  })");
}

}  // namespace

TEST_CASE("report contains every template row") {
  const auto run = make_run(300);
  const auto rep = report::render_report(run, analyze(run));
  const auto& layout = report::template_layout();
  REQUIRE(rep.sections.size() == layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    CHECK(rep.sections[i].title == layout[i].first);
    REQUIRE(rep.sections[i].rows.size() == layout[i].second.size());
    for (std::size_t j = 0; j < layout[i].second.size(); ++j) {
      CHECK(rep.sections[i].rows[j].label == layout[i].second[j]);
      CHECK_FALSE(rep.sections[i].rows[j].value.empty());
    }
  }
  const auto md = rep.to_markdown();
  for (const auto& [title, rows] : layout) {
    CHECK(md.find(title) != std::string::npos);
    for (const auto& r : rows) CHECK(md.find(r) != std::string::npos);
  }
  CHECK(rep.checklist.size() == 3);
  CHECK(has(rep.checklist, report::warning_id::semantic_mismatch));
}

TEST_CASE("report is byte-stable") {
  const auto run = make_run(200);
  const auto a = report::render_report(run, analyze(run), full_metadata());
  const auto b = report::render_report(run, analyze(run), full_metadata());
  CHECK(a.to_json().dump() == b.to_json().dump());
  CHECK(a.to_markdown() == b.to_markdown());
  CHECK(a.lm_type == "black");
  CHECK_FALSE(has(a.warnings, report::warning_id::details_missing));
}

TEST_CASE("lint: too few samples") {
  // hw 0.1 at alpha 0.001 needs 381 per bucket.
  auto few = make_run(380);
  auto enough = make_run(381);
  CHECK(has(report::lint_run(few.plan, few.record, analyze(few)), report::warning_id::too_few_samples));
  CHECK_FALSE(has(report::lint_run(enough.plan, enough.record, analyze(enough)),
                  report::warning_id::too_few_samples));
}

TEST_CASE("lint: seed, digest, benchmarks, ground truth") {
  const auto run = make_run(50);
  const auto a = analyze(run);
  CHECK_FALSE(has(report::lint_run(run.plan, run.record, a), report::warning_id::details_missing));

  auto rec = run.record;
  rec.seed.reset();
  CHECK(has(report::lint_run(run.plan, rec, a), report::warning_id::details_missing));
  rec = run.record;
  rec.plan_digest = "fnv1a64:0000000000000000";
  CHECK(has(report::lint_run(run.plan, rec, a), report::warning_id::details_missing));

  rec = run.record;
  rec.model.benchmarks_in_training = true;
  CHECK(has(report::lint_run(run.plan, rec, a), report::warning_id::open_benchmarks));
  rec.model.benchmarks_in_training = false;
  CHECK_FALSE(has(report::lint_run(run.plan, rec, a), report::warning_id::open_benchmarks));

  auto hrun = run;
  property::PropertySpec h;
  h.name = "true-accuracy";
  h.kind = property::Kind::higher_order;
  h.aggregation = property::Aggregation::bounds_composition;
  hrun.plan.properties = {h};
  CHECK(has(report::lint_run(hrun.plan, hrun.record, analyze(hrun)),
            report::warning_id::ground_truth_suspect));
  hrun.plan.properties[0].reference_accuracy = 0.95;
  CHECK_FALSE(has(report::lint_run(hrun.plan, hrun.record, analyze(hrun)),
                  report::warning_id::ground_truth_suspect));

  Analysis empty;
  CHECK(has(report::lint_run(run.plan, run.record, empty), report::warning_id::no_confidence_bounds));
}

TEST_CASE("missing metadata is flagged") {
  const auto run = make_run(50);
  const auto rep = report::render_report(run, analyze(run));
  CHECK(has(rep.warnings, report::warning_id::details_missing));
  CHECK(rep.lm_type == "unknown");
}

TEST_CASE("plot csv") {
  const auto run = make_run(100);
  const auto a = analyze(run);
  const auto csv = report::emit_plot_csv(a.properties.at(1));
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "length,mean,ci_lower,ci_upper,shifted_lower,shifted_upper,lp_solution");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
    CHECK(line.rfind(std::to_string(7 + rows) + ",", 0) == 0);
  }
  CHECK(rows == 6);
}
