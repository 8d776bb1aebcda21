#include <doctest.h>

#include <atomic>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "telm/harness.hpp"

using namespace telm;

namespace {

ExperimentPlan small_plan(std::int64_t per_bucket, int lo = 8, int hi = 12) {
  ExperimentPlan p;
  p.name = "test";
  p.min_length = lo;
  p.max_length = hi;
  p.sampling = Sampling::stratified;
  p.per_bucket_samples = per_bucket;
  p.seed = 17;
  return p;
}

EndpointFactory oracle(const std::string& spec, const ExperimentPlan& plan, std::uint64_t seed = 3) {
  return make_endpoint(EndpointConfig::from_uri("oracle:" + spec), plan, seed);
}

// Run whose bucket means are exact fractions count/n.
Run synthetic_run(const std::vector<int>& correct, int n, std::vector<double> weights) {
  Run run;
  run.plan = small_plan(n, 1, static_cast<int>(correct.size()));
  run.plan.weights = std::move(weights);
  run.record.plan_digest = run.plan.digest();
  run.record.seed = run.plan.seed;
  int id = 0;
  for (std::size_t b = 0; b < correct.size(); ++b) {
    for (int i = 0; i < n; ++i) {
      TestSample s;
      s.id = "p" + std::to_string(id++);
      s.prompt = std::string(b + 1, '0');
      s.bucket = static_cast<int>(b) + 1;
      s.response = i < correct[b] ? "0" : "1";
      s.score = i < correct[b] ? 1.0 : 0.0;
      run.samples.push_back(s);
    }
  }
  return run;
}

}  // namespace

TEST_CASE("uniform-length sampling counts") {
  ExperimentPlan p;
  p.min_length = 8;
  p.max_length = 45;
  p.total_samples = 50000;
  p.seed = 2023;
  const auto prompts = sample_dataset(p);
  REQUIRE(prompts.size() == 50000);
  std::map<int, int> count;
  for (const auto& x : prompts) {
    CHECK(static_cast<int>(x.text.size()) == x.bucket);
    ++count[x.bucket];
  }
  REQUIRE(count.size() == 38);
  const double mean = 50000.0 / 38.0;
  const double sigma = std::sqrt(50000.0 * (1.0 / 38.0) * (37.0 / 38.0));
  for (const auto& [len, c] : count) CHECK(std::abs(c - mean) <= 4.0 * sigma);

  std::set<std::string> ids;
  for (const auto& x : prompts) ids.insert(x.id);
  CHECK(ids.size() == prompts.size());
}

TEST_CASE("tiny support and determinism") {
  ExperimentPlan p;
  p.min_length = 3;
  p.max_length = 3;
  p.total_samples = 8;
  p.seed = 1;
  const auto a = sample_dataset(p);
  REQUIRE(a.size() == 8);
  for (const auto& x : a) {
    CHECK(x.text.size() == 3);
    CHECK(x.text.find_first_not_of("01") == std::string::npos);
  }
  const auto b = sample_dataset(p);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].text == b[i].text);
  p.seed = 2;
  const auto c = sample_dataset(p);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].text != c[i].text;
  CHECK(differs);
}

TEST_CASE("plan json round trip and validation") {
  auto p = small_plan(10);
  p.properties = default_properties();
  p.weights = {0.2, 0.2, 0.2, 0.2, 0.2};
  p.target_half_width = 0.1;
  const auto back = ExperimentPlan::from_json(nlohmann::json::parse(p.to_json().dump()));
  CHECK(back.digest() == p.digest());
  CHECK(back.to_json().dump() == p.to_json().dump());

  auto bad = p;
  bad.weights = {0.5, 0.5};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = p;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(ExperimentPlan::from_json(nlohmann::json::parse(R"({"distribution": {"min_length": "x", "max_length": 3}})")),
                  ConfigError);
}

TEST_CASE("exact oracle: everything scored and correct") {
  ExperimentPlan p;
  p.min_length = 4;
  p.max_length = 20;
  p.total_samples = 1000;
  p.seed = 8;
  const auto run = execute(p, oracle("exact", p));
  CHECK(run.record.dispatched == 1000);
  CHECK(run.record.scored == 1000);
  CHECK(run.record.unscored == 0);
  const auto a = analyze(run);
  CHECK(a.properties.front().overall.mean == 1.0);
  REQUIRE(a.properties.size() == 2);
  REQUIRE(a.properties[1].monotonicity);
  CHECK(a.properties[1].monotonicity->epsilon_lb == 0.0);
}

TEST_CASE("fault injection: every 10th request fails") {
  auto p = small_plan(200);
  auto counter = std::make_shared<std::atomic<int>>(0);
  auto factory = in_process_endpoint([counter](const Request& r) -> std::string {
    if (++*counter % 10 == 0) throw std::runtime_error("injected");
    return std::to_string(oracles::parity(r.prompt));
  });
  ExecuteOptions opt;
  opt.max_in_flight = 4;
  const auto run = execute(p, factory, opt);
  CHECK(run.record.dispatched == 1000);
  CHECK(run.record.unscored == 100);
  CHECK(run.record.scored + run.record.unscored == run.record.dispatched);
  int errors = 0;
  for (const auto& s : run.samples) errors += s.error.has_value();
  CHECK(errors == 100);
  const auto a = analyze(run);
  CHECK(a.unscored == 100);
  CHECK(a.properties.front().overall.mean == doctest::Approx(0.9));
}

TEST_CASE("unscorable output counts as wrong") {
  auto p = small_plan(20);
  const auto run = execute(p, oracle("always:maybe", p));
  CHECK(run.record.unscored == 100);
  const auto a = analyze(run);
  CHECK(a.properties.front().overall.mean == 0.0);
  for (const auto& s : run.samples) CHECK(s.unscorable());
}

TEST_CASE("all requests failing raises an endpoint error") {
  auto p = small_plan(5);
  auto factory = [] {
    struct Dead final : ModelEndpoint {
      Reply query(const Request&) override { return Reply::fail("down", true); }
    };
    return std::unique_ptr<ModelEndpoint>(new Dead);
  };
  CHECK_THROWS_AS(execute(p, factory), EndpointError);
}

TEST_CASE("repeats share one id") {
  auto p = small_plan(10);
  p.repeats = 5;
  const auto run = execute(p, oracle("constant:0.5", p));
  std::map<std::string, std::set<int>> by_id;
  for (const auto& s : run.samples) by_id[s.id].insert(s.repeat);
  CHECK(by_id.size() == 50);
  for (const auto& [id, reps] : by_id) CHECK(reps == std::set<int>{0, 1, 2, 3, 4});
}

TEST_CASE("sample logs do not depend on concurrency") {
  auto p = small_plan(300, 8, 20);
  std::string first;
  for (int k : {1, 16, 3}) {
    ExecuteOptions opt;
    opt.max_in_flight = k;
    std::ostringstream log;
    opt.log = &log;
    const auto run = execute(p, oracle("linear:1,-0.02,0.5", p, 11), opt);
    const auto lines = sample_log_lines(run.samples);
    if (first.empty()) first = lines;
    CHECK(lines == first);
    CHECK(log.str().find(lines) != std::string::npos);
  }
}

TEST_CASE("analysis is a pure function of the persisted log") {
  auto p = small_plan(100);
  p.properties = default_properties();
  std::ostringstream log;
  ExecuteOptions opt;
  opt.log = &log;
  opt.max_in_flight = 8;
  const auto run = execute(p, oracle("staircase:10,0.95,0.7", p), opt);
  std::istringstream in(log.str());
  const auto back = read_run_log(in);
  CHECK(back.samples.size() == run.samples.size());
  CHECK(sample_log_lines(back.samples) == sample_log_lines(run.samples));
  CHECK(back.record.seed == run.record.seed);
  CHECK(back.record.plan_digest == run.record.plan_digest);
  const auto a = analyze(run).to_json().dump();
  CHECK(analyze(back).to_json().dump() == a);
  CHECK(analyze(back).to_json().dump() == a);

  std::istringstream junk("not a log\n");
  CHECK_THROWS(read_run_log(junk));
}

TEST_CASE("planted non-monotone fixture") {
  // Bucket means 0.800, 0.803, 0.790, 0.7925 with weights 0.1..0.4. The
  // weighted-L1 projection pools (1,2) at 0.803 and (3,4) at 0.7925:
  // 0.1 * 0.003 + 0.3 * 0.0025 = 0.00105.
  auto run = synthetic_run({1600, 1606, 1580, 1585}, 2000, {0.1, 0.2, 0.3, 0.4});
  const auto a = analyze(run);
  const auto& pa = a.properties.at(1);
  REQUIRE(pa.monotonicity);
  REQUIRE(pa.monotonicity->feasible);
  CHECK(std::abs(pa.monotonicity->epsilon_lb - 0.00105) <= 1e-9);
  CHECK(pa.buckets[0].lp_solution.value() == doctest::Approx(0.803));
  CHECK(pa.buckets[3].lp_solution.value() == doctest::Approx(0.7925));
}

TEST_CASE("empty bucket is dropped with a warning") {
  auto run = synthetic_run({90, 0, 80}, 100, {});
  std::erase_if(run.samples, [](const TestSample& s) { return s.bucket == 2; });
  const auto a = analyze(run);
  const auto& pa = a.properties.at(1);
  CHECK(pa.buckets.size() == 2);
  bool warned = false;
  for (const auto& w : a.warnings) warned |= w.find("bucket 2") != std::string::npos;
  CHECK(warned);
}

TEST_CASE("higher-order property") {
  auto run = synthetic_run({90, 90}, 100, {});
  property::PropertySpec h;
  h.name = "true-accuracy";
  h.kind = property::Kind::higher_order;
  h.aggregation = property::Aggregation::bounds_composition;
  h.reference_accuracy = 0.95;
  run.plan.properties = {h};
  auto a = analyze(run);
  REQUIRE(a.properties.at(0).bounds);
  CHECK(a.properties[0].bounds->r_lower == doctest::Approx(0.85));
  CHECK(a.properties[0].bounds->r_upper == doctest::Approx(0.95));

  run.plan.properties[0].reference_accuracy.reset();
  a = analyze(run);
  CHECK_FALSE(a.properties.at(0).bounds);
  CHECK_FALSE(a.warnings.empty());
}

TEST_CASE("determinism probe") {
  ExperimentPlan p = small_plan(1, 1, 32);
  const std::vector<std::string> prompts{"0110", "111000111", "1", "0101010101"};
  auto r = probe_determinism(oracle("exact", p), prompts, 10);
  CHECK(r.verdict == DeterminismVerdict::deterministic);

  r = probe_determinism(oracle("constant:0.7", p), prompts, 20);
  CHECK(r.verdict == DeterminismVerdict::nondeterministic);
  bool two = false;
  for (int d : r.distinct_responses) two |= d == 2;
  CHECK(two);

  r = probe_determinism(oracle("exact", p), prompts, 1);
  CHECK(r.verdict == DeterminismVerdict::insufficient_repeats);
}

TEST_CASE("bad oracle specs are config errors") {
  auto p = small_plan(1);
  CHECK_THROWS_AS(oracle("linear:1,2", p), ConfigError);
  CHECK_THROWS_AS(oracle("/no/such/curve.json", p), ConfigError);
  CHECK_THROWS_AS(EndpointConfig::from_uri("ftp://x"), ConfigError);
}
