#include "telm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace telm {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<double> split_numbers(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
  return out;
}

oracles::AccuracyCurve curve_from_address(const std::string& address, const ExperimentPlan& plan) {
  const int lo = plan.min_length;
  const int hi = plan.max_length;
  const auto colon = address.find(':');
  const std::string kind = address.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : address.substr(colon + 1);
  try {
    if (kind == "exact") return oracles::AccuracyCurve::constant(lo, hi, 1.0);
    if (kind == "constant") return oracles::AccuracyCurve::constant(lo, hi, std::stod(args));
    if (kind == "linear") {
      const auto v = split_numbers(args);
      if (v.size() != 3) throw ConfigError("oracle: linear:<start>,<slope>,<floor>");
      return oracles::AccuracyCurve::linear(lo, hi, v[0], v[1], v[2]);
    }
    if (kind == "staircase") {
      const auto v = split_numbers(args);
      if (v.size() != 3) throw ConfigError("oracle: staircase:<cut>,<before>,<after>");
      return oracles::AccuracyCurve::staircase(lo, hi, static_cast<int>(v[0]), v[1], v[2]);
    }
    std::ifstream in(address);
    if (!in) throw ConfigError("oracle: unknown spec or unreadable file '" + address + "'");
    return oracles::AccuracyCurve::from_json(nlohmann::json::parse(in));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("oracle: ") + e.what());
  }
}

}  // namespace

Scorer make_scorer(const std::string& name) {
  if (name == "parity") {
    return [](std::string_view prompt, std::string_view output) -> std::optional<double> {
      const auto out = trim(output);
      if (out != "0" && out != "1") return std::nullopt;
      return (out[0] - '0') == oracles::parity(prompt) ? 1.0 : 0.0;
    };
  }
  if (name == "exact-match") {
    return [](std::string_view prompt, std::string_view output) -> std::optional<double> {
      const std::string expected = oracles::parity(prompt) == 1 ? "1" : "0";
      return trim(output) == expected ? 1.0 : 0.0;
    };
  }
  throw ConfigError("unknown scorer '" + name + "'");
}

nlohmann::ordered_json TestSample::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = "sample";
  j["id"] = id;
  j["repeat"] = repeat;
  j["bucket"] = bucket;
  j["prompt"] = prompt;
  if (response) j["response"] = *response;
  if (error) j["error"] = *error;
  if (score) j["score"] = *score;
  if (unscorable()) j["unscorable"] = true;
  return j;
}

TestSample TestSample::from_json(const nlohmann::json& j) {
  TestSample s;
  s.id = j.at("id").get<std::string>();
  s.repeat = j.at("repeat").get<int>();
  s.bucket = j.at("bucket").get<int>();
  s.prompt = j.at("prompt").get<std::string>();
  if (j.contains("response")) s.response = j["response"].get<std::string>();
  if (j.contains("error")) s.error = j["error"].get<std::string>();
  if (j.contains("score")) s.score = j["score"].get<double>();
  return s;
}

std::string sample_log_lines(const std::vector<TestSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += s.to_json().dump();
    out += '\n';
  }
  return out;
}

Run execute(const ExperimentPlan& plan, const EndpointFactory& endpoint,
            const ExecuteOptions& options) {
  plan.validate();
  if (options.max_in_flight < 1) throw ConfigError("execute: max_in_flight must be >= 1");

  Run run;
  run.plan = plan;
  run.record.plan_digest = plan.digest();
  run.record.seed = plan.seed;
  run.record.model = plan.model;
  run.record.endpoint = options.endpoint_description;
  run.record.in_flight = options.max_in_flight;
  run.record.started_at = utc_now();
  run.record.warnings = plan_warnings(plan);

  const auto prompts = sample_dataset(plan);
  const std::size_t total = prompts.size() * static_cast<std::size_t>(plan.repeats);
  run.samples.resize(total);
  for (std::size_t j = 0; j < total; ++j) {
    const auto& p = prompts[j / static_cast<std::size_t>(plan.repeats)];
    auto& s = run.samples[j];
    s.id = p.id;
    s.prompt = p.text;
    s.bucket = p.bucket;
    s.repeat = static_cast<int>(j % static_cast<std::size_t>(plan.repeats));
  }

  if (options.log) {
    nlohmann::ordered_json head;
    head["kind"] = "plan";
    head["plan"] = plan.to_json();
    *options.log << head.dump() << '\n';
    nlohmann::ordered_json rec;
    rec["kind"] = "run";
    rec["plan_digest"] = run.record.plan_digest;
    rec["seed"] = *run.record.seed;
    rec["model"] = nlohmann::ordered_json::parse(run.record.model.to_json().dump());
    rec["endpoint"] = nlohmann::ordered_json::parse(run.record.endpoint.dump());
    rec["in_flight"] = run.record.in_flight;
    rec["started_at"] = run.record.started_at;
    rec["warnings"] = run.record.warnings;
    *options.log << rec.dump() << '\n';
    options.log->flush();
  }

  endpoint()->check();

  const Scorer scorer = make_scorer(plan.scorer());
  std::vector<char> done(total, 0);
  std::vector<char> transport_failed(total, 0);
  std::size_t write_pos = 0;
  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  const auto t0 = std::chrono::steady_clock::now();

  auto flush_ready = [&] {
    while (write_pos < total && done[write_pos]) {
      const auto& s = run.samples[write_pos];
      if (options.log) *options.log << s.to_json().dump() << '\n';
      if (options.timing) {
        nlohmann::ordered_json t;
        t["id"] = s.id;
        t["repeat"] = s.repeat;
        t["latency_ms"] = s.latency_ms;
        *options.timing << t.dump() << '\n';
      }
      ++write_pos;
    }
    if (options.log) options.log->flush();
  };

  auto worker = [&] {
    auto ep = endpoint();
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= total) break;
      auto& s = run.samples[j];
      const auto start = std::chrono::steady_clock::now();
      const Reply reply = ep->query({s.id, s.prompt, s.repeat});
      s.latency_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      s.response = reply.output;
      s.error = reply.error;
      if (reply.output) {
        try {
          s.score = scorer(s.prompt, *reply.output);
        } catch (const std::exception&) {
          s.score.reset();
        }
      }
      std::lock_guard lock(log_mutex);
      transport_failed[j] = reply.transport_failure ? 1 : 0;
      done[j] = 1;
      flush_ready();
    }
  };

  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(options.max_in_flight),
                                             std::max<std::size_t>(total, 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  run.record.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  run.record.finished_at = utc_now();
  run.record.dispatched = static_cast<std::int64_t>(total);
  for (const auto& s : run.samples) {
    if (s.score) {
      ++run.record.scored;
    } else {
      ++run.record.unscored;
    }
    if (s.error) ++run.record.errors;
  }

  if (options.log) {
    nlohmann::ordered_json sum;
    sum["kind"] = "summary";
    sum["finished_at"] = run.record.finished_at;
    sum["elapsed_ms"] = run.record.elapsed_ms;
    sum["dispatched"] = run.record.dispatched;
    sum["scored"] = run.record.scored;
    sum["unscored"] = run.record.unscored;
    sum["errors"] = run.record.errors;
    *options.log << sum.dump() << '\n';
    options.log->flush();
  }

  if (total > 0 && std::all_of(transport_failed.begin(), transport_failed.end(),
                               [](char c) { return c != 0; })) {
    throw EndpointError("every request failed at the transport level");
  }
  return run;
}

Run read_run_log(std::istream& in) {
  Run run;
  bool have_plan = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw ConfigError("run log line " + std::to_string(line_no) + ": not a JSON object");
    }
    const std::string kind = j.value("kind", std::string());
    if (kind == "plan") {
      run.plan = ExperimentPlan::from_json(j.at("plan"));
      have_plan = true;
    } else if (kind == "run") {
      run.record.plan_digest = j.value("plan_digest", std::string());
      if (j.contains("seed") && !j["seed"].is_null()) run.record.seed = j["seed"].get<std::uint64_t>();
      if (j.contains("model")) run.record.model = ModelMetadata::from_json(j["model"]);
      run.record.endpoint = j.value("endpoint", nlohmann::json::object());
      run.record.in_flight = j.value("in_flight", 1);
      run.record.started_at = j.value("started_at", std::string());
      if (j.contains("warnings")) run.record.warnings = j["warnings"].get<std::vector<std::string>>();
    } else if (kind == "sample") {
      run.samples.push_back(TestSample::from_json(j));
    } else if (kind == "summary") {
      run.record.finished_at = j.value("finished_at", std::string());
      run.record.elapsed_ms = j.value("elapsed_ms", 0.0);
    } else {
      throw ConfigError("run log line " + std::to_string(line_no) + ": unknown kind '" + kind + "'");
    }
  }
  if (!have_plan) throw ConfigError("run log: missing plan header");
  run.record.dispatched = static_cast<std::int64_t>(run.samples.size());
  run.record.scored = 0;
  run.record.unscored = 0;
  run.record.errors = 0;
  for (const auto& s : run.samples) {
    if (s.score) {
      ++run.record.scored;
    } else {
      ++run.record.unscored;
    }
    if (s.error) ++run.record.errors;
  }
  return run;
}

EndpointFactory make_endpoint(const EndpointConfig& config, const ExperimentPlan& plan,
                              std::uint64_t oracle_seed) {
  config.validate();
  switch (config.transport) {
    case Transport::subprocess: return subprocess_endpoint(config.address, config.timeout);
    case Transport::http: return http_endpoint(config.address, config.timeout);
    case Transport::in_process: break;
  }
  if (config.address.rfind("always:", 0) == 0) {
    const std::string fixed = config.address.substr(7);
    return in_process_endpoint([fixed](const Request&) { return fixed; });
  }
  oracles::NoisyParitySpec spec{curve_from_address(config.address, plan), oracle_seed};
  return in_process_endpoint([spec](const Request& r) {
    return oracles::noisy_parity_respond(spec, r.prompt, static_cast<std::uint64_t>(r.repeat));
  });
}

const char* to_string(DeterminismVerdict v) {
  switch (v) {
    case DeterminismVerdict::deterministic: return "deterministic";
    case DeterminismVerdict::nondeterministic: return "nondeterministic";
    case DeterminismVerdict::insufficient_repeats: return "insufficient repeats";
  }
  return "unknown";
}

DeterminismReport probe_determinism(const EndpointFactory& endpoint,
                                    const std::vector<std::string>& prompts, int repeats) {
  if (prompts.empty() || repeats < 1) {
    throw std::invalid_argument("probe_determinism: need >= 1 prompt and >= 1 repeat");
  }
  DeterminismReport report;
  report.repeats = repeats;
  auto ep = endpoint();
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    std::set<std::string> seen;
    for (int r = 0; r < repeats; ++r) {
      const Reply reply = ep->query({"probe" + std::to_string(i), prompts[i], r});
      if (reply.output) {
        seen.insert(*reply.output);
      } else {
        ++report.transport_errors;
      }
    }
    report.distinct_responses.push_back(static_cast<int>(seen.size()));
  }
  const auto& d = report.distinct_responses;
  if (std::any_of(d.begin(), d.end(), [](int c) { return c > 1; })) {
    report.verdict = DeterminismVerdict::nondeterministic;
  } else if (repeats < 2 || std::any_of(d.begin(), d.end(), [](int c) { return c == 0; })) {
    report.verdict = DeterminismVerdict::insufficient_repeats;
  } else {
    report.verdict = DeterminismVerdict::deterministic;
  }
  return report;
}

std::vector<property::PropertySpec> default_properties() {
  property::PropertySpec simple;
  simple.name = "accuracy";
  simple.kind = property::Kind::simple;
  simple.aggregation = property::Aggregation::average;
  property::PropertySpec mono;
  mono.name = "accuracy-monotonicity";
  mono.kind = property::Kind::compound;
  mono.aggregation = property::Aggregation::lp_monotonicity;
  return {simple, mono};
}

Analysis analyze(const Run& run) {
  const auto& plan = run.plan;
  Analysis out;
  out.plan_digest = run.record.plan_digest.empty() ? plan.digest() : run.record.plan_digest;
  out.alpha = plan.alpha;

  std::map<int, std::vector<double>> by_bucket;
  std::map<int, std::int64_t> unscored_by_bucket;
  std::vector<double> all;
  all.reserve(run.samples.size());
  for (const auto& s : run.samples) {
    const double v = s.score.value_or(0.0);
    by_bucket[s.bucket].push_back(v);
    all.push_back(v);
    if (s.score) {
      ++out.scored;
    } else {
      ++out.unscored;
      ++unscored_by_bucket[s.bucket];
    }
  }
  out.dispatched = static_cast<std::int64_t>(run.samples.size());
  if (all.empty()) {
    out.warnings.push_back("run contains no samples");
    return out;
  }
  if (out.unscored > 0) {
    out.warnings.push_back(std::to_string(out.unscored) +
                           " samples could not be scored and count as incorrect");
  }

  const auto specs = plan.properties.empty() ? default_properties() : plan.properties;
  for (const auto& spec : specs) {
    PropertyAnalysis pa;
    pa.spec = spec;
    pa.overall = stats::estimate_property(all, plan.alpha);
    pa.simple_distance = property::simple_distance(pa.overall);

    if (spec.kind == property::Kind::compound) {
      std::vector<mono::ComplexityBucket> buckets;
      double weight_total = 0.0;
      for (int len = plan.min_length; len <= plan.max_length; ++len) {
        const auto it = by_bucket.find(len);
        if (it == by_bucket.end() || it->second.empty()) {
          out.warnings.push_back("bucket " + std::to_string(len) +
                                 " has no samples; excluded from the monotonicity LP");
          continue;
        }
        BucketRow row;
        row.length = len;
        row.estimate = stats::estimate_property(it->second, plan.alpha);
        row.estimate.bucket_label = len;
        row.unscored = unscored_by_bucket[len];
        row.weight = plan.weights.empty()
                         ? 1.0
                         : plan.weights[static_cast<std::size_t>(len - plan.min_length)];
        weight_total += row.weight;
        pa.buckets.push_back(row);
      }
      if (!pa.buckets.empty() && weight_total > 0.0) {
        for (auto& row : pa.buckets) {
          row.weight /= weight_total;
          buckets.push_back({row.length, row.weight, row.estimate.mean, row.estimate.half_width});
        }
        const auto result =
            mono::distance_to_monotonicity(buckets, mono::parse_direction(spec.direction));
        for (std::size_t i = 0; i < pa.buckets.size() && result.feasible; ++i) {
          pa.buckets[i].shift = result.shifts(static_cast<Eigen::Index>(i));
          pa.buckets[i].lp_solution = result.adjusted(static_cast<Eigen::Index>(i));
        }
        if (!result.feasible) {
          out.warnings.push_back(
              "no monotone sequence fits inside the per-bucket confidence intervals");
        }
        pa.monotonicity = result;
        pa.simultaneous_level = stats::simultaneous_confidence(
            1.0 - plan.alpha, static_cast<std::int64_t>(pa.buckets.size()));
      } else if (!pa.buckets.empty()) {
        out.warnings.push_back("all bucket weights are zero; monotonicity LP skipped");
      }
    } else if (spec.kind == property::Kind::higher_order) {
      if (!spec.reference_accuracy) {
        out.warnings.push_back("property '" + spec.name +
                               "': reference accuracy q not reported; true-accuracy bounds unavailable");
      } else if (pa.overall.mean < 0.5) {
        out.warnings.push_back("property '" + spec.name +
                               "': measured agreement below 0.5; flip labels before bounding");
      } else {
        pa.bounds = higher_order::true_accuracy_bounds(pa.overall.mean, *spec.reference_accuracy);
        pa.inflated_bounds = higher_order::ci_inflated_bounds(
            pa.overall.mean, pa.overall.half_width, *spec.reference_accuracy, 0.0);
      }
    }
    out.properties.push_back(std::move(pa));
  }
  return out;
}

namespace {

nlohmann::ordered_json estimate_json(const stats::PropertyEstimate& e) {
  nlohmann::ordered_json j;
  j["n"] = e.n;
  j["mean"] = e.mean;
  j["half_width"] = e.half_width;
  j["ci_lower"] = e.interval.lower;
  j["ci_upper"] = e.interval.upper;
  j["level"] = e.interval.level;
  return j;
}

}  // namespace

nlohmann::ordered_json Analysis::to_json() const {
  nlohmann::ordered_json j;
  j["plan_digest"] = plan_digest;
  j["alpha"] = alpha;
  j["dispatched"] = dispatched;
  j["scored"] = scored;
  j["unscored"] = unscored;
  auto props = nlohmann::ordered_json::array();
  for (const auto& pa : properties) {
    nlohmann::ordered_json p;
    p["name"] = pa.spec.name;
    p["kind"] = property::to_string(pa.spec.kind);
    p["aggregation"] = property::to_string(pa.spec.aggregation);
    p["overall"] = estimate_json(pa.overall);
    p["simple_distance_lower_bound"] = pa.simple_distance;
    if (pa.monotonicity) {
      const auto& m = *pa.monotonicity;
      p["direction"] = pa.spec.direction;
      p["feasible"] = m.feasible;
      p["distance_lower_bound"] = m.feasible ? nlohmann::ordered_json(m.epsilon_lb)
                                             : nlohmann::ordered_json(nullptr);
      if (m.certificate) p["certificate"] = {m.certificate->first, m.certificate->second};
      p["simultaneous_confidence"] = pa.simultaneous_level;
      auto rows = nlohmann::ordered_json::array();
      for (const auto& r : pa.buckets) {
        nlohmann::ordered_json row = estimate_json(r.estimate);
        row["length"] = r.length;
        row["weight"] = r.weight;
        row["unscored"] = r.unscored;
        row["shift"] = r.shift;
        row["lp_solution"] =
            r.lp_solution ? nlohmann::ordered_json(*r.lp_solution) : nlohmann::ordered_json(nullptr);
        rows.push_back(row);
      }
      p["buckets"] = rows;
    }
    if (pa.spec.kind == property::Kind::higher_order) {
      p["reference_accuracy"] = pa.spec.reference_accuracy
                                    ? nlohmann::ordered_json(*pa.spec.reference_accuracy)
                                    : nlohmann::ordered_json(nullptr);
      if (pa.bounds) {
        p["true_accuracy"] = {{"lower", pa.bounds->r_lower},
                              {"upper", pa.bounds->r_upper},
                              {"independent", pa.bounds->r_independent}};
      }
      if (pa.inflated_bounds) {
        p["true_accuracy_ci_inflated"] = {{"lower", pa.inflated_bounds->r_lower},
                                          {"upper", pa.inflated_bounds->r_upper}};
      }
    }
    props.push_back(p);
  }
  j["properties"] = props;
  j["warnings"] = warnings;
  return j;
}

}  // namespace telm
