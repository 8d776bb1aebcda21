// telm: plan, run, analyze and report statistical evaluations of black-box
// sequence models.
//
// Exit codes: 0 success, 1 other failure, 2 invalid configuration,
// 3 endpoint failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "telm/harness.hpp"
#include "telm/higher_order.hpp"
#include "telm/monotone_lp.hpp"
#include "telm/report.hpp"
#include "telm/stats.hpp"

namespace {

constexpr int kInvalidConfig = 2;
constexpr int kEndpointFailure = 3;

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw telm::ConfigError("cannot open " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw telm::ConfigError(path + " is not valid JSON");
  return j;
}

telm::Run read_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw telm::ConfigError("cannot open " + path);
  return telm::read_run_log(in);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '-';
  return out;
}

void write_plot_csvs(const telm::Analysis& analysis, const std::string& prefix) {
  for (const auto& p : analysis.properties) {
    if (!p.monotonicity) continue;
    write_text(prefix + slug(p.spec.name) + ".csv", telm::report::emit_plot_csv(p));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Statistical test and evaluation of language models"};
  app.require_subcommand(1);

  // plan
  auto* plan_cmd = app.add_subcommand("plan", "sample sizes for a target half-width and alpha");
  double plan_hw = 0.05;
  double plan_alpha = 0.05;
  int plan_min = 8;
  int plan_max = 45;
  std::int64_t plan_per_bucket = 0;
  std::uint64_t plan_seed = 0;
  std::string plan_out;
  plan_cmd->add_option("--half-width", plan_hw, "confidence interval half-width")->required();
  plan_cmd->add_option("--alpha", plan_alpha, "failure probability")->required();
  plan_cmd->add_option("--min-length", plan_min);
  plan_cmd->add_option("--max-length", plan_max);
  plan_cmd->add_option("--per-bucket", plan_per_bucket, "samples per length (default: required N)");
  plan_cmd->add_option("--seed", plan_seed);
  plan_cmd->add_option("--out", plan_out, "write a stratified parity plan here");

  // run
  auto* run_cmd = app.add_subcommand("run", "execute a plan against an endpoint");
  std::string run_plan;
  std::string run_endpoint;
  std::uint64_t run_seed = 0;
  std::string run_out;
  std::string run_timing;
  int run_in_flight = 0;
  int run_timeout_ms = 0;
  std::optional<std::uint64_t> run_oracle_seed;
  run_cmd->add_option("--plan", run_plan)->required();
  run_cmd->add_option("--endpoint", run_endpoint, "http://host:port | subprocess:CMD | oracle:SPEC");
  auto* seed_opt = run_cmd->add_option("--seed", run_seed, "master seed (overrides the plan)");
  run_cmd->add_option("--out", run_out, "run log (JSONL)")->required();
  run_cmd->add_option("--timing", run_timing, "per-sample latency log (JSONL)");
  run_cmd->add_option("--in-flight", run_in_flight, "max concurrent requests");
  run_cmd->add_option("--timeout-ms", run_timeout_ms, "per-request timeout");
  run_cmd->add_option("--oracle-seed", run_oracle_seed, "noise seed for oracle: endpoints (default: --seed)");

  // analyze
  auto* an_cmd = app.add_subcommand("analyze", "estimates, intervals and monotonicity LP for a run");
  std::string an_run;
  std::string an_out;
  std::string an_csv;
  an_cmd->add_option("--run", an_run)->required();
  an_cmd->add_option("--out", an_out, "analysis JSON (default: stdout)");
  an_cmd->add_option("--csv-prefix", an_csv, "write <prefix><property>.csv plot data");

  // mono
  auto* mono_cmd = app.add_subcommand("mono", "distance to monotonicity from a bucket CSV");
  std::string mono_csv;
  std::string mono_dir = "nonincreasing";
  std::string mono_out;
  mono_cmd->add_option("--csv", mono_csv, "rows index,weight,mean,delta")->required();
  mono_cmd->add_option("--direction", mono_dir);
  mono_cmd->add_option("--out", mono_out, "solution CSV");

  // bounds
  auto* b_cmd = app.add_subcommand("bounds", "true-accuracy bounds under imperfect ground truth");
  double b_p = 0.0;
  double b_q = 0.0;
  double b_phw = 0.0;
  double b_qhw = 0.0;
  b_cmd->add_option("--p", b_p, "agreement with the reference")->required();
  b_cmd->add_option("--q", b_q, "accuracy of the reference")->required();
  b_cmd->add_option("--p-half-width", b_phw, "confidence half-width of p (extension)");
  b_cmd->add_option("--q-half-width", b_qhw, "confidence half-width of q (extension)");

  // report
  auto* r_cmd = app.add_subcommand("report", "render the TEL'M report for a run");
  std::string r_run;
  std::string r_out;
  std::string r_meta;
  std::string r_md;
  std::string r_csv;
  r_cmd->add_option("--run", r_run)->required();
  r_cmd->add_option("--out", r_out, "report JSON")->required();
  r_cmd->add_option("--metadata", r_meta, "report metadata JSON");
  r_cmd->add_option("--markdown", r_md, "markdown rendering (default: <out>.md)");
  r_cmd->add_option("--csv-prefix", r_csv, "write <prefix><property>.csv plot data");

  // probe
  auto* p_cmd = app.add_subcommand("probe", "check whether repeated prompts give identical outputs");
  std::string p_endpoint;
  int p_prompts = 5;
  int p_repeats = 10;
  int p_length = 16;
  std::uint64_t p_seed = 0;
  p_cmd->add_option("--endpoint", p_endpoint)->required();
  p_cmd->add_option("--prompts", p_prompts);
  p_cmd->add_option("--repeats", p_repeats);
  p_cmd->add_option("--length", p_length);
  p_cmd->add_option("--seed", p_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalidConfig;
  }

  try {
    if (plan_cmd->parsed()) {
      nlohmann::ordered_json out;
      out["half_width"] = plan_hw;
      out["alpha"] = plan_alpha;
      out["hoeffding_n"] = telm::stats::required_sample_size(plan_hw, plan_alpha);
      out["chebyshev_n"] = telm::stats::chebyshev_sample_size(plan_hw, plan_alpha);
      const int k = plan_max - plan_min + 1;
      out["buckets"] = k;
      out["simultaneous_confidence"] = telm::stats::simultaneous_confidence(1.0 - plan_alpha, k);
      if (!plan_out.empty()) {
        telm::ExperimentPlan plan;
        plan.name = "parity";
        plan.min_length = plan_min;
        plan.max_length = plan_max;
        plan.sampling = telm::Sampling::stratified;
        plan.per_bucket_samples = plan_per_bucket > 0 ? plan_per_bucket : out["hoeffding_n"].get<std::int64_t>();
        plan.alpha = plan_alpha;
        plan.target_half_width = plan_hw;
        plan.seed = plan_seed;
        plan.properties = telm::default_properties();
        plan.validate();
        write_text(plan_out, plan.to_json().dump(2) + "\n");
      }
      std::cout << out.dump(2) << "\n";
    } else if (run_cmd->parsed()) {
      auto plan = telm::ExperimentPlan::from_json(read_json(run_plan));
      if (seed_opt->count() > 0) plan.seed = run_seed;
      telm::EndpointConfig config;
      if (!run_endpoint.empty()) {
        config = telm::EndpointConfig::from_uri(run_endpoint);
      } else if (plan.endpoint) {
        config = telm::EndpointConfig::from_json(*plan.endpoint);
      } else {
        throw telm::ConfigError("no endpoint: pass --endpoint or set one in the plan");
      }
      if (run_in_flight > 0) config.max_in_flight = run_in_flight;
      if (run_timeout_ms > 0) config.timeout = std::chrono::milliseconds(run_timeout_ms);
      config.validate();
      auto factory = telm::make_endpoint(config, plan, run_oracle_seed.value_or(plan.seed));

      std::ofstream log(run_out, std::ios::binary);
      if (!log) throw std::runtime_error("cannot write " + run_out);
      std::ofstream timing;
      telm::ExecuteOptions opts;
      opts.max_in_flight = config.max_in_flight;
      opts.endpoint_description = config.to_json();
      opts.log = &log;
      if (!run_timing.empty()) {
        timing.open(run_timing, std::ios::binary);
        opts.timing = &timing;
      }
      const auto run = telm::execute(plan, factory, opts);
      std::cerr << "dispatched " << run.record.dispatched << ", scored " << run.record.scored
                << ", unscored " << run.record.unscored << " in " << run.record.elapsed_ms / 1000.0
                << " s\n";
      for (const auto& w : run.record.warnings) std::cerr << "warning: " << w << "\n";
    } else if (an_cmd->parsed()) {
      const auto analysis = telm::analyze(read_run(an_run));
      const std::string text = analysis.to_json().dump(2) + "\n";
      if (an_out.empty()) {
        std::cout << text;
      } else {
        write_text(an_out, text);
      }
      if (!an_csv.empty()) write_plot_csvs(analysis, an_csv);
    } else if (mono_cmd->parsed()) {
      std::ifstream in(mono_csv);
      if (!in) throw telm::ConfigError("cannot open " + mono_csv);
      std::vector<telm::mono::ComplexityBucket> buckets;
      telm::mono::Direction dir;
      try {
        buckets = telm::mono::read_buckets_csv(in);
        dir = telm::mono::parse_direction(mono_dir);
        telm::mono::validate(buckets);
      } catch (const std::invalid_argument& e) {
        throw telm::ConfigError(e.what());
      }
      const auto res = telm::mono::distance_to_monotonicity(buckets, dir);
      nlohmann::ordered_json out;
      out["direction"] = telm::mono::to_string(dir);
      out["feasible"] = res.feasible;
      if (res.feasible) {
        out["distance_lower_bound"] = res.epsilon_lb;
        out["shifts"] = std::vector<double>(res.shifts.data(), res.shifts.data() + res.shifts.size());
        out["adjusted"] = std::vector<double>(res.adjusted.data(), res.adjusted.data() + res.adjusted.size());
      } else if (res.certificate) {
        out["certificate"] = {res.certificate->first, res.certificate->second};
      }
      std::cout << out.dump(2) << "\n";
      if (!mono_out.empty()) {
        std::ofstream csv(mono_out, std::ios::binary);
        telm::mono::write_solution_csv(csv, buckets, res);
      }
    } else if (b_cmd->parsed()) {
      nlohmann::ordered_json out;
      try {
        const auto inflated = telm::higher_order::ci_inflated_bounds(b_p, b_phw, b_q, b_qhw);
        const auto& b = inflated.point;
        out["p"] = b.p;
        out["q"] = b.q;
        out["r_lower"] = b.r_lower;
        out["r_upper"] = b.r_upper;
        out["r_independent"] = b.r_independent;
        if (b_phw > 0.0 || b_qhw > 0.0) {
          out["ci_inflated"] = {{"r_lower", inflated.r_lower}, {"r_upper", inflated.r_upper}};
        }
      } catch (const std::domain_error& e) {
        throw telm::ConfigError(e.what());
      }
      std::cout << out.dump(2) << "\n";
    } else if (r_cmd->parsed()) {
      const auto run = read_run(r_run);
      const auto analysis = telm::analyze(run);
      const nlohmann::json meta = r_meta.empty() ? nlohmann::json::object() : read_json(r_meta);
      const auto rep = telm::report::render_report(run, analysis, meta);
      write_text(r_out, rep.to_json().dump(2) + "\n");
      write_text(r_md.empty() ? r_out + ".md" : r_md, rep.to_markdown());
      if (!r_csv.empty()) write_plot_csvs(analysis, r_csv);
      for (const auto& w : rep.warnings) std::cerr << "warning [" << w.id << "]: " << w.message << "\n";
    } else if (p_cmd->parsed()) {
      telm::ExperimentPlan plan;
      plan.min_length = 1;
      plan.max_length = std::max(1, p_length);
      plan.total_samples = 1;
      const auto config = telm::EndpointConfig::from_uri(p_endpoint);
      auto factory = telm::make_endpoint(config, plan, p_seed);
      std::mt19937_64 rng(p_seed);
      std::vector<std::string> prompts;
      for (int i = 0; i < p_prompts; ++i) {
        std::string s;
        for (int b = 0; b < p_length; ++b) s += (rng() & 1U) ? '1' : '0';
        prompts.push_back(s);
      }
      const auto rep = telm::probe_determinism(factory, prompts, p_repeats);
      nlohmann::ordered_json out;
      out["verdict"] = telm::to_string(rep.verdict);
      out["repeats"] = rep.repeats;
      out["distinct_responses"] = rep.distinct_responses;
      out["transport_errors"] = rep.transport_errors;
      std::cout << out.dump(2) << "\n";
    }
  } catch (const telm::ConfigError& e) {
    std::cerr << "telm: invalid configuration: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const telm::EndpointError& e) {
    std::cerr << "telm: endpoint failure: " << e.what() << "\n";
    return kEndpointFailure;
  } catch (const std::logic_error& e) {
    // invalid_argument, domain_error and friends: bad user input
    std::cerr << "telm: invalid configuration: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const std::exception& e) {
    std::cerr << "telm: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
