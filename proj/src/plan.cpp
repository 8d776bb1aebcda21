#include "telm/plan.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "telm/oracles.hpp"
#include "telm/stats.hpp"

namespace telm {

namespace {

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

std::string random_bits(std::mt19937_64& rng, int length) {
  std::string s(static_cast<std::size_t>(length), '0');
  std::uint64_t word = 0;
  int left = 0;
  for (auto& c : s) {
    if (left == 0) {
      word = rng();
      left = 64;
    }
    c = static_cast<char>('0' + (word & 1U));
    word >>= 1;
    --left;
  }
  return s;
}

std::string prompt_id(std::int64_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "p%07lld", static_cast<long long>(i));
  return buf;
}

}  // namespace

const char* to_string(LmType t) {
  switch (t) {
    case LmType::white_box: return "white";
    case LmType::gray_box: return "gray";
    case LmType::black_box: return "black";
    case LmType::unknown: return "unknown";
  }
  return "unknown";
}

LmType parse_lm_type(const std::string& s) {
  if (s == "white") return LmType::white_box;
  if (s == "gray" || s == "grey") return LmType::gray_box;
  if (s == "black") return LmType::black_box;
  if (s == "unknown") return LmType::unknown;
  throw ConfigError("unknown LM type '" + s + "' (expected white, gray or black)");
}

nlohmann::json ModelMetadata::to_json() const {
  nlohmann::json j = {{"name", name},
                      {"version", version},
                      {"type", to_string(type)},
                      {"context_policy", context_policy}};
  j["temperature"] = temperature ? nlohmann::json(*temperature) : nlohmann::json(nullptr);
  j["static_model"] = static_model ? nlohmann::json(*static_model) : nlohmann::json(nullptr);
  j["benchmarks_in_training"] =
      benchmarks_in_training ? nlohmann::json(*benchmarks_in_training) : nlohmann::json(nullptr);
  return j;
}

ModelMetadata ModelMetadata::from_json(const nlohmann::json& j) {
  ModelMetadata m;
  m.name = j.value("name", m.name);
  m.version = j.value("version", m.version);
  m.type = parse_lm_type(j.value("type", std::string("unknown")));
  m.context_policy = j.value("context_policy", m.context_policy);
  if (j.contains("temperature") && !j["temperature"].is_null()) {
    m.temperature = j["temperature"].get<double>();
  }
  if (j.contains("static_model") && !j["static_model"].is_null()) {
    m.static_model = j["static_model"].get<bool>();
  }
  if (j.contains("benchmarks_in_training") && !j["benchmarks_in_training"].is_null()) {
    m.benchmarks_in_training = j["benchmarks_in_training"].get<bool>();
  }
  return m;
}

std::int64_t ExperimentPlan::prompt_count() const {
  return sampling == Sampling::stratified ? per_bucket_samples * num_buckets() : total_samples;
}

const std::string& ExperimentPlan::scorer() const {
  static const std::string fallback = "parity";
  return properties.empty() ? fallback : properties.front().scorer;
}

void ExperimentPlan::validate() const {
  if (min_length < 1 || max_length < min_length) {
    throw ConfigError("plan: need 1 <= min_length <= max_length");
  }
  if (max_length > 4096) throw ConfigError("plan: max_length too large");
  if (sampling == Sampling::uniform_length && total_samples < 1) {
    throw ConfigError("plan: total_samples must be >= 1");
  }
  if (sampling == Sampling::stratified && per_bucket_samples < 1) {
    throw ConfigError("plan: per_bucket_samples must be >= 1");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("plan: alpha must lie in (0, 1)");
  if (target_half_width && !(*target_half_width > 0.0 && *target_half_width < 1.0)) {
    throw ConfigError("plan: target_half_width must lie in (0, 1)");
  }
  if (repeats < 1) throw ConfigError("plan: repeats must be >= 1");
  if (!weights.empty()) {
    if (static_cast<int>(weights.size()) != num_buckets()) {
      throw ConfigError("plan: need one weight per length");
    }
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw ConfigError("plan: negative weight");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("plan: weights must sum to 1");
  }
  for (const auto& p : properties) {
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (p.scorer != scorer()) throw ConfigError("plan: all properties must share one scorer");
  }
  if (scorer() != "parity" && scorer() != "exact-match") {
    throw ConfigError("plan: unknown scorer '" + scorer() + "'");
  }
}

nlohmann::ordered_json ExperimentPlan::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["distribution"] = {{"kind", "binary-strings"},
                       {"min_length", min_length},
                       {"max_length", max_length}};
  j["sampling"] = sampling == Sampling::stratified ? "stratified" : "uniform-length";
  if (sampling == Sampling::stratified) {
    j["per_bucket_samples"] = per_bucket_samples;
  } else {
    j["total_samples"] = total_samples;
  }
  j["alpha"] = alpha;
  if (target_half_width) j["target_half_width"] = *target_half_width;
  j["repeats"] = repeats;
  j["seed"] = seed;
  if (!weights.empty()) j["weights"] = weights;
  auto props = nlohmann::ordered_json::array();
  for (const auto& p : properties) props.push_back(nlohmann::ordered_json::parse(p.to_json().dump()));
  j["properties"] = props;
  if (endpoint) j["endpoint"] = nlohmann::ordered_json::parse(endpoint->dump());
  j["model"] = nlohmann::ordered_json::parse(model.to_json().dump());
  return j;
}

ExperimentPlan ExperimentPlan::from_json(const nlohmann::json& j) {
  ExperimentPlan p;
  try {
    p.name = j.value("name", p.name);
    if (j.contains("distribution")) {
      const auto& d = j.at("distribution");
      const std::string kind = d.value("kind", std::string("binary-strings"));
      if (kind != "binary-strings") throw ConfigError("plan: unsupported distribution '" + kind + "'");
      p.min_length = d.at("min_length").get<int>();
      p.max_length = d.at("max_length").get<int>();
    }
    const std::string sampling = j.value("sampling", std::string("uniform-length"));
    if (sampling == "stratified") {
      p.sampling = Sampling::stratified;
      p.per_bucket_samples = j.at("per_bucket_samples").get<std::int64_t>();
    } else if (sampling == "uniform-length") {
      p.sampling = Sampling::uniform_length;
      p.total_samples = j.at("total_samples").get<std::int64_t>();
    } else {
      throw ConfigError("plan: unknown sampling '" + sampling + "'");
    }
    p.alpha = j.value("alpha", p.alpha);
    if (j.contains("target_half_width")) p.target_half_width = j["target_half_width"].get<double>();
    p.repeats = j.value("repeats", 1);
    p.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("weights")) p.weights = j["weights"].get<std::vector<double>>();
    if (j.contains("properties")) {
      for (const auto& pj : j["properties"]) p.properties.push_back(property::PropertySpec::from_json(pj));
    }
    if (j.contains("endpoint")) p.endpoint = j["endpoint"];
    if (j.contains("model")) p.model = ModelMetadata::from_json(j["model"]);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("plan: ") + e.what());
  }
  p.validate();
  return p;
}

std::string ExperimentPlan::digest() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                static_cast<unsigned long long>(oracles::fnv1a64(to_json().dump())));
  return buf;
}

std::vector<std::string> plan_warnings(const ExperimentPlan& plan) {
  std::vector<std::string> out;
  if (!plan.target_half_width) return out;
  const auto need = stats::required_sample_size(*plan.target_half_width, plan.alpha);
  const bool compound = std::any_of(plan.properties.begin(), plan.properties.end(), [](const auto& p) {
    return p.kind == property::Kind::compound;
  });
  // Compound properties need the requirement met in every bucket.
  const std::int64_t have =
      compound ? (plan.sampling == Sampling::stratified
                      ? plan.per_bucket_samples
                      : plan.total_samples / plan.num_buckets())
               : plan.prompt_count();
  if (have < need) {
    out.push_back("plan provides " + std::to_string(have) + " samples" +
                  (compound ? " per bucket" : "") + " but half-width " +
                  std::to_string(*plan.target_half_width) + " at alpha " +
                  std::to_string(plan.alpha) + " requires " + std::to_string(need));
  }
  return out;
}

std::vector<Prompt> sample_dataset(const ExperimentPlan& plan) {
  plan.validate();
  std::mt19937_64 rng(plan.seed);
  std::vector<Prompt> out;
  out.reserve(static_cast<std::size_t>(plan.prompt_count()));
  if (plan.sampling == Sampling::stratified) {
    for (int len = plan.min_length; len <= plan.max_length; ++len) {
      for (std::int64_t k = 0; k < plan.per_bucket_samples; ++k) {
        const auto i = static_cast<std::int64_t>(out.size());
        out.push_back({prompt_id(i), random_bits(rng, len), len});
      }
    }
  } else {
    const auto span = static_cast<std::uint64_t>(plan.num_buckets());
    for (std::int64_t i = 0; i < plan.total_samples; ++i) {
      const int len = plan.min_length + static_cast<int>(uniform_below(rng, span));
      out.push_back({prompt_id(i), random_bits(rng, len), len});
    }
  }
  return out;
}

}  // namespace telm
