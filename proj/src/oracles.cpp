#include "telm/oracles.hpp"

#include <algorithm>
#include <stdexcept>

namespace telm::oracles {

int parity(std::string_view bits) {
  if (bits.empty()) throw std::invalid_argument("parity: empty string");
  int acc = 0;
  for (char c : bits) {
    if (c != '0' && c != '1') throw std::invalid_argument("parity: non-binary character");
    acc ^= c - '0';
  }
  return acc;
}

AccuracyCurve::AccuracyCurve(int min_length, std::vector<double> values)
    : min_length_(min_length), values_(std::move(values)) {
  if (min_length_ < 1) throw std::invalid_argument("AccuracyCurve: min_length must be >= 1");
  if (values_.empty()) throw std::invalid_argument("AccuracyCurve: empty table");
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("AccuracyCurve: value outside [0, 1]");
  }
}

AccuracyCurve AccuracyCurve::constant(int min_length, int max_length, double accuracy) {
  if (max_length < min_length) throw std::invalid_argument("AccuracyCurve: empty range");
  return {min_length, std::vector<double>(static_cast<std::size_t>(max_length - min_length + 1), accuracy)};
}

AccuracyCurve AccuracyCurve::linear(int min_length, int max_length, double start, double slope,
                                    double floor) {
  if (max_length < min_length) throw std::invalid_argument("AccuracyCurve: empty range");
  std::vector<double> v;
  for (int n = min_length; n <= max_length; ++n) {
    v.push_back(std::clamp(std::max(floor, start + slope * (n - min_length)), 0.0, 1.0));
  }
  return {min_length, std::move(v)};
}

AccuracyCurve AccuracyCurve::staircase(int min_length, int max_length, int cut, double before,
                                       double after) {
  if (max_length < min_length) throw std::invalid_argument("AccuracyCurve: empty range");
  std::vector<double> v;
  for (int n = min_length; n <= max_length; ++n) v.push_back(n <= cut ? before : after);
  return {min_length, std::move(v)};
}

double AccuracyCurve::at(int length) const {
  if (!covers(length)) {
    throw std::out_of_range("AccuracyCurve: length " + std::to_string(length) +
                            " outside curve range");
  }
  return values_[static_cast<std::size_t>(length - min_length_)];
}

nlohmann::json AccuracyCurve::to_json() const {
  return {{"kind", "table"}, {"min_length", min_length_}, {"values", values_}};
}

AccuracyCurve AccuracyCurve::from_json(const nlohmann::json& j) {
  const std::string kind = j.value("kind", "table");
  const int lo = j.at("min_length").get<int>();
  if (kind == "table") return {lo, j.at("values").get<std::vector<double>>()};
  const int hi = j.at("max_length").get<int>();
  if (kind == "constant") return constant(lo, hi, j.at("accuracy").get<double>());
  if (kind == "linear") {
    return linear(lo, hi, j.at("start").get<double>(), j.at("slope").get<double>(),
                  j.value("floor", 0.0));
  }
  if (kind == "staircase") {
    return staircase(lo, hi, j.at("cut").get<int>(), j.at("before").get<double>(),
                     j.at("after").get<double>());
  }
  throw std::invalid_argument("AccuracyCurve: unknown kind '" + kind + "'");
}

std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double keyed_uniform(std::uint64_t seed, std::string_view prompt, std::uint64_t repeat) {
  const std::uint64_t key = splitmix64(splitmix64(splitmix64(seed) ^ fnv1a64(prompt)) ^ repeat);
  return static_cast<double>(key >> 11) * 0x1.0p-53;
}

std::string noisy_parity_respond(const NoisyParitySpec& spec, std::string_view prompt,
                                 std::uint64_t repeat) {
  const int truth = parity(prompt);
  const double accuracy = spec.curve.at(static_cast<int>(prompt.size()));
  const bool correct = keyed_uniform(spec.seed, prompt, repeat) < accuracy;
  return (correct ? truth : 1 - truth) == 1 ? "1" : "0";
}

double sensitivity_reference(std::string_view bits, const Responder& respond) {
  parity(bits);  // validates
  const std::string base = respond(bits);
  std::string flipped(bits);
  int changed = 0;
  for (std::size_t i = 0; i < flipped.size(); ++i) {
    flipped[i] = flipped[i] == '0' ? '1' : '0';
    if (respond(flipped) != base) ++changed;
    flipped[i] = bits[i];
  }
  return static_cast<double>(changed) / static_cast<double>(bits.size());
}

}  // namespace telm::oracles
