#ifndef TELM_ORACLES_HPP
#define TELM_ORACLES_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace telm::oracles {

/// Sum of bits mod 2. Throws std::invalid_argument on an empty string or a
/// character other than '0' / '1'.
int parity(std::string_view bits);

// Probability of a correct answer per prompt length, tabulated over
// [min_length, max_length].
class AccuracyCurve {
 public:
  AccuracyCurve() = default;
  AccuracyCurve(int min_length, std::vector<double> values);

  static AccuracyCurve constant(int min_length, int max_length, double accuracy);
  // max(floor, start + slope * (n - min_length)), clipped to [0, 1].
  static AccuracyCurve linear(int min_length, int max_length, double start, double slope,
                              double floor);
  // `before` for n <= cut, `after` beyond.
  static AccuracyCurve staircase(int min_length, int max_length, int cut, double before,
                                 double after);

  int min_length() const { return min_length_; }
  int max_length() const { return min_length_ + static_cast<int>(values_.size()) - 1; }
  bool covers(int length) const { return length >= min_length() && length <= max_length(); }
  double at(int length) const;
  const std::vector<double>& values() const { return values_; }

  nlohmann::json to_json() const;
  // Accepts {"kind": "constant"|"linear"|"staircase"|"table", ...}.
  static AccuracyCurve from_json(const nlohmann::json& j);

 private:
  int min_length_ = 1;
  std::vector<double> values_;
};

struct NoisyParitySpec {
  AccuracyCurve curve;
  std::uint64_t seed = 0;
};

// Counter-based generator shared with external responders:
//   mix(x)  = splitmix64 finalizer of x + 0x9e3779b97f4a7c15
//   key     = mix(mix(mix(seed) ^ fnv1a64(prompt)) ^ repeat)
//   uniform = (key >> 11) * 2^-53
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);
double keyed_uniform(std::uint64_t seed, std::string_view prompt, std::uint64_t repeat);

/// "0" or "1": the parity with probability curve.at(|prompt|), flipped
/// otherwise. Pure in (spec.seed, prompt, repeat). Throws std::out_of_range
/// when the length lies outside the curve.
std::string noisy_parity_respond(const NoisyParitySpec& spec, std::string_view prompt,
                                 std::uint64_t repeat = 0);

using Responder = std::function<std::string(std::string_view prompt)>;

// Fraction of single-bit flips of `bits` that change the responder's output.
double sensitivity_reference(std::string_view bits, const Responder& respond);

}  // namespace telm::oracles

#endif  // TELM_ORACLES_HPP
