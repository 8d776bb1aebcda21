#include "telm/monotone_lp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace telm::mono {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

template <class T>
bool parse_full(const std::string& s, T& value) {
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  return ec == std::errc() && ptr == end && !s.empty();
}

constexpr double kTol = 1e-9;

bool chain_violated(const ComplexityBucket& earlier, const ComplexityBucket& later,
                    Direction direction) {
  if (direction == Direction::nonincreasing) {
    return earlier.mean + earlier.delta < later.mean - later.delta - kTol;
  }
  return earlier.mean - earlier.delta > later.mean + later.delta + kTol;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

Direction parse_direction(const std::string& s) {
  if (s == "nonincreasing" || s == "decreasing") return Direction::nonincreasing;
  if (s == "nondecreasing" || s == "increasing") return Direction::nondecreasing;
  throw std::invalid_argument("unknown monotonicity direction '" + s + "'");
}

const char* to_string(Direction d) {
  return d == Direction::nonincreasing ? "nonincreasing" : "nondecreasing";
}

void validate(const std::vector<ComplexityBucket>& buckets) {
  if (buckets.empty()) throw std::invalid_argument("monotonicity: need at least one bucket");
  double total = 0.0;
  for (const auto& b : buckets) {
    if (!(b.weight >= 0.0)) throw std::invalid_argument("monotonicity: negative weight");
    if (!(b.delta >= 0.0)) throw std::invalid_argument("monotonicity: negative delta");
    if (!(b.mean >= 0.0 && b.mean <= 1.0)) {
      throw std::invalid_argument("monotonicity: mean outside [0, 1]");
    }
    total += b.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("monotonicity: weights must sum to 1");
  }
}

FeasibilityReport check_feasibility(const std::vector<ComplexityBucket>& buckets,
                                    Direction direction) {
  FeasibilityReport report;
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    for (std::size_t j = i + 1; j < buckets.size(); ++j) {
      if (chain_violated(buckets[i], buckets[j], direction)) {
        report.feasible = false;
        report.certificate = std::make_pair(buckets[i].index, buckets[j].index);
        return report;
      }
    }
  }
  return report;
}

lp::LinearProgram<double> build_program(const std::vector<ComplexityBucket>& buckets,
                                        Direction direction) {
  const auto k = static_cast<Eigen::Index>(buckets.size());
  const Eigen::Index chain_rows = k - 1;
  lp::LinearProgram<double> prog(2 * k, chain_rows + 2 * k);
  auto s = [](Eigen::Index i) { return i; };
  auto r = [k](Eigen::Index i) { return k + i; };
  const double sign = direction == Direction::nonincreasing ? 1.0 : -1.0;

  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& b = buckets[static_cast<std::size_t>(i)];
    prog.cost(s(i)) = b.weight;
    prog.cost(r(i)) = b.weight;
  }
  // nonincreasing: (mu_i + s_i - r_i) >= (mu_{i+1} + s_{i+1} - r_{i+1})
  for (Eigen::Index i = 0; i < chain_rows; ++i) {
    const auto& cur = buckets[static_cast<std::size_t>(i)];
    const auto& next = buckets[static_cast<std::size_t>(i + 1)];
    prog.add(i, s(i), -sign);
    prog.add(i, r(i), sign);
    prog.add(i, s(i + 1), sign);
    prog.add(i, r(i + 1), -sign);
    prog.rhs(i) = sign * (cur.mean - next.mean);
  }
  // -delta_i <= s_i - r_i <= delta_i
  for (Eigen::Index i = 0; i < k; ++i) {
    const double delta = buckets[static_cast<std::size_t>(i)].delta;
    const Eigen::Index up = chain_rows + 2 * i;
    prog.add(up, s(i), 1.0);
    prog.add(up, r(i), -1.0);
    prog.rhs(up) = delta;
    prog.add(up + 1, s(i), -1.0);
    prog.add(up + 1, r(i), 1.0);
    prog.rhs(up + 1) = delta;
  }
  return prog;
}

MonotonicityResult distance_to_monotonicity(const std::vector<ComplexityBucket>& buckets,
                                            Direction direction) {
  validate(buckets);
  const auto k = static_cast<Eigen::Index>(buckets.size());
  const auto sol = lp::solve(build_program(buckets, direction));

  MonotonicityResult res;
  res.iterations = sol.iterations;
  if (sol.status != lp::Status::optimal) {
    // The objective is bounded below by 0, so anything but optimal is infeasible.
    res.feasible = false;
    res.certificate = check_feasibility(buckets, direction).certificate;
    return res;
  }

  res.feasible = true;
  res.raise = sol.x.head(k);
  res.lower = sol.x.tail(k);
  res.shifts = res.raise - res.lower;
  res.adjusted.resize(k);
  Eigen::VectorXd weights(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    res.adjusted(i) = buckets[static_cast<std::size_t>(i)].mean + res.shifts(i);
    weights(i) = buckets[static_cast<std::size_t>(i)].weight;
  }
  res.epsilon_lb = weights.dot(res.raise + res.lower);
  res.certificate_residual = sol.certificate_residual;
  return res;
}

OracleResult oracle_distance(const std::vector<ComplexityBucket>& buckets, Direction direction,
                             double grid_step) {
  validate(buckets);
  if (buckets.size() > kOracleMaxBuckets) {
    throw std::length_error("oracle_distance: at most 5 buckets");
  }
  if (!(grid_step > 0.0)) throw std::invalid_argument("oracle_distance: grid_step must be > 0");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  std::vector<double> grid;
  for (const auto& b : buckets) {
    lo = std::min(lo, b.mean - b.delta);
    hi = std::max(hi, b.mean + b.delta);
    grid.push_back(b.mean - b.delta);
    grid.push_back(b.mean);
    grid.push_back(b.mean + b.delta);
  }
  const auto first = static_cast<long>(std::floor(lo / grid_step));
  const auto last = static_cast<long>(std::ceil(hi / grid_step));
  for (long g = first; g <= last; ++g) grid.push_back(static_cast<double>(g) * grid_step);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const std::size_t g = grid.size();
  const std::size_t k = buckets.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> cost(k, std::vector<double>(g, inf));
  std::vector<std::vector<std::size_t>> from(k, std::vector<std::size_t>(g, 0));

  auto allowed = [&](const ComplexityBucket& b, double v) {
    return v >= b.mean - b.delta - 1e-12 && v <= b.mean + b.delta + 1e-12;
  };

  for (std::size_t v = 0; v < g; ++v) {
    if (allowed(buckets[0], grid[v])) cost[0][v] = buckets[0].weight * std::abs(grid[v] - buckets[0].mean);
  }
  for (std::size_t i = 1; i < k; ++i) {
    // best[v]: cheapest predecessor among grid values admissible before v.
    std::vector<double> best(g, inf);
    std::vector<std::size_t> arg(g, 0);
    if (direction == Direction::nonincreasing) {
      double run = inf;
      std::size_t run_arg = 0;
      for (std::size_t v = g; v-- > 0;) {
        if (cost[i - 1][v] < run) {
          run = cost[i - 1][v];
          run_arg = v;
        }
        best[v] = run;
        arg[v] = run_arg;
      }
    } else {
      double run = inf;
      std::size_t run_arg = 0;
      for (std::size_t v = 0; v < g; ++v) {
        if (cost[i - 1][v] < run) {
          run = cost[i - 1][v];
          run_arg = v;
        }
        best[v] = run;
        arg[v] = run_arg;
      }
    }
    for (std::size_t v = 0; v < g; ++v) {
      if (!allowed(buckets[i], grid[v]) || best[v] == inf) continue;
      cost[i][v] = best[v] + buckets[i].weight * std::abs(grid[v] - buckets[i].mean);
      from[i][v] = arg[v];
    }
  }

  OracleResult out;
  const auto end = std::min_element(cost[k - 1].begin(), cost[k - 1].end());
  if (*end == inf) return out;
  out.feasible = true;
  out.distance = *end;
  out.values.resize(static_cast<Eigen::Index>(k));
  auto v = static_cast<std::size_t>(end - cost[k - 1].begin());
  for (std::size_t i = k; i-- > 0;) {
    out.values(static_cast<Eigen::Index>(i)) = grid[v];
    v = from[i][v];
  }
  return out;
}

std::vector<ComplexityBucket> read_buckets_csv(std::istream& in) {
  std::vector<ComplexityBucket> out;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    // Only a first row whose index column is not a number is a header.
    int index = 0;
    const bool index_ok = parse_full(cells.empty() ? std::string() : cells[0], index);
    if (first && !index_ok) {
      first = false;
      continue;
    }
    first = false;
    if (cells.size() != 4) {
      throw std::invalid_argument("bucket CSV line " + std::to_string(line_no) +
                                  ": expected 4 columns");
    }
    ComplexityBucket b;
    b.index = index;
    if (!index_ok || !parse_full(cells[1], b.weight) || !parse_full(cells[2], b.mean) ||
        !parse_full(cells[3], b.delta)) {
      throw std::invalid_argument("bucket CSV line " + std::to_string(line_no) + ": not a number");
    }
    out.push_back(b);
  }
  return out;
}

void write_solution_csv(std::ostream& out, const std::vector<ComplexityBucket>& buckets,
                        const MonotonicityResult& result) {
  out << "index,mean,lower,upper,shifted_lower,shifted_upper,solution_point\n";
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    const auto& b = buckets[i];
    const auto ii = static_cast<Eigen::Index>(i);
    const double shift = result.feasible ? result.shifts(ii) : 0.0;
    out << b.index << ',' << format_double(b.mean) << ',' << format_double(b.mean - b.delta)
        << ',' << format_double(b.mean + b.delta) << ','
        << format_double(b.mean - b.delta + shift) << ','
        << format_double(b.mean + b.delta + shift) << ','
        << (result.feasible ? format_double(result.adjusted(ii)) : std::string("")) << '\n';
  }
}

}  // namespace telm::mono
