#ifndef TELM_SIMPLEX_HPP
#define TELM_SIMPLEX_HPP

// Dense two-phase primal simplex for
//
//     minimize    c^T x
//     subject to  A x <= b,   x >= 0
//
// with Bland's anti-cycling rule. Optimal solutions come with the dual vector
// and a complementary-slackness certificate computed from the original data.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace telm::lp {

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
struct LinearProgram {
  Eigen::Index num_vars = 0;
  Eigen::Index num_rows = 0;
  Vector<Scalar> cost;
  std::vector<Eigen::Triplet<Scalar>> entries;  // A in triplet form
  Vector<Scalar> rhs;

  LinearProgram() = default;
  LinearProgram(Eigen::Index vars, Eigen::Index rows)
      : num_vars(vars), num_rows(rows), cost(Vector<Scalar>::Zero(vars)),
        rhs(Vector<Scalar>::Zero(rows)) {}

  void add(Eigen::Index row, Eigen::Index col, Scalar value) { entries.emplace_back(row, col, value); }

  Matrix<Scalar> dense_matrix() const {
    Eigen::SparseMatrix<Scalar> sparse(num_rows, num_vars);
    sparse.setFromTriplets(entries.begin(), entries.end());
    return Matrix<Scalar>(sparse);
  }

  void validate() const {
    if (cost.size() != num_vars || rhs.size() != num_rows) {
      throw std::invalid_argument("LinearProgram: dimension mismatch");
    }
    for (const auto& t : entries) {
      if (t.row() < 0 || t.row() >= num_rows || t.col() < 0 || t.col() >= num_vars) {
        throw std::invalid_argument("LinearProgram: entry out of range");
      }
    }
  }
};

enum class Status { optimal, infeasible, unbounded };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
  }
  return "unknown";
}

template <class Scalar>
struct Solution {
  Status status = Status::infeasible;
  Vector<Scalar> x;
  Vector<Scalar> duals;  // one per row, <= 0 at optimality for a minimization
  Scalar objective = Scalar(0);
  Scalar certificate_residual = Scalar(0);  // primal + dual infeasibility + complementarity
  int iterations = 0;
  std::vector<Eigen::Index> basis;  // column indices into [A I]
};

class IterationLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class Scalar>
struct SolverOptions {
  Scalar pivot_tol = Scalar(1e-12);
  Scalar optimality_tol = Scalar(1e-11);
  Scalar feasibility_tol = Scalar(1e-9);
  Scalar certificate_tol = Scalar(1e-9);
  int iteration_limit = 0;  // 0: 50 * (vars + rows)
};

namespace detail {

// Tableau layout: columns [x (n) | slack (m) | artificial (m_art) | rhs].
template <class Scalar>
class Tableau {
 public:
  Tableau(const Matrix<Scalar>& a, const Vector<Scalar>& b, const SolverOptions<Scalar>& opt)
      : n_(a.cols()), m_(a.rows()), opt_(opt) {
    std::vector<Eigen::Index> art_rows;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (b(i) < Scalar(0)) art_rows.push_back(i);
    }
    n_art_ = static_cast<Eigen::Index>(art_rows.size());
    t_ = Matrix<Scalar>::Zero(m_, n_ + m_ + n_art_ + 1);
    t_.leftCols(n_) = a;
    t_.block(0, n_, m_, m_).setIdentity();
    t_.col(rhs_col()) = b;
    basis_.resize(static_cast<std::size_t>(m_));
    for (Eigen::Index i = 0; i < m_; ++i) basis_[static_cast<std::size_t>(i)] = n_ + i;
    for (Eigen::Index k = 0; k < n_art_; ++k) {
      const Eigen::Index row = art_rows[static_cast<std::size_t>(k)];
      t_.row(row) *= Scalar(-1);
      t_(row, n_ + m_ + k) = Scalar(1);
      basis_[static_cast<std::size_t>(row)] = n_ + m_ + k;
    }
  }

  Eigen::Index rhs_col() const { return t_.cols() - 1; }
  Eigen::Index first_artificial() const { return n_ + m_; }
  bool is_artificial(Eigen::Index col) const { return col >= first_artificial() && col < rhs_col(); }
  Eigen::Index num_artificial() const { return n_art_; }
  const std::vector<Eigen::Index>& basis() const { return basis_; }
  int iterations() const { return iterations_; }

  // Runs simplex on cost vector `c` (length = rhs_col()). Columns with
  // allowed[j] == false never enter. Returns false when unbounded.
  bool optimize(const Vector<Scalar>& c, const std::vector<bool>& allowed, int limit) {
    for (;;) {
      const Vector<Scalar> reduced = reduced_costs(c);
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < rhs_col(); ++j) {
        if (allowed[static_cast<std::size_t>(j)] && reduced(j) < -opt_.optimality_tol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;

      Eigen::Index leave = -1;
      Scalar best = std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index i = 0; i < m_; ++i) {
        const Scalar aij = t_(i, enter);
        if (aij <= opt_.pivot_tol) continue;
        const Scalar ratio = t_(i, rhs_col()) / aij;
        if (leave < 0 || ratio < best - opt_.pivot_tol) {
          leave = i;
          best = ratio;
        } else if (std::abs(ratio - best) <= opt_.pivot_tol &&
                   basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]) {
          leave = i;
          best = std::min(best, ratio);
        }
      }
      if (leave < 0) return false;
      if (++iterations_ > limit) {
        throw IterationLimitError("simplex: iteration limit of " + std::to_string(limit) +
                                  " exceeded");
      }
      pivot(leave, enter);
    }
  }

  Scalar basic_objective(const Vector<Scalar>& c) const {
    Scalar z(0);
    for (Eigen::Index i = 0; i < m_; ++i) {
      z += c(basis_[static_cast<std::size_t>(i)]) * t_(i, rhs_col());
    }
    return z;
  }

  // Pivots basic artificials (all at level zero after a feasible phase 1)
  // out of the basis. [A I] has full row rank, so a nonzero entry in a
  // structural or slack column always exists.
  void expel_artificials() {
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (!is_artificial(basis_[static_cast<std::size_t>(i)])) continue;
      Eigen::Index col = -1;
      Scalar mag(0);
      for (Eigen::Index j = 0; j < first_artificial(); ++j) {
        if (std::abs(t_(i, j)) > mag) {
          mag = std::abs(t_(i, j));
          col = j;
        }
      }
      if (col < 0 || mag <= opt_.pivot_tol) {
        throw NumericalError("simplex: cannot drive artificial variable out of basis");
      }
      pivot(i, col);
    }
  }

  Vector<Scalar> primal() const {
    Vector<Scalar> x = Vector<Scalar>::Zero(n_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Eigen::Index col = basis_[static_cast<std::size_t>(i)];
      if (col < n_) x(col) = t_(i, rhs_col());
    }
    return x;
  }

 private:
  Vector<Scalar> reduced_costs(const Vector<Scalar>& c) const {
    Vector<Scalar> cb(m_);
    for (Eigen::Index i = 0; i < m_; ++i) cb(i) = c(basis_[static_cast<std::size_t>(i)]);
    return c - (cb.transpose() * t_.leftCols(rhs_col())).transpose();
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    const Scalar pivot_value = t_(row, col);
    t_.row(row) /= pivot_value;
    const Vector<Scalar> factors = t_.col(col);
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (i == row || factors(i) == Scalar(0)) continue;
      t_.row(i) -= factors(i) * t_.row(row);
      t_(i, col) = Scalar(0);
    }
    basis_[static_cast<std::size_t>(row)] = col;
  }

  Eigen::Index n_;
  Eigen::Index m_;
  Eigen::Index n_art_ = 0;
  SolverOptions<Scalar> opt_;
  Matrix<Scalar> t_;
  std::vector<Eigen::Index> basis_;
  int iterations_ = 0;
};

}  // namespace detail

/// Solves the LP. Throws IterationLimitError past the iteration limit and
/// NumericalError when an optimum fails its certificate check.
template <class Scalar>
Solution<Scalar> solve(const LinearProgram<Scalar>& lp, const SolverOptions<Scalar>& opt = {}) {
  lp.validate();
  const Matrix<Scalar> a = lp.dense_matrix();
  const Eigen::Index n = lp.num_vars;
  const Eigen::Index m = lp.num_rows;
  const int limit = opt.iteration_limit > 0 ? opt.iteration_limit : static_cast<int>(50 * (n + m));

  detail::Tableau<Scalar> tab(a, lp.rhs, opt);
  const Eigen::Index width = n + m + tab.num_artificial();
  Solution<Scalar> sol;

  if (tab.num_artificial() > 0) {
    Vector<Scalar> phase1 = Vector<Scalar>::Zero(width);
    phase1.tail(tab.num_artificial()).setOnes();
    tab.optimize(phase1, std::vector<bool>(static_cast<std::size_t>(width), true), limit);
    if (tab.basic_objective(phase1) > opt.feasibility_tol) {
      sol.status = Status::infeasible;
      sol.iterations = tab.iterations();
      return sol;
    }
    tab.expel_artificials();
  }

  Vector<Scalar> phase2 = Vector<Scalar>::Zero(width);
  phase2.head(n) = lp.cost;
  std::vector<bool> allowed(static_cast<std::size_t>(width), true);
  for (Eigen::Index j = n + m; j < width; ++j) allowed[static_cast<std::size_t>(j)] = false;
  if (!tab.optimize(phase2, allowed, limit)) {
    sol.status = Status::unbounded;
    sol.iterations = tab.iterations();
    return sol;
  }

  sol.status = Status::optimal;
  sol.iterations = tab.iterations();
  sol.basis = tab.basis();
  sol.x = tab.primal();
  sol.objective = lp.cost.dot(sol.x);

  // Duals from the final basis in the original (unnegated) data: B^T y = c_B.
  Matrix<Scalar> basis_matrix(m, m);
  Vector<Scalar> cb(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index col = sol.basis[static_cast<std::size_t>(i)];
    if (col < n) {
      basis_matrix.col(i) = a.col(col);
      cb(i) = lp.cost(col);
    } else {
      basis_matrix.col(i) = Vector<Scalar>::Unit(m, col - n);
      cb(i) = Scalar(0);
    }
  }
  sol.duals = basis_matrix.transpose().fullPivLu().solve(cb);

  const Vector<Scalar> slack = lp.rhs - a * sol.x;
  const Vector<Scalar> reduced = lp.cost - a.transpose() * sol.duals;
  Scalar residual(0);
  residual += (-slack.array()).max(Scalar(0)).sum();         // primal feasibility
  residual += (-sol.x.array()).max(Scalar(0)).sum();
  residual += (-reduced.array()).max(Scalar(0)).sum();       // dual feasibility
  residual += sol.duals.array().max(Scalar(0)).sum();
  residual += (sol.x.array() * reduced.array()).abs().sum();  // complementarity
  residual += (sol.duals.array() * slack.array()).abs().sum();
  sol.certificate_residual = residual;
  if (!(residual <= opt.certificate_tol)) {
    throw NumericalError("simplex: optimality certificate residual " + std::to_string(residual) +
                         " exceeds tolerance");
  }
  return sol;
}

}  // namespace telm::lp

#endif  // TELM_SIMPLEX_HPP
