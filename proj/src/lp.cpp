#include "phdelay/lp.hpp"

#include <cmath>
#include <limits>

#include "phdelay/errors.hpp"

namespace phdelay {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-10;

/// Tableau in canonical form: rows [0, m) are constraints, the last column is
/// the right-hand side, `basis[i]` is the basic column of row i.
struct Tableau {
  Matrix t;
  std::vector<Eigen::Index> basis;

  Eigen::Index rows() const { return static_cast<Eigen::Index>(basis.size()); }
  Eigen::Index rhs() const { return t.cols() - 1; }

  void pivot(Eigen::Index row, Eigen::Index col) {
    t.row(row) /= t(row, col);
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      if (i != row && t(i, col) != 0.0) t.row(i) -= t(i, col) * t.row(row);
    }
    basis[static_cast<std::size_t>(row)] = col;
  }

  /// Minimizes cost^T x over columns [0, active). Returns false if unbounded.
  bool optimize(const Vector& cost, Eigen::Index active) {
    for (int guard = 0; guard < 100000; ++guard) {
      // Reduced costs c_j - c_B^T B^-1 a_j.
      Eigen::Index entering = -1;
      for (Eigen::Index j = 0; j < active; ++j) {
        double reduced = cost(j);
        for (Eigen::Index i = 0; i < rows(); ++i) reduced -= cost(basis[static_cast<std::size_t>(i)]) * t(i, j);
        if (reduced < -kCostTol) {
          entering = j;
          break;
        }
      }
      if (entering < 0) return true;
      Eigen::Index leaving = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows(); ++i) {
        const double a = t(i, entering);
        if (a <= kPivotTol) continue;
        const double ratio = t(i, rhs()) / a;
        if (ratio < best - 1e-14 ||
            (std::abs(ratio - best) <= 1e-14 && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leaving)])) {
          best = ratio;
          leaving = i;
        }
      }
      if (leaving < 0) return false;
      pivot(leaving, entering);
    }
    throw DomainError("solve_lp: iteration limit reached");
  }
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp) {
  const auto n = static_cast<Eigen::Index>(lp.variables());
  std::vector<bool> is_free = lp.free_variables;
  is_free.resize(static_cast<std::size_t>(n), false);

  // Column layout: structural (free variables split in +/-), slacks, artificials.
  std::vector<Eigen::Index> plus(static_cast<std::size_t>(n)), minus(static_cast<std::size_t>(n), -1);
  Eigen::Index cols = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    plus[static_cast<std::size_t>(j)] = cols++;
    if (is_free[static_cast<std::size_t>(j)]) minus[static_cast<std::size_t>(j)] = cols++;
  }
  const Eigen::Index structural = cols;
  const auto m = static_cast<Eigen::Index>(lp.constraints.size());

  // Normalize rows so the right-hand side is nonnegative.
  std::vector<Sense> senses;
  Matrix a = Matrix::Zero(m, structural);
  Vector b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& c = lp.constraints[static_cast<std::size_t>(i)];
    if (c.coefficients.size() != n) throw ShapeError("solve_lp: constraint length does not match variable count");
    double sign = c.rhs < 0.0 ? -1.0 : 1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      a(i, plus[static_cast<std::size_t>(j)]) = sign * c.coefficients(j);
      if (minus[static_cast<std::size_t>(j)] >= 0) a(i, minus[static_cast<std::size_t>(j)]) = -sign * c.coefficients(j);
    }
    b(i) = sign * c.rhs;
    Sense s = c.sense;
    if (sign < 0.0 && s != Sense::Equal) s = (s == Sense::LessEqual) ? Sense::GreaterEqual : Sense::LessEqual;
    senses.push_back(s);
  }

  Eigen::Index slacks = 0;
  Eigen::Index artificials = 0;
  for (auto s : senses) {
    if (s != Sense::Equal) ++slacks;
    if (s != Sense::LessEqual) ++artificials;
  }
  const Eigen::Index total = structural + slacks + artificials;
  Tableau tab{Matrix::Zero(m, total + 1), std::vector<Eigen::Index>(static_cast<std::size_t>(m), -1)};
  tab.t.leftCols(structural) = a;
  tab.t.col(total) = b;
  Eigen::Index next_slack = structural;
  Eigen::Index next_art = structural + slacks;
  for (Eigen::Index i = 0; i < m; ++i) {
    switch (senses[static_cast<std::size_t>(i)]) {
      case Sense::LessEqual:
        tab.t(i, next_slack) = 1.0;
        tab.basis[static_cast<std::size_t>(i)] = next_slack++;
        break;
      case Sense::GreaterEqual:
        tab.t(i, next_slack++) = -1.0;
        tab.t(i, next_art) = 1.0;
        tab.basis[static_cast<std::size_t>(i)] = next_art++;
        break;
      case Sense::Equal:
        tab.t(i, next_art) = 1.0;
        tab.basis[static_cast<std::size_t>(i)] = next_art++;
        break;
    }
  }

  LpSolution sol;
  const Eigen::Index first_art = structural + slacks;
  if (artificials > 0) {
    Vector phase1 = Vector::Zero(total);
    phase1.tail(artificials).setOnes();
    tab.optimize(phase1, total);
    double infeasibility = 0.0;
    for (Eigen::Index i = 0; i < tab.rows(); ++i) {
      if (tab.basis[static_cast<std::size_t>(i)] >= first_art) infeasibility += tab.t(i, total);
    }
    const double scale = 1.0 + b.cwiseAbs().sum();
    if (infeasibility > 1e-9 * scale) {
      sol.status = LpStatus::Infeasible;
      return sol;
    }
    // Drive remaining (zero-valued) artificials out of the basis.
    std::vector<Eigen::Index> redundant;
    for (Eigen::Index i = 0; i < tab.rows(); ++i) {
      if (tab.basis[static_cast<std::size_t>(i)] < first_art) continue;
      Eigen::Index col = -1;
      for (Eigen::Index j = 0; j < first_art; ++j) {
        if (std::abs(tab.t(i, j)) > 1e-9) {
          col = j;
          break;
        }
      }
      if (col >= 0) {
        tab.pivot(i, col);
      } else {
        redundant.push_back(i);
      }
    }
    for (auto it = redundant.rbegin(); it != redundant.rend(); ++it) {
      const Eigen::Index r = *it;
      Matrix reduced(tab.t.rows() - 1, tab.t.cols());
      reduced << tab.t.topRows(r), tab.t.bottomRows(tab.t.rows() - r - 1);
      tab.t = std::move(reduced);
      tab.basis.erase(tab.basis.begin() + r);
    }
    // Artificial columns are dropped from phase 2 by restricting the active range.
    for (Eigen::Index i = 0; i < tab.rows(); ++i) tab.t.block(i, first_art, 1, artificials).setZero();
  }

  Vector cost = Vector::Zero(total);
  for (Eigen::Index j = 0; j < n; ++j) {
    cost(plus[static_cast<std::size_t>(j)]) = lp.objective(j);
    if (minus[static_cast<std::size_t>(j)] >= 0) cost(minus[static_cast<std::size_t>(j)]) = -lp.objective(j);
  }
  if (!tab.optimize(cost, first_art)) {
    sol.status = LpStatus::Unbounded;
    return sol;
  }
  Vector y = Vector::Zero(total);
  for (Eigen::Index i = 0; i < tab.rows(); ++i) y(tab.basis[static_cast<std::size_t>(i)]) = tab.t(i, total);
  sol.x.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    sol.x(j) = y(plus[static_cast<std::size_t>(j)]);
    if (minus[static_cast<std::size_t>(j)] >= 0) sol.x(j) -= y(minus[static_cast<std::size_t>(j)]);
  }
  sol.objective = lp.objective.dot(sol.x);
  sol.status = LpStatus::Optimal;
  return sol;
}

std::optional<MarginWitness> max_margin_positive(const PositivityBlocks& blocks) {
  Eigen::Index d = -1;
  auto check = [&](const std::vector<Matrix>& list) {
    for (const auto& mtx : list) {
      if (d < 0) d = mtx.rows();
      if (mtx.rows() != d) throw ShapeError("max_margin_positive: blocks disagree on the number of rows");
    }
  };
  check(blocks.strict);
  check(blocks.nonpositive);
  check(blocks.equal);
  if (d <= 0) throw ShapeError("max_margin_positive: no constraint blocks");
  const auto free_tail = static_cast<Eigen::Index>(blocks.free_tail);
  if (free_tail >= d) throw ShapeError("max_margin_positive: free tail covers every entry");
  const Eigen::Index bounded = d - free_tail;

  // Variables: v (d entries, >= 0) followed by the free margin t.
  LinearProgram lp(static_cast<std::size_t>(d + 1));
  lp.free_variables.assign(static_cast<std::size_t>(d + 1), false);
  for (Eigen::Index i = bounded; i <= d; ++i) lp.free_variables[static_cast<std::size_t>(i)] = true;
  lp.objective(d) = -1.0;
  for (const auto& mtx : blocks.strict) {
    for (Eigen::Index c = 0; c < mtx.cols(); ++c) {
      Vector row(d + 1);
      row << mtx.col(c), 1.0;
      lp.add(std::move(row), Sense::LessEqual, 0.0);
    }
  }
  for (const auto& mtx : blocks.nonpositive) {
    for (Eigen::Index c = 0; c < mtx.cols(); ++c) {
      Vector row(d + 1);
      row << mtx.col(c), 0.0;
      lp.add(std::move(row), Sense::LessEqual, 0.0);
    }
  }
  for (const auto& mtx : blocks.equal) {
    for (Eigen::Index c = 0; c < mtx.cols(); ++c) {
      Vector row(d + 1);
      row << mtx.col(c), 0.0;
      lp.add(std::move(row), Sense::Equal, 0.0);
    }
  }
  for (Eigen::Index i = 0; i < bounded; ++i) {
    Vector row = Vector::Zero(d + 1);
    row(i) = -1.0;
    row(d) = 1.0;
    lp.add(std::move(row), Sense::LessEqual, 0.0);
  }
  Vector sum = Vector::Zero(d + 1);
  sum.head(bounded).setOnes();
  lp.add(std::move(sum), Sense::Equal, 1.0);

  const LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::Optimal) return std::nullopt;
  return MarginWitness{sol.x.head(d), sol.x(d)};
}

std::optional<Vector> lp_feasible_positive(std::span<const Matrix> strict, std::span<const Matrix> equal) {
  PositivityBlocks blocks;
  blocks.strict.assign(strict.begin(), strict.end());
  blocks.equal.assign(equal.begin(), equal.end());
  const auto witness = max_margin_positive(blocks);
  // The eps-relaxed program is feasible exactly when the optimal margin reaches eps.
  if (!witness || witness->margin < kStrictMargin * (1.0 - 1e-9)) return std::nullopt;
  return witness->v;
}

}  // namespace phdelay
