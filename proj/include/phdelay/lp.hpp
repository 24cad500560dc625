#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "phdelay/linalg.hpp"

namespace phdelay {

enum class Sense { LessEqual, Equal, GreaterEqual };

struct LinearConstraint {
  Vector coefficients;
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;
};

/// minimize objective^T x subject to the constraints; variables are
/// nonnegative unless flagged in `free_variables`.
struct LinearProgram {
  Vector objective;
  std::vector<LinearConstraint> constraints;
  std::vector<bool> free_variables;  ///< empty means all nonnegative

  explicit LinearProgram(std::size_t variables) : objective(Vector::Zero(static_cast<Eigen::Index>(variables))) {}
  std::size_t variables() const { return static_cast<std::size_t>(objective.size()); }
  void add(Vector coefficients, Sense sense, double rhs) {
    constraints.push_back({std::move(coefficients), sense, rhs});
  }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Vector x;
  double objective = 0.0;
};

/// Dense two-phase simplex with Bland's anti-cycling rule.
LpSolution solve_lp(const LinearProgram& lp);

/// Margin used to realize strict inequalities.
inline constexpr double kStrictMargin = 1e-6;

/// Constraint blocks on a positive row vector v: every column m of a strict
/// block must satisfy v^T m < 0, of a nonpositive block v^T m <= 0, of an
/// equality block v^T m = 0. All blocks have one row per entry of v.
struct PositivityBlocks {
  std::vector<Matrix> strict;
  std::vector<Matrix> nonpositive;
  std::vector<Matrix> equal;
  /// The last `free_tail` entries of v are unrestricted in sign and excluded
  /// from the margin bound and the normalization.
  std::size_t free_tail = 0;
};

struct MarginWitness {
  Vector v;       ///< normalized so that the constrained entries sum to 1
  double margin;  ///< largest t with v >= t 1 and v^T m <= -t on strict columns
};

/// Maximizes the uniform margin t; nullopt when even t = -inf is infeasible
/// (the equality/nonpositive blocks admit no normalized v >= 0).
std::optional<MarginWitness> max_margin_positive(const PositivityBlocks& blocks);

/// v >= eps 1, v^T M <= -eps for strict blocks, v^T E = 0 for equality
/// blocks, sum(v) = 1, eps = kStrictMargin. nullopt iff infeasible.
std::optional<Vector> lp_feasible_positive(std::span<const Matrix> strict, std::span<const Matrix> equal);

}  // namespace phdelay
