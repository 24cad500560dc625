#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "phdelay/augment.hpp"
#include "phdelay/linalg.hpp"

namespace phdelay {

/// Mean trace on a uniform grid; row i holds the means at grid[i].
struct MomentTrajectory {
  std::vector<double> grid;
  Matrix means;  ///< (steps + 1) x (d + delay) for moment_ode, x-block only for convolution_form
  std::size_t base_species = 0;

  Vector at(std::size_t i) const { return means.row(static_cast<Eigen::Index>(i)).transpose(); }
};

/// Exact exponential stepping of the affine first-moment system. `m0` is a
/// base vector (empty delay lines) or a full (x, delta) vector.
MomentTrajectory moment_ode(const AugmentedNetwork& aug, const Vector& m0, double horizon, std::size_t steps);

/// X-block means from the integro-differential form with delay densities,
/// discretized by the trapezoid rule on `points` uniform intervals.
MomentTrajectory convolution_form(const AugmentedNetwork& aug, const Vector& m0_x, double horizon, std::size_t points,
                                  const std::optional<Vector>& d0 = std::nullopt);

/// Stationary base mean from the full augmented system [[A,B],[C,H^T]] z + b = 0.
Vector stationary_mean(const AugmentedNetwork& aug);

/// Solves A_df m + b_df = 0 on the delay-free counterpart of `net`.
Vector stationary_mean(const Network& net);

struct GeneExpressionVariance {
  double mean = 0.0;      ///< mu = k1 k2 / (g1 g2)
  double variance = 0.0;  ///< delay-free protein variance V
  std::optional<double> delayed_variance;  ///< V_lambda
  std::optional<double> ratio;             ///< R = V_lambda / V
  std::optional<double> ratio_derivative;  ///< dR/dlambda
  bool ordered = true;                     ///< mu < V_lambda < V
};

/// Protein variance of birth/death mRNA with translation, delay-free and with
/// an exponential(lambda) maturation delay on translation.
GeneExpressionVariance gene_expression_variance(double k1, double g1, double k2, double g2,
                                                std::optional<double> lambda = std::nullopt);

}  // namespace phdelay
