#include "phdelay/moments.hpp"

#include <cmath>

#include "phdelay/errors.hpp"
#include "phdelay/phasetype.hpp"

namespace phdelay {

namespace {

void require_linear(const AugmentedNetwork& aug) {
  if (aug.has_bimolecular) throw UsageError("moment equations not closed: network has bimolecular reactions");
}

Vector full_initial(const AugmentedNetwork& aug, const Vector& m0) {
  const auto d = static_cast<Eigen::Index>(aug.base_species);
  const auto n = d + static_cast<Eigen::Index>(aug.delay_dimension());
  if (m0.size() == n) return m0;
  if (m0.size() != d) throw ShapeError("initial means must cover the base species or the full augmented state");
  Vector z = Vector::Zero(n);
  z.head(d) = m0;
  return z;
}

}  // namespace

MomentTrajectory moment_ode(const AugmentedNetwork& aug, const Vector& m0, double horizon, std::size_t steps) {
  require_linear(aug);
  if (steps == 0) throw DomainError("moment_ode: steps must be at least 1");
  if (!(horizon > 0.0)) throw DomainError("moment_ode: horizon must be positive");
  const Vector z0 = full_initial(aug, m0);
  const Eigen::Index n = z0.size();

  // Affine system lifted with a constant coordinate: d/dt [z; 1] = [[G, b], [0, 0]] [z; 1].
  Matrix lifted = Matrix::Zero(n + 1, n + 1);
  lifted.topLeftCorner(n, n) = aug.generator();
  lifted.topRightCorner(n, 1) = aug.offset();
  const double h = horizon / static_cast<double>(steps);
  const Matrix step = matrix_exp(lifted, h);

  MomentTrajectory out;
  out.base_species = aug.base_species;
  out.means.resize(static_cast<Eigen::Index>(steps) + 1, n);
  Vector y(n + 1);
  y << z0, 1.0;
  for (std::size_t i = 0; i <= steps; ++i) {
    out.grid.push_back(h * static_cast<double>(i));
    out.means.row(static_cast<Eigen::Index>(i)) = y.head(n).transpose();
    y = step * y;
    y(n) = 1.0;
  }
  return out;
}

MomentTrajectory convolution_form(const AugmentedNetwork& aug, const Vector& m0_x, double horizon, std::size_t points,
                                  const std::optional<Vector>& d0) {
  require_linear(aug);
  if (points == 0) throw DomainError("convolution_form: points must be at least 1");
  if (!(horizon > 0.0)) throw DomainError("convolution_form: horizon must be positive");
  const auto d = static_cast<Eigen::Index>(aug.base_species);
  const auto nd = static_cast<Eigen::Index>(aug.delay_dimension());
  if (m0_x.size() != d) throw ShapeError("convolution_form: initial means must cover the base species");
  const Vector delta0 = d0.value_or(Vector::Zero(nd));
  if (delta0.size() != nd) throw ShapeError("convolution_form: initial delay means have the wrong length");

  const BlockMatrices& blk = aug.blocks;
  const double h = horizon / static_cast<double>(points);
  const std::size_t n = points;

  // Kernel K(s) = B e^{H^T s} C = S_out,x diag(f(s)) W_in, sampled on the grid.
  std::vector<Matrix> kernel;
  kernel.reserve(n + 1);
  const Matrix step = matrix_exp(blk.ht, h);
  Matrix e = Matrix::Identity(nd, nd);
  std::vector<Matrix> propagator;  // e^{H^T t_i}
  for (std::size_t i = 0; i <= n; ++i) {
    kernel.push_back(nd > 0 ? Matrix(blk.b * e * blk.c) : Matrix::Zero(d, d));
    propagator.push_back(e);
    e = step * e;
  }
  // Forcing g(t) = b0 + B e^{H^T t} D(0) + S_out,x F(t) b_in, with the
  // cumulative term written as B (H^T)^{-1} (e^{H^T t} - I) b_d.
  Eigen::PartialPivLU<Matrix> ht_lu;
  if (nd > 0) ht_lu.compute(blk.ht);
  auto forcing = [&](std::size_t i) -> Vector {
    Vector g = blk.b0;
    if (nd > 0) {
      g += blk.b * (propagator[i] * delta0);
      g += blk.b * ht_lu.solve((propagator[i] - Matrix::Identity(nd, nd)) * blk.bd);
    }
    return g;
  };

  MomentTrajectory out;
  out.base_species = aug.base_species;
  out.means.resize(static_cast<Eigen::Index>(n) + 1, d);
  std::vector<Vector> y{m0_x};
  Vector f_prev = blk.a * m0_x + forcing(0);
  const Matrix lhs = Matrix::Identity(d, d) - 0.5 * h * (blk.a + 0.5 * h * kernel[0]);
  const Eigen::PartialPivLU<Matrix> lhs_lu(lhs);
  out.grid.push_back(0.0);
  out.means.row(0) = m0_x.transpose();
  for (std::size_t k = 1; k <= n; ++k) {
    // Convolution at t_k without the implicit s = 0 term.
    Vector rest = 0.5 * h * (kernel[k] * y[0]);
    for (std::size_t i = 1; i < k; ++i) rest += h * (kernel[i] * y[k - i]);
    const Vector g = forcing(k);
    const Vector rhs = y[k - 1] + 0.5 * h * f_prev + 0.5 * h * (rest + g);
    Vector yk = lhs_lu.solve(rhs);
    f_prev = blk.a * yk + 0.5 * h * (kernel[0] * yk) + rest + g;
    out.grid.push_back(h * static_cast<double>(k));
    out.means.row(static_cast<Eigen::Index>(k)) = yk.transpose();
    y.push_back(std::move(yk));
  }
  return out;
}

Vector stationary_mean(const AugmentedNetwork& aug) {
  require_linear(aug);
  const Matrix a_df = aug.splits.delay_free_drift();
  if (!(spectral_abscissa(a_df) < -kHurwitzTolerance)) {
    throw DomainError("no unique stationary mean: A_df is not Hurwitz");
  }
  const Matrix g = aug.generator();
  const Vector z = g.fullPivLu().solve(-aug.offset());
  return z.head(static_cast<Eigen::Index>(aug.base_species));
}

Vector stationary_mean(const Network& net) {
  if (!net.is_unimolecular()) throw UsageError("moment equations not closed: network has bimolecular reactions");
  const DelayFreeView view = delay_free_view(net);
  if (!(spectral_abscissa(view.a_df) < -kHurwitzTolerance)) {
    throw DomainError("no unique stationary mean: A_df is not Hurwitz");
  }
  return view.a_df.partialPivLu().solve(-view.b_df);
}

GeneExpressionVariance gene_expression_variance(double k1, double g1, double k2, double g2,
                                                std::optional<double> lambda) {
  for (double p : {k1, g1, k2, g2}) {
    if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("gene_expression_variance: rates must be positive");
  }
  if (lambda && (!(*lambda > 0.0) || !std::isfinite(*lambda))) {
    throw DomainError("gene_expression_variance: lambda must be positive");
  }
  GeneExpressionVariance r;
  const double s = g1 + g2;
  r.mean = k1 * k2 / (g1 * g2);
  r.variance = r.mean * (1.0 + k2 / s);
  if (lambda) {
    const double l = *lambda;
    const double num = g1 * g2 * s + l * s * (s + k2) + l * l * (s + k2);
    const double den = s * (g1 + l) * (g2 + l);
    r.delayed_variance = r.mean * num / den;
    r.ratio = *r.delayed_variance / r.variance;
    r.ratio_derivative = g1 * g2 * (g1 * k2 + g2 * k2 + 2.0 * k2 * l) /
                         ((s + k2) * (g1 + l) * (g1 + l) * (g2 + l) * (g2 + l));
    r.ordered = r.mean < *r.delayed_variance && *r.delayed_variance < r.variance;
  }
  return r;
}

}  // namespace phdelay
