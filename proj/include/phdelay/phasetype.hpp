#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "phdelay/linalg.hpp"

namespace phdelay {

/// Outcome of checking that a matrix is a subgenerator: Metzler and Hurwitz,
/// nonpositive row sums, and at least one strictly negative row sum.
struct SubgeneratorVerdict {
  bool valid = true;
  std::vector<std::string> violations;
};

/// Tolerance on the spectral abscissa used by the Hurwitz part of the check.
inline constexpr double kHurwitzTolerance = 1e-9;

SubgeneratorVerdict validate_subgenerator(const Matrix& h);

/// Phase-type law PH(alpha, H): the absorption time of a CTMC started from
/// `alpha` over the transient phases driven by the subgenerator `H`.
///
/// Instances are validated on construction and immutable afterwards.
class PhaseType {
 public:
  /// Throws DomainError if alpha is not a probability vector or H is not a
  /// subgenerator; ShapeError on dimension mismatch.
  PhaseType(RowVector alpha, Matrix h);

  const RowVector& alpha() const { return alpha_; }
  const Matrix& subgenerator() const { return h_; }
  /// Exit-rate vector -H 1.
  const Vector& exit_rates() const { return exit_; }
  std::size_t phases() const { return static_cast<std::size_t>(h_.rows()); }

  bool operator==(const PhaseType& other) const;

 private:
  RowVector alpha_;
  Matrix h_;
  Vector exit_;
};

double ph_density(const PhaseType& ph, double t);
double ph_cdf(const PhaseType& ph, double t);
/// ell-th raw moment (-1)^ell ell! alpha H^{-ell} 1.
double ph_moment(const PhaseType& ph, int ell);
double ph_mean(const PhaseType& ph);
double ph_variance(const PhaseType& ph);

PhaseType exponential(double rate);
PhaseType erlang(int shape, double rate);
PhaseType hypoexponential(std::span<const double> rates);
PhaseType hyper_erlang(std::span<const double> weights, std::span<const int> shapes,
                       std::span<const double> rates);
/// Erlang(N, N / tau_bar): mean tau_bar, variance tau_bar^2 / N.
PhaseType dirac_approx(double tau_bar, int n);

/// Draws one delay by running the phase chain until absorption.
double sample_delay(const PhaseType& ph, std::mt19937_64& rng);

}  // namespace phdelay
