#include "phdelay/phasetype.hpp"

#include <cmath>
#include <numeric>

#include "phdelay/errors.hpp"

namespace phdelay {

namespace {

double row_sum_tolerance(const Matrix& h) {
  return 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff());
}

}  // namespace

SubgeneratorVerdict validate_subgenerator(const Matrix& h) {
  if (h.rows() != h.cols()) throw ShapeError("validate_subgenerator: matrix is not square");
  SubgeneratorVerdict verdict;
  auto fail = [&](std::string reason) {
    verdict.valid = false;
    verdict.violations.push_back(std::move(reason));
  };
  if (h.size() == 0) {
    fail("empty matrix");
    return verdict;
  }
  if (!h.allFinite()) {
    throw DomainError("validate_subgenerator: matrix has non-finite entries");
  }
  if (!is_metzler(h)) fail("not Metzler: negative off-diagonal entry");
  if (!(spectral_abscissa(h) < -kHurwitzTolerance)) fail("not Hurwitz stable");
  const Vector rows = h.rowwise().sum();
  const double tol = row_sum_tolerance(h);
  if ((rows.array() > tol).any()) fail("H·1 has a positive entry");
  if (!(rows.array() < -tol).any()) fail("H·1 = 0");
  return verdict;
}

PhaseType::PhaseType(RowVector alpha, Matrix h) : alpha_(std::move(alpha)), h_(std::move(h)) {
  if (h_.rows() != h_.cols()) throw ShapeError("PhaseType: subgenerator is not square");
  if (alpha_.size() != h_.rows()) throw ShapeError("PhaseType: alpha length does not match H");
  if (!alpha_.allFinite() || (alpha_.array() < 0.0).any()) {
    throw DomainError("PhaseType: alpha must be nonnegative");
  }
  if (std::abs(alpha_.sum() - 1.0) > 1e-12) throw DomainError("PhaseType: alpha must sum to 1");
  const auto verdict = validate_subgenerator(h_);
  if (!verdict.valid) {
    std::string msg = "PhaseType: invalid subgenerator:";
    for (const auto& v : verdict.violations) msg += " [" + v + "]";
    throw DomainError(msg);
  }
  exit_ = -(h_.rowwise().sum());
  // Row sums within tolerance of zero are treated as exactly zero.
  const double tol = row_sum_tolerance(h_);
  for (Eigen::Index i = 0; i < exit_.size(); ++i) {
    if (exit_(i) < tol) exit_(i) = 0.0;
  }
}

bool PhaseType::operator==(const PhaseType& other) const {
  return alpha_.size() == other.alpha_.size() && alpha_ == other.alpha_ && h_ == other.h_;
}

double ph_density(const PhaseType& ph, double t) {
  if (!(t >= 0.0)) throw DomainError("ph_density: t must be >= 0");
  const double f = ph.alpha().dot(matrix_exp_action(ph.subgenerator(), t, ph.exit_rates()));
  return std::max(f, 0.0);
}

double ph_cdf(const PhaseType& ph, double t) {
  if (!(t >= 0.0)) throw DomainError("ph_cdf: t must be >= 0");
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(ph.phases()));
  const double survival = ph.alpha().dot(matrix_exp_action(ph.subgenerator(), t, ones));
  return std::clamp(1.0 - survival, 0.0, 1.0);
}

double ph_moment(const PhaseType& ph, int ell) {
  if (ell < 1) throw DomainError("ph_moment: order must be >= 1");
  const Eigen::PartialPivLU<Matrix> lu(ph.subgenerator());
  Vector x = Vector::Ones(static_cast<Eigen::Index>(ph.phases()));
  double factorial = 1.0;
  for (int l = 1; l <= ell; ++l) {
    x = lu.solve(x);
    factorial *= l;
  }
  const double sign = (ell % 2 == 0) ? 1.0 : -1.0;
  return sign * factorial * ph.alpha().dot(x);
}

double ph_mean(const PhaseType& ph) { return ph_moment(ph, 1); }

double ph_variance(const PhaseType& ph) {
  const double m1 = ph_moment(ph, 1);
  return ph_moment(ph, 2) - m1 * m1;
}

PhaseType exponential(double rate) { return erlang(1, rate); }

PhaseType erlang(int shape, double rate) {
  if (shape < 1) throw DomainError("erlang: shape must be >= 1");
  if (!(rate > 0.0) || !std::isfinite(rate)) throw DomainError("erlang: rate must be positive");
  const std::vector<double> rates(static_cast<std::size_t>(shape), rate);
  return hypoexponential(rates);
}

PhaseType hypoexponential(std::span<const double> rates) {
  if (rates.empty()) throw DomainError("hypoexponential: empty rate list");
  const auto m = static_cast<Eigen::Index>(rates.size());
  Matrix h = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double r = rates[static_cast<std::size_t>(i)];
    if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("hypoexponential: rates must be positive");
    h(i, i) = -r;
    if (i + 1 < m) h(i, i + 1) = r;
  }
  RowVector alpha = RowVector::Zero(m);
  alpha(0) = 1.0;
  return PhaseType(std::move(alpha), std::move(h));
}

PhaseType hyper_erlang(std::span<const double> weights, std::span<const int> shapes,
                       std::span<const double> rates) {
  if (weights.empty() || weights.size() != shapes.size() || weights.size() != rates.size()) {
    throw DomainError("hyper_erlang: weights, shapes and rates must be nonempty and equally long");
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("hyper_erlang: weights must sum to 1");
  std::vector<Matrix> blocks;
  std::vector<double> entry;
  for (std::size_t b = 0; b < weights.size(); ++b) {
    if (weights[b] < 0.0) throw DomainError("hyper_erlang: weights must be nonnegative");
    const PhaseType branch = erlang(shapes[b], rates[b]);
    blocks.push_back(branch.subgenerator());
    entry.push_back(weights[b]);
    entry.insert(entry.end(), static_cast<std::size_t>(shapes[b]) - 1, 0.0);
  }
  RowVector alpha = Eigen::Map<const RowVector>(entry.data(), static_cast<Eigen::Index>(entry.size()));
  // Renormalize the accepted 1e-9 slack so the PhaseType invariant holds.
  alpha /= total;
  return PhaseType(std::move(alpha), block_diagonal(blocks));
}

PhaseType dirac_approx(double tau_bar, int n) {
  if (!(tau_bar > 0.0)) throw DomainError("dirac_approx: tau_bar must be positive");
  if (n < 1) throw DomainError("dirac_approx: N must be >= 1");
  return erlang(n, n / tau_bar);
}

double sample_delay(const PhaseType& ph, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Matrix& h = ph.subgenerator();
  const Eigen::Index m = h.rows();

  Eigen::Index phase = -1;
  double u = uniform(rng);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (ph.alpha()(i) <= 0.0) continue;
    phase = i;
    u -= ph.alpha()(i);
    if (u < 0.0) break;
  }

  double elapsed = 0.0;
  for (;;) {
    const double leave = -h(phase, phase);
    elapsed += std::exponential_distribution<double>(leave)(rng);
    double pick = uniform(rng) * leave;
    pick -= ph.exit_rates()(phase);
    if (pick < 0.0) return elapsed;
    Eigen::Index next = phase;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == phase || h(phase, j) <= 0.0) continue;
      next = j;
      pick -= h(phase, j);
      if (pick < 0.0) break;
    }
    if (next == phase) return elapsed;  // only reachable via rounding
    phase = next;
  }
}

}  // namespace phdelay
