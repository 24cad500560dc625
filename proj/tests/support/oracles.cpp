#include "oracles.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

Matrix expm_taylor(const Matrix& m, double t) {
  LMatrix a = (m * t).cast<long double>();
  const long double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm / std::ldexp(1.0L, squarings) > 0.5L) ++squarings;
  a /= std::ldexp(1.0L, squarings);
  const auto n = a.rows();
  LMatrix result = LMatrix::Identity(n, n);
  LMatrix term = LMatrix::Identity(n, n);
  for (int k = 1; k <= 30; ++k) {
    term = term * a / static_cast<long double>(k);
    result += term;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result.cast<double>();
}

double density(const PhaseType& ph, double t) {
  return (ph.alpha() * expm_taylor(ph.subgenerator(), t) * ph.exit_rates())(0);
}

double survival(const PhaseType& ph, double t) {
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(ph.phases()));
  return (ph.alpha() * expm_taylor(ph.subgenerator(), t) * ones)(0);
}

double quadrature_moment(const PhaseType& ph, int l) {
  double q = 1.0;
  while (survival(ph, q) > 1e-17) q *= 2.0;
  auto f = [&](double t) { return std::pow(t, l) * density(ph, t); };
  // Split at a few breakpoints so the adaptive rule sees the bulk.
  double total = 0.0;
  double lo = 0.0;
  for (double hi = q / 64.0; lo < q; hi *= 2.0) {
    hi = std::min(hi, q);
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-14);
    lo = hi;
  }
  return total;
}

Matrix drift(const Network& net) {
  const auto d = static_cast<Eigen::Index>(net.species_count());
  Matrix a = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < net.reaction_count(); ++k) {
    const auto& r = net.reactions()[k];
    if (r.order() != 1) continue;
    const auto sigma = static_cast<Eigen::Index>(r.reactants.front().species);
    a.col(sigma) += r.rate * net.stoichiometry(k).cast<double>();
  }
  return a;
}

Vector inflow(const Network& net) {
  Vector b = Vector::Zero(static_cast<Eigen::Index>(net.species_count()));
  for (std::size_t k = 0; k < net.reaction_count(); ++k) {
    const auto& r = net.reactions()[k];
    if (r.order() == 0) b += r.rate * net.stoichiometry(k).cast<double>();
  }
  return b;
}

Matrix lyapunov(const Matrix& a, const Matrix& q) {
  const auto n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  Matrix kron = Matrix::Zero(n * n, n * n);
  // vec(A S + S A^T) = (I kron A + A kron I) vec(S)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      kron.block(i * n, j * n, n, n) += id(i, j) * a;
      kron.block(i * n, j * n, n, n) += a(i, j) * id;
    }
  }
  const Vector vq = Eigen::Map<const Vector>(q.data(), n * n);
  const Vector vs = kron.fullPivLu().solve(-vq);
  return Eigen::Map<const Matrix>(vs.data(), n, n);
}

Matrix linear_network_covariance(const Network& net) {
  const Matrix a = drift(net);
  const Vector m = a.fullPivLu().solve(-inflow(net));
  const auto d = a.rows();
  Matrix q = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < net.reaction_count(); ++k) {
    const auto& r = net.reactions()[k];
    double rate = r.rate;
    if (r.order() == 1) rate *= m(static_cast<Eigen::Index>(r.reactants.front().species));
    const Vector z = net.stoichiometry(k).cast<double>();
    q += rate * z * z.transpose();
  }
  return lyapunov(a, q);
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_critical_1pct(std::size_t n) {
  const double s = std::sqrt(static_cast<double>(n));
  return 1.6276 / (s + 0.12 + 0.11 / s);
}

}  // namespace oracle

namespace corpus {

using phdelay::Delay;
using phdelay::Reaction;
using phdelay::Realization;
using phdelay::RowVector;
using phdelay::Term;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool coin(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

}  // namespace

PhaseType random_phase_type(std::mt19937_64& rng, std::size_t max_phases) {
  const std::size_t m = pick(rng, 1, max_phases);
  switch (pick(rng, 0, 3)) {
    case 0:
      return phdelay::erlang(static_cast<int>(m), uniform(rng, 0.5, 5.0));
    case 1: {
      std::vector<double> rates;
      for (std::size_t i = 0; i < m; ++i) rates.push_back(uniform(rng, 0.5, 5.0));
      return phdelay::hypoexponential(rates);
    }
    case 2:
      if (m >= 2) {
        const std::size_t first = pick(rng, 1, m - 1);
        const double w = uniform(rng, 0.1, 0.9);
        const std::vector<double> weights{w, 1.0 - w};
        const std::vector<int> shapes{static_cast<int>(first), static_cast<int>(m - first)};
        const std::vector<double> rates{uniform(rng, 0.5, 5.0), uniform(rng, 0.5, 5.0)};
        return phdelay::hyper_erlang(weights, shapes, rates);
      }
      [[fallthrough]];
    default: {
      const auto mi = static_cast<Eigen::Index>(m);
      Matrix h = Matrix::Zero(mi, mi);
      phdelay::Vector exits = phdelay::Vector::Zero(mi);
      for (Eigen::Index i = 0; i < mi; ++i) {
        for (Eigen::Index j = 0; j < mi; ++j) {
          if (i != j && coin(rng, 0.4)) h(i, j) = uniform(rng, 0.1, 2.0);
        }
        if (i == mi - 1 || coin(rng, 0.5)) exits(i) = uniform(rng, 0.2, 3.0);
        // Every phase reaches absorption: exit or move up the chain.
        if (exits(i) == 0.0 && h(i, i + 1) == 0.0) h(i, i + 1) = uniform(rng, 0.2, 2.0);
      }
      for (Eigen::Index i = 0; i < mi; ++i) h(i, i) = -(h.row(i).sum() + exits(i));
      RowVector alpha = RowVector::Zero(mi);
      for (Eigen::Index i = 0; i < mi; ++i) {
        if (coin(rng, 0.6)) alpha(i) = uniform(rng, 0.1, 1.0);
      }
      if (alpha.sum() == 0.0) alpha(static_cast<Eigen::Index>(pick(rng, 0, m - 1))) = 1.0;
      alpha /= alpha.sum();
      return PhaseType(alpha, h);
    }
  }
}

Network random_unimolecular(std::mt19937_64& rng, const Options& options) {
  const std::size_t d = pick(rng, options.min_species, options.max_species);
  Network net;
  for (std::size_t i = 0; i < d; ++i) net.add_species("X" + std::to_string(i + 1));
  auto add = [&](std::vector<Term> lhs, std::vector<Term> rhs, double rate) {
    net.add_reaction(Reaction{std::move(lhs), std::move(rhs), rate, std::nullopt});
  };
  for (std::size_t i = 0; i < d; ++i) {
    if (coin(rng, 0.5)) add({}, {{i, 1}}, uniform(rng, 0.5, 5.0));
    if (coin(rng, 0.8)) add({{i, 1}}, {}, uniform(rng, 0.2, 2.0));
    if (coin(rng, 0.1)) add({{i, 1}}, {{i, 2}}, uniform(rng, 0.1, 1.0));
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) continue;
      if (coin(rng, 0.25)) add({{i, 1}}, {{j, 1}}, uniform(rng, 0.1, 2.0));
      if (coin(rng, 0.15)) add({{i, 1}}, {{i, 1}, {j, 1}}, uniform(rng, 0.1, 2.0));
    }
  }
  if (net.reaction_count() == 0) add({}, {{0, 1}}, 1.0);

  const std::size_t delays = pick(rng, 0, std::min(options.max_delays, net.reaction_count()));
  std::vector<std::size_t> idx(net.reaction_count());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<Reaction> reactions = net.reactions();
  for (std::size_t n = 0; n < delays; ++n) {
    const Realization real = coin(rng, 0.5) ? Realization::Absorbing : Realization::NonAbsorbing;
    reactions[idx[n]].delay = Delay{random_phase_type(rng, options.max_phases), real};
  }
  Network out(net.species());
  for (auto& r : reactions) out.add_reaction(std::move(r));
  return out;
}

std::vector<Network> unimolecular_corpus(std::size_t count, std::uint64_t seed, const Options& options) {
  std::mt19937_64 rng(seed);
  std::vector<Network> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_unimolecular(rng, options));
  return out;
}

Matrix random_metzler(std::mt19937_64& rng, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) {
        m(i, j) = uniform(rng, -3.0, 0.5);
      } else if (coin(rng, 0.5)) {
        m(i, j) = uniform(rng, 0.0, 1.0);
      }
    }
  }
  return m;
}

Network birth_death(double k, double gamma) {
  Network net({"X"});
  net.add_reaction({{}, {{0, 1}}, k, std::nullopt});
  net.add_reaction({{{0, 1}}, {}, gamma, std::nullopt});
  return net;
}

Network gene_expression(double k1, double g1, double k2, double g2) {
  Network net({"X1", "X2"});
  net.add_reaction({{}, {{0, 1}}, k1, std::nullopt});
  net.add_reaction({{{0, 1}}, {}, g1, std::nullopt});
  net.add_reaction({{{0, 1}}, {{0, 1}, {1, 1}}, k2, std::nullopt});
  net.add_reaction({{{1, 1}}, {}, g2, std::nullopt});
  return net;
}

Network gene_expression_delayed(double k1, double g1, double k2, double g2, const PhaseType& delay) {
  Network net({"X1", "X2"});
  net.add_reaction({{}, {{0, 1}}, k1, std::nullopt});
  net.add_reaction({{{0, 1}}, {}, g1, std::nullopt});
  net.add_reaction({{{0, 1}}, {{0, 1}, {1, 1}}, k2, Delay{delay, Realization::NonAbsorbing}});
  net.add_reaction({{{1, 1}}, {}, g2, std::nullopt});
  return net;
}

Network epidemiological(const EpidemicRates& r, const PhaseType& di, const PhaseType& dr, const PhaseType& ds) {
  Network net({"X1", "X2", "X3"});
  net.add_reaction({{}, {{0, 1}}, r.k1, std::nullopt});
  net.add_reaction({{{0, 1}}, {}, r.g1, std::nullopt});
  net.add_reaction({{}, {{1, 1}}, r.k2, std::nullopt});
  net.add_reaction({{{1, 1}}, {}, r.g2, std::nullopt});
  net.add_reaction({{}, {{2, 1}}, r.k3, std::nullopt});
  net.add_reaction({{{2, 1}}, {}, r.g3, std::nullopt});
  net.add_reaction({{{0, 1}, {1, 1}}, {{1, 2}}, r.ki, Delay{di, Realization::NonAbsorbing}});
  net.add_reaction({{{1, 1}}, {{2, 1}}, r.kr, Delay{dr, Realization::NonAbsorbing}});
  net.add_reaction({{{2, 1}}, {{0, 1}}, r.ks, Delay{ds, Realization::NonAbsorbing}});
  return net;
}

}  // namespace corpus
