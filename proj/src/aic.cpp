#include "phdelay/aic.hpp"

#include <cmath>

#include "phdelay/augment.hpp"
#include "phdelay/errors.hpp"
#include "phdelay/ergodicity.hpp"
#include "phdelay/lp.hpp"
#include "phdelay/simulate.hpp"

namespace phdelay {

namespace {

std::size_t count_nonzero(const Vector& v) {
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) n += v(i) != 0.0 ? 1 : 0;
  return n;
}

void check_delay(const std::optional<PhaseType>& ph, const char* which) {
  if (!ph) return;
  if (count_nonzero(ph->alpha()) != 1) {
    throw DomainError(std::string(which) + " delay must enter through exactly one phase");
  }
  if (count_nonzero(ph->exit_rates()) != 1) {
    throw DomainError(std::string(which) + " delay must exit from exactly one phase");
  }
}

std::string free_name(const Network& net, std::string name) {
  while (net.find_species(name)) name += "_";
  return name;
}

}  // namespace

std::string to_string(AICVerdict v) {
  return v == AICVerdict::ControllableErgodic ? "controllable-ergodic" : "not-certified";
}

void validate_aic_spec(const Network& plant, const AICSpec& spec) {
  for (double p : {spec.k, spec.theta, spec.mu, spec.eta}) {
    if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("controller rates must be positive");
  }
  if (spec.actuated >= plant.species_count() || spec.measured >= plant.species_count()) {
    throw DomainError("actuated or measured species index out of range");
  }
  check_delay(spec.actuation_delay, "actuation");
  check_delay(spec.sensing_delay, "sensing");
}

Network attach_aic(const Network& plant, const AICSpec& spec) {
  if (!plant.is_unimolecular()) throw UsageError("attach_aic: plant has bimolecular reactions");
  validate_aic_spec(plant, spec);
  Network net = plant;
  const std::size_t z1 = net.add_species(free_name(net, "Z1"));
  const std::size_t z2 = net.add_species(free_name(net, "Z2"));
  auto delay = [](const std::optional<PhaseType>& ph) -> std::optional<Delay> {
    if (!ph) return std::nullopt;
    return Delay{*ph, Realization::NonAbsorbing};
  };
  net.add_reaction({{{z1, 1}}, {{z1, 1}, {spec.actuated, 1}}, spec.k, delay(spec.actuation_delay)});
  net.add_reaction({{{spec.measured, 1}}, {{spec.measured, 1}, {z2, 1}}, spec.theta, delay(spec.sensing_delay)});
  net.add_reaction({{}, {{z1, 1}}, spec.mu, std::nullopt});
  net.add_reaction({{{z1, 1}, {z2, 1}}, {}, spec.eta, std::nullopt});
  return net;
}

bool output_controllable(const Matrix& a, std::size_t actuated, std::size_t measured) {
  const Eigen::Index d = a.rows();
  Vector v = Vector::Zero(d);
  v(static_cast<Eigen::Index>(actuated)) = 1.0;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < d; ++j) {
    if (std::abs(v(static_cast<Eigen::Index>(measured))) > 1e-12 * v.cwiseAbs().maxCoeff()) return true;
    v = a * v / scale;
    if (v.cwiseAbs().maxCoeff() == 0.0) return false;
  }
  return false;
}

AICCertificate check_aic(const Network& plant, const AICSpec& spec) {
  if (!plant.is_unimolecular()) throw UsageError("check_aic: plant has bimolecular reactions");
  validate_aic_spec(plant, spec);
  const Matrix a = delay_free_view(plant).a_df;
  const Eigen::Index d = a.rows();
  const auto ia = static_cast<Eigen::Index>(spec.actuated);
  const auto il = static_cast<Eigen::Index>(spec.measured);

  AICCertificate cert;
  cert.setpoint = spec.mu / spec.theta;
  cert.output_controllable = output_controllable(a, spec.actuated, spec.measured);
  cert.notes.push_back("conditions: v^T A_df < 0 with v > 0; w^T A_df + e_l^T = 0 with w >= 0, w_a > 0, w_l > 0");
  cert.notes.push_back("v^T e_a > 0 is implied by v > 0");

  PositivityBlocks blocks;
  blocks.strict.push_back(a);
  if (const auto mw = max_margin_positive(blocks); mw && mw->margin >= kStrictMargin * (1.0 - 1e-9)) {
    cert.v = mw->v;
    const WitnessReplay r = replay_witness(mw->v, blocks);
    cert.v_slack = std::min(r.min_entry, r.min_strict_slack);
  } else {
    cert.notes.push_back("v^T A_df < 0 infeasible at eps margin");
  }

  LinearProgram lp(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) lp.add(a.col(j), Sense::Equal, j == il ? -1.0 : 0.0);
  Vector ea = Vector::Zero(d);
  ea(ia) = 1.0;
  lp.add(ea, Sense::GreaterEqual, kGainMargin);
  Vector el = Vector::Zero(d);
  el(il) = 1.0;
  lp.add(el, Sense::GreaterEqual, kGainMargin);
  const LpSolution sol = solve_lp(lp);
  const double tol = 1e-9 * std::max(1.0, a.cwiseAbs().maxCoeff());
  const bool admissible = sol.status == LpStatus::Optimal && sol.x.minCoeff() >= -tol &&
                          sol.x(ia) >= kGainMargin - tol && sol.x(il) >= kGainMargin - tol &&
                          (sol.x.transpose() * a + el.transpose()).cwiseAbs().maxCoeff() <= tol;
  if (admissible) {
    cert.w = sol.x;
    cert.w_residual = (sol.x.transpose() * a + el.transpose()).cwiseAbs().maxCoeff();
  } else {
    cert.notes.push_back("w^T A_df + e_l^T = 0 has no admissible nonnegative solution");
  }

  const Eigen::FullPivLU<Matrix> lu(a);
  if (lu.isInvertible()) {
    cert.static_gain = -lu.solve(ea)(il);
  } else {
    cert.notes.push_back("A_df singular: static gain undefined");
  }
  if (cert.w && !cert.output_controllable) cert.notes.push_back("w-feasibility and the output controllability test disagree");
  if (cert.v && cert.w) cert.verdict = AICVerdict::ControllableErgodic;
  return cert;
}

ClosedLoopReport verify_closed_loop(const Network& plant, const AICSpec& spec, double horizon, std::size_t replicas,
                                    std::uint64_t seed, double burn_in, std::size_t threads) {
  const Network closed = attach_aic(plant, spec);
  const AugmentedNetwork aug = augment_network(closed);
  const State x0(closed.species_count(), 0);
  SimulationOptions options;
  options.projection = std::vector<std::size_t>{spec.measured};
  options.streaming_burn_in = burn_in;
  const Simulator sim = [&](std::uint64_t s) { return simulate_ssa(aug, x0, horizon, s, options); };
  const EnsembleStats stats = run_ensemble_stats(sim, replicas, seed, burn_in, {}, threads);

  ClosedLoopReport rep;
  rep.mean = stats.mean(0);
  rep.standard_error = stats.standard_error(0);
  rep.target = spec.mu / spec.theta;
  rep.tolerance = std::max(0.05 * rep.target, 3.0 * rep.standard_error);
  rep.pass = std::abs(rep.mean - rep.target) <= rep.tolerance;
  rep.replicas = replicas;
  rep.horizon = horizon;
  return rep;
}

std::string format_aic_certificate(const AICCertificate& cert) {
  std::string out;
  out += "verdict: " + to_string(cert.verdict) + "\n";
  out += "setpoint: " + format_number(cert.setpoint) + "\n";
  out += "static_gain: " + format_number(cert.static_gain) + "\n";
  out += std::string("output_controllable: ") + (cert.output_controllable ? "yes" : "no") + "\n";
  if (cert.v) {
    out += "witness_v: " + format_vector(*cert.v) + "\n";
    out += "v_min_slack: " + format_number(cert.v_slack) + "\n";
  }
  if (cert.w) {
    out += "witness_w: " + format_vector(*cert.w) + "\n";
    out += "w_residual: " + format_number(cert.w_residual) + "\n";
  }
  for (const auto& n : cert.notes) out += "note: " + n + "\n";
  return out;
}

}  // namespace phdelay
