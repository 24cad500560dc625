#include "phdelay/ergodicity.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "phdelay/augment.hpp"
#include "phdelay/errors.hpp"

namespace phdelay {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Ergodic:
      return "ergodic";
    case Verdict::NotCertified:
      return "not-certified";
    case Verdict::NotErgodic:
      return "not-ergodic";
  }
  return "unknown";
}

WitnessReplay replay_witness(const Vector& v, const PositivityBlocks& blocks) {
  WitnessReplay r;
  const Eigen::Index bounded = v.size() - static_cast<Eigen::Index>(blocks.free_tail);
  r.min_entry = bounded > 0 ? v.head(bounded).minCoeff() : 0.0;
  r.min_strict_slack = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < blocks.strict.size(); ++b) {
    if (blocks.strict[b].cols() == 0) continue;
    const double slack = -(v.transpose() * blocks.strict[b]).maxCoeff();
    if (slack < r.min_strict_slack) {
      r.min_strict_slack = slack;
      r.binding_block = b;
    }
  }
  r.max_nonpositive = -std::numeric_limits<double>::infinity();
  for (const auto& m : blocks.nonpositive) {
    if (m.cols() > 0) r.max_nonpositive = std::max(r.max_nonpositive, (v.transpose() * m).maxCoeff());
  }
  for (const auto& m : blocks.equal) {
    if (m.cols() > 0) r.equality_residual = std::max(r.equality_residual, (v.transpose() * m).cwiseAbs().maxCoeff());
  }
  return r;
}

namespace {

double metzler_tolerance(const Matrix& m) { return 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()); }

bool hurwitz_unchecked(const Matrix& m) { return spectral_abscissa(m) < -kHurwitzTolerance; }

/// Runs the max-margin LP and stores a witness when the margin reaches eps.
std::optional<Vector> certify(const PositivityBlocks& blocks, Certificate& cert, const std::vector<std::string>& names) {
  const auto mw = max_margin_positive(blocks);
  if (!mw || mw->margin < kStrictMargin * (1.0 - 1e-9)) {
    if (mw) cert.notes.push_back("optimal margin " + format_number(mw->margin) + " below eps");
    else cert.notes.push_back("constraint system infeasible");
    return std::nullopt;
  }
  const WitnessReplay r = replay_witness(mw->v, blocks);
  cert.min_slack = std::min(r.min_entry, r.min_strict_slack);
  cert.equality_residual = r.equality_residual;
  if (r.binding_block < names.size()) {
    cert.binding = r.min_entry < r.min_strict_slack ? "v > 0" : names[r.binding_block];
  }
  return mw->v;
}

bool has_delayed_bimolecular(const Network& net) {
  return std::any_of(net.reactions().begin(), net.reactions().end(),
                     [](const Reaction& r) { return r.delay && r.order() == 2; });
}

}  // namespace

bool hurwitz_metzler(const Matrix& m) {
  if (m.rows() != m.cols()) throw ShapeError("hurwitz_metzler: matrix is not square");
  if (!m.allFinite()) throw DomainError("hurwitz_metzler: non-finite entry");
  if (!is_metzler(m, metzler_tolerance(m))) throw DomainError("hurwitz_metzler: matrix is not Metzler");
  return hurwitz_unchecked(m);
}

bool hurwitz_metzler_lp(const Matrix& m) {
  if (m.rows() != m.cols()) throw ShapeError("hurwitz_metzler_lp: matrix is not square");
  if (!is_metzler(m, metzler_tolerance(m))) throw DomainError("hurwitz_metzler_lp: matrix is not Metzler");
  if (m.size() == 0) return true;
  PositivityBlocks blocks;
  blocks.strict.push_back(m);
  const auto mw = max_margin_positive(blocks);
  return mw && mw->margin > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
}

bool block_metzler_hurwitz(const Matrix& m11, const Matrix& m12, const Matrix& m21, const Matrix& m22) {
  if (m11.rows() != m11.cols() || m22.rows() != m22.cols() || m12.rows() != m11.rows() ||
      m12.cols() != m22.cols() || m21.rows() != m22.rows() || m21.cols() != m11.cols()) {
    throw ShapeError("block_metzler_hurwitz: inconsistent block shapes");
  }
  Matrix full(m11.rows() + m22.rows(), m11.cols() + m22.cols());
  full << m11, m12, m21, m22;
  if (!is_metzler(full, metzler_tolerance(full))) throw DomainError("block_metzler_hurwitz: assembled matrix is not Metzler");
  if (!hurwitz_unchecked(m22)) return false;
  if (m22.rows() == 0) return hurwitz_unchecked(m11);
  const Matrix schur = m11 - m12 * m22.partialPivLu().solve(m21);
  return hurwitz_unchecked(schur);
}

Certificate check_unimolecular(const Network& net) {
  if (!net.is_unimolecular()) {
    throw UsageError("check_unimolecular: network has bimolecular reactions; use check_bimolecular or check_bimolecular_delayed");
  }
  Certificate cert;
  Matrix a_df;
  bool stable = false;
  if (net.has_delays()) {
    // Decide on the augmented blocks; A_df is their Schur complement.
    const AugmentedNetwork aug = augment_network(net);
    const BlockMatrices& blk = aug.blocks;
    cert.detail = "unimolecular with delays: [[A, B], [C, H^T]] Hurwitz, equivalently A_df = A - B H^-T C Hurwitz";
    stable = block_metzler_hurwitz(blk.a, blk.b, blk.c, blk.ht);
    a_df = blk.a - blk.b * blk.ht.partialPivLu().solve(blk.c);
    const bool direct = hurwitz_unchecked(delay_free_view(net).a_df);
    if (direct != stable) cert.notes.push_back("delay-free drift disagrees with the augmented blocks");
    if (stable) {
      PositivityBlocks blocks;
      blocks.strict.push_back(aug.generator());
      Certificate scratch;
      cert.augmented_v = certify(blocks, scratch, {"augmented"});
      cert.notes.push_back(cert.augmented_v ? "augmented witness found on [[A, B], [C, H^T]]"
                                            : "no augmented witness at eps margin");
    }
  } else {
    cert.detail = "unimolecular: S_u W_u Hurwitz, equivalently v^T S_u W_u < 0 for some v > 0";
    a_df = delay_free_view(net).a_df;
    stable = hurwitz_metzler(a_df);
  }
  cert.notes.push_back("spectral abscissa of A_df " + format_number(spectral_abscissa(a_df)));
  if (!stable) {
    cert.verdict = Verdict::NotErgodic;
    cert.notes.push_back("drift matrix not Hurwitz; the condition is necessary and sufficient");
    return cert;
  }
  cert.verdict = Verdict::Ergodic;
  if (a_df.rows() > 0) {
    PositivityBlocks blocks;
    blocks.strict.push_back(a_df);
    cert.witness_v = certify(blocks, cert, {"v^T A_df < 0"});
  }
  cert.notes.push_back("stationary distribution light-tailed");
  return cert;
}

Certificate check_bimolecular(const Network& net, BimolecularOptions options) {
  if (net.is_unimolecular()) {
    Certificate cert = check_unimolecular(net);
    cert.notes.push_back("no bimolecular reactions: reduced to the unimolecular check");
    return cert;
  }
  if (has_delayed_bimolecular(net)) {
    throw UsageError("check_bimolecular: delayed bimolecular reactions present; use check_bimolecular_delayed");
  }
  const DelayFreeView view = delay_free_view(net);
  const StoichDecomposition dec = decompose(net.without_delays());
  Certificate cert;
  cert.detail = options.relaxed ? "bimolecular (relaxed): v^T A_df < 0 and v^T S_b,x <= 0"
                                : "bimolecular: v^T A_df < 0 and v^T S_b,x = 0";
  PositivityBlocks blocks;
  blocks.strict.push_back(view.a_df);
  if (options.relaxed) {
    blocks.nonpositive.push_back(dec.sb.cast<double>());
  } else {
    blocks.equal.push_back(dec.sb.cast<double>());
  }
  cert.witness_v = certify(blocks, cert, {"v^T A_df < 0"});
  if (!hurwitz_unchecked(view.a_df)) cert.notes.push_back("A_df not Hurwitz: v^T A_df < 0 is infeasible");
  if (cert.witness_v) {
    cert.verdict = Verdict::Ergodic;
    cert.notes.push_back(options.relaxed ? "relaxed mode: no light-tail claim" : "stationary distribution light-tailed");
  } else {
    cert.verdict = Verdict::NotCertified;
    cert.notes.push_back("condition is sufficient only; no claim of non-ergodicity");
  }
  return cert;
}

Certificate check_bimolecular_delayed(const Network& net) {
  if (!has_delayed_bimolecular(net)) {
    throw UsageError("check_bimolecular_delayed: no delayed bimolecular reaction; use check_bimolecular");
  }
  // Unimolecular delays do not affect the conditions: make them instantaneous.
  Network reduced(net.species());
  Network plain(net.species());
  std::vector<std::size_t> delayed;
  for (std::size_t k = 0; k < net.reaction_count(); ++k) {
    Reaction r = net.reactions()[k];
    if (r.delay && r.order() < 2) r.delay.reset();
    if (r.delay) {
      delayed.push_back(k);
    } else {
      plain.add_reaction(r);
    }
    reduced.add_reaction(std::move(r));
  }
  const auto d = static_cast<Eigen::Index>(net.species_count());
  const Matrix a = delay_free_view(plain).a_df;
  const Matrix sb = decompose(plain).sb.cast<double>();
  Matrix sbd(d, static_cast<Eigen::Index>(delayed.size()));
  for (std::size_t i = 0; i < delayed.size(); ++i) {
    sbd.col(static_cast<Eigen::Index>(i)) = net.stoichiometry(delayed[i]).cast<double>();
  }

  Certificate cert;
  cert.detail = "delayed bimolecular: v^T A < 0, v^T S_b = 0, v^T S_b^d < 0";
  PositivityBlocks blocks;
  blocks.strict = {a, sbd};
  blocks.equal = {sb};
  cert.witness_v = certify(blocks, cert, {"v^T A < 0", "v^T S_b^d < 0"});
  if (!hurwitz_unchecked(a)) cert.notes.push_back("A not Hurwitz: condition v^T A < 0 is infeasible");
  if (cert.witness_v) {
    cert.verdict = Verdict::Ergodic;
    cert.notes.push_back("stationary distribution light-tailed");
  } else {
    cert.verdict = Verdict::NotCertified;
    cert.notes.push_back("condition is sufficient only; no claim of non-ergodicity");
  }

  // Cross-check on the augmented statement with v_delta unrestricted in sign.
  const AugmentedNetwork aug = augment_network(reduced);
  if (aug.bimolecular) {
    const BimolecularDelayData& bd = *aug.bimolecular;
    const Eigen::Index w = bd.ht.rows();
    Matrix m = Matrix::Zero(d + w, d + w);
    m.topLeftCorner(d, d) = a;
    m.topRightCorner(d, w) = bd.bb;
    m.bottomRightCorner(w, w) = bd.ht;
    Matrix sb_pad = Matrix::Zero(d + w, sb.cols());
    sb_pad.topRows(d) = sb;
    PositivityBlocks aug_blocks;
    aug_blocks.strict = {m};
    aug_blocks.equal = {sb_pad, bd.sbi};
    aug_blocks.free_tail = static_cast<std::size_t>(w);
    Certificate scratch;
    cert.augmented_v = certify(aug_blocks, scratch, {"augmented"});
    const bool agree = cert.augmented_v.has_value() == cert.witness_v.has_value();
    cert.notes.push_back(std::string("augmented statement ") + (cert.augmented_v ? "feasible" : "infeasible") +
                         (agree ? " (agrees)" : " (disagrees with the reduced statement)"));
  }
  return cert;
}

Certificate check_network(const Network& net, BimolecularOptions options) {
  if (net.is_unimolecular()) return check_unimolecular(net);
  if (has_delayed_bimolecular(net)) return check_bimolecular_delayed(net);
  return check_bimolecular(net, options);
}

ReachabilityReport reachability_diagnostic(const Network& net, int bound, std::size_t max_states) {
  if (bound < 1) throw DomainError("reachability_diagnostic: bound must be positive");
  ReachabilityReport report;
  const Network plain = net.without_delays();
  const std::size_t d = plain.species_count();
  const auto side = static_cast<std::size_t>(bound) + 1;
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) {
    if (total > max_states / side) {
      report.warnings.push_back("truncated lattice too large; reachability not explored");
      return report;
    }
    total *= side;
  }
  report.explored = true;
  report.states = total;

  auto decode = [&](std::size_t idx) {
    State x(d);
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = static_cast<std::int64_t>(idx % side);
      idx /= side;
    }
    return x;
  };
  auto encode = [&](const State& x) -> std::optional<std::size_t> {
    std::size_t idx = 0;
    for (std::size_t i = d; i-- > 0;) {
      if (x[i] < 0 || x[i] > bound) return std::nullopt;
      idx = idx * side + static_cast<std::size_t>(x[i]);
    }
    return idx;
  };
  std::vector<Eigen::VectorXi> changes;
  for (std::size_t k = 0; k < plain.reaction_count(); ++k) changes.push_back(plain.stoichiometry(k));
  auto fires = [&](const State& x, std::size_t k) { return mass_action(plain.reactions()[k], x) > 0.0; };
  auto shifted = [&](State x, std::size_t k, int sign) {
    for (std::size_t i = 0; i < d; ++i) x[i] += sign * changes[k](static_cast<Eigen::Index>(i));
    return x;
  };

  std::vector<char> forward(total, 0), backward(total, 0);
  std::deque<std::size_t> queue{0};
  forward[0] = 1;
  while (!queue.empty()) {
    const State x = decode(queue.front());
    queue.pop_front();
    for (std::size_t k = 0; k < changes.size(); ++k) {
      if (!fires(x, k)) continue;
      const auto y = encode(shifted(x, k, 1));
      if (y && !forward[*y]) {
        forward[*y] = 1;
        queue.push_back(*y);
      }
    }
  }
  queue = {0};
  backward[0] = 1;
  while (!queue.empty()) {
    const State y = decode(queue.front());
    queue.pop_front();
    for (std::size_t k = 0; k < changes.size(); ++k) {
      const State x = shifted(y, k, -1);
      const auto xi = encode(x);
      if (xi && !backward[*xi] && fires(x, k)) {
        backward[*xi] = 1;
        queue.push_back(*xi);
      }
    }
  }
  for (std::size_t i = 0; i < total; ++i) {
    report.reachable_from_origin += forward[i] ? 1 : 0;
    report.returning_to_origin += (forward[i] && backward[i]) ? 1 : 0;
  }
  if (report.reachable_from_origin == 1) {
    report.warnings.push_back("the empty state has no outgoing transition inside the lattice");
  }
  if (report.returning_to_origin < report.reachable_from_origin) {
    report.warnings.push_back(std::to_string(report.reachable_from_origin - report.returning_to_origin) +
                              " states reachable from the empty state cannot return to it within the bound " +
                              std::to_string(bound));
  }
  return report;
}

std::string format_certificate(const Certificate& cert) {
  std::string out;
  out += "verdict: " + to_string(cert.verdict) + "\n";
  out += "statement: " + cert.detail + "\n";
  out += "epsilon: " + format_number(cert.epsilon) + "\n";
  if (cert.witness_v) {
    out += "witness_v: " + format_vector(*cert.witness_v) + "\n";
    out += "min_slack: " + format_number(cert.min_slack) + "\n";
    out += "equality_residual: " + format_number(cert.equality_residual) + "\n";
    if (!cert.binding.empty()) out += "binding: " + cert.binding + "\n";
  }
  if (cert.witness_w) out += "witness_w: " + format_vector(*cert.witness_w) + "\n";
  if (cert.augmented_v) out += "augmented_v: " + format_vector(*cert.augmented_v) + "\n";
  for (const auto& n : cert.notes) out += "note: " + n + "\n";
  return out;
}

}  // namespace phdelay
