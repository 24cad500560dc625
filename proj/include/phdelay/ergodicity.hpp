#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "phdelay/linalg.hpp"
#include "phdelay/lp.hpp"
#include "phdelay/network.hpp"

namespace phdelay {

enum class Verdict { Ergodic, NotCertified, NotErgodic };

std::string to_string(Verdict v);

struct Certificate {
  Verdict verdict = Verdict::NotCertified;
  std::optional<Vector> witness_v;
  std::optional<Vector> witness_w;
  /// Witness over (x, delta) for the augmented statement, when one was found.
  std::optional<Vector> augmented_v;
  std::string detail;  ///< statement that was checked
  double epsilon = kStrictMargin;
  double min_slack = 0.0;          ///< smallest slack over strict constraints and v entries
  double equality_residual = 0.0;  ///< largest |v^T e| over equality columns
  std::string binding;             ///< block with the smallest slack
  std::vector<std::string> notes;
};

/// Slack of a candidate witness against a set of constraint blocks.
struct WitnessReplay {
  double min_entry = 0.0;           ///< min_i v_i over the constrained entries
  double min_strict_slack = 0.0;    ///< min over strict columns of -v^T m
  double max_nonpositive = 0.0;     ///< max over nonpositive columns of v^T m
  double equality_residual = 0.0;   ///< max |v^T e|
  std::size_t binding_block = 0;    ///< strict block attaining min_strict_slack
};

WitnessReplay replay_witness(const Vector& v, const PositivityBlocks& blocks);

/// Spectral test on a Metzler matrix: abscissa < -1e-9.
bool hurwitz_metzler(const Matrix& m);

/// LP route for the same property: exists v > 0 with v^T M < 0. Decided on
/// the sign of the optimal normalized margin.
bool hurwitz_metzler_lp(const Matrix& m);

bool block_metzler_hurwitz(const Matrix& m11, const Matrix& m12, const Matrix& m21, const Matrix& m22);

Certificate check_unimolecular(const Network& net);

struct BimolecularOptions {
  bool relaxed = false;  ///< v^T S_b <= 0 instead of = 0
};

Certificate check_bimolecular(const Network& net, BimolecularOptions options = {});

/// Delayed unimolecular reactions are replaced by their instantaneous
/// counterparts before the check; delayed bimolecular ones are kept.
Certificate check_bimolecular_delayed(const Network& net);

/// Picks the applicable checker from the structure of the network.
Certificate check_network(const Network& net, BimolecularOptions options = {});

/// Brute-force communication check on the delay-free network over the box
/// {0..bound}^d. Only ever produces warnings.
struct ReachabilityReport {
  bool explored = false;  ///< false when the box was too large
  std::size_t states = 0;
  std::size_t reachable_from_origin = 0;
  std::size_t returning_to_origin = 0;
  std::vector<std::string> warnings;
};

ReachabilityReport reachability_diagnostic(const Network& net, int bound = 6, std::size_t max_states = 2'000'000);

std::string format_certificate(const Certificate& cert);

}  // namespace phdelay
