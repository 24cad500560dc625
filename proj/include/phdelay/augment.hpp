#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "phdelay/linalg.hpp"
#include "phdelay/network.hpp"
#include "phdelay/phasetype.hpp"

namespace phdelay {

/// Minimal conversion network realizing one PH delay: entries 0 -> D_i with
/// weight alpha_i, conversions D_i -> D_j at h_ij, exits D_i -> 0 at (-H 1)_i.
/// Zero weights and zero rates produce no reaction.
struct DelayLineFragment {
  struct Entry {
    std::size_t phase;
    double weight;
  };
  struct Conversion {
    std::size_t from;
    std::size_t to;
    double rate;
  };
  struct Exit {
    std::size_t phase;
    double rate;
  };
  std::vector<std::string> species;  ///< "D<line>.<phase>", both 1-based
  std::vector<Entry> entries;
  std::vector<Conversion> conversions;
  std::vector<Exit> exits;
};

DelayLineFragment build_delay_line(const PhaseType& ph, std::size_t line_index);

enum class ReactionRole { Plain, Entry, Internal, Exit };

struct RealizedReaction {
  Reaction reaction;
  ReactionRole role = ReactionRole::Plain;
  std::size_t phase = 0;  ///< entry/exit phase, or source phase of a conversion
};

/// Expands a delayed reaction through `line`, whose species start at
/// `first_delay_species` in the target network. Throws UsageError when the
/// reaction carries no delay.
std::vector<RealizedReaction> realize_delayed_reaction(const Reaction& rxn, const DelayLineFragment& line,
                                                       std::size_t first_delay_species);

struct DelayLine {
  std::size_t reaction = 0;  ///< index of the delayed reaction in the source network
  std::size_t offset = 0;    ///< first index of this line inside the delay block
  PhaseType law;
  Realization realization = Realization::NonAbsorbing;
  double rate = 0.0;
  int order = 0;                      ///< mass-action order of the delayed reaction
  std::optional<std::size_t> input;   ///< input species of a first-order line
  Eigen::VectorXi entry_change;       ///< base-species change when a molecule enters
  Eigen::VectorXi exit_change;        ///< base-species change when a molecule leaves

  std::size_t phases() const { return law.phases(); }
};

/// First-moment blocks of a unimolecular augmented network:
///   d/dt [E X; E D] = [[A, B], [C, Ht]] [E X; E D] + [b0; bd].
struct BlockMatrices {
  Matrix a, b, c, ht;
  Vector b0, bd;
};

/// Stoichiometric splits in line-aggregated form. Every delay line owns one
/// column of the entry/exit splits; exits and conversions are also kept per
/// phase so the delay block can be rebuilt.
struct StoichSplits {
  Eigen::MatrixXi sx;   ///< non-delayed zeroth/first-order reactions (d x Kx)
  Matrix wx;            ///< Kx x d, zero rows for zeroth-order columns
  Vector bx;            ///< Kx, zero for first-order columns
  Eigen::MatrixXi sbx;  ///< non-delayed bimolecular reactions (d x Kb)
  Eigen::MatrixXi sin_x;  ///< d x n
  Matrix sin_d;           ///< delay x n, diag(alpha_i^T)
  Matrix win;             ///< n x d, row j = r_j e_sigma(j)^T (zero unless first order)
  Vector bin;             ///< n, r_j for zeroth-order lines
  Eigen::MatrixXi sout_x;  ///< d x n
  Matrix wout;             ///< n x delay, -diag(1^T H_i^T)
  Matrix sout_d;           ///< delay x (#exits), per-phase exit columns
  Matrix wout_phase;       ///< (#exits) x delay
  Matrix sd;               ///< delay x (#conversions)
  Matrix wd;               ///< (#conversions) x delay

  /// S_x W_x + (S_in,x + S_out,x) W_in.
  Matrix delay_free_drift() const;
  /// S_x b_x + (S_in,x + S_out,x) b_in.
  Vector delay_free_inflow() const;
};

/// Data for delayed bimolecular reactions (lines whose input is second order).
struct BimolecularDelayData {
  std::vector<std::size_t> lines;         ///< indices into AugmentedNetwork::lines
  std::vector<std::size_t> entry_counts;  ///< nonzero alpha entries per line
  Eigen::MatrixXi sb;    ///< non-delayed bimolecular stoichiometry (d x Kb)
  Eigen::MatrixXi sbd;   ///< net stoichiometry of delayed bimolecular reactions
  Matrix sbi;            ///< (d + sum d_k) x sum entries: entry x-change over J_i^k
  Matrix bb;             ///< d x sum d_k: exit_change 1^T Lambda_k^o per line
  Matrix ht;             ///< blockdiag(H_k)^T over these lines
};

struct AugmentedNetwork {
  Network source;   ///< the delayed network as given
  Network network;  ///< realized delay-free network on X ∪ D
  std::size_t base_species = 0;
  std::vector<std::string> delay_species;
  std::vector<DelayLine> lines;
  std::vector<RealizedReaction> realized;  ///< parallel to network.reactions()
  BlockMatrices blocks;
  StoichSplits splits;
  bool has_bimolecular = false;
  bool bimolecular_delayed = false;
  std::optional<BimolecularDelayData> bimolecular;

  std::size_t delay_dimension() const { return delay_species.size(); }
  /// [[A, B], [C, Ht]]
  Matrix generator() const;
  /// [b0; bd]
  Vector offset() const;
};

AugmentedNetwork augment_network(const Network& net);

/// Pads a base-species state with empty delay lines.
State lift_state(const AugmentedNetwork& aug, std::span<const std::int64_t> base);

struct DelayFreeView {
  Eigen::MatrixXi s_df;
  Matrix a_df;
  Vector b_df;
};

DelayFreeView delay_free_view(const Network& net);

/// Plain-text dump of the labeled blocks A, B, C, H^T, b0, bd (row-major).
std::string format_blocks(const AugmentedNetwork& aug);

}  // namespace phdelay
