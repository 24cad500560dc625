#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "phdelay/linalg.hpp"
#include "phdelay/phasetype.hpp"

namespace phdelay {

/// Whether preserved reactants wait inside the delay line (absorbing) or stay
/// available while the products are in flight (non-absorbing).
enum class Realization { NonAbsorbing, Absorbing };

struct Delay {
  PhaseType law;
  Realization realization = Realization::NonAbsorbing;

  bool operator==(const Delay&) const = default;
};

/// One side of a reaction: species index and multiplicity.
struct Term {
  std::size_t species = 0;
  int count = 0;

  bool operator==(const Term&) const = default;
};

struct Reaction {
  std::vector<Term> reactants;
  std::vector<Term> products;
  double rate = 0.0;
  std::optional<Delay> delay;

  /// Total reactant multiplicity (mass-action order).
  int order() const;
  bool operator==(const Reaction&) const = default;
};

using State = std::vector<std::int64_t>;

/// Mass-action reaction network with optional phase-type delays.
///
/// Species order is declaration order and reaction order is insertion order;
/// every matrix extracted from a network follows those orders.
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<std::string> species);

  std::size_t add_species(std::string name);
  /// Appends a reaction after normalizing its terms (merged duplicates,
  /// sorted by species). Throws DomainError on invalid content.
  void add_reaction(Reaction reaction);

  const std::vector<std::string>& species() const { return species_; }
  const std::vector<Reaction>& reactions() const { return reactions_; }
  std::size_t species_count() const { return species_.size(); }
  std::size_t reaction_count() const { return reactions_.size(); }
  std::optional<std::size_t> find_species(std::string_view name) const;

  /// Net stoichiometric vector products - reactants of reaction k.
  Eigen::VectorXi stoichiometry(std::size_t k) const;
  /// d x K net stoichiometric matrix.
  Eigen::MatrixXi stoichiometric_matrix() const;

  bool has_delays() const;
  bool is_unimolecular() const;

  /// Copy with every delay removed (instantaneous reactions, same stoichiometry).
  Network without_delays() const;

  bool operator==(const Network&) const = default;

 private:
  std::vector<std::string> species_;
  std::vector<Reaction> reactions_;
};

/// Reaction multiset splits used by delay realizations: preserved part f1 =
/// reactants ∩ products, consumed part f2 = reactants - f1, produced part
/// g = products - f1.
struct ReactionParts {
  std::vector<Term> preserved;
  std::vector<Term> consumed;
  std::vector<Term> produced;
};
ReactionParts split_parts(const Reaction& reaction);

enum class ParseErrorKind {
  Syntax,
  UnknownSpecies,
  DuplicateSpecies,
  OrderExceeds2,
  NonpositiveRate,
  MalformedDelay,
};

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, std::size_t line, std::size_t column, const std::string& message);
  ParseErrorKind kind() const { return kind_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  ParseErrorKind kind_;
  std::size_t line_;
  std::size_t column_;
};

Network parse_network(std::string_view text);
std::string serialize(const Network& net);

/// Parses a bare delay block body, e.g. "kind=erlang shape=3 rate=6".
Delay parse_delay_spec(std::string_view text);
std::string format_delay(const Delay& delay);

/// Column partition of the stoichiometric matrix by reaction order.
struct StoichDecomposition {
  Eigen::MatrixXi s0;  ///< zeroth-order columns
  Eigen::MatrixXi su;  ///< first-order columns
  Eigen::MatrixXi sb;  ///< second-order columns
  Matrix wu;           ///< lambda_u(x) = wu * x, rows aligned with su columns
  Vector lambda0;      ///< zeroth-order rates, aligned with s0 columns
  struct Bimolecular {
    std::size_t first = 0;
    std::size_t second = 0;  ///< equal to first for homodimers
    double rate = 0.0;
  };
  std::vector<Bimolecular> sb_reactants;
  std::vector<std::size_t> order0, order1, order2;  ///< reaction indices per column

  /// su * wu: first-moment drift matrix of the unimolecular part.
  Matrix drift() const;
  /// s0 * lambda0: constant inflow of the first-moment equations.
  Vector inflow() const;
};

/// Partitions by order using net stoichiometry; delays are ignored.
StoichDecomposition decompose(const Network& net);

/// Mass-action propensities at state x. Homodimers use k x (x - 1).
/// Throws DomainError on negative entries or wrong length.
Vector propensity(const Network& net, std::span<const std::int64_t> x);

/// Propensity of a single reaction without the lattice guard.
double mass_action(const Reaction& reaction, std::span<const std::int64_t> x);

}  // namespace phdelay
