#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "phdelay/errors.hpp"
#include "phdelay/network.hpp"

using namespace phdelay;

namespace {

ParseErrorKind parse_kind(const std::string& text) {
  try {
    parse_network(text);
  } catch (const ParseError& e) {
    return e.kind();
  }
  FAIL("expected a parse error");
  return ParseErrorKind::Syntax;
}

}  // namespace

TEST_CASE("parse birth-death and gene expression") {
  const Network bd = parse_network("[species] X\n[reaction] 0 -> X rate=10\n[reaction] X -> 0 rate=1\n");
  CHECK(bd.species_count() == 1);
  CHECK(bd.reaction_count() == 2);
  CHECK(bd.reactions()[0].order() == 0);

  const Network ge = parse_network(
      "[species] X1 X2\n"
      "[reaction] 0 -> X1 rate=10   # transcription\n"
      "[reaction] X1 -> 0 rate=1\n"
      "[reaction] X1 -> X1 + X2 rate=5\n"
      "[reaction] X2 -> 0 rate=1\n");
  CHECK(ge.species_count() == 2);
  CHECK(ge.reaction_count() == 4);
  const ReactionParts parts = split_parts(ge.reactions()[2]);
  CHECK(parts.preserved == std::vector<Term>{{0, 1}});
  CHECK(parts.consumed.empty());
  CHECK(parts.produced == std::vector<Term>{{1, 1}});
}

TEST_CASE("parse delays of every kind") {
  const Network net = parse_network(
      "[species] A B\n"
      "[reaction] A -> B rate=2 delay={kind=erlang shape=3 rate=6 realization=absorbing}\n"
      "[reaction] B -> A rate=1 delay={kind=hypoexp rates=[1, 2]}\n"
      "[reaction] 0 -> A rate=1 delay={kind=hypererlang weights=[0.5,0.5] shapes=[1,2] rates=[1,3]}\n"
      "[reaction] A -> 0 rate=1 delay={kind=raw alpha=[1,0] H=[[-2,1],[0,-1]] realization=non-absorbing}\n"
      "[reaction] 0 -> B rate=1 delay={kind=exp rate=4}\n");
  REQUIRE(net.reaction_count() == 5);
  CHECK(net.reactions()[0].delay->realization == Realization::Absorbing);
  CHECK(net.reactions()[0].delay->law.phases() == 3);
  CHECK(net.reactions()[1].delay->realization == Realization::NonAbsorbing);
  CHECK(ph_mean(net.reactions()[1].delay->law) == doctest::Approx(1.5));
  CHECK(net.reactions()[2].delay->law.phases() == 3);
  CHECK(net.reactions()[3].delay->law.subgenerator()(0, 1) == 1.0);
  CHECK(ph_mean(net.reactions()[4].delay->law) == doctest::Approx(0.25));
}

TEST_CASE("parse diagnostics are distinct") {
  CHECK(parse_kind("[species] X\n[reaction] X -> Y rate=1\n") == ParseErrorKind::UnknownSpecies);
  CHECK(parse_kind("[species] X X\n") == ParseErrorKind::DuplicateSpecies);
  CHECK(parse_kind("[species] X Y\n[reaction] X + X + Y -> 0 rate=1\n") == ParseErrorKind::OrderExceeds2);
  CHECK(parse_kind("[species] X\n[reaction] X -> 0 rate=0\n") == ParseErrorKind::NonpositiveRate);
  CHECK(parse_kind("[species] X\n[reaction] X -> 0 rate=-1\n") == ParseErrorKind::NonpositiveRate);
  CHECK(parse_kind("[species] X\n[reaction] X -> 0 rate=1 delay={kind=raw alpha=[1] H=[[1]]}\n") ==
        ParseErrorKind::MalformedDelay);
  CHECK(parse_kind("[species] X\n[reaction] X -> 0 rate=1 delay={kind=erlang shape=2}\n") ==
        ParseErrorKind::MalformedDelay);
  CHECK(parse_kind("[species] X\n[reaction] X => 0 rate=1\n") == ParseErrorKind::Syntax);
  try {
    parse_network("[species] X\n\n[reaction] X -> Z rate=1\n");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() > 1);
  }
}

TEST_CASE("empty reaction list is valid") {
  const Network net = parse_network("[species] A B\n");
  CHECK(net.reaction_count() == 0);
  CHECK(parse_network(serialize(net)) == net);
}

TEST_CASE("serialize round-trips random networks to full precision") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    const Network net = corpus::random_unimolecular(rng);
    CHECK(parse_network(serialize(net)) == net);
  }
  const Network raw = parse_network(
      "[species] X\n[reaction] X -> 0 rate=0.1 delay={kind=raw alpha=[0.3,0.7] "
      "H=[[-1.2345678901234567,0.1],[0.2,-3.3333333333333335]]}\n");
  CHECK(parse_network(serialize(raw)) == raw);
}

TEST_CASE("decompose birth-death and gene expression") {
  const StoichDecomposition bd = decompose(corpus::birth_death(10.0, 1.0));
  CHECK(bd.s0 == Eigen::MatrixXi{{1}});
  CHECK(bd.su == Eigen::MatrixXi{{-1}});
  CHECK(bd.wu == Matrix{{1.0}});
  CHECK(bd.lambda0 == Vector::Constant(1, 10.0));

  const StoichDecomposition ge = decompose(corpus::gene_expression(10.0, 1.0, 5.0, 2.0));
  CHECK(ge.drift().isApprox(Matrix{{-1.0, 0.0}, {5.0, -2.0}}));
  CHECK(ge.s0.cols() + ge.su.cols() + ge.sb.cols() == 4);
}

TEST_CASE("decompose reproduces the total drift on a lattice grid") {
  const Network net = parse_network(
      "[species] A B C\n"
      "[reaction] 0 -> A rate=2\n"
      "[reaction] A -> B rate=1.5\n"
      "[reaction] A + B -> C rate=0.3\n"
      "[reaction] 2 C -> A rate=0.7\n"
      "[reaction] B -> B + C rate=1.1\n"
      "[reaction] C -> 0 rate=0.4\n");
  const StoichDecomposition dec = decompose(net);
  for (int a = 0; a < 5; ++a) {
    for (int b = 0; b < 5; ++b) {
      for (int c = 0; c < 5; ++c) {
        const State x{a, b, c};
        const Vector lam = propensity(net, x);
        const Vector total = net.stoichiometric_matrix().cast<double>() * lam;
        Vector xs(3);
        xs << a, b, c;
        Vector parts = dec.inflow() + dec.drift() * xs;
        for (std::size_t j = 0; j < dec.sb_reactants.size(); ++j) {
          const auto& br = dec.sb_reactants[j];
          const double pa = static_cast<double>(x[br.first]);
          const double pb = br.first == br.second ? pa - 1.0 : static_cast<double>(x[br.second]);
          parts += dec.sb.col(static_cast<Eigen::Index>(j)).cast<double>() * br.rate * std::max(0.0, pa * pb);
        }
        CHECK((parts - total).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("propensity guards and mass-action values") {
  const Network net = parse_network(
      "[species] X1 X2 X3\n"
      "[reaction] X1 -> 0 rate=2\n"
      "[reaction] X2 + X3 -> 2 X2 rate=1.5\n"
      "[reaction] 2 X1 -> 0 rate=3\n"
      "[reaction] 0 -> X3 rate=4\n");
  Vector p = propensity(net, State{0, 3, 2});
  CHECK(p(0) == 0.0);
  CHECK(p(1) == doctest::Approx(6 * 1.5));
  CHECK(p(2) == 0.0);
  CHECK(p(3) == 4.0);
  p = propensity(net, State{1, 0, 0});
  CHECK(p(2) == 0.0);
  p = propensity(net, State{3, 0, 0});
  CHECK(p(2) == doctest::Approx(3.0 * 3 * 2));
  CHECK_THROWS_AS(propensity(net, State{-1, 0, 0}), DomainError);
  CHECK_THROWS_AS(propensity(net, State{1, 0}), ShapeError);
}

TEST_CASE("propensity is zero exactly where firing leaves the lattice") {
  std::mt19937_64 rng(22);
  const Network net = parse_network(
      "[species] A B\n"
      "[reaction] A + B -> 0 rate=1\n"
      "[reaction] 2 A -> B rate=1\n"
      "[reaction] B -> A rate=1\n"
      "[reaction] A -> 2 A rate=1\n");
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      const State x{a, b};
      const Vector p = propensity(net, x);
      for (std::size_t k = 0; k < net.reaction_count(); ++k) {
        CHECK(p(static_cast<Eigen::Index>(k)) >= 0.0);
        // Firing must not need more molecules than available.
        bool enough = true;
        for (const auto& t : net.reactions()[k].reactants) enough &= x[t.species] >= t.count;
        CHECK((p(static_cast<Eigen::Index>(k)) > 0.0) == enough);
      }
    }
  }
}

TEST_CASE("network construction validates content") {
  Network net({"A"});
  CHECK_THROWS_AS(net.add_reaction({{{0, 3}}, {}, 1.0, std::nullopt}), DomainError);
  CHECK_THROWS_AS(net.add_reaction({{{0, 1}}, {}, 0.0, std::nullopt}), DomainError);
  CHECK_THROWS_AS(net.add_reaction({{{1, 1}}, {}, 1.0, std::nullopt}), DomainError);
  CHECK_THROWS(net.add_species("A"));
}
