#include "phdelay/augment.hpp"

#include <charconv>

#include "phdelay/errors.hpp"

namespace phdelay {

namespace {

Eigen::VectorXi term_vector(const std::vector<Term>& terms, std::size_t d) {
  Eigen::VectorXi v = Eigen::VectorXi::Zero(static_cast<Eigen::Index>(d));
  for (const auto& t : terms) v(static_cast<Eigen::Index>(t.species)) += t.count;
  return v;
}

std::vector<Term> concat(std::vector<Term> a, const std::vector<Term>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

DelayLineFragment build_delay_line(const PhaseType& ph, std::size_t line_index) {
  DelayLineFragment line;
  const Matrix& h = ph.subgenerator();
  const auto m = static_cast<std::size_t>(h.rows());
  for (std::size_t i = 0; i < m; ++i) {
    line.species.push_back("D" + std::to_string(line_index + 1) + "." + std::to_string(i + 1));
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (ph.alpha()(ii) > 0.0) line.entries.push_back({i, ph.alpha()(ii)});
    for (std::size_t j = 0; j < m; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (i != j && h(ii, jj) > 0.0) line.conversions.push_back({i, j, h(ii, jj)});
    }
    if (ph.exit_rates()(ii) > 0.0) line.exits.push_back({i, ph.exit_rates()(ii)});
  }
  return line;
}

std::vector<RealizedReaction> realize_delayed_reaction(const Reaction& rxn, const DelayLineFragment& line,
                                                       std::size_t first_delay_species) {
  if (!rxn.delay) throw UsageError("realize_delayed_reaction: reaction has no delay");
  const ReactionParts parts = split_parts(rxn);
  const bool absorbing = rxn.delay->realization == Realization::Absorbing;
  auto delay_term = [&](std::size_t phase) { return Term{first_delay_species + phase, 1}; };

  std::vector<RealizedReaction> out;
  for (const auto& e : line.entries) {
    Reaction r;
    r.reactants = rxn.reactants;
    r.products = absorbing ? std::vector<Term>{} : parts.preserved;
    r.products.push_back(delay_term(e.phase));
    r.rate = rxn.rate * e.weight;
    out.push_back({std::move(r), ReactionRole::Entry, e.phase});
  }
  for (const auto& c : line.conversions) {
    Reaction r;
    r.reactants = {delay_term(c.from)};
    r.products = {delay_term(c.to)};
    r.rate = c.rate;
    out.push_back({std::move(r), ReactionRole::Internal, c.from});
  }
  for (const auto& x : line.exits) {
    Reaction r;
    r.reactants = {delay_term(x.phase)};
    r.products = absorbing ? concat(parts.preserved, parts.produced) : parts.produced;
    r.rate = x.rate;
    out.push_back({std::move(r), ReactionRole::Exit, x.phase});
  }
  return out;
}

Matrix StoichSplits::delay_free_drift() const {
  Matrix a = sx.cast<double>() * wx;
  if (win.rows() > 0) a += (sin_x + sout_x).cast<double>() * win;
  return a;
}

Vector StoichSplits::delay_free_inflow() const {
  Vector b = sx.cast<double>() * bx;
  if (bin.size() > 0) b += (sin_x + sout_x).cast<double>() * bin;
  return b;
}

Matrix AugmentedNetwork::generator() const {
  const auto d = blocks.a.rows();
  const auto n = blocks.ht.rows();
  Matrix g(d + n, d + n);
  g << blocks.a, blocks.b, blocks.c, blocks.ht;
  return g;
}

Vector AugmentedNetwork::offset() const {
  Vector o(blocks.b0.size() + blocks.bd.size());
  o << blocks.b0, blocks.bd;
  return o;
}

AugmentedNetwork augment_network(const Network& net) {
  AugmentedNetwork aug;
  aug.source = net;
  aug.base_species = net.species_count();
  const std::size_t d = net.species_count();
  const auto di = static_cast<Eigen::Index>(d);

  for (const auto& s : net.species()) aug.network.add_species(s);
  std::vector<DelayLineFragment> fragments;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < net.reaction_count(); ++k) {
    const auto& r = net.reactions()[k];
    if (r.order() == 2) aug.has_bimolecular = true;
    if (!r.delay) continue;
    const ReactionParts parts = split_parts(r);
    const bool absorbing = r.delay->realization == Realization::Absorbing;
    DelayLine line{.reaction = k,
                   .offset = offset,
                   .law = r.delay->law,
                   .realization = r.delay->realization,
                   .rate = r.rate,
                   .order = r.order(),
                   .input = std::nullopt,
                   .entry_change = -term_vector(absorbing ? r.reactants : parts.consumed, d),
                   .exit_change = term_vector(absorbing ? concat(parts.preserved, parts.produced) : parts.produced, d)};
    if (line.order == 1) line.input = r.reactants.front().species;
    if (line.order == 2) aug.bimolecular_delayed = true;
    fragments.push_back(build_delay_line(r.delay->law, aug.lines.size()));
    for (const auto& s : fragments.back().species) {
      aug.delay_species.push_back(s);
      aug.network.add_species(s);
    }
    offset += line.phases();
    aug.lines.push_back(std::move(line));
  }

  // Non-delayed reactions first, then each line's fragments in line order.
  for (std::size_t k = 0; k < net.reaction_count(); ++k) {
    const auto& r = net.reactions()[k];
    if (r.delay) continue;
    aug.network.add_reaction(r);
    aug.realized.push_back({r, ReactionRole::Plain, 0});
  }
  for (std::size_t j = 0; j < aug.lines.size(); ++j) {
    const auto& src = net.reactions()[aug.lines[j].reaction];
    for (auto& rr : realize_delayed_reaction(src, fragments[j], d + aug.lines[j].offset)) {
      aug.network.add_reaction(rr.reaction);
      aug.realized.push_back(std::move(rr));
    }
  }

  // Blocks from the generic first-moment system of the realized network.
  const StoichDecomposition dec = decompose(aug.network);
  const Matrix m = dec.drift();
  const Vector c = dec.inflow();
  const auto nd = static_cast<Eigen::Index>(offset);
  aug.blocks.a = m.topLeftCorner(di, di);
  aug.blocks.b = m.topRightCorner(di, nd);
  aug.blocks.c = m.bottomLeftCorner(nd, di);
  aug.blocks.ht = m.bottomRightCorner(nd, nd);
  aug.blocks.b0 = c.head(di);
  aug.blocks.bd = c.tail(nd);

  // Closed-form splits.
  StoichSplits& sp = aug.splits;
  std::vector<std::size_t> plain, bimol;
  for (std::size_t k = 0; k < net.reaction_count(); ++k) {
    const auto& r = net.reactions()[k];
    if (r.delay) continue;
    (r.order() <= 1 ? plain : bimol).push_back(k);
  }
  sp.sx.resize(di, static_cast<Eigen::Index>(plain.size()));
  sp.wx = Matrix::Zero(static_cast<Eigen::Index>(plain.size()), di);
  sp.bx = Vector::Zero(static_cast<Eigen::Index>(plain.size()));
  for (std::size_t c2 = 0; c2 < plain.size(); ++c2) {
    const auto col = static_cast<Eigen::Index>(c2);
    const auto& r = net.reactions()[plain[c2]];
    sp.sx.col(col) = net.stoichiometry(plain[c2]);
    if (r.order() == 1) {
      sp.wx(col, static_cast<Eigen::Index>(r.reactants.front().species)) = r.rate;
    } else {
      sp.bx(col) = r.rate;
    }
  }
  sp.sbx.resize(di, static_cast<Eigen::Index>(bimol.size()));
  for (std::size_t c2 = 0; c2 < bimol.size(); ++c2) sp.sbx.col(static_cast<Eigen::Index>(c2)) = net.stoichiometry(bimol[c2]);

  const auto n = static_cast<Eigen::Index>(aug.lines.size());
  sp.sin_x = Eigen::MatrixXi::Zero(di, n);
  sp.sin_d = Matrix::Zero(nd, n);
  sp.win = Matrix::Zero(n, di);
  sp.bin = Vector::Zero(n);
  sp.sout_x = Eigen::MatrixXi::Zero(di, n);
  sp.wout = Matrix::Zero(n, nd);
  std::vector<std::pair<Eigen::Index, double>> exits;
  std::vector<std::tuple<Eigen::Index, Eigen::Index, double>> conversions;
  for (Eigen::Index j = 0; j < n; ++j) {
    const DelayLine& line = aug.lines[static_cast<std::size_t>(j)];
    const auto off = static_cast<Eigen::Index>(line.offset);
    const auto mj = static_cast<Eigen::Index>(line.phases());
    sp.sin_x.col(j) = line.entry_change;
    sp.sin_d.block(off, j, mj, 1) = line.law.alpha().transpose();
    if (line.order == 1) sp.win(j, static_cast<Eigen::Index>(*line.input)) = line.rate;
    if (line.order == 0) sp.bin(j) = line.rate;
    sp.sout_x.col(j) = line.exit_change;
    sp.wout.block(j, off, 1, mj) = line.law.exit_rates().transpose();
    const Matrix& h = line.law.subgenerator();
    for (Eigen::Index p = 0; p < mj; ++p) {
      if (line.law.exit_rates()(p) > 0.0) exits.emplace_back(off + p, line.law.exit_rates()(p));
      for (Eigen::Index q = 0; q < mj; ++q) {
        if (p != q && h(p, q) > 0.0) conversions.emplace_back(off + p, off + q, h(p, q));
      }
    }
  }
  sp.sout_d = Matrix::Zero(nd, static_cast<Eigen::Index>(exits.size()));
  sp.wout_phase = Matrix::Zero(static_cast<Eigen::Index>(exits.size()), nd);
  for (std::size_t e = 0; e < exits.size(); ++e) {
    const auto col = static_cast<Eigen::Index>(e);
    sp.sout_d(exits[e].first, col) = -1.0;
    sp.wout_phase(col, exits[e].first) = exits[e].second;
  }
  sp.sd = Matrix::Zero(nd, static_cast<Eigen::Index>(conversions.size()));
  sp.wd = Matrix::Zero(static_cast<Eigen::Index>(conversions.size()), nd);
  for (std::size_t e = 0; e < conversions.size(); ++e) {
    const auto col = static_cast<Eigen::Index>(e);
    const auto [from, to, rate] = conversions[e];
    sp.sd(from, col) = -1.0;
    sp.sd(to, col) = 1.0;
    sp.wd(col, from) = rate;
  }

  if (aug.bimolecular_delayed) {
    BimolecularDelayData bd;
    bd.sb = sp.sbx;
    std::vector<Matrix> hts;
    Eigen::Index width = 0;
    Eigen::Index entries = 0;
    for (std::size_t j = 0; j < aug.lines.size(); ++j) {
      const DelayLine& line = aug.lines[j];
      if (line.order != 2) continue;
      bd.lines.push_back(j);
      const auto count = static_cast<std::size_t>((line.law.alpha().array() > 0.0).count());
      bd.entry_counts.push_back(count);
      hts.push_back(line.law.subgenerator().transpose());
      width += static_cast<Eigen::Index>(line.phases());
      entries += static_cast<Eigen::Index>(count);
    }
    bd.ht = block_diagonal(hts);
    bd.sbd.resize(di, static_cast<Eigen::Index>(bd.lines.size()));
    bd.sbi = Matrix::Zero(di + width, entries);
    bd.bb = Matrix::Zero(di, width);
    Eigen::Index local = 0;
    Eigen::Index col = 0;
    for (std::size_t k = 0; k < bd.lines.size(); ++k) {
      const DelayLine& line = aug.lines[bd.lines[k]];
      const auto mk = static_cast<Eigen::Index>(line.phases());
      bd.sbd.col(static_cast<Eigen::Index>(k)) = net.stoichiometry(line.reaction);
      for (Eigen::Index p = 0; p < mk; ++p) {
        if (line.law.alpha()(p) <= 0.0) continue;
        bd.sbi.block(0, col, di, 1) = line.entry_change.cast<double>();
        bd.sbi(di + local + p, col) = 1.0;
        ++col;
      }
      bd.bb.block(0, local, di, mk) = line.exit_change.cast<double>() * line.law.exit_rates().transpose();
      local += mk;
    }
    aug.bimolecular = std::move(bd);
  }
  return aug;
}

State lift_state(const AugmentedNetwork& aug, std::span<const std::int64_t> base) {
  if (base.size() == aug.network.species_count()) return State(base.begin(), base.end());
  if (base.size() != aug.base_species) throw ShapeError("lift_state: state length does not match base species");
  State full(aug.network.species_count(), 0);
  std::copy(base.begin(), base.end(), full.begin());
  return full;
}

DelayFreeView delay_free_view(const Network& net) {
  const Network stripped = net.without_delays();
  const StoichDecomposition dec = decompose(stripped);
  return DelayFreeView{stripped.stoichiometric_matrix(), dec.drift(), dec.inflow()};
}

namespace {

void write_block(std::string& out, const char* label, const Matrix& m) {
  out += std::string(label) + " rows=" + std::to_string(m.rows()) + " cols=" + std::to_string(m.cols()) + "\n";
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += " ";
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), m(i, j));
      out.append(buf, ptr);
    }
    out += "\n";
  }
}

}  // namespace

std::string format_blocks(const AugmentedNetwork& aug) {
  std::string out;
  write_block(out, "A", aug.blocks.a);
  write_block(out, "B", aug.blocks.b);
  write_block(out, "C", aug.blocks.c);
  write_block(out, "H^T", aug.blocks.ht);
  write_block(out, "b0", aug.blocks.b0);
  write_block(out, "bd", aug.blocks.bd);
  return out;
}

}  // namespace phdelay
