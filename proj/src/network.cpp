#include "phdelay/network.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "phdelay/errors.hpp"

namespace phdelay {

namespace {

std::vector<Term> normalize_terms(std::vector<Term> terms) {
  std::map<std::size_t, int> merged;
  for (const auto& t : terms) merged[t.species] += t.count;
  std::vector<Term> out;
  for (const auto& [species, count] : merged) {
    if (count != 0) out.push_back({species, count});
  }
  return out;
}

int multiplicity(const std::vector<Term>& terms, std::size_t species) {
  for (const auto& t : terms) {
    if (t.species == species) return t.count;
  }
  return 0;
}

}  // namespace

int Reaction::order() const {
  int total = 0;
  for (const auto& t : reactants) total += t.count;
  return total;
}

Network::Network(std::vector<std::string> species) {
  for (auto& s : species) add_species(std::move(s));
}

std::size_t Network::add_species(std::string name) {
  if (name.empty()) throw DomainError("species name must be nonempty");
  if (find_species(name)) throw DomainError("duplicate species '" + name + "'");
  species_.push_back(std::move(name));
  return species_.size() - 1;
}

void Network::add_reaction(Reaction reaction) {
  for (const auto* side : {&reaction.reactants, &reaction.products}) {
    for (const auto& t : *side) {
      if (t.species >= species_.size()) throw DomainError("reaction references an undeclared species");
      if (t.count <= 0) throw DomainError("stoichiometric coefficients must be positive");
    }
  }
  reaction.reactants = normalize_terms(std::move(reaction.reactants));
  reaction.products = normalize_terms(std::move(reaction.products));
  if (reaction.order() > 2) throw DomainError("reaction order exceeds 2");
  if (!(reaction.rate > 0.0) || !std::isfinite(reaction.rate)) {
    throw DomainError("reaction rate must be positive");
  }
  reactions_.push_back(std::move(reaction));
}

std::optional<std::size_t> Network::find_species(std::string_view name) const {
  for (std::size_t i = 0; i < species_.size(); ++i) {
    if (species_[i] == name) return i;
  }
  return std::nullopt;
}

Eigen::VectorXi Network::stoichiometry(std::size_t k) const {
  Eigen::VectorXi z = Eigen::VectorXi::Zero(static_cast<Eigen::Index>(species_.size()));
  const auto& r = reactions_.at(k);
  for (const auto& t : r.products) z(static_cast<Eigen::Index>(t.species)) += t.count;
  for (const auto& t : r.reactants) z(static_cast<Eigen::Index>(t.species)) -= t.count;
  return z;
}

Eigen::MatrixXi Network::stoichiometric_matrix() const {
  Eigen::MatrixXi s(static_cast<Eigen::Index>(species_.size()), static_cast<Eigen::Index>(reactions_.size()));
  for (std::size_t k = 0; k < reactions_.size(); ++k) s.col(static_cast<Eigen::Index>(k)) = stoichiometry(k);
  return s;
}

bool Network::has_delays() const {
  return std::any_of(reactions_.begin(), reactions_.end(), [](const Reaction& r) { return r.delay.has_value(); });
}

bool Network::is_unimolecular() const {
  return std::all_of(reactions_.begin(), reactions_.end(), [](const Reaction& r) { return r.order() <= 1; });
}

Network Network::without_delays() const {
  Network out = *this;
  for (auto& r : out.reactions_) r.delay.reset();
  return out;
}

ReactionParts split_parts(const Reaction& reaction) {
  ReactionParts parts;
  for (const auto& t : reaction.reactants) {
    const int kept = std::min(t.count, multiplicity(reaction.products, t.species));
    if (kept > 0) parts.preserved.push_back({t.species, kept});
    if (t.count - kept > 0) parts.consumed.push_back({t.species, t.count - kept});
  }
  for (const auto& t : reaction.products) {
    const int kept = std::min(t.count, multiplicity(reaction.reactants, t.species));
    if (t.count - kept > 0) parts.produced.push_back({t.species, t.count - kept});
  }
  return parts;
}

// ---------------------------------------------------------------------------
// Text format

ParseError::ParseError(ParseErrorKind kind, std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      kind_(kind),
      line_(line),
      column_(column) {}

namespace {

bool is_name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

/// Cursor over one line with 1-based column reporting.
class Cursor {
 public:
  Cursor(std::string_view text, std::size_t line, std::size_t column0 = 1)
      : text_(text), line_(line), column0_(column0) {}

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool done() {
    skip_space();
    return pos_ >= text_.size();
  }
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  bool starts_with(std::string_view s) const { return text_.substr(pos_).starts_with(s); }
  void advance(std::size_t n = 1) { pos_ = std::min(pos_ + n, text_.size()); }
  std::size_t column() const { return column0_ + pos_; }
  std::size_t line() const { return line_; }
  std::size_t pos() const { return pos_; }
  std::string_view rest() const { return text_.substr(pos_); }

  std::string_view take_name() {
    const std::size_t start = pos_;
    if (!is_name_start(peek())) return {};
    while (pos_ < text_.size() && is_name_char(text_[pos_])) ++pos_;
    return text_.substr(start, pos_ - start);
  }
  std::string_view take_digits() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return text_.substr(start, pos_ - start);
  }
  /// Token up to whitespace (or end).
  std::string_view take_word() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return text_.substr(start, pos_ - start);
  }
  /// Balanced bracket group starting at the current '[' or '{'.
  std::string_view take_group(char open, char close) {
    const std::size_t start = pos_;
    int depth = 0;
    while (pos_ < text_.size()) {
      const char c = text_[pos_++];
      if (c == open) ++depth;
      if (c == close && --depth == 0) return text_.substr(start, pos_ - start);
    }
    return {};
  }

  [[noreturn]] void fail(ParseErrorKind kind, const std::string& msg) const {
    throw ParseError(kind, line_, column(), msg);
  }

 private:
  std::string_view text_;
  std::size_t line_;
  std::size_t column0_;
  std::size_t pos_ = 0;
};

double to_double(std::string_view s, const Cursor& at, ParseErrorKind kind) {
  double value = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || s.empty()) at.fail(kind, "expected a number, got '" + std::string(s) + "'");
  return value;
}

int to_int(std::string_view s, const Cursor& at, ParseErrorKind kind) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    at.fail(kind, "expected an integer, got '" + std::string(s) + "'");
  }
  return value;
}

/// "[1, 2.5 3]" -> {1, 2.5, 3}
std::vector<double> parse_number_list(std::string_view group, const Cursor& at) {
  if (group.size() < 2 || group.front() != '[' || group.back() != ']') {
    at.fail(ParseErrorKind::MalformedDelay, "expected a bracketed list");
  }
  std::vector<double> out;
  std::string_view body = group.substr(1, group.size() - 2);
  std::size_t i = 0;
  while (i < body.size()) {
    while (i < body.size() && (body[i] == ',' || std::isspace(static_cast<unsigned char>(body[i])))) ++i;
    const std::size_t start = i;
    while (i < body.size() && body[i] != ',' && !std::isspace(static_cast<unsigned char>(body[i]))) ++i;
    if (i > start) out.push_back(to_double(body.substr(start, i - start), at, ParseErrorKind::MalformedDelay));
  }
  return out;
}

/// "[[a,b],[c,d]]" -> rows
std::vector<std::vector<double>> parse_matrix(std::string_view group, const Cursor& at) {
  if (group.size() < 2 || group.front() != '[' || group.back() != ']') {
    at.fail(ParseErrorKind::MalformedDelay, "expected a bracketed matrix");
  }
  std::vector<std::vector<double>> rows;
  std::string_view body = group.substr(1, group.size() - 2);
  std::size_t i = 0;
  while (i < body.size()) {
    const char c = body[i];
    if (c == '[') {
      const std::size_t close = body.find(']', i);
      if (close == std::string_view::npos) at.fail(ParseErrorKind::MalformedDelay, "unterminated matrix row");
      rows.push_back(parse_number_list(body.substr(i, close - i + 1), at));
      i = close + 1;
    } else if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else {
      at.fail(ParseErrorKind::MalformedDelay, "unexpected character in matrix");
    }
  }
  return rows;
}

Delay parse_delay_body(std::string_view body, const Cursor& origin) {
  Cursor cur(body, origin.line(), origin.column());
  std::map<std::string, std::string, std::less<>> fields;
  while (!cur.done()) {
    const auto key = cur.take_name();
    if (key.empty() || cur.peek() != '=') cur.fail(ParseErrorKind::MalformedDelay, "expected key=value in delay block");
    cur.advance();
    std::string_view value = cur.peek() == '[' ? cur.take_group('[', ']') : cur.take_word();
    if (value.empty()) cur.fail(ParseErrorKind::MalformedDelay, "missing value for '" + std::string(key) + "'");
    if (!fields.emplace(std::string(key), std::string(value)).second) {
      cur.fail(ParseErrorKind::MalformedDelay, "repeated key '" + std::string(key) + "'");
    }
  }
  auto need = [&](std::string_view key) -> const std::string& {
    const auto it = fields.find(key);
    if (it == fields.end()) origin.fail(ParseErrorKind::MalformedDelay, "delay block lacks '" + std::string(key) + "'");
    return it->second;
  };
  auto consumed = std::vector<std::string>{"kind"};

  Realization realization = Realization::NonAbsorbing;
  if (const auto it = fields.find("realization"); it != fields.end()) {
    if (it->second == "nonabsorbing" || it->second == "non-absorbing") {
      realization = Realization::NonAbsorbing;
    } else if (it->second == "absorbing") {
      realization = Realization::Absorbing;
    } else {
      origin.fail(ParseErrorKind::MalformedDelay, "unknown realization '" + it->second + "'");
    }
    consumed.push_back("realization");
  }

  const std::string& kind = need("kind");
  auto build = [&]() -> PhaseType {
    if (kind == "erlang") {
      consumed.insert(consumed.end(), {"shape", "rate"});
      return erlang(to_int(need("shape"), origin, ParseErrorKind::MalformedDelay),
                    to_double(need("rate"), origin, ParseErrorKind::MalformedDelay));
    }
    if (kind == "exp" || kind == "exponential") {
      consumed.push_back("rate");
      return exponential(to_double(need("rate"), origin, ParseErrorKind::MalformedDelay));
    }
    if (kind == "hypoexp") {
      consumed.push_back("rates");
      return hypoexponential(parse_number_list(need("rates"), origin));
    }
    if (kind == "hypererlang") {
      consumed.insert(consumed.end(), {"weights", "shapes", "rates"});
      const auto weights = parse_number_list(need("weights"), origin);
      const auto shapes_raw = parse_number_list(need("shapes"), origin);
      const auto rates = parse_number_list(need("rates"), origin);
      std::vector<int> shapes;
      for (double s : shapes_raw) {
        if (s != std::floor(s)) origin.fail(ParseErrorKind::MalformedDelay, "hypererlang shapes must be integers");
        shapes.push_back(static_cast<int>(s));
      }
      return hyper_erlang(weights, shapes, rates);
    }
    if (kind == "raw") {
      consumed.insert(consumed.end(), {"alpha", "H"});
      const auto alpha = parse_number_list(need("alpha"), origin);
      const auto rows = parse_matrix(need("H"), origin);
      const auto m = static_cast<Eigen::Index>(alpha.size());
      if (static_cast<Eigen::Index>(rows.size()) != m) {
        origin.fail(ParseErrorKind::MalformedDelay, "H must be square and match alpha");
      }
      Matrix h(m, m);
      for (Eigen::Index i = 0; i < m; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != m) {
          origin.fail(ParseErrorKind::MalformedDelay, "H must be square and match alpha");
        }
        for (Eigen::Index j = 0; j < m; ++j) h(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
      return PhaseType(Eigen::Map<const RowVector>(alpha.data(), m), h);
    }
    origin.fail(ParseErrorKind::MalformedDelay, "unknown delay kind '" + kind + "'");
  };

  try {
    PhaseType law = build();
    for (const auto& [key, value] : fields) {
      if (std::find(consumed.begin(), consumed.end(), key) == consumed.end()) {
        origin.fail(ParseErrorKind::MalformedDelay, "unexpected key '" + key + "' for kind " + kind);
      }
    }
    return Delay{std::move(law), realization};
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    origin.fail(ParseErrorKind::MalformedDelay, std::string("invalid delay: ") + e.what());
  }
}

/// Parses "2 X + Y" style sides; stops before "->" or the first key=value.
std::vector<Term> parse_side(Cursor& cur, const Network& net, bool lhs) {
  std::vector<Term> terms;
  bool expect_term = true;
  bool empty_set = false;
  for (;;) {
    cur.skip_space();
    if (cur.rest().empty()) break;
    if (lhs && cur.starts_with("->")) break;
    if (!expect_term) {
      if (cur.peek() == '+') {
        cur.advance();
        expect_term = true;
        continue;
      }
      break;  // attributes follow
    }
    // Attribute start ends the right-hand side.
    {
      Cursor probe = cur;
      const auto name = probe.take_name();
      probe.skip_space();
      if (!name.empty() && probe.peek() == '=') {
        if (lhs) cur.fail(ParseErrorKind::Syntax, "missing '->'");
        break;
      }
    }
    const std::size_t column = cur.column();
    int count = 1;
    const auto digits = cur.take_digits();
    if (!digits.empty()) {
      count = to_int(digits, cur, ParseErrorKind::Syntax);
      cur.skip_space();
      if (count == 0) {
        if (!terms.empty() || empty_set) cur.fail(ParseErrorKind::Syntax, "'0' must stand alone");
        empty_set = true;
        expect_term = false;
        continue;
      }
    }
    if (empty_set) cur.fail(ParseErrorKind::Syntax, "'0' must stand alone");
    const auto name = cur.take_name();
    if (name.empty()) cur.fail(ParseErrorKind::Syntax, "expected a species name");
    const auto idx = net.find_species(name);
    if (!idx) throw ParseError(ParseErrorKind::UnknownSpecies, cur.line(), column, "unknown species '" + std::string(name) + "'");
    terms.push_back({*idx, count});
    expect_term = false;
  }
  if (expect_term) cur.fail(ParseErrorKind::Syntax, lhs ? "empty reactant side" : "empty product side");
  return terms;
}

void parse_reaction_line(Cursor& cur, Network& net) {
  Reaction r;
  const std::size_t start_column = cur.column();
  r.reactants = parse_side(cur, net, true);
  cur.skip_space();
  if (!cur.starts_with("->")) cur.fail(ParseErrorKind::Syntax, "expected '->'");
  cur.advance(2);
  r.products = parse_side(cur, net, false);

  bool have_rate = false;
  while (!cur.done()) {
    const std::size_t key_column = cur.column();
    const auto key = cur.take_name();
    cur.skip_space();
    if (key.empty() || cur.peek() != '=') cur.fail(ParseErrorKind::Syntax, "expected key=value");
    cur.advance();
    cur.skip_space();
    if (key == "rate") {
      const auto word = cur.take_word();
      r.rate = to_double(word, cur, ParseErrorKind::Syntax);
      if (!(r.rate > 0.0) || !std::isfinite(r.rate)) {
        throw ParseError(ParseErrorKind::NonpositiveRate, cur.line(), key_column, "rate must be positive");
      }
      have_rate = true;
    } else if (key == "delay") {
      if (cur.peek() != '{') cur.fail(ParseErrorKind::MalformedDelay, "delay block must be enclosed in braces");
      const Cursor at = cur;
      const auto group = cur.take_group('{', '}');
      if (group.empty()) cur.fail(ParseErrorKind::MalformedDelay, "unterminated delay block");
      r.delay = parse_delay_body(group.substr(1, group.size() - 2), at);
    } else {
      throw ParseError(ParseErrorKind::Syntax, cur.line(), key_column, "unknown attribute '" + std::string(key) + "'");
    }
  }
  if (!have_rate) cur.fail(ParseErrorKind::Syntax, "reaction lacks rate=");
  if (r.order() > 2) throw ParseError(ParseErrorKind::OrderExceeds2, cur.line(), start_column, "reaction order exceeds 2");
  net.add_reaction(std::move(r));
}

std::string strip_comment(std::string_view line) {
  int depth = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '{') ++depth;
    if (line[i] == '}') --depth;
    if (line[i] == '#' && depth == 0) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

std::string format_side(const Network& net, const std::vector<Term>& terms) {
  if (terms.empty()) return "0";
  std::string out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i > 0) out += " + ";
    if (terms[i].count != 1) out += std::to_string(terms[i].count) + " ";
    out += net.species()[terms[i].species];
  }
  return out;
}

}  // namespace

Network parse_network(std::string_view text) {
  Network net;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    ++line_no;
    std::string line = strip_comment(text.substr(pos, end - pos));
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    Cursor cur(line, line_no);
    if (cur.done()) {
      if (end == text.size()) break;
      continue;
    }
    if (cur.starts_with("[species]")) {
      cur.advance(9);
      while (!cur.done()) {
        const std::size_t column = cur.column();
        const auto name = cur.take_name();
        if (name.empty() || !(cur.pos() >= line.size() || std::isspace(static_cast<unsigned char>(cur.peek())))) {
          throw ParseError(ParseErrorKind::Syntax, line_no, column, "invalid species name");
        }
        if (net.find_species(name)) {
          throw ParseError(ParseErrorKind::DuplicateSpecies, line_no, column, "duplicate species '" + std::string(name) + "'");
        }
        net.add_species(std::string(name));
      }
    } else if (cur.starts_with("[reaction]")) {
      cur.advance(10);
      parse_reaction_line(cur, net);
    } else {
      cur.fail(ParseErrorKind::Syntax, "expected [species] or [reaction]");
    }
    if (end == text.size()) break;
  }
  return net;
}

Delay parse_delay_spec(std::string_view text) {
  std::string body(text);
  if (!body.empty() && body.front() == '{' && body.back() == '}') body = body.substr(1, body.size() - 2);
  const Cursor origin(body, 1);
  return parse_delay_body(body, origin);
}

std::string format_delay(const Delay& delay) {
  const PhaseType& ph = delay.law;
  std::string out = "{kind=raw alpha=[";
  for (Eigen::Index i = 0; i < ph.alpha().size(); ++i) {
    if (i > 0) out += ",";
    out += format_number(ph.alpha()(i));
  }
  out += "] H=[";
  const Matrix& h = ph.subgenerator();
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    if (i > 0) out += ",";
    out += "[";
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
      if (j > 0) out += ",";
      out += format_number(h(i, j));
    }
    out += "]";
  }
  out += "] realization=";
  out += delay.realization == Realization::Absorbing ? "absorbing" : "nonabsorbing";
  out += "}";
  return out;
}

std::string serialize(const Network& net) {
  std::string out = "[species]";
  for (const auto& s : net.species()) out += " " + s;
  out += "\n";
  for (const auto& r : net.reactions()) {
    out += "[reaction] " + format_side(net, r.reactants) + " -> " + format_side(net, r.products);
    out += " rate=" + format_number(r.rate);
    if (r.delay) out += " delay=" + format_delay(*r.delay);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matrices and propensities

Matrix StoichDecomposition::drift() const { return su.cast<double>() * wu; }

Vector StoichDecomposition::inflow() const {
  if (s0.cols() == 0) return Vector::Zero(s0.rows());
  return s0.cast<double>() * lambda0;
}

StoichDecomposition decompose(const Network& net) {
  StoichDecomposition out;
  const auto d = static_cast<Eigen::Index>(net.species_count());
  for (std::size_t k = 0; k < net.reaction_count(); ++k) {
    switch (net.reactions()[k].order()) {
      case 0: out.order0.push_back(k); break;
      case 1: out.order1.push_back(k); break;
      default: out.order2.push_back(k); break;
    }
  }
  auto columns = [&](const std::vector<std::size_t>& idx) {
    Eigen::MatrixXi s(d, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) s.col(static_cast<Eigen::Index>(c)) = net.stoichiometry(idx[c]);
    return s;
  };
  out.s0 = columns(out.order0);
  out.su = columns(out.order1);
  out.sb = columns(out.order2);

  out.lambda0.resize(static_cast<Eigen::Index>(out.order0.size()));
  for (std::size_t c = 0; c < out.order0.size(); ++c) {
    out.lambda0(static_cast<Eigen::Index>(c)) = net.reactions()[out.order0[c]].rate;
  }
  out.wu = Matrix::Zero(static_cast<Eigen::Index>(out.order1.size()), d);
  for (std::size_t c = 0; c < out.order1.size(); ++c) {
    const auto& r = net.reactions()[out.order1[c]];
    out.wu(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r.reactants.front().species)) = r.rate;
  }
  for (std::size_t k : out.order2) {
    const auto& r = net.reactions()[k];
    const std::size_t first = r.reactants.front().species;
    const std::size_t second = r.reactants.size() > 1 ? r.reactants[1].species : first;
    out.sb_reactants.push_back({first, second, r.rate});
  }
  return out;
}

double mass_action(const Reaction& reaction, std::span<const std::int64_t> x) {
  double a = reaction.rate;
  for (const auto& t : reaction.reactants) {
    const auto xi = static_cast<double>(x[t.species]);
    if (t.count == 1) {
      a *= xi;
    } else {
      a *= xi * (xi - 1.0);
    }
  }
  return a;
}

Vector propensity(const Network& net, std::span<const std::int64_t> x) {
  if (x.size() != net.species_count()) throw ShapeError("propensity: state length does not match species count");
  for (auto xi : x) {
    if (xi < 0) throw DomainError("propensity: negative state entry");
  }
  Vector a(static_cast<Eigen::Index>(net.reaction_count()));
  for (std::size_t k = 0; k < net.reaction_count(); ++k) {
    const auto& r = net.reactions()[k];
    bool leaves_lattice = false;
    for (const auto& t : r.reactants) {
      const int back = t.count - multiplicity(r.products, t.species);
      if (back > 0 && x[t.species] < back) leaves_lattice = true;
    }
    a(static_cast<Eigen::Index>(k)) = leaves_lattice ? 0.0 : std::max(mass_action(r, x), 0.0);
  }
  return a;
}

}  // namespace phdelay
