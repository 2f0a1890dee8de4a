#include "mjpb/model_dsl.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>

namespace mjpb {

namespace {

struct Token {
  enum class Kind { Ident, Number, Punct, String, End };
  Kind kind;
  std::string text;
  double number = 0.0;
  int line = 0, col = 0;
};

class Lexer {
 public:
  Lexer(const std::string& line, int line_no) : s_(line), line_no_(line_no) { advance(); }

  const Token& peek() const { return tok_; }

  Token next() {
    Token t = tok_;
    advance();
    return t;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(line_no_, tok_.col, msg);
  }

  Token expect_ident(const std::string& what) {
    if (tok_.kind != Token::Kind::Ident) fail("expected " + what);
    return next();
  }

  double expect_number(const std::string& what) {
    if (tok_.kind != Token::Kind::Number) fail("expected " + what);
    return next().number;
  }

  void expect_punct(const std::string& p) {
    if (tok_.kind != Token::Kind::Punct || tok_.text != p) fail("expected '" + p + "'");
    next();
  }

  bool accept_punct(const std::string& p) {
    if (tok_.kind == Token::Kind::Punct && tok_.text == p) {
      next();
      return true;
    }
    return false;
  }

  bool at_end() const { return tok_.kind == Token::Kind::End; }

  void expect_end() {
    if (!at_end()) fail("unexpected trailing input '" + tok_.text + "'");
  }

 private:
  void advance() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    tok_.line = line_no_;
    tok_.col = static_cast<int>(pos_) + 1;
    if (pos_ >= s_.size() || s_[pos_] == '#') {
      tok_ = {Token::Kind::End, "", 0.0, line_no_, tok_.col};
      return;
    }
    const char c = s_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
              s_[pos_] == '.'))
        ++pos_;
      tok_.kind = Token::Kind::Ident;
      tok_.text = s_.substr(start, pos_ - start);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos_ + 1 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])))) {
      size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.'))
        ++pos_;
      if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
        size_t mark = pos_++;
        if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
        if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
          while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        } else {
          pos_ = mark;  // 'e' belongs to the next token
        }
      }
      tok_.kind = Token::Kind::Number;
      tok_.text = s_.substr(start, pos_ - start);
      tok_.number = std::strtod(tok_.text.c_str(), nullptr);
      return;
    }
    if (c == '"') {
      size_t close = s_.find('"', pos_ + 1);
      if (close == std::string::npos) throw ParseError(line_no_, tok_.col, "unterminated string");
      tok_.kind = Token::Kind::String;
      tok_.text = s_.substr(pos_ + 1, close - pos_ - 1);
      pos_ = close + 1;
      return;
    }
    if (c == '-' && pos_ + 1 < s_.size() && s_[pos_ + 1] == '>') {
      tok_ = {Token::Kind::Punct, "->", 0.0, line_no_, tok_.col};
      pos_ += 2;
      return;
    }
    tok_ = {Token::Kind::Punct, std::string(1, c), 0.0, line_no_, tok_.col};
    ++pos_;
  }

  std::string s_;
  size_t pos_ = 0;
  int line_no_;
  Token tok_;
};

// Arithmetic over numbers and previously defined parameters, evaluated at
// parse time.
class ExprParser {
 public:
  ExprParser(Lexer& lex, const std::map<std::string, double>& params)
      : lex_(lex), params_(params) {}

  double parse() { return parse_sum(); }

 private:
  double parse_sum() {
    double v = parse_product();
    while (true) {
      if (lex_.accept_punct("+"))
        v += parse_product();
      else if (lex_.accept_punct("-"))
        v -= parse_product();
      else
        return v;
    }
  }

  double parse_product() {
    double v = parse_atom();
    while (true) {
      if (lex_.accept_punct("*"))
        v *= parse_atom();
      else if (lex_.accept_punct("/"))
        v /= parse_atom();
      else
        return v;
    }
  }

  double parse_atom() {
    if (lex_.accept_punct("-")) return -parse_atom();
    if (lex_.accept_punct("(")) {
      double v = parse_sum();
      lex_.expect_punct(")");
      return v;
    }
    if (lex_.peek().kind == Token::Kind::Number) return lex_.next().number;
    if (lex_.peek().kind == Token::Kind::Ident) {
      Token t = lex_.next();
      auto it = params_.find(t.text);
      if (it == params_.end())
        throw ParseError(t.line, t.col, "unknown parameter '" + t.text + "'");
      return it->second;
    }
    lex_.fail("expected number, parameter, or '('");
  }

  Lexer& lex_;
  const std::map<std::string, double>& params_;
};

long long to_int(Lexer& lex, double v, const std::string& what) {
  const long long i = static_cast<long long>(std::llround(v));
  if (std::fabs(v - static_cast<double>(i)) > 1e-9) lex.fail(what + " must be an integer");
  return i;
}

struct Parser {
  std::vector<std::string> lines;
  ReactionNetwork network;
  std::optional<InitialSpec> initial;
  std::optional<TerminalSpec> terminal;
  double horizon = 0.0;
  RefinementOptions options;
  bool saw_species = false;

  int species_index(Lexer& lex, const Token& t) const {
    const int idx = network.species_index(t.text);
    if (idx < 0) throw ParseError(t.line, t.col, "unknown species '" + t.text + "'");
    return idx;
  }

  StateVec parse_state_tuple(Lexer& lex) {
    lex.expect_punct("(");
    StateVec v;
    if (!lex.accept_punct(")")) {
      do {
        v.push_back(to_int(lex, lex.expect_number("integer"), "state component"));
      } while (lex.accept_punct(","));
      lex.expect_punct(")");
    }
    if (v.size() != static_cast<size_t>(network.n_species()))
      lex.fail("state tuple has " + std::to_string(v.size()) + " components, expected " +
               std::to_string(network.n_species()));
    for (long long x : v)
      if (x < 0) lex.fail("state components must be nonnegative");
    return v;
  }

  // <term>+ joined by '+', or the single term '0'.
  StateVec parse_side(Lexer& lex) {
    StateVec side(network.n_species(), 0);
    if (lex.peek().kind == Token::Kind::Number && lex.peek().text == "0") {
      lex.next();
      return side;
    }
    do {
      const long long count = to_int(lex, lex.expect_number("stoichiometric coefficient"),
                                     "stoichiometric coefficient");
      if (count < 0) lex.fail("stoichiometric coefficient must be nonnegative");
      Token sp = lex.expect_ident("species name");
      side[species_index(lex, sp)] += count;
    } while (lex.accept_punct("+"));
    return side;
  }

  void parse_reaction(Lexer& lex) {
    Token name = lex.expect_ident("reaction name");
    lex.expect_punct(":");
    StateVec loss = parse_side(lex);
    lex.expect_punct("->");
    StateVec gain = parse_side(lex);
    lex.expect_punct("@");
    Token kind = lex.expect_ident("propensity kind");
    PropensitySpec spec;
    if (kind.text == "mass_action") {
      lex.expect_punct("(");
      const double c = ExprParser(lex, network.parameters).parse();
      lex.expect_punct(")");
      if (!(c > 0)) throw ParseError(kind.line, kind.col, "mass_action rate must be positive");
      spec = PropensitySpec::mass_action(c, loss);
    } else if (kind.text == "hill") {
      lex.expect_punct("(");
      const double rho = ExprParser(lex, network.parameters).parse();
      lex.expect_punct(",");
      Token sp = lex.expect_ident("species name");
      lex.expect_punct(")");
      if (!(rho > 0)) throw ParseError(kind.line, kind.col, "hill numerator must be positive");
      spec = PropensitySpec::hill(rho, species_index(lex, sp), loss);
    } else if (kind.text == "custom") {
      lex.expect_punct("(");
      const double pre = ExprParser(lex, network.parameters).parse();
      std::vector<PropensityFactor> factors(network.n_species());
      while (lex.accept_punct(",")) {
        Token sp = lex.expect_ident("species name");
        const int idx = species_index(lex, sp);
        lex.expect_punct(":");
        Token fkind = lex.expect_ident("factor kind (binom or recip)");
        lex.expect_punct("(");
        if (fkind.text == "binom") {
          const int k = static_cast<int>(to_int(lex, lex.expect_number("order"), "binom order"));
          if (k < 0) lex.fail("binom order must be >= 0");
          factors[idx] = {PropensityFactor::Kind::Binomial, k, 0.0};
        } else if (fkind.text == "recip") {
          const double off = ExprParser(lex, network.parameters).parse();
          if (!(off > 0)) lex.fail("recip offset must be positive");
          factors[idx] = {PropensityFactor::Kind::Reciprocal, 0, off};
        } else {
          throw ParseError(fkind.line, fkind.col, "unknown factor kind '" + fkind.text + "'");
        }
        lex.expect_punct(")");
      }
      lex.expect_punct(")");
      if (!(pre > 0)) throw ParseError(kind.line, kind.col, "custom prefactor must be positive");
      spec = PropensitySpec::custom(pre, std::move(factors), loss);
    } else {
      throw ParseError(kind.line, kind.col,
                       "unknown propensity kind '" + kind.text +
                           "' (expected mass_action, hill, or custom)");
    }
    lex.expect_end();
    try {
      network.reactions.push_back(Reaction::make(name.text, loss, gain, std::move(spec)));
    } catch (const std::invalid_argument& e) {
      throw ParseError(name.line, name.col, e.what());
    }
  }

  std::vector<PredicateClause> parse_predicate(const std::string& text, int line_no) {
    Lexer lex(text, line_no);
    std::vector<PredicateClause> clauses;
    while (true) {
      Token sp = lex.expect_ident("species name");
      PredicateClause cl;
      cl.species = species_index(lex, sp);
      if (lex.accept_punct(">")) {
        cl.cmp = lex.accept_punct("=") ? PredicateClause::Cmp::Ge : PredicateClause::Cmp::Gt;
      } else if (lex.accept_punct("<")) {
        cl.cmp = lex.accept_punct("=") ? PredicateClause::Cmp::Le : PredicateClause::Cmp::Lt;
      } else if (lex.accept_punct("=")) {
        lex.expect_punct("=");
        cl.cmp = PredicateClause::Cmp::Eq;
      } else {
        lex.fail("expected comparison operator");
      }
      cl.threshold = to_int(lex, lex.expect_number("threshold"), "threshold");
      clauses.push_back(cl);
      if (lex.at_end()) break;
      Token conj = lex.expect_ident("'and'");
      if (conj.text != "and") throw ParseError(conj.line, conj.col, "expected 'and'");
    }
    return clauses;
  }

  void parse_terminal(Lexer& lex, int line_no) {
    TerminalSpec t;
    Token kind = lex.expect_ident("terminal kind (point, pred, or observe)");
    if (kind.text == "point") {
      t.kind = TerminalSpec::Kind::Point;
      t.point = parse_state_tuple(lex);
    } else if (kind.text == "pred") {
      if (lex.peek().kind != Token::Kind::String) lex.fail("expected quoted predicate");
      t.kind = TerminalSpec::Kind::Predicate;
      t.predicate_text = lex.next().text;
      t.predicate = parse_predicate(t.predicate_text, line_no);
    } else if (kind.text == "observe") {
      t.kind = TerminalSpec::Kind::Observe;
      Token lname = lex.expect_ident("likelihood name");
      if (lname.text != "binary_test")
        throw ParseError(lname.line, lname.col, "unknown likelihood '" + lname.text + "'");
      t.observe.likelihood_name = lname.text;
      lex.expect_punct("(");
      bool saw_sens = false, saw_fpr = false, saw_obs = false, saw_species = false;
      do {
        Token key = lex.expect_ident("argument name");
        lex.expect_punct("=");
        if (key.text == "sensitivity") {
          t.observe.sensitivity = ExprParser(lex, network.parameters).parse();
          saw_sens = true;
        } else if (key.text == "fpr") {
          t.observe.fpr = ExprParser(lex, network.parameters).parse();
          saw_fpr = true;
        } else if (key.text == "observed") {
          t.observe.observed = to_int(lex, lex.expect_number("count"), "observed");
          saw_obs = true;
        } else if (key.text == "species") {
          t.observe.species = species_index(lex, lex.expect_ident("species name"));
          saw_species = true;
        } else if (key.text == "total") {
          t.observe.total = to_int(lex, lex.expect_number("count"), "total");
        } else {
          throw ParseError(key.line, key.col, "unknown argument '" + key.text + "'");
        }
      } while (lex.accept_punct(","));
      lex.expect_punct(")");
      if (!saw_sens || !saw_fpr || !saw_obs || !saw_species)
        lex.fail("binary_test requires sensitivity, fpr, observed, and species");
      if (t.observe.sensitivity < 0 || t.observe.sensitivity > 1 || t.observe.fpr < 0 ||
          t.observe.fpr > 1)
        lex.fail("sensitivity and fpr must lie in [0, 1]");
    } else {
      throw ParseError(kind.line, kind.col, "unknown terminal kind '" + kind.text + "'");
    }
    Token at = lex.expect_ident("'at'");
    if (at.text != "at") throw ParseError(at.line, at.col, "expected 'at'");
    horizon = ExprParser(lex, network.parameters).parse();
    if (!(horizon > 0)) lex.fail("horizon must be positive");
    lex.expect_end();
    terminal = std::move(t);
  }

  void parse_options(Lexer& lex) {
    while (!lex.at_end()) {
      Token key = lex.expect_ident("option name");
      lex.expect_punct("=");
      if (key.text == "delta") {
        options.delta = ExprParser(lex, network.parameters).parse();
        if (!(options.delta > 0 && options.delta < 1))
          lex.fail("delta must lie in (0, 1)");
      } else if (key.text == "m") {
        options.grid_exponent =
            static_cast<int>(to_int(lex, lex.expect_number("integer"), "m"));
        if (options.grid_exponent < 0) lex.fail("m must be >= 0");
      } else if (key.text == "time_points") {
        options.time_points =
            static_cast<int>(to_int(lex, lex.expect_number("integer"), "time_points"));
        if (options.time_points < 2) lex.fail("time_points must be >= 2");
      } else if (key.text == "rtol") {
        options.rtol = ExprParser(lex, network.parameters).parse();
        if (!(options.rtol > 0)) lex.fail("rtol must be positive");
      } else if (key.text == "atol") {
        options.atol = ExprParser(lex, network.parameters).parse();
        if (!(options.atol > 0)) lex.fail("atol must be positive");
      } else if (key.text == "unlumped") {
        options.unlumped_dims.clear();
        if (lex.accept_punct("-")) {
          // '-' denotes the empty list
        } else {
          do {
            options.unlumped_dims.push_back(
                species_index(lex, lex.expect_ident("species name")));
          } while (lex.accept_punct(","));
        }
      } else if (key.text == "bounds") {
        options.bounds = parse_state_tuple(lex);
      } else {
        throw ParseError(key.line, key.col, "unknown option '" + key.text + "'");
      }
    }
  }

  ModelDocument run(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    bool in_table = false;
    InitialSpec table_init;
    table_init.kind = InitialSpec::Kind::Table;

    while (std::getline(in, raw)) {
      ++line_no;
      Lexer lex(raw, line_no);
      if (lex.at_end()) continue;

      if (in_table) {
        if (lex.peek().kind == Token::Kind::Ident && lex.peek().text == "end") {
          lex.next();
          lex.expect_end();
          in_table = false;
          initial = table_init;
          continue;
        }
        StateVec st = parse_state_tuple(lex);
        const double p = ExprParser(lex, network.parameters).parse();
        lex.expect_end();
        if (!(p >= 0)) lex.fail("probabilities must be nonnegative");
        table_init.table.emplace_back(std::move(st), p);
        continue;
      }

      Token head = lex.expect_ident("directive");
      if (head.text == "species") {
        if (saw_species) throw ParseError(head.line, head.col, "duplicate species line");
        saw_species = true;
        while (!lex.at_end()) {
          Token sp = lex.expect_ident("species name");
          if (network.species_index(sp.text) >= 0)
            throw ParseError(sp.line, sp.col, "duplicate species '" + sp.text + "'");
          network.species.push_back({sp.text, network.n_species()});
        }
        if (network.species.empty()) lex.fail("species line declares no species");
      } else if (head.text == "param") {
        Token name = lex.expect_ident("parameter name");
        lex.expect_punct("=");
        const double v = ExprParser(lex, network.parameters).parse();
        lex.expect_end();
        if (network.parameters.count(name.text))
          throw ParseError(name.line, name.col, "duplicate parameter '" + name.text + "'");
        network.parameters[name.text] = v;
      } else if (head.text == "reaction") {
        if (!saw_species) throw ParseError(head.line, head.col, "species must be declared first");
        parse_reaction(lex);
      } else if (head.text == "init") {
        Token kind = lex.expect_ident("'point' or 'table'");
        if (kind.text == "point") {
          InitialSpec spec;
          spec.kind = InitialSpec::Kind::Point;
          spec.point = parse_state_tuple(lex);
          lex.expect_end();
          initial = std::move(spec);
        } else if (kind.text == "table") {
          lex.expect_end();
          in_table = true;
          table_init.table.clear();
        } else {
          throw ParseError(kind.line, kind.col, "expected 'point' or 'table'");
        }
      } else if (head.text == "terminal") {
        parse_terminal(lex, line_no);
      } else if (head.text == "options") {
        parse_options(lex);
      } else {
        throw ParseError(head.line, head.col, "unknown directive '" + head.text + "'");
      }
    }

    if (in_table) throw ParseError(line_no, 1, "init table not closed with 'end'");
    if (!saw_species) throw ParseError(line_no, 1, "missing species declaration");
    if (network.reactions.empty())
      throw ParseError(line_no, 1, "model must declare at least one reaction");
    if (!initial) throw ParseError(line_no, 1, "missing init declaration");
    if (!terminal) throw ParseError(line_no, 1, "missing terminal declaration");
    if (options.bounds.empty())
      throw ParseError(line_no, 1, "options must declare bounds=(...)");

    if (initial->kind == InitialSpec::Kind::Table) {
      double total = 0.0;
      for (const auto& [st, p] : initial->table) total += p;
      if (std::fabs(total - 1.0) > 1e-12)
        throw ParseError(line_no, 1, "initial distribution sums to " + std::to_string(total) +
                                         ", expected 1");
    }
    network.validate();

    ModelDocument doc;
    doc.network = std::move(network);
    doc.initial = std::move(*initial);
    doc.terminal = std::move(*terminal);
    doc.horizon = horizon;
    doc.options = std::move(options);
    return doc;
  }
};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_tuple(const StateVec& v) {
  std::string s = "(";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s + ")";
}

std::string render_side(const ReactionNetwork& net, const StateVec& side) {
  std::string s;
  for (size_t d = 0; d < side.size(); ++d) {
    if (side[d] == 0) continue;
    if (!s.empty()) s += " + ";
    s += std::to_string(side[d]) + " " + net.species[d].name;
  }
  return s.empty() ? "0" : s;
}

}  // namespace

ModelDocument parse_model(const std::string& text) { return Parser{}.run(text); }

std::string render_model(const ModelDocument& doc) {
  const auto& net = doc.network;
  std::ostringstream out;
  out << "species";
  for (const auto& s : net.species) out << ' ' << s.name;
  out << '\n';
  for (const auto& [name, value] : net.parameters)
    out << "param " << name << " = " << fmt_double(value) << '\n';

  for (const auto& r : net.reactions) {
    out << "reaction " << r.name << ": " << render_side(net, r.loss) << " -> "
        << render_side(net, r.gain) << " @ ";
    const auto& p = r.propensity;
    switch (p.kind) {
      case PropensitySpec::Kind::MassAction:
        out << "mass_action(" << fmt_double(p.prefactor) << ")";
        break;
      case PropensitySpec::Kind::Hill: {
        int dim = 0;
        for (size_t d = 0; d < p.factors.size(); ++d)
          if (p.factors[d].kind == PropensityFactor::Kind::Reciprocal) dim = static_cast<int>(d);
        out << "hill(" << fmt_double(p.prefactor) << ", " << net.species[dim].name << ")";
        break;
      }
      case PropensitySpec::Kind::Custom: {
        out << "custom(" << fmt_double(p.prefactor);
        for (size_t d = 0; d < p.factors.size(); ++d) {
          const auto& f = p.factors[d];
          if (f.kind == PropensityFactor::Kind::Binomial)
            out << ", " << net.species[d].name << ":binom(" << f.order << ")";
          else if (f.kind == PropensityFactor::Kind::Reciprocal)
            out << ", " << net.species[d].name << ":recip(" << fmt_double(f.offset) << ")";
        }
        out << ")";
        break;
      }
    }
    out << '\n';
  }

  if (doc.initial.kind == InitialSpec::Kind::Point) {
    out << "init point " << fmt_tuple(doc.initial.point) << '\n';
  } else {
    out << "init table\n";
    for (const auto& [st, p] : doc.initial.table)
      out << "  " << fmt_tuple(st) << ' ' << fmt_double(p) << '\n';
    out << "end\n";
  }

  out << "terminal ";
  switch (doc.terminal.kind) {
    case TerminalSpec::Kind::Point:
      out << "point " << fmt_tuple(doc.terminal.point);
      break;
    case TerminalSpec::Kind::Predicate:
      out << "pred \"" << doc.terminal.predicate_text << "\"";
      break;
    case TerminalSpec::Kind::Observe: {
      const auto& o = doc.terminal.observe;
      out << "observe " << o.likelihood_name << "(sensitivity=" << fmt_double(o.sensitivity)
          << ", fpr=" << fmt_double(o.fpr) << ", observed=" << o.observed
          << ", species=" << net.species[o.species].name;
      if (o.total >= 0) out << ", total=" << o.total;
      out << ")";
      break;
    }
  }
  out << " at " << fmt_double(doc.horizon) << '\n';

  const auto& op = doc.options;
  out << "options delta=" << fmt_double(op.delta) << " m=" << op.grid_exponent
      << " time_points=" << op.time_points << " rtol=" << fmt_double(op.rtol)
      << " atol=" << fmt_double(op.atol);
  out << " unlumped=";
  if (op.unlumped_dims.empty()) {
    out << "-";
  } else {
    for (size_t i = 0; i < op.unlumped_dims.size(); ++i) {
      if (i) out << ',';
      out << net.species[op.unlumped_dims[i]].name;
    }
  }
  out << " bounds=" << fmt_tuple(op.bounds) << '\n';
  return out.str();
}

bool documents_equal(const ModelDocument& a, const ModelDocument& b) {
  if (a.network.parameters != b.network.parameters) return false;
  if (a.network.species.size() != b.network.species.size()) return false;
  for (size_t i = 0; i < a.network.species.size(); ++i)
    if (a.network.species[i].name != b.network.species[i].name ||
        a.network.species[i].index != b.network.species[i].index)
      return false;
  if (a.network.reactions.size() != b.network.reactions.size()) return false;
  for (size_t i = 0; i < a.network.reactions.size(); ++i) {
    const auto& ra = a.network.reactions[i];
    const auto& rb = b.network.reactions[i];
    if (ra.name != rb.name || ra.loss != rb.loss || ra.gain != rb.gain ||
        ra.change != rb.change || !(ra.propensity == rb.propensity))
      return false;
  }
  return a.initial == b.initial && a.terminal == b.terminal && a.horizon == b.horizon &&
         a.options == b.options;
}

}  // namespace mjpb
