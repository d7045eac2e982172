#pragma once

// Linear programs in row form: min c'x  s.t.  a_i'x <= b_i  or  a_i'x = b_i,
// l <= x <= u (either bound may be infinite). Triplet storage.

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "drbem/error.hpp"

namespace drbem {

enum class Sense { LE, EQ };

struct Triplet {
  int row;
  int col;
  double value;
  bool operator==(const Triplet&) const = default;
};

struct LinearProgram {
  std::vector<std::string> col_names;
  std::vector<double> cost;
  std::vector<double> lower;
  std::vector<double> upper;

  std::vector<std::string> row_names;
  std::vector<std::string> row_tags;
  std::vector<Sense> sense;
  std::vector<double> rhs;

  std::vector<Triplet> entries;

  int num_cols() const { return static_cast<int>(cost.size()); }
  int num_rows() const { return static_cast<int>(rhs.size()); }

  int add_col(std::string name, double lo = -std::numeric_limits<double>::infinity(),
              double up = std::numeric_limits<double>::infinity(), double c = 0.0) {
    col_names.push_back(std::move(name));
    lower.push_back(lo);
    upper.push_back(up);
    cost.push_back(c);
    return num_cols() - 1;
  }

  /// Appends a row; exact zero coefficients are dropped. Returns the row index.
  int add_row(const std::string& tag, Sense s, double b,
              const std::vector<std::pair<int, double>>& terms, std::string name = {}) {
    const int r = num_rows();
    for (const auto& [c, v] : terms) {
      if (v != 0.0) entries.push_back({r, c, v});
    }
    if (name.empty()) name = tag + "_" + std::to_string(r);
    row_names.push_back(std::move(name));
    row_tags.push_back(tag);
    sense.push_back(s);
    rhs.push_back(b);
    return r;
  }

  /// Sorted row-major triplets with duplicates summed and zeros removed.
  std::vector<Triplet> canonical_entries() const {
    std::vector<Triplet> t = entries;
    std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    std::vector<Triplet> out;
    for (const auto& e : t) {
      if (!out.empty() && out.back().row == e.row && out.back().col == e.col) {
        out.back().value += e.value;
      } else {
        out.push_back(e);
      }
    }
    std::erase_if(out, [](const Triplet& e) { return e.value == 0.0; });
    return out;
  }

  void validate() const {
    const int n = num_cols();
    const int m = num_rows();
    if (static_cast<int>(lower.size()) != n || static_cast<int>(upper.size()) != n ||
        static_cast<int>(col_names.size()) != n) {
      throw ShapeError("LinearProgram: column arrays disagree");
    }
    if (static_cast<int>(sense.size()) != m || static_cast<int>(row_names.size()) != m ||
        static_cast<int>(row_tags.size()) != m) {
      throw ShapeError("LinearProgram: row arrays disagree");
    }
    std::vector<int> count(m, 0);
    for (const auto& e : entries) {
      if (e.row < 0 || e.row >= m || e.col < 0 || e.col >= n) {
        throw ShapeError("LinearProgram: triplet index out of range");
      }
      if (!std::isfinite(e.value)) throw DomainError("LinearProgram: non-finite coefficient");
      if (e.value != 0.0) ++count[e.row];
    }
    for (int i = 0; i < m; ++i) {
      if (count[i] == 0) throw SpecError("LinearProgram: row '" + row_names[i] + "' is empty");
      if (!std::isfinite(rhs[i])) throw DomainError("LinearProgram: non-finite right-hand side");
    }
    for (int j = 0; j < n; ++j) {
      if (!std::isfinite(cost[j])) throw DomainError("LinearProgram: non-finite cost");
      if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] == kPosInf ||
          upper[j] == kNegInf) {
        throw DomainError("LinearProgram: invalid bound on '" + col_names[j] + "'");
      }
    }
  }

  double objective(const std::vector<double>& x) const {
    double v = 0.0;
    for (int j = 0; j < num_cols(); ++j) v += cost[j] * x[j];
    return v;
  }

  static constexpr double kPosInf = std::numeric_limits<double>::infinity();
  static constexpr double kNegInf = -std::numeric_limits<double>::infinity();
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterLimit };

inline std::string to_string(SolveStatus s) {
  switch (s) {
  case SolveStatus::Optimal: return "OPTIMAL";
  case SolveStatus::Infeasible: return "INFEASIBLE";
  case SolveStatus::Unbounded: return "UNBOUNDED";
  case SolveStatus::IterLimit: return "ITER_LIMIT";
  }
  return "?";
}

struct Solution {
  SolveStatus status = SolveStatus::IterLimit;
  std::vector<double> x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double max_residual = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  std::string method;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

struct VerifyReport {
  double max_violation = 0.0;
  int worst_row = -1; // -1 when the worst violation is a bound (or nothing is violated)
  int worst_col = -1;
  std::string worst_tag;
  double objective = 0.0;
  bool feasible = true;
};

/// Recomputes every row and bound residual from scratch.
inline VerifyReport verify(const LinearProgram& lp, const std::vector<double>& x,
                           double tol = 1e-6) {
  if (static_cast<int>(x.size()) != lp.num_cols()) throw ShapeError("verify: size mismatch");
  VerifyReport rep;
  std::vector<double> act(lp.num_rows(), 0.0);
  for (const auto& e : lp.entries) act[e.row] += e.value * x[e.col];
  for (int i = 0; i < lp.num_rows(); ++i) {
    const double r = act[i] - lp.rhs[i];
    const double viol = lp.sense[i] == Sense::EQ ? std::abs(r) : std::max(0.0, r);
    if (viol > rep.max_violation) {
      rep.max_violation = viol;
      rep.worst_row = i;
      rep.worst_col = -1;
      rep.worst_tag = lp.row_tags[i];
    }
  }
  for (int j = 0; j < lp.num_cols(); ++j) {
    const double viol = std::max({0.0, lp.lower[j] - x[j], x[j] - lp.upper[j]});
    if (viol > rep.max_violation) {
      rep.max_violation = viol;
      rep.worst_row = -1;
      rep.worst_col = j;
      rep.worst_tag = "bound";
    }
  }
  rep.objective = lp.objective(x);
  rep.feasible = rep.max_violation <= tol;
  return rep;
}

// LP text format ------------------------------------------------------------
//
// Minimize / Subject To / Bounds / End sections, one named row per
// constraint. Every column is listed in the objective (zero coefficients
// included) so column order survives a round trip, and every column gets an
// explicit bound line.

namespace detail {

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class LineWriter {
public:
  explicit LineWriter(std::string& out) : out_(out) {}
  void token(const std::string& t) {
    if (len_ + t.size() + 1 > 200 && len_ > 0) {
      out_ += "\n   ";
      len_ = 3;
    }
    out_ += ' ';
    out_ += t;
    len_ += t.size() + 1;
  }
  void newline() {
    out_ += '\n';
    len_ = 0;
  }

private:
  std::string& out_;
  std::size_t len_ = 0;
};

inline void write_term(LineWriter& w, double coef, const std::string& name, bool first) {
  if (coef < 0.0 || std::signbit(coef)) {
    w.token("-");
    w.token(format_number(-coef) + " " + name);
  } else {
    if (!first) w.token("+");
    w.token(format_number(coef) + " " + name);
  }
}

} // namespace detail

inline std::string export_lp(const LinearProgram& lp) {
  lp.validate();
  std::string out = "\\ linear program: " + std::to_string(lp.num_rows()) + " rows, " +
                    std::to_string(lp.num_cols()) + " columns\n";
  out += "Minimize\n";
  detail::LineWriter w(out);
  w.token("obj:");
  for (int j = 0; j < lp.num_cols(); ++j) {
    detail::write_term(w, lp.cost[j], lp.col_names[j], j == 0);
  }
  w.newline();
  out += "Subject To\n";
  std::vector<std::vector<std::pair<int, double>>> rows(lp.num_rows());
  for (const auto& e : lp.entries) {
    if (e.value != 0.0) rows[e.row].push_back({e.col, e.value});
  }
  for (int i = 0; i < lp.num_rows(); ++i) {
    w.token(lp.row_names[i] + ":");
    bool first = true;
    for (const auto& [c, v] : rows[i]) {
      detail::write_term(w, v, lp.col_names[c], first);
      first = false;
    }
    w.token(lp.sense[i] == Sense::EQ ? "=" : "<=");
    w.token(detail::format_number(lp.rhs[i]));
    w.newline();
  }
  out += "Bounds\n";
  for (int j = 0; j < lp.num_cols(); ++j) {
    const double lo = lp.lower[j];
    const double up = lp.upper[j];
    const std::string& n = lp.col_names[j];
    if (std::isinf(lo) && std::isinf(up)) {
      out += " " + n + " free\n";
    } else if (std::isinf(lo)) {
      out += " -inf <= " + n + " <= " + detail::format_number(up) + "\n";
    } else if (std::isinf(up)) {
      out += " " + n + " >= " + detail::format_number(lo) + "\n";
    } else {
      out += " " + detail::format_number(lo) + " <= " + n + " <= " + detail::format_number(up) +
             "\n";
    }
  }
  out += "End\n";
  return out;
}

namespace detail {

struct LpToken {
  enum Kind { Ident, Number, Op, Colon, Sign, End } kind;
  std::string text;
  double value = 0.0;
  int line = 0;
  int column = 0;
};

inline bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '[' ||
         c == ']' || c == '!' || c == '"' || c == '#' || c == '$' || c == '%' || c == '&' ||
         c == '(' || c == ')' || c == '/' || c == ',' || c == ';' || c == '?' || c == '@' ||
         c == '`' || c == '\'' || c == '{' || c == '}' || c == '|' || c == '~';
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::vector<LpToken> tokenize_lp(const std::string& text, const std::string& source) {
  std::vector<LpToken> toks;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t k) {
    for (std::size_t q = 0; q < k; ++q) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\\') {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    LpToken t;
    t.line = line;
    t.column = col;
    if (c == '<' || c == '>' || c == '=') {
      std::string op(1, c);
      if (i + 1 < text.size() && (text[i + 1] == '=' || text[i + 1] == '<' || text[i + 1] == '>')) {
        op += text[i + 1];
      }
      if (op == "<" || op == "<=" || op == "=<") {
        t.text = "<=";
      } else if (op == ">" || op == ">=" || op == "=>") {
        t.text = ">=";
      } else if (op == "=" || op == "==") {
        t.text = "=";
      } else {
        // "=" followed by something unrelated
        op = "=";
        t.text = "=";
      }
      t.kind = LpToken::Op;
      advance(op.size());
      toks.push_back(t);
      continue;
    }
    if (c == ':') {
      t.kind = LpToken::Colon;
      t.text = ":";
      advance(1);
      toks.push_back(t);
      continue;
    }
    if (c == '+' || c == '-') {
      t.kind = LpToken::Sign;
      t.text = std::string(1, c);
      advance(1);
      toks.push_back(t);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
      std::size_t j = i;
      while (j < text.size() && (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.')) ++j;
      if (j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < text.size() && (text[k] == '+' || text[k] == '-')) ++k;
        if (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) {
          while (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) ++k;
          j = k;
        }
      }
      t.kind = LpToken::Number;
      t.text = text.substr(i, j - i);
      char* endp = nullptr;
      t.value = std::strtod(t.text.c_str(), &endp);
      if (endp != t.text.c_str() + t.text.size()) {
        throw ParseError("malformed number '" + t.text + "'", line, col, source);
      }
      advance(j - i);
      toks.push_back(t);
      continue;
    }
    if (ident_char(c)) {
      std::size_t j = i;
      while (j < text.size() && ident_char(text[j])) ++j;
      t.kind = LpToken::Ident;
      t.text = text.substr(i, j - i);
      const std::string l = lower(t.text);
      if (l == "inf" || l == "infinity") {
        t.kind = LpToken::Number;
        t.value = std::numeric_limits<double>::infinity();
      }
      advance(j - i);
      toks.push_back(t);
      continue;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", line, col, source);
  }
  LpToken end;
  end.kind = LpToken::End;
  end.line = line;
  end.column = col;
  toks.push_back(end);
  return toks;
}

class LpParser {
public:
  LpParser(const std::string& text, std::string source)
      : source_(std::move(source)), toks_(tokenize_lp(text, source_)) {}

  LinearProgram parse() {
    expect_section_minimize();
    parse_objective();
    if (!section_is("subject")) fail("expected 'Subject To' section");
    take_section();
    parse_constraints();
    if (section_is("bounds")) {
      take_section();
      parse_bounds();
    }
    if (!section_is("end")) fail("expected 'End'");
    ++pos_;
    if (peek().kind != LpToken::End) fail("unexpected content after 'End'");
    for (int j = 0; j < lp_.num_cols(); ++j) {
      if (lp_.lower[j] > lp_.upper[j]) {
        throw ParseError("lower bound exceeds upper bound for '" + lp_.col_names[j] + "'", 0, 0,
                         source_);
      }
    }
    return std::move(lp_);
  }

private:
  const LpToken& peek(int k = 0) const {
    const std::size_t p = std::min(pos_ + k, toks_.size() - 1);
    return toks_[p];
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what, peek().line, peek().column, source_);
  }

  // Section keywords are recognized only where a section may start.
  bool section_is(const std::string& name) const {
    if (peek().kind != LpToken::Ident) return false;
    const std::string l = lower(peek().text);
    if (name == "subject") {
      return (l == "subject" && peek(1).kind == LpToken::Ident && lower(peek(1).text) == "to") ||
             (l == "such" && peek(1).kind == LpToken::Ident && lower(peek(1).text) == "that") ||
             l == "st" || l == "s.t.";
    }
    if (name == "bounds") return l == "bounds" || l == "bound";
    if (name == "end") return l == "end";
    if (name == "integer") return l == "general" || l == "generals" || l == "binary" ||
                                  l == "binaries" || l == "gen" || l == "bin";
    return false;
  }

  bool at_section_start() const {
    return section_is("subject") || section_is("bounds") || section_is("end") ||
           section_is("integer") || peek().kind == LpToken::End;
  }

  void take_section() {
    const std::string l = lower(peek().text);
    pos_ += (l == "subject" || l == "such") ? 2 : 1;
  }

  void expect_section_minimize() {
    if (peek().kind != LpToken::Ident) fail("expected 'Minimize'");
    const std::string l = lower(peek().text);
    if (l == "maximize" || l == "maximise" || l == "max" || l == "maximum") {
      fail("only minimization problems are supported");
    }
    if (l != "minimize" && l != "minimise" && l != "min" && l != "minimum") {
      fail("expected 'Minimize'");
    }
    ++pos_;
  }

  int column(const LpToken& t) {
    auto it = index_.find(t.text);
    if (it != index_.end()) return it->second;
    const int j = lp_.add_col(t.text, 0.0, std::numeric_limits<double>::infinity(), 0.0);
    index_.emplace(t.text, j);
    return j;
  }

  // Linear expression up to (not including) an operator or section keyword.
  std::vector<std::pair<int, double>> parse_expression() {
    std::vector<std::pair<int, double>> terms;
    bool first = true;
    while (true) {
      if (peek().kind == LpToken::Op || at_section_start()) break;
      double sign = 1.0;
      bool had_sign = false;
      while (peek().kind == LpToken::Sign) {
        if (peek().text == "-") sign = -sign;
        had_sign = true;
        ++pos_;
      }
      if (!first && !had_sign) fail("expected '+' or '-' between terms");
      double coef = 1.0;
      if (peek().kind == LpToken::Number) {
        coef = peek().value;
        if (std::isinf(coef)) fail("infinite coefficient");
        ++pos_;
      }
      if (peek().kind != LpToken::Ident || at_section_start()) fail("expected a variable name");
      terms.push_back({column(peek()), sign * coef});
      ++pos_;
      first = false;
    }
    return terms;
  }

  void parse_objective() {
    if (peek().kind == LpToken::Ident && peek(1).kind == LpToken::Colon) pos_ += 2;
    if (at_section_start() || peek().kind == LpToken::Op) fail("empty objective section");
    const auto terms = parse_expression();
    if (terms.empty()) fail("empty objective section");
    for (const auto& [j, v] : terms) lp_.cost[j] += v;
  }

  void parse_constraints() {
    while (!at_section_start()) {
      std::string name;
      const LpToken start = peek();
      if (peek().kind == LpToken::Ident && peek(1).kind == LpToken::Colon) {
        name = peek().text;
        pos_ += 2;
      }
      const auto terms = parse_expression();
      if (terms.empty()) {
        throw ParseError("constraint has no terms", start.line, start.column, source_);
      }
      if (peek().kind != LpToken::Op) fail("expected a comparison operator");
      const std::string op = peek().text;
      ++pos_;
      double sign = 1.0;
      while (peek().kind == LpToken::Sign) {
        if (peek().text == "-") sign = -sign;
        ++pos_;
      }
      if (peek().kind != LpToken::Number || std::isinf(peek().value)) {
        fail("expected a finite right-hand side");
      }
      const double b = sign * peek().value;
      ++pos_;
      if (name.empty()) name = "r" + std::to_string(lp_.num_rows());
      std::string tag = name;
      const auto us = name.rfind('_');
      if (us != std::string::npos && us + 1 < name.size() &&
          name.find_first_not_of("0123456789", us + 1) == std::string::npos) {
        tag = name.substr(0, us);
      }
      if (op == ">=") {
        std::vector<std::pair<int, double>> neg;
        for (const auto& [j, v] : terms) neg.push_back({j, -v});
        lp_.add_row(tag, Sense::LE, -b, neg, name);
      } else {
        lp_.add_row(tag, op == "=" ? Sense::EQ : Sense::LE, b, terms, name);
      }
    }
  }

  double signed_number() {
    double sign = 1.0;
    while (peek().kind == LpToken::Sign) {
      if (peek().text == "-") sign = -sign;
      ++pos_;
    }
    if (peek().kind != LpToken::Number) fail("expected a number");
    const double v = sign * peek().value;
    ++pos_;
    return v;
  }

  void apply_bound(int j, const std::string& op, double v, bool var_on_left) {
    std::string o = op;
    if (!var_on_left) o = (op == "<=") ? ">=" : (op == ">=") ? "<=" : "=";
    if (o == "<=") {
      lp_.upper[j] = v;
    } else if (o == ">=") {
      lp_.lower[j] = v;
    } else {
      lp_.lower[j] = v;
      lp_.upper[j] = v;
    }
  }

  void parse_bounds() {
    while (!at_section_start()) {
      if (peek().kind == LpToken::Ident) {
        const int j = column(peek());
        ++pos_;
        if (peek().kind == LpToken::Ident && lower(peek().text) == "free") {
          lp_.lower[j] = -std::numeric_limits<double>::infinity();
          lp_.upper[j] = std::numeric_limits<double>::infinity();
          ++pos_;
          continue;
        }
        if (peek().kind != LpToken::Op) fail("expected 'free' or a comparison");
        const std::string op = peek().text;
        ++pos_;
        apply_bound(j, op, signed_number(), true);
        continue;
      }
      if (peek().kind == LpToken::Number || peek().kind == LpToken::Sign) {
        const double lo = signed_number();
        if (peek().kind != LpToken::Op) fail("expected a comparison");
        const std::string op1 = peek().text;
        ++pos_;
        if (peek().kind != LpToken::Ident) fail("expected a variable name");
        const int j = column(peek());
        ++pos_;
        apply_bound(j, op1, lo, false);
        if (peek().kind == LpToken::Op) {
          const std::string op2 = peek().text;
          ++pos_;
          apply_bound(j, op2, signed_number(), true);
        }
        continue;
      }
      fail("malformed bound");
    }
    if (section_is("integer")) fail("integer sections are not supported");
  }

  std::string source_;
  std::vector<LpToken> toks_;
  std::size_t pos_ = 0;
  LinearProgram lp_;
  std::unordered_map<std::string, int> index_;
};

} // namespace detail

inline LinearProgram import_lp(const std::string& text, const std::string& source = {}) {
  return detail::LpParser(text, source).parse();
}

inline nlohmann::json solution_to_json(const LinearProgram& lp, const Solution& s) {
  nlohmann::json vars = nlohmann::json::object();
  if (s.x.size() == static_cast<std::size_t>(lp.num_cols())) {
    for (int j = 0; j < lp.num_cols(); ++j) vars[lp.col_names[j]] = s.x[j];
  }
  nlohmann::json j{{"status", to_string(s.status)},
                   {"method", s.method},
                   {"iterations", s.iterations},
                   {"variables", vars}};
  j["objective"] = std::isfinite(s.objective) ? nlohmann::json(s.objective) : nlohmann::json();
  j["max_residual"] =
      std::isfinite(s.max_residual) ? nlohmann::json(s.max_residual) : nlohmann::json();
  return j;
}

} // namespace drbem
