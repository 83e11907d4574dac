#pragma once

#include <cctype>
#include <charconv>
#include <string>
#include <string_view>

#include "safenav/error.hpp"
#include "safenav/signals.hpp"
#include "safenav/stl/formula.hpp"

namespace safenav::stl {

enum class ParseErrorKind {
  Syntax,
  UnknownSignal,
  MalformedInterval,
  NegativeBound,
  UnitMismatch,
  TypeMismatch,
};

class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, std::size_t position, const std::string& message,
             std::string subject = {})
      : Error(message + " at offset " + std::to_string(position)),
        kind_(kind), position_(position), subject_(std::move(subject)) {}

  ParseErrorKind kind() const { return kind_; }
  std::size_t position() const { return position_; }
  /// Offending identifier for UnknownSignal / type errors.
  const std::string& subject() const { return subject_; }

 private:
  ParseErrorKind kind_;
  std::size_t position_;
  std::string subject_;
};

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, const SignalSchema& schema) : text_(text), schema_(schema) {}

  Formula parse() {
    Formula f = implication();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& msg, ParseErrorKind kind = ParseErrorKind::Syntax,
                         std::string subject = {}) const {
    throw ParseError(kind, pos_, msg, std::move(subject));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(std::string_view tok) {
    skip_ws();
    if (text_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view tok) {
    if (!accept(tok)) fail("expected '" + std::string(tok) + "'");
  }

  bool peek_ident_char(std::size_t at) const {
    return at < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[at])) || text_[at] == '_');
  }

  std::string identifier() {
    skip_ws();
    std::size_t start = pos_;
    if (pos_ >= text_.size() ||
        !(std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      fail("expected identifier");
    while (peek_ident_char(pos_)) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  /// Lookahead for a temporal operator letter immediately followed by '['.
  bool at_temporal(char letter) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != letter) return false;
    std::size_t k = pos_ + 1;
    while (k < text_.size() && std::isspace(static_cast<unsigned char>(text_[k]))) ++k;
    return k < text_.size() && text_[k] == '[';
  }

  bool at_keyword(std::string_view kw) {
    skip_ws();
    return text_.substr(pos_, kw.size()) == kw && !peek_ident_char(pos_ + kw.size());
  }

  double number() {
    skip_ws();
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    double v = 0.0;
    auto res = std::from_chars(first, last, v, std::chars_format::fixed);
    if (res.ec != std::errc{} || res.ptr == first) fail("expected number");
    pos_ += static_cast<std::size_t>(res.ptr - first);
    return v;
  }

  /// Optional unit suffix (kph, m, s) after a number.
  std::string unit() {
    skip_ws();
    for (std::string_view u : {"kph", "m", "s"}) {
      if (text_.substr(pos_, u.size()) == u && !peek_ident_char(pos_ + u.size())) {
        pos_ += u.size();
        return std::string(u);
      }
    }
    return {};
  }

  double bound() {
    skip_ws();
    if (at_keyword("inf")) {
      pos_ += 3;
      return kUnbounded;
    }
    std::size_t at = pos_;
    double v = number();
    if (v < 0.0) {
      pos_ = at;
      fail("negative interval bound", ParseErrorKind::NegativeBound);
    }
    std::size_t unit_at = pos_;
    std::string u = unit();
    if (!u.empty() && u != "s") {
      pos_ = unit_at;
      fail("interval bounds are in seconds", ParseErrorKind::UnitMismatch, u);
    }
    return v;
  }

  Interval interval() {
    expect("[");
    std::size_t at = pos_;
    Interval i;
    i.lo = bound();
    if (std::isinf(i.lo)) {
      pos_ = at;
      fail("interval lower bound must be finite", ParseErrorKind::MalformedInterval);
    }
    expect(",");
    i.hi = bound();
    if (i.lo > i.hi) {
      pos_ = at;
      fail("malformed interval: lower bound exceeds upper bound",
           ParseErrorKind::MalformedInterval);
    }
    expect("]");
    return i;
  }

  Formula parenthesized() {
    expect("(");
    Formula f = implication();
    expect(")");
    return f;
  }

  Formula implication() {
    Formula lhs = disjunction();
    if (accept("->")) return Formula::implication(std::move(lhs), implication());
    return lhs;
  }

  Formula disjunction() {
    Formula lhs = conjunction();
    while (accept("||")) lhs = Formula::disjunction(std::move(lhs), conjunction());
    return lhs;
  }

  Formula conjunction() {
    Formula lhs = unary();
    while (accept("&&")) lhs = Formula::conjunction(std::move(lhs), unary());
    return lhs;
  }

  Formula unary() {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '!') {
      ++pos_;
      return Formula::negation(unary());
    }
    if (at_temporal('G')) {
      ++pos_;
      Interval i = interval();
      return Formula::globally(i, parenthesized());
    }
    if (at_temporal('F')) {
      ++pos_;
      Interval i = interval();
      return Formula::eventually(i, parenthesized());
    }
    return primary();
  }

  Formula primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    if (text_[pos_] == '(') {
      Formula f = parenthesized();
      while (at_temporal('U')) {
        ++pos_;
        Interval i = interval();
        f = Formula::until(i, std::move(f), parenthesized());
      }
      return f;
    }
    if (at_keyword("true")) {
      pos_ += 4;
      return Formula::truth();
    }
    if (at_keyword("false")) {
      pos_ += 5;
      return Formula::falsity();
    }
    return atom();
  }

  Formula atom() {
    skip_ws();
    const std::size_t at = pos_;
    std::string name = identifier();
    auto idx = schema_.find(name);
    if (!idx) {
      pos_ = at;
      fail("unknown signal '" + name + "'", ParseErrorKind::UnknownSignal, name);
    }
    const SignalSpec& spec = schema_[*idx];

    Predicate p;
    p.signal = name;
    if (accept("<=")) p.op = Comparator::Le;
    else if (accept(">=")) p.op = Comparator::Ge;
    else if (accept("==")) p.op = Comparator::Eq;
    else if (accept("<")) p.op = Comparator::Lt;
    else if (accept(">")) p.op = Comparator::Gt;
    else p.op = Comparator::Bool;

    if (p.op == Comparator::Bool) {
      if (spec.kind != SignalKind::Boolean) {
        pos_ = at;
        fail("signal '" + name + "' is real-valued and needs a comparison",
             ParseErrorKind::TypeMismatch, name);
      }
      return Formula::atom(std::move(p));
    }
    if (spec.kind == SignalKind::Boolean) {
      pos_ = at;
      fail("signal '" + name + "' is boolean and cannot be compared", ParseErrorKind::TypeMismatch,
           name);
    }
    p.threshold = number();
    const std::size_t unit_at = pos_;
    p.unit = unit();
    if (!p.unit.empty() && p.unit != spec.unit) {
      pos_ = unit_at;
      fail("unit '" + p.unit + "' does not match signal '" + name + "'",
           ParseErrorKind::UnitMismatch, name);
    }
    return Formula::atom(std::move(p));
  }

  std::string_view text_;
  const SignalSchema& schema_;
  std::size_t pos_{0};
};

}  // namespace detail

/// Parses specification text against a signal schema.
///
/// Grammar (whitespace-insensitive, lowest precedence first):
///   phi := phi -> phi | phi || phi | phi && phi | !phi
///        | G[a,b](phi) | F[a,b](phi) | (phi)U[a,b](phi) | (phi)
///        | name <op> number[unit] | name | true | false
/// with <op> one of < <= > >= ==, bounds in seconds and `inf` as open upper bound.
inline Formula parse_formula(std::string_view text, const SignalSchema& schema) {
  return detail::Parser(text, schema).parse();
}

}  // namespace safenav::stl
