#include <cctype>
#include <set>

#include "jitscan/signature.hpp"

namespace jitscan {

RuleParseError::RuleParseError(std::size_t line, std::size_t column, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

std::string_view to_string(Severity s) { return s == Severity::kill ? "kill" : "alert"; }

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

// Appends the atoms of one whitespace-free token. Empty string on success,
// otherwise a description of the problem.
std::string append_atoms(std::string_view tok, std::vector<PatternAtom>& out) {
  if (tok.size() % 2 != 0) return "odd number of hex digits in '" + std::string(tok) + "'";
  for (std::size_t i = 0; i < tok.size(); i += 2) {
    if (tok[i] == '?' && tok[i + 1] == '?') {
      out.push_back({0, true});
      continue;
    }
    const int hi = hex_value(tok[i]);
    const int lo = hex_value(tok[i + 1]);
    if (hi < 0 || lo < 0) return "bad hex pair '" + std::string(tok.substr(i, 2)) + "'";
    out.push_back({static_cast<std::uint8_t>(hi * 16 + lo), false});
  }
  return {};
}

struct Token {
  enum Kind { word, open, close, end } kind;
  std::string text;
  std::size_t line;
  std::size_t column;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_space();
    if (pos_ >= src_.size()) return {Token::end, "", line_, col_};
    const std::size_t line = line_, col = col_;
    const char c = src_[pos_];
    if (c == '{' || c == '}') {
      advance();
      return {c == '{' ? Token::open : Token::close, std::string(1, c), line, col};
    }
    std::string text;
    while (pos_ < src_.size()) {
      const char d = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(d)) || d == '{' || d == '}' || d == '#') break;
      text.push_back(d);
      advance();
    }
    return {Token::word, std::move(text), line, col};
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

bool valid_name(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return true;
}

}  // namespace

std::vector<PatternAtom> parse_pattern(std::string_view text) {
  std::vector<PatternAtom> atoms;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      if (auto err = append_atoms(text.substr(i, j - i), atoms); !err.empty()) throw std::invalid_argument(err);
    }
    i = j;
  }
  return atoms;
}

RuleSet parse_rules(std::string_view text, std::size_t page_size) {
  Lexer lex(text);
  std::vector<SignatureRule> rules;
  std::set<std::string, std::less<>> names;

  for (Token t = lex.next(); t.kind != Token::end; t = lex.next()) {
    if (t.kind != Token::word || t.text != "rule")
      throw RuleParseError(t.line, t.column, "expected 'rule', got '" + t.text + "'");
    const Token rule_tok = t;

    Token name = lex.next();
    if (name.kind != Token::word || !valid_name(name.text))
      throw RuleParseError(name.line, name.column, "expected a rule name");
    if (names.contains(name.text)) throw RuleParseError(name.line, name.column, "duplicate rule name '" + name.text + "'");

    SignatureRule rule;
    rule.name = name.text;
    bool have_family = false, have_severity = false;

    Token a = lex.next();
    for (; a.kind == Token::word; a = lex.next()) {
      if (a.text == "sync") {
        if (rule.sync) throw RuleParseError(a.line, a.column, "repeated 'sync'");
        rule.sync = true;
        continue;
      }
      const auto eq = a.text.find('=');
      if (eq == std::string::npos) throw RuleParseError(a.line, a.column, "expected key=value or '{', got '" + a.text + "'");
      const std::string key = a.text.substr(0, eq);
      const std::string value = a.text.substr(eq + 1);
      if (value.empty()) throw RuleParseError(a.line, a.column, "empty value for '" + key + "'");
      if (key == "family") {
        if (have_family) throw RuleParseError(a.line, a.column, "repeated 'family'");
        rule.family = value;
        have_family = true;
      } else if (key == "severity") {
        if (have_severity) throw RuleParseError(a.line, a.column, "repeated 'severity'");
        if (value == "kill") {
          rule.severity = Severity::kill;
        } else if (value == "alert") {
          rule.severity = Severity::alert;
        } else {
          throw RuleParseError(a.line, a.column + eq + 1, "severity must be kill or alert");
        }
        have_severity = true;
      } else {
        throw RuleParseError(a.line, a.column, "unknown attribute '" + key + "'");
      }
    }
    if (a.kind != Token::open) throw RuleParseError(a.line, a.column, "expected '{'");
    if (!have_family) throw RuleParseError(rule_tok.line, rule_tok.column, "rule '" + rule.name + "' lacks family=");
    if (!have_severity) throw RuleParseError(rule_tok.line, rule_tok.column, "rule '" + rule.name + "' lacks severity=");
    if (rule.sync && rule.severity != Severity::kill)
      throw RuleParseError(rule_tok.line, rule_tok.column, "sync rules must have severity=kill");

    const Token open = a;
    Token b = lex.next();
    for (; b.kind == Token::word; b = lex.next()) {
      if (auto err = append_atoms(b.text, rule.pattern); !err.empty()) throw RuleParseError(b.line, b.column, err);
    }
    if (b.kind != Token::close) throw RuleParseError(b.line, b.column, "expected '}'");
    if (rule.pattern.empty()) throw RuleParseError(open.line, open.column, "empty pattern");
    if (rule.pattern.size() > page_size)
      throw RuleParseError(open.line, open.column, "pattern longer than the page size");
    bool literal = false;
    for (const auto& atom : rule.pattern) literal = literal || !atom.wildcard;
    if (!literal) throw RuleParseError(open.line, open.column, "pattern has no literal byte");

    names.insert(rule.name);
    rules.push_back(std::move(rule));
  }
  return RuleSet(std::move(rules), page_size);
}

}  // namespace jitscan
