#pragma once

// Byte-signature rules and page scanning.
//
// Rule file grammar, one rule per statement, '#' starts a comment:
//
//   rule <name> family=<label> severity=<kill|alert> [sync] { <hex-pair | ??>+ }
//
// Hex pairs are case-insensitive and may be written separately ("55 48")
// or run together ("5548"). A rule flagged `sync` belongs to the small
// in-fault-path ruleset and must have severity=kill.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace jitscan {

class RuleParseError : public std::runtime_error {
 public:
  RuleParseError(std::size_t line, std::size_t column, const std::string& what);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct PatternAtom {
  std::uint8_t byte = 0;
  bool wildcard = false;

  bool matches(std::uint8_t b) const { return wildcard || b == byte; }
  friend bool operator==(const PatternAtom&, const PatternAtom&) = default;
};

enum class Severity { kill, alert };

std::string_view to_string(Severity s);

struct SignatureRule {
  std::string name;
  std::string family;
  std::vector<PatternAtom> pattern;
  Severity severity = Severity::alert;
  bool sync = false;
};

// Parses "55 ?? e5" style text into atoms. Throws std::invalid_argument.
std::vector<PatternAtom> parse_pattern(std::string_view text);

struct RuleMatch {
  std::string rule;
  std::size_t offset = 0;

  friend auto operator<=>(const RuleMatch& a, const RuleMatch& b) {
    if (auto c = a.offset <=> b.offset; c != 0) return c;
    return a.rule <=> b.rule;
  }
  friend bool operator==(const RuleMatch&, const RuleMatch&) = default;
};

struct ScanResult {
  std::vector<RuleMatch> matches;  // sorted by (offset, rule)

  bool empty() const { return matches.empty(); }
  friend bool operator==(const ScanResult&, const ScanResult&) = default;
};

// Immutable compiled rule collection. Safe to share between threads.
class RuleSet {
 public:
  RuleSet();
  // Validates names, pattern lengths and literal content, then compiles.
  // Throws std::invalid_argument on a bad rule.
  explicit RuleSet(std::vector<SignatureRule> rules, std::size_t page_size = 4096);

  const std::vector<SignatureRule>& rules() const { return rules_; }
  const SignatureRule* find(std::string_view name) const;
  std::size_t page_size() const { return page_size_; }
  bool empty() const { return rules_.empty(); }

  // Rules flagged sync, compiled on their own.
  RuleSet sync_subset() const;

  // Scans an arbitrary buffer. Every (rule, start) where the whole pattern
  // fits inside the buffer and matches is reported once.
  ScanResult scan(std::span<const std::uint8_t> data) const;

 private:
  struct Anchor {
    std::size_t rule;
    std::size_t start;   // index of first anchor atom within the pattern
    std::size_t length;  // number of literal atoms in the anchor
  };

  void compile();
  bool verify(const SignatureRule& rule, std::span<const std::uint8_t> data, std::size_t start) const;

  std::vector<SignatureRule> rules_;
  std::size_t page_size_ = 4096;

  // Dense Aho-Corasick automaton over each rule's longest literal run.
  std::vector<std::int32_t> delta_;                // node * 256 + byte -> node
  std::vector<std::vector<std::size_t>> outputs_;  // node -> anchors ending here
  std::vector<std::int32_t> output_link_;          // nearest fail-chain node with outputs, or -1
  std::vector<Anchor> anchors_;
};

RuleSet parse_rules(std::string_view text, std::size_t page_size = 4096);

// Full asynchronous scan of one page snapshot. Requires a page-sized buffer.
ScanResult scan_page(std::span<const std::uint8_t> content, const RuleSet& rules);

// The in-fault-path check over the sync-flagged subset of a ruleset.
class SyncChecker {
 public:
  SyncChecker() = default;
  SyncChecker(const RuleSet& rules, bool enabled);

  // nullopt when the page is clean or checking is disabled; otherwise the
  // lowest-offset threat.
  std::optional<RuleMatch> check(std::span<const std::uint8_t> content) const;

  bool enabled() const { return enabled_; }
  const RuleSet& rules() const { return sync_rules_; }

 private:
  RuleSet sync_rules_;
  bool enabled_ = false;
};

}  // namespace jitscan
