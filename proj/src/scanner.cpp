#include <algorithm>
#include <deque>
#include <set>

#include "jitscan/signature.hpp"

namespace jitscan {

namespace {
constexpr std::size_t kAlphabet = 256;
}

RuleSet::RuleSet() { compile(); }

RuleSet::RuleSet(std::vector<SignatureRule> rules, std::size_t page_size)
    : rules_(std::move(rules)), page_size_(page_size) {
  std::set<std::string_view> names;
  for (const SignatureRule& r : rules_) {
    if (r.name.empty()) throw std::invalid_argument("rule without a name");
    if (!names.insert(r.name).second) throw std::invalid_argument("duplicate rule name '" + r.name + "'");
    if (r.pattern.empty()) throw std::invalid_argument("rule '" + r.name + "' has an empty pattern");
    if (r.pattern.size() > page_size_) throw std::invalid_argument("rule '" + r.name + "' is longer than a page");
    if (std::all_of(r.pattern.begin(), r.pattern.end(), [](const PatternAtom& a) { return a.wildcard; }))
      throw std::invalid_argument("rule '" + r.name + "' has no literal byte");
  }
  compile();
}

const SignatureRule* RuleSet::find(std::string_view name) const {
  for (const SignatureRule& r : rules_)
    if (r.name == name) return &r;
  return nullptr;
}

RuleSet RuleSet::sync_subset() const {
  std::vector<SignatureRule> sync;
  for (const SignatureRule& r : rules_)
    if (r.sync) sync.push_back(r);
  return RuleSet(std::move(sync), page_size_);
}

void RuleSet::compile() {
  anchors_.clear();
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& pat = rules_[i].pattern;
    Anchor best{i, 0, 0};
    for (std::size_t s = 0; s < pat.size();) {
      if (pat[s].wildcard) {
        ++s;
        continue;
      }
      std::size_t e = s;
      while (e < pat.size() && !pat[e].wildcard) ++e;
      if (e - s > best.length) best = {i, s, e - s};
      s = e;
    }
    anchors_.push_back(best);
  }

  // Trie over anchors; -1 marks a missing edge until the BFS fills it.
  delta_.assign(kAlphabet, -1);
  outputs_.assign(1, {});
  for (std::size_t a = 0; a < anchors_.size(); ++a) {
    const Anchor& anc = anchors_[a];
    std::int32_t node = 0;
    for (std::size_t k = 0; k < anc.length; ++k) {
      const std::uint8_t b = rules_[anc.rule].pattern[anc.start + k].byte;
      std::int32_t& edge = delta_[static_cast<std::size_t>(node) * kAlphabet + b];
      if (edge < 0) {
        edge = static_cast<std::int32_t>(outputs_.size());
        outputs_.emplace_back();
        delta_.resize(outputs_.size() * kAlphabet, -1);
      }
      node = delta_[static_cast<std::size_t>(node) * kAlphabet + b];
    }
    outputs_[static_cast<std::size_t>(node)].push_back(a);
  }

  const std::size_t n = outputs_.size();
  std::vector<std::int32_t> fail(n, 0);
  output_link_.assign(n, -1);
  std::deque<std::int32_t> queue;
  for (std::size_t b = 0; b < kAlphabet; ++b) {
    std::int32_t& edge = delta_[b];
    if (edge < 0) {
      edge = 0;
    } else {
      fail[static_cast<std::size_t>(edge)] = 0;
      queue.push_back(edge);
    }
  }
  while (!queue.empty()) {
    const std::int32_t u = queue.front();
    queue.pop_front();
    const auto fu = static_cast<std::size_t>(fail[static_cast<std::size_t>(u)]);
    output_link_[static_cast<std::size_t>(u)] =
        outputs_[fu].empty() ? output_link_[fu] : static_cast<std::int32_t>(fu);
    for (std::size_t b = 0; b < kAlphabet; ++b) {
      std::int32_t& edge = delta_[static_cast<std::size_t>(u) * kAlphabet + b];
      const std::int32_t via_fail = delta_[fu * kAlphabet + b];
      if (edge < 0) {
        edge = via_fail;
      } else {
        fail[static_cast<std::size_t>(edge)] = via_fail;
        queue.push_back(edge);
      }
    }
  }
}

bool RuleSet::verify(const SignatureRule& rule, std::span<const std::uint8_t> data, std::size_t start) const {
  const auto& pat = rule.pattern;
  for (std::size_t k = 0; k < pat.size(); ++k)
    if (!pat[k].matches(data[start + k])) return false;
  return true;
}

ScanResult RuleSet::scan(std::span<const std::uint8_t> data) const {
  ScanResult result;
  if (anchors_.empty()) return result;

  auto emit = [&](std::size_t node, std::size_t end) {
    // end is one past the last byte consumed
    for (std::size_t a : outputs_[node]) {
      const Anchor& anc = anchors_[a];
      const SignatureRule& rule = rules_[anc.rule];
      if (end < anc.length + anc.start) continue;
      const std::size_t start = end - anc.length - anc.start;
      if (start + rule.pattern.size() > data.size()) continue;
      if (verify(rule, data, start)) result.matches.push_back({rule.name, start});
    }
  };

  std::size_t state = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    state = static_cast<std::size_t>(delta_[state * kAlphabet + data[i]]);
    if (!outputs_[state].empty()) emit(state, i + 1);
    for (std::int32_t o = output_link_[state]; o > 0; o = output_link_[static_cast<std::size_t>(o)])
      emit(static_cast<std::size_t>(o), i + 1);
  }
  std::sort(result.matches.begin(), result.matches.end());
  return result;
}

ScanResult scan_page(std::span<const std::uint8_t> content, const RuleSet& rules) {
  if (content.size() != rules.page_size())
    throw std::invalid_argument("scan_page expects exactly one page of " + std::to_string(rules.page_size()) +
                                " bytes, got " + std::to_string(content.size()));
  return rules.scan(content);
}

SyncChecker::SyncChecker(const RuleSet& rules, bool enabled) : sync_rules_(rules.sync_subset()), enabled_(enabled) {}

std::optional<RuleMatch> SyncChecker::check(std::span<const std::uint8_t> content) const {
  if (!enabled_ || sync_rules_.empty()) return std::nullopt;
  ScanResult r = sync_rules_.scan(content);
  if (r.empty()) return std::nullopt;
  return r.matches.front();
}

}  // namespace jitscan
