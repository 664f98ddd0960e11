#include "jitscan/dos_guard.hpp"

#include <algorithm>
#include <stdexcept>

namespace jitscan {

std::string_view to_string(PenaltyAction a) { return a == PenaltyAction::kill ? "kill" : "block"; }

void GuardConfig::validate() const {
  if (threshold < 1) throw std::invalid_argument("threshold must be >= 1");
  if (ttl_penalty < 1) throw std::invalid_argument("ttl_penalty must be >= 1");
  if (ttl_evict < 1) throw std::invalid_argument("ttl_evict must be >= 1");
}

DosGuard::DosGuard(GuardConfig config) : config_(config) { config_.validate(); }

AdmitDecision DosGuard::admit(Uid uid, Pid /*pid*/, Tick now) {
  Bucket& b = bucket_for(uid);
  std::lock_guard lock(b.mu);
  auto [it, fresh] = b.entries.try_emplace(uid);
  ThrottleEntry& e = it->second;
  if (fresh) {
    e.uid = uid;
    e.zero_since = now;
  }

  if (e.penalized_until && now < *e.penalized_until) {
    ++denials_;
    return AdmitDecision::deny(config_.penalty_action);
  }
  e.penalized_until.reset();

  if (e.pending + 1 > config_.threshold) {
    // The request that crosses the threshold is refused, so pending stays put.
    e.penalized_until = now + config_.ttl_penalty;
    ++denials_;
    return AdmitDecision::deny(config_.penalty_action);
  }
  ++e.pending;
  e.zero_since.reset();
  return AdmitDecision::admit();
}

void DosGuard::on_delivered(Uid uid, Tick now) {
  Bucket& b = bucket_for(uid);
  std::lock_guard lock(b.mu);
  auto it = b.entries.find(uid);
  if (it == b.entries.end() || it->second.pending == 0) {
    ++unknown_deliveries_;
    return;
  }
  ThrottleEntry& e = it->second;
  if (--e.pending == 0) e.zero_since = now;
}

std::vector<Uid> DosGuard::tick(Tick now) {
  std::vector<Uid> evicted;
  for (Bucket& b : buckets_) {
    std::lock_guard lock(b.mu);
    for (auto it = b.entries.begin(); it != b.entries.end();) {
      ThrottleEntry& e = it->second;
      if (e.penalized_until && now >= *e.penalized_until) e.penalized_until.reset();
      // A live penalty keeps the entry even when idle.
      if (e.pending == 0 && !e.penalized_until && e.zero_since && now - *e.zero_since >= config_.ttl_evict) {
        evicted.push_back(it->first);
        it = b.entries.erase(it);
      } else {
        ++it;
      }
    }
  }
  evictions_ += evicted.size();
  std::sort(evicted.begin(), evicted.end());
  return evicted;
}

std::optional<ThrottleEntry> DosGuard::entry(Uid uid) const {
  const Bucket& b = bucket_for(uid);
  std::lock_guard lock(b.mu);
  auto it = b.entries.find(uid);
  if (it == b.entries.end()) return std::nullopt;
  return it->second;
}

bool DosGuard::penalized(Uid uid, Tick now) const {
  auto e = entry(uid);
  return e && e->penalized_until && now < *e->penalized_until;
}

std::size_t DosGuard::size() const {
  std::size_t n = 0;
  for (const Bucket& b : buckets_) {
    std::lock_guard lock(b.mu);
    n += b.entries.size();
  }
  return n;
}

}  // namespace jitscan
