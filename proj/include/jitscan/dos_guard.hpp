#pragma once

// Per-uid flood protection for the snapshot pipeline. Every uid with
// undelivered page copies owns a ThrottleEntry; crossing the threshold puts
// the uid under penalty for ttl_penalty ticks, and an entry that sits at zero
// pending copies for ttl_evict ticks is dropped.

#include <array>
#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "jitscan/ids.hpp"

namespace jitscan {

enum class PenaltyAction { kill, block };

std::string_view to_string(PenaltyAction a);

struct GuardConfig {
  std::uint64_t threshold = 256;
  PenaltyAction penalty_action = PenaltyAction::kill;
  Tick ttl_penalty = 1000;
  Tick ttl_evict = 5000;

  // Throws std::invalid_argument unless threshold and both TTLs are >= 1.
  void validate() const;
};

struct ThrottleEntry {
  Uid uid;
  std::uint64_t pending = 0;
  std::optional<Tick> penalized_until;
  std::optional<Tick> zero_since;
};

struct AdmitDecision {
  bool admitted = true;
  PenaltyAction action = PenaltyAction::kill;  // meaningful when !admitted

  static AdmitDecision admit() { return {true, PenaltyAction::kill}; }
  static AdmitDecision deny(PenaltyAction a) { return {false, a}; }
};

// Something that wants to hear when a page copy reached the agent.
class DeliveryObserver {
 public:
  virtual ~DeliveryObserver() = default;
  virtual void on_delivered(Uid uid, Tick now) = 0;
};

class DosGuard final : public DeliveryObserver {
 public:
  static constexpr std::size_t kBuckets = 16;

  explicit DosGuard(GuardConfig config = {});

  AdmitDecision admit(Uid uid, Pid pid, Tick now);
  void on_delivered(Uid uid, Tick now) override;
  // Expires penalties and evicts idle entries. Returns evicted uids, sorted.
  std::vector<Uid> tick(Tick now);

  std::optional<ThrottleEntry> entry(Uid uid) const;
  bool penalized(Uid uid, Tick now) const;
  std::size_t size() const;

  const GuardConfig& config() const { return config_; }
  std::uint64_t unknown_deliveries() const { return unknown_deliveries_.load(); }
  std::uint64_t denials() const { return denials_.load(); }
  std::uint64_t evictions() const { return evictions_.load(); }

 private:
  struct Bucket {
    mutable std::mutex mu;
    std::unordered_map<Uid, ThrottleEntry> entries;
  };

  Bucket& bucket_for(Uid uid) { return buckets_[std::hash<Uid>{}(uid) % kBuckets]; }
  const Bucket& bucket_for(Uid uid) const { return buckets_[std::hash<Uid>{}(uid) % kBuckets]; }

  GuardConfig config_;
  std::array<Bucket, kBuckets> buckets_;
  std::atomic<std::uint64_t> unknown_deliveries_{0};
  std::atomic<std::uint64_t> denials_{0};
  std::atomic<std::uint64_t> evictions_{0};
};

}  // namespace jitscan
