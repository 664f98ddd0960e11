#pragma once

// Pending page snapshots on their way from the fault path to the agent.
// Snapshots are bucketed by pid; each bucket has its own lock so inserts and
// removals on different buckets proceed in parallel.

#include <atomic>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <vector>

#include "jitscan/dos_guard.hpp"
#include "jitscan/ids.hpp"

namespace jitscan {

struct PageSnapshot {
  std::vector<std::uint8_t> content;  // full copy of the page
  std::size_t offset = 0;             // in-page offset of the fetched instruction
  VAddr vaddr = 0;                    // full faulting address
  Pid pid;
  Tid tid;
  Uid uid;
  std::uint64_t seq = 0;  // assigned by enqueue

  VPage vpage() const { return content.empty() ? 0 : vaddr / content.size(); }
};

class SnapshotTable {
 public:
  static constexpr std::size_t kDefaultBuckets = 64;

  explicit SnapshotTable(std::size_t page_size = 4096, std::size_t buckets = kDefaultBuckets,
                         DeliveryObserver* observer = nullptr);

  SnapshotTable(const SnapshotTable&) = delete;
  SnapshotTable& operator=(const SnapshotTable&) = delete;

  // Assigns and returns the sequence number. Thread-safe.
  std::uint64_t enqueue(PageSnapshot s);
  // Removes up to max snapshots, visiting non-empty buckets round-robin.
  // The observer hears about each one. Thread-safe.
  std::vector<PageSnapshot> drain(std::size_t max, Tick now = 0);

  std::size_t pending_count() const { return pending_.load(); }
  std::size_t pending_bytes() const { return pending_.load() * page_size_; }
  std::size_t high_watermark() const { return high_watermark_.load(); }
  std::uint64_t enqueued_total() const { return next_seq_.load(); }

  std::size_t bucket_count() const { return buckets_.size(); }
  std::size_t bucket_of(Pid pid) const { return std::hash<Pid>{}(pid) % buckets_.size(); }
  std::size_t page_size() const { return page_size_; }

  void set_observer(DeliveryObserver* observer) { observer_ = observer; }

 private:
  struct Bucket {
    std::mutex mu;
    std::deque<PageSnapshot> items;
  };

  std::size_t page_size_;
  std::vector<std::unique_ptr<Bucket>> buckets_;
  DeliveryObserver* observer_;
  std::mutex drain_mu_;  // serializes the round-robin cursor
  std::size_t cursor_ = 0;
  std::atomic<std::uint64_t> next_seq_{0};
  std::atomic<std::size_t> pending_{0};
  std::atomic<std::size_t> high_watermark_{0};
};

}  // namespace jitscan
