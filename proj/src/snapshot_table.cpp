#include "jitscan/snapshot_table.hpp"

#include <stdexcept>

namespace jitscan {

SnapshotTable::SnapshotTable(std::size_t page_size, std::size_t buckets, DeliveryObserver* observer)
    : page_size_(page_size), observer_(observer) {
  if (buckets == 0) throw std::invalid_argument("snapshot table needs at least one bucket");
  buckets_.reserve(buckets);
  for (std::size_t i = 0; i < buckets; ++i) buckets_.push_back(std::make_unique<Bucket>());
}

std::uint64_t SnapshotTable::enqueue(PageSnapshot s) {
  if (s.content.size() != page_size_) throw std::invalid_argument("snapshot content must be exactly one page");
  if (s.offset >= page_size_) throw std::invalid_argument("snapshot offset outside the page");
  Bucket& b = *buckets_[bucket_of(s.pid)];
  std::uint64_t seq;
  {
    std::lock_guard lock(b.mu);
    // Taken under the bucket lock so per-bucket FIFO order matches seq order.
    seq = next_seq_.fetch_add(1);
    s.seq = seq;
    b.items.push_back(std::move(s));
  }
  const std::size_t now_pending = pending_.fetch_add(1) + 1;
  std::size_t hw = high_watermark_.load();
  while (now_pending > hw && !high_watermark_.compare_exchange_weak(hw, now_pending)) {
  }
  return seq;
}

std::vector<PageSnapshot> SnapshotTable::drain(std::size_t max, Tick now) {
  std::vector<PageSnapshot> out;
  if (max == 0) return out;
  {
    std::lock_guard drain_lock(drain_mu_);
    std::size_t idle = 0;  // consecutive empty buckets seen
    while (out.size() < max && idle < buckets_.size()) {
      Bucket& b = *buckets_[cursor_];
      cursor_ = (cursor_ + 1) % buckets_.size();
      std::lock_guard lock(b.mu);
      if (b.items.empty()) {
        ++idle;
        continue;
      }
      idle = 0;
      out.push_back(std::move(b.items.front()));
      b.items.pop_front();
      pending_.fetch_sub(1);
    }
  }
  if (observer_ != nullptr)
    for (const PageSnapshot& s : out) observer_->on_delivered(s.uid, now);
  return out;
}

}  // namespace jitscan
