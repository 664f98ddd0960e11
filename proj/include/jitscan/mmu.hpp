#pragma once

// Simulated MMU: per-process address spaces with demand paging, a single
// level of page-table entries per virtual page, and per-CPU TLBs that cache
// permission bits until explicitly flushed.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "jitscan/ids.hpp"

namespace jitscan {

class MmuError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using FrameId = std::uint64_t;

// Logical permissions, as requested by the application.
struct Perms {
  bool r = false;
  bool w = false;
  bool x = false;

  friend constexpr bool operator==(Perms, Perms) = default;

  // Accepts the "rwx" / "r-x" / "---" form.
  static Perms parse(std::string_view text);
  std::string str() const;

  bool is_wx() const { return w && x; }
};

enum class AccessKind { read, write, fetch };
enum class FaultCause { not_present, write_violation, exec_violation, invalid_area };
enum class AccessResult { ok, killed, segv_delivered, blocked };

std::string_view to_string(AccessKind k);
std::string_view to_string(FaultCause c);
std::string_view to_string(AccessResult r);

struct PageTableEntry {
  bool present = false;
  bool writable = false;       // W
  bool exec_disabled = false;  // XD
  bool orig_write = false;     // shadow: write permission currently masked
  bool orig_exe = false;       // shadow: execute permission currently masked
  std::optional<FrameId> frame;

  friend bool operator==(const PageTableEntry&, const PageTableEntry&) = default;
};

struct VmArea {
  VPage start_vpage = 0;
  std::uint64_t n_pages = 0;
  Perms perms;
  // Initial content laid out from the first byte of the area at
  // backing_offset. Null means anonymous (zero-filled) memory.
  std::shared_ptr<const std::vector<std::uint8_t>> backing;
  std::size_t backing_offset = 0;

  VPage end_vpage() const { return start_vpage + n_pages; }
  bool contains(VPage vp) const { return vp >= start_vpage && vp < end_vpage(); }
  bool overlaps(const VmArea& o) const {
    return start_vpage < o.end_vpage() && o.start_vpage < end_vpage();
  }
};

VmArea make_area(VPage start, std::uint64_t n_pages, Perms perms,
                 std::vector<std::uint8_t> backing = {});

struct AddressSpace {
  Pid pid;
  Uid uid;
  std::vector<VmArea> areas;  // sorted by start_vpage, disjoint
  std::map<VPage, PageTableEntry> ptes;
  bool alive = true;
  bool blocked = false;
};

struct TlbEntry {
  bool writable = false;
  bool exec_disabled = false;
};

struct SimCpu {
  CpuId id;
  std::map<std::pair<Pid, VPage>, TlbEntry> tlb;
};

struct FaultEvent {
  Pid pid;
  Tid tid;
  CpuId cpu;
  VAddr vaddr = 0;
  AccessKind kind = AccessKind::read;
  FaultCause cause = FaultCause::not_present;
};

enum class FaultAction { allow, deliver_segv, sigkill, block };

struct FaultVerdict {
  FaultAction action = FaultAction::deliver_segv;
  bool snapshot_emitted = false;
};

struct AccessRequest {
  Pid pid;
  Tid tid;
  CpuId cpu;
  VAddr vaddr = 0;
  AccessKind kind = AccessKind::read;
  std::span<const std::uint8_t> data;  // payload for writes
};

class Mmu;

// Receives every fault the MMU raises plus mprotect notifications. The
// handler owns the PTE policy; the MMU only walks and caches.
class FaultHandler {
 public:
  virtual ~FaultHandler() = default;
  virtual FaultVerdict on_fault(Mmu& mmu, const FaultEvent& fault) = 0;
  // Called after the logical permissions of [first, first + n) changed.
  // old_perms holds the previous permissions of each page in the range.
  virtual void on_mprotect(Mmu& mmu, Pid pid, VPage first, std::uint64_t n,
                           std::span<const Perms> old_perms, Perms new_perms) = 0;
};

// Conventional kernel behaviour: PTE bits mirror the logical permissions and
// any violation is a genuine fault.
class PlainFaultHandler final : public FaultHandler {
 public:
  FaultVerdict on_fault(Mmu& mmu, const FaultEvent& fault) override;
  void on_mprotect(Mmu& mmu, Pid pid, VPage first, std::uint64_t n,
                   std::span<const Perms> old_perms, Perms new_perms) override;
};

// Whether the logical permissions allow the access kind at all.
bool logically_permits(Perms perms, AccessKind kind);

class Mmu {
 public:
  struct Config {
    std::size_t page_size = 4096;
    std::size_t n_cpus = 4;
    VPage mmap_base = 0x400;
  };

  struct Stats {
    std::uint64_t accesses = 0;
    std::uint64_t tlb_hits = 0;
    std::uint64_t faults = 0;
    std::uint64_t flushes = 0;
    std::uint64_t flushes_suppressed = 0;
  };

  Mmu();
  explicit Mmu(Config config);

  Mmu(const Mmu&) = delete;
  Mmu& operator=(const Mmu&) = delete;

  // Non-owning; nullptr restores the built-in plain handler.
  void set_fault_handler(FaultHandler* handler);

  Pid create_process(Uid uid, std::vector<VmArea> image);
  // Adds an area at its stated start; throws on overlap.
  VPage map_area(Pid pid, VmArea area);
  // Places an area above every existing one, leaving a one-page gap.
  VPage map_anywhere(Pid pid, std::uint64_t n_pages, Perms perms,
                     std::vector<std::uint8_t> backing = {});
  void mprotect(Pid pid, VPage first, std::uint64_t n_pages, Perms perms);

  AccessResult access(const AccessRequest& req);

  // Drops (pid, vpage) from every CPU's TLB.
  void tlb_flush_one(Pid pid, VPage vpage);
  std::vector<std::uint8_t> read_page(Pid pid, VPage vpage) const;
  void kill_process(Pid pid);

  // Handler-facing page-table access.
  const VmArea* find_area(Pid pid, VPage vpage) const;
  PageTableEntry* pte(Pid pid, VPage vpage);
  const PageTableEntry* pte(Pid pid, VPage vpage) const;
  // Backs the page with a fresh frame filled from the area's image. All
  // permission and shadow bits start cleared.
  PageTableEntry& materialize(Pid pid, VPage vpage);

  bool alive(Pid pid) const;
  bool blocked(Pid pid) const;
  void set_blocked(Pid pid, bool blocked);
  bool has_process(Pid pid) const { return spaces_.contains(pid); }
  const AddressSpace& space(Pid pid) const;
  std::vector<Pid> pids() const;

  const std::vector<SimCpu>& cpus() const { return cpus_; }
  std::optional<TlbEntry> tlb_lookup(CpuId cpu, Pid pid, VPage vpage) const;

  std::size_t page_size() const { return config_.page_size; }
  VPage page_of(VAddr addr) const { return addr / config_.page_size; }
  std::size_t page_offset(VAddr addr) const { return addr % config_.page_size; }

  // Debug switch: turns tlb_flush_one into a no-op.
  void set_flush_suppressed(bool suppressed) { flush_suppressed_ = suppressed; }

  const Stats& stats() const { return stats_; }

 private:
  AddressSpace& space_mut(Pid pid);
  AddressSpace& live_space(Pid pid);
  void split_at(AddressSpace& as, VPage vpage);
  static bool tlb_permits(const TlbEntry& e, AccessKind kind);
  void perform(const PageTableEntry& pte, const AccessRequest& req);

  Config config_;
  PlainFaultHandler plain_handler_;
  FaultHandler* handler_;
  std::map<Pid, AddressSpace> spaces_;
  std::vector<SimCpu> cpus_;
  std::vector<std::vector<std::uint8_t>> frames_;
  std::uint32_t next_pid_ = 1;
  bool flush_suppressed_ = false;
  Stats stats_;
};

}  // namespace jitscan
