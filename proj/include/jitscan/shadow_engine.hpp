#pragma once

// The shadow W<->X state machine.
//
// A page whose logical permissions include X is never fetchable before its
// content has been snapshotted. For WX pages the physical bits alternate:
//
//   write mode:  W=1 XD=1 orig_exe=1    a fetch faults -> check, snapshot, exec mode
//   exec mode:   W=0 XD=0 orig_write=1  a write faults -> write mode
//
// The orig_* bits name the permission that is currently masked and are what
// tells a shadow-induced fault apart from a genuine invalid access. X-only
// pages enter with orig_exe=1 and leave the machine after the first checked
// fetch.

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "jitscan/dos_guard.hpp"
#include "jitscan/mmu.hpp"
#include "jitscan/signature.hpp"
#include "jitscan/snapshot_table.hpp"

namespace jitscan {

using ShadowVerdict = FaultVerdict;

// Response to a kill-severity signature match.
enum class ThreatResponse { kill, block, alert };

std::string_view to_string(ThreatResponse r);

class ShadowObserver {
 public:
  virtual ~ShadowObserver() = default;
  virtual void on_snapshot(const PageSnapshot& /*snapshot*/) {}
  virtual void on_sync_threat(const FaultEvent& /*fault*/, Uid /*uid*/, const RuleMatch& /*match*/) {}
  virtual void on_throttle(const FaultEvent& /*fault*/, Uid /*uid*/, PenaltyAction /*action*/) {}
};

class ShadowEngine final : public FaultHandler {
 public:
  struct Stats {
    std::uint64_t materializations = 0;
    std::uint64_t write_faults = 0;
    std::uint64_t exec_faults = 0;
    std::uint64_t snapshots_emitted = 0;
    std::uint64_t sync_kills = 0;
    std::uint64_t throttle_denials = 0;
    std::uint64_t genuine_faults = 0;
  };

  ShadowEngine(SyncChecker sync, DosGuard& guard, SnapshotTable& table, ShadowObserver* observer = nullptr,
               ThreatResponse sync_response = ThreatResponse::kill);

  FaultVerdict on_fault(Mmu& mmu, const FaultEvent& fault) override;
  void on_mprotect(Mmu& mmu, Pid pid, VPage first, std::uint64_t n, std::span<const Perms> old_perms,
                   Perms new_perms) override;

  ShadowVerdict on_materialize(Mmu& mmu, const FaultEvent& fault, const VmArea& area);
  ShadowVerdict handle_write_fault(Mmu& mmu, const FaultEvent& fault);
  ShadowVerdict handle_exec_fault(Mmu& mmu, const FaultEvent& fault);

  // Advances the engine's notion of time: expires penalties, evicts idle
  // throttle entries and lifts throttle blocks whose penalty window ended.
  std::vector<Uid> tick(Mmu& mmu, Tick now);
  void set_time(Tick now) { now_ = now; }
  Tick time() const { return now_; }

  // Keeps a pid blocked past its throttle window (e.g. blocked for a
  // signature match).
  void hold_block(Pid pid) { throttle_blocked_.erase(pid); }

  void set_observer(ShadowObserver* observer) { observer_ = observer; }
  const Stats& stats() const { return stats_; }
  const SyncChecker& sync_checker() const { return sync_; }

 private:
  SyncChecker sync_;
  DosGuard& guard_;
  SnapshotTable& table_;
  ShadowObserver* observer_;
  ThreatResponse sync_response_;
  std::set<Pid> throttle_blocked_;
  Tick now_ = 0;
  Stats stats_;
};

struct WxViolation {
  Pid pid;
  VPage vpage = 0;
  std::string reason;
};

// Audits every present page of every WX area. A page is in violation when
// some view of it (the PTE or any CPU's cached TLB entry) permits writes
// while some view permits fetches, or when its shadow bits are not exactly
// one of {orig_write, orig_exe}.
std::vector<WxViolation> find_wx_violations(const Mmu& mmu);

}  // namespace jitscan
