#include "jitscan/shadow_engine.hpp"

namespace jitscan {

std::string_view to_string(ThreatResponse r) {
  switch (r) {
    case ThreatResponse::kill: return "kill";
    case ThreatResponse::block: return "block";
    case ThreatResponse::alert: return "alert";
  }
  return "?";
}

ShadowEngine::ShadowEngine(SyncChecker sync, DosGuard& guard, SnapshotTable& table, ShadowObserver* observer,
                           ThreatResponse sync_response)
    : sync_(std::move(sync)), guard_(guard), table_(table), observer_(observer), sync_response_(sync_response) {}

FaultVerdict ShadowEngine::on_fault(Mmu& mmu, const FaultEvent& fault) {
  if (fault.cause == FaultCause::invalid_area) {
    ++stats_.genuine_faults;
    return {FaultAction::deliver_segv, false};
  }
  const VmArea* area = mmu.find_area(fault.pid, mmu.page_of(fault.vaddr));
  if (area == nullptr) {
    ++stats_.genuine_faults;
    return {FaultAction::deliver_segv, false};
  }
  switch (fault.cause) {
    case FaultCause::not_present: return on_materialize(mmu, fault, *area);
    case FaultCause::write_violation: return handle_write_fault(mmu, fault);
    case FaultCause::exec_violation: return handle_exec_fault(mmu, fault);
    case FaultCause::invalid_area: break;
  }
  return {FaultAction::deliver_segv, false};
}

ShadowVerdict ShadowEngine::on_materialize(Mmu& mmu, const FaultEvent& fault, const VmArea& area) {
  if (!logically_permits(area.perms, fault.kind)) {
    ++stats_.genuine_faults;
    return {FaultAction::deliver_segv, false};
  }
  ++stats_.materializations;
  PageTableEntry& pte = mmu.materialize(fault.pid, mmu.page_of(fault.vaddr));
  pte.writable = area.perms.w;
  pte.exec_disabled = true;
  if (!area.perms.x) return {FaultAction::allow, false};

  // Executable content is fetch-masked until a checked fetch unmasks it.
  pte.orig_exe = true;
  if (fault.kind != AccessKind::fetch) return {FaultAction::allow, false};
  FaultEvent exec = fault;
  exec.cause = FaultCause::exec_violation;
  return handle_exec_fault(mmu, exec);
}

ShadowVerdict ShadowEngine::handle_write_fault(Mmu& mmu, const FaultEvent& fault) {
  ++stats_.write_faults;
  const VPage vp = mmu.page_of(fault.vaddr);
  const VmArea* area = mmu.find_area(fault.pid, vp);
  PageTableEntry* pte = mmu.pte(fault.pid, vp);
  const bool general_ok = area != nullptr && area->perms.w && mmu.alive(fault.pid);
  if (!general_ok || pte == nullptr || !pte->orig_write) {
    ++stats_.genuine_faults;
    return {FaultAction::deliver_segv, false};
  }
  pte->exec_disabled = true;
  pte->writable = true;
  pte->orig_exe = true;
  pte->orig_write = false;
  mmu.tlb_flush_one(fault.pid, vp);
  return {FaultAction::allow, false};
}

ShadowVerdict ShadowEngine::handle_exec_fault(Mmu& mmu, const FaultEvent& fault) {
  const VPage vp = mmu.page_of(fault.vaddr);
  if (!mmu.alive(fault.pid)) throw MmuError("exec fault for a dead process");
  ++stats_.exec_faults;
  PageTableEntry* pte = mmu.pte(fault.pid, vp);
  const VmArea* area = mmu.find_area(fault.pid, vp);
  if (pte == nullptr || area == nullptr || !pte->orig_exe) {
    ++stats_.genuine_faults;
    return {FaultAction::deliver_segv, false};
  }
  const Uid uid = mmu.space(fault.pid).uid;
  std::vector<std::uint8_t> content = mmu.read_page(fault.pid, vp);

  if (auto threat = sync_.check(content)) {
    if (observer_ != nullptr) observer_->on_sync_threat(fault, uid, *threat);
    if (sync_response_ == ThreatResponse::kill) {
      ++stats_.sync_kills;
      return {FaultAction::sigkill, false};
    }
    if (sync_response_ == ThreatResponse::block) return {FaultAction::block, false};
    // alert: the fetch proceeds through the normal path
  }

  const AdmitDecision admit = guard_.admit(uid, fault.pid, now_);
  if (!admit.admitted) {
    ++stats_.throttle_denials;
    if (observer_ != nullptr) observer_->on_throttle(fault, uid, admit.action);
    if (admit.action == PenaltyAction::kill) return {FaultAction::sigkill, false};
    throttle_blocked_.insert(fault.pid);
    return {FaultAction::block, false};
  }

  PageSnapshot snap;
  snap.content = std::move(content);
  snap.offset = mmu.page_offset(fault.vaddr);
  snap.vaddr = fault.vaddr;
  snap.pid = fault.pid;
  snap.tid = fault.tid;
  snap.uid = uid;
  PageSnapshot reported;
  if (observer_ != nullptr) reported = snap;
  const std::uint64_t seq = table_.enqueue(std::move(snap));
  ++stats_.snapshots_emitted;
  if (observer_ != nullptr) {
    reported.seq = seq;
    observer_->on_snapshot(reported);
  }

  pte->exec_disabled = false;
  pte->writable = false;
  pte->orig_exe = false;
  // X-only pages have no write mode to come back to.
  pte->orig_write = area->perms.w;
  mmu.tlb_flush_one(fault.pid, vp);
  return {FaultAction::allow, true};
}

void ShadowEngine::on_mprotect(Mmu& mmu, Pid pid, VPage first, std::uint64_t n, std::span<const Perms> old_perms,
                               Perms new_perms) {
  for (std::uint64_t i = 0; i < n; ++i) {
    const VPage vp = first + i;
    PageTableEntry* pte = mmu.pte(pid, vp);
    if (pte == nullptr) continue;
    const Perms old = old_perms[i];
    if (old == new_perms) continue;

    if (!new_perms.x) {
      pte->orig_exe = false;
      pte->orig_write = false;
      pte->writable = new_perms.w;
      pte->exec_disabled = true;
    } else if (!old.x || (!old.w && new_perms.w)) {
      // Gained X, or kept X and gained W: force a recheck on the next fetch.
      pte->writable = new_perms.w;
      pte->exec_disabled = true;
      pte->orig_exe = true;
      pte->orig_write = false;
    } else if (old.w && !new_perms.w) {
      // Dropped W. A page still fetch-masked keeps its pending check.
      pte->writable = false;
      pte->orig_write = false;
    } else {
      continue;
    }
    mmu.tlb_flush_one(pid, vp);
  }
}

std::vector<Uid> ShadowEngine::tick(Mmu& mmu, Tick now) {
  now_ = now;
  std::vector<Uid> evicted = guard_.tick(now);
  for (auto it = throttle_blocked_.begin(); it != throttle_blocked_.end();) {
    const AddressSpace& as = mmu.space(*it);
    if (!as.alive) {
      it = throttle_blocked_.erase(it);
    } else if (!guard_.penalized(as.uid, now)) {
      mmu.set_blocked(*it, false);
      it = throttle_blocked_.erase(it);
    } else {
      ++it;
    }
  }
  return evicted;
}

std::vector<WxViolation> find_wx_violations(const Mmu& mmu) {
  std::vector<WxViolation> out;
  for (Pid pid : mmu.pids()) {
    const AddressSpace& as = mmu.space(pid);
    for (const auto& [vp, pte] : as.ptes) {
      if (!pte.present) continue;
      const VmArea* area = mmu.find_area(pid, vp);
      if (area == nullptr || !area->perms.is_wx()) continue;

      bool can_write = pte.writable;
      bool can_fetch = !pte.exec_disabled;
      bool stale = false;
      for (const SimCpu& cpu : mmu.cpus()) {
        auto it = cpu.tlb.find({pid, vp});
        if (it == cpu.tlb.end()) continue;
        can_write = can_write || it->second.writable;
        can_fetch = can_fetch || !it->second.exec_disabled;
        stale = stale || it->second.writable != pte.writable || it->second.exec_disabled != pte.exec_disabled;
      }
      if (can_write && can_fetch)
        out.push_back({pid, vp, stale ? "stale TLB entry permits write and fetch" : "PTE permits write and fetch"});
      if (pte.orig_write == pte.orig_exe) out.push_back({pid, vp, "shadow bits not complementary"});
    }
  }
  return out;
}

}  // namespace jitscan
