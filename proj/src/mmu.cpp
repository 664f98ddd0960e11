#include "jitscan/mmu.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

namespace jitscan {

Perms Perms::parse(std::string_view text) {
  if (text.size() != 3) throw MmuError("permissions must look like rwx, got '" + std::string(text) + "'");
  auto flag = [&](std::size_t i, char on) {
    if (text[i] == on) return true;
    if (text[i] == '-') return false;
    throw MmuError("bad permission character in '" + std::string(text) + "'");
  };
  return Perms{flag(0, 'r'), flag(1, 'w'), flag(2, 'x')};
}

std::string Perms::str() const {
  std::string s = "---";
  if (r) s[0] = 'r';
  if (w) s[1] = 'w';
  if (x) s[2] = 'x';
  return s;
}

std::string_view to_string(AccessKind k) {
  switch (k) {
    case AccessKind::read: return "read";
    case AccessKind::write: return "write";
    case AccessKind::fetch: return "fetch";
  }
  return "?";
}

std::string_view to_string(FaultCause c) {
  switch (c) {
    case FaultCause::not_present: return "not_present";
    case FaultCause::write_violation: return "write_violation";
    case FaultCause::exec_violation: return "exec_violation";
    case FaultCause::invalid_area: return "invalid_area";
  }
  return "?";
}

std::string_view to_string(AccessResult r) {
  switch (r) {
    case AccessResult::ok: return "ok";
    case AccessResult::killed: return "killed";
    case AccessResult::segv_delivered: return "segv";
    case AccessResult::blocked: return "blocked";
  }
  return "?";
}

VmArea make_area(VPage start, std::uint64_t n_pages, Perms perms, std::vector<std::uint8_t> backing) {
  VmArea a;
  a.start_vpage = start;
  a.n_pages = n_pages;
  a.perms = perms;
  if (!backing.empty()) a.backing = std::make_shared<const std::vector<std::uint8_t>>(std::move(backing));
  return a;
}

bool logically_permits(Perms perms, AccessKind kind) {
  switch (kind) {
    case AccessKind::read: return perms.r;
    case AccessKind::write: return perms.w;
    case AccessKind::fetch: return perms.x;
  }
  return false;
}

FaultVerdict PlainFaultHandler::on_fault(Mmu& mmu, const FaultEvent& fault) {
  if (fault.cause != FaultCause::not_present) return {FaultAction::deliver_segv, false};
  const VPage vp = mmu.page_of(fault.vaddr);
  const VmArea* area = mmu.find_area(fault.pid, vp);
  if (area == nullptr || !logically_permits(area->perms, fault.kind)) return {FaultAction::deliver_segv, false};
  PageTableEntry& pte = mmu.materialize(fault.pid, vp);
  pte.writable = area->perms.w;
  pte.exec_disabled = !area->perms.x;
  return {FaultAction::allow, false};
}

void PlainFaultHandler::on_mprotect(Mmu& mmu, Pid pid, VPage first, std::uint64_t n,
                                    std::span<const Perms> /*old_perms*/, Perms new_perms) {
  for (VPage vp = first; vp < first + n; ++vp) {
    PageTableEntry* pte = mmu.pte(pid, vp);
    if (pte == nullptr) continue;
    pte->writable = new_perms.w;
    pte->exec_disabled = !new_perms.x;
    mmu.tlb_flush_one(pid, vp);
  }
}

Mmu::Mmu() : Mmu(Config{}) {}

Mmu::Mmu(Config config) : config_(config), handler_(&plain_handler_) {
  if (config_.page_size < 16 || !std::has_single_bit(config_.page_size))
    throw MmuError("page size must be a power of two >= 16");
  if (config_.n_cpus == 0) throw MmuError("need at least one cpu");
  cpus_.resize(config_.n_cpus);
  for (std::size_t i = 0; i < cpus_.size(); ++i) cpus_[i].id = CpuId{static_cast<std::uint32_t>(i)};
}

void Mmu::set_fault_handler(FaultHandler* handler) { handler_ = handler ? handler : &plain_handler_; }

Pid Mmu::create_process(Uid uid, std::vector<VmArea> image) {
  std::sort(image.begin(), image.end(),
            [](const VmArea& a, const VmArea& b) { return a.start_vpage < b.start_vpage; });
  for (std::size_t i = 0; i < image.size(); ++i) {
    const VmArea& a = image[i];
    if (a.n_pages == 0) throw MmuError("area with zero pages");
    if (a.backing && a.backing->size() > a.backing_offset + a.n_pages * config_.page_size)
      throw MmuError("area backing larger than the area");
    if (i > 0 && image[i - 1].overlaps(a)) throw MmuError("overlapping areas in process image");
  }
  const Pid pid{next_pid_++};
  AddressSpace as;
  as.pid = pid;
  as.uid = uid;
  as.areas = std::move(image);
  spaces_.emplace(pid, std::move(as));
  return pid;
}

VPage Mmu::map_area(Pid pid, VmArea area) {
  AddressSpace& as = live_space(pid);
  if (area.n_pages == 0) throw MmuError("area with zero pages");
  if (area.backing && area.backing->size() > area.backing_offset + area.n_pages * config_.page_size)
    throw MmuError("area backing larger than the area");
  for (const VmArea& a : as.areas)
    if (a.overlaps(area)) throw MmuError("mapping overlaps an existing area");
  const VPage start = area.start_vpage;
  auto pos = std::upper_bound(as.areas.begin(), as.areas.end(), start,
                              [](VPage v, const VmArea& a) { return v < a.start_vpage; });
  as.areas.insert(pos, std::move(area));
  return start;
}

VPage Mmu::map_anywhere(Pid pid, std::uint64_t n_pages, Perms perms, std::vector<std::uint8_t> backing) {
  const AddressSpace& as = live_space(pid);
  VPage start = config_.mmap_base;
  for (const VmArea& a : as.areas) start = std::max(start, a.end_vpage() + 1);
  return map_area(pid, make_area(start, n_pages, perms, std::move(backing)));
}

void Mmu::split_at(AddressSpace& as, VPage vpage) {
  for (std::size_t i = 0; i < as.areas.size(); ++i) {
    VmArea& a = as.areas[i];
    if (vpage <= a.start_vpage || vpage >= a.end_vpage()) continue;
    VmArea tail = a;
    const std::uint64_t head_pages = vpage - a.start_vpage;
    tail.start_vpage = vpage;
    tail.n_pages = a.n_pages - head_pages;
    tail.backing_offset = a.backing_offset + head_pages * config_.page_size;
    a.n_pages = head_pages;
    as.areas.insert(as.areas.begin() + static_cast<std::ptrdiff_t>(i) + 1, std::move(tail));
    return;
  }
}

void Mmu::mprotect(Pid pid, VPage first, std::uint64_t n_pages, Perms perms) {
  AddressSpace& as = live_space(pid);
  if (n_pages == 0) return;
  for (VPage vp = first; vp < first + n_pages; ++vp)
    if (find_area(pid, vp) == nullptr) throw MmuError("mprotect range not covered by mapped areas");
  split_at(as, first);
  split_at(as, first + n_pages);

  std::vector<Perms> old_perms;
  old_perms.reserve(n_pages);
  for (VPage vp = first; vp < first + n_pages; ++vp) old_perms.push_back(find_area(pid, vp)->perms);
  for (VmArea& a : as.areas)
    if (a.start_vpage >= first && a.end_vpage() <= first + n_pages) a.perms = perms;
  handler_->on_mprotect(*this, pid, first, n_pages, old_perms, perms);
}

bool Mmu::tlb_permits(const TlbEntry& e, AccessKind kind) {
  switch (kind) {
    case AccessKind::read: return true;
    case AccessKind::write: return e.writable;
    case AccessKind::fetch: return !e.exec_disabled;
  }
  return false;
}

void Mmu::perform(const PageTableEntry& pte, const AccessRequest& req) {
  if (req.kind != AccessKind::write || req.data.empty()) return;
  auto& frame = frames_.at(*pte.frame);
  std::memcpy(frame.data() + page_offset(req.vaddr), req.data.data(), req.data.size());
}

AccessResult Mmu::access(const AccessRequest& req) {
  AddressSpace& as = live_space(req.pid);
  if (req.cpu.value >= cpus_.size()) throw MmuError("cpu index out of range");
  if (req.kind == AccessKind::write && page_offset(req.vaddr) + req.data.size() > config_.page_size)
    throw MmuError("write crosses a page boundary");
  ++stats_.accesses;
  if (as.blocked) return AccessResult::blocked;

  const VPage vp = page_of(req.vaddr);
  const FaultEvent base{req.pid, req.tid, req.cpu, req.vaddr, req.kind, FaultCause::invalid_area};

  if (find_area(req.pid, vp) == nullptr) {
    ++stats_.faults;
    const FaultVerdict v = handler_->on_fault(*this, base);
    if (v.action == FaultAction::sigkill) {
      kill_process(req.pid);
      return AccessResult::killed;
    }
    return AccessResult::segv_delivered;
  }

  SimCpu& cpu = cpus_[req.cpu.value];
  const auto key = std::make_pair(req.pid, vp);
  if (auto hit = cpu.tlb.find(key); hit != cpu.tlb.end() && tlb_permits(hit->second, req.kind)) {
    ++stats_.tlb_hits;
    perform(as.ptes.at(vp), req);
    return AccessResult::ok;
  }

  // TLB miss, or the cached bits refuse the access: walk the page table.
  for (int attempt = 0;; ++attempt) {
    FaultEvent fault = base;
    auto it = as.ptes.find(vp);
    if (it == as.ptes.end() || !it->second.present) {
      fault.cause = FaultCause::not_present;
    } else if (tlb_permits(TlbEntry{it->second.writable, it->second.exec_disabled}, req.kind)) {
      cpu.tlb[key] = TlbEntry{it->second.writable, it->second.exec_disabled};
      perform(it->second, req);
      return AccessResult::ok;
    } else {
      fault.cause = req.kind == AccessKind::write ? FaultCause::write_violation : FaultCause::exec_violation;
    }
    if (attempt > 0) throw std::logic_error("fault handler allowed an access without fixing the PTE");

    ++stats_.faults;
    const FaultVerdict v = handler_->on_fault(*this, fault);
    switch (v.action) {
      case FaultAction::allow: break;
      case FaultAction::deliver_segv: return AccessResult::segv_delivered;
      case FaultAction::sigkill: kill_process(req.pid); return AccessResult::killed;
      case FaultAction::block: as.blocked = true; return AccessResult::blocked;
    }
  }
}

void Mmu::tlb_flush_one(Pid pid, VPage vpage) {
  if (flush_suppressed_) {
    ++stats_.flushes_suppressed;
    return;
  }
  ++stats_.flushes;
  for (SimCpu& cpu : cpus_) cpu.tlb.erase({pid, vpage});
}

std::vector<std::uint8_t> Mmu::read_page(Pid pid, VPage vpage) const {
  const PageTableEntry* p = pte(pid, vpage);
  if (p == nullptr) throw MmuError("read_page on a page that is not present");
  return frames_.at(*p->frame);
}

void Mmu::kill_process(Pid pid) {
  AddressSpace& as = space_mut(pid);
  if (!as.alive) return;
  as.alive = false;
  for (SimCpu& cpu : cpus_)
    std::erase_if(cpu.tlb, [pid](const auto& kv) { return kv.first.first == pid; });
}

const VmArea* Mmu::find_area(Pid pid, VPage vpage) const {
  const AddressSpace& as = space(pid);
  auto it = std::upper_bound(as.areas.begin(), as.areas.end(), vpage,
                             [](VPage v, const VmArea& a) { return v < a.start_vpage; });
  if (it == as.areas.begin()) return nullptr;
  --it;
  return it->contains(vpage) ? &*it : nullptr;
}

PageTableEntry* Mmu::pte(Pid pid, VPage vpage) {
  AddressSpace& as = space_mut(pid);
  auto it = as.ptes.find(vpage);
  return it == as.ptes.end() ? nullptr : &it->second;
}

const PageTableEntry* Mmu::pte(Pid pid, VPage vpage) const {
  const AddressSpace& as = space(pid);
  auto it = as.ptes.find(vpage);
  return it == as.ptes.end() ? nullptr : &it->second;
}

PageTableEntry& Mmu::materialize(Pid pid, VPage vpage) {
  AddressSpace& as = space_mut(pid);
  const VmArea* area = find_area(pid, vpage);
  if (area == nullptr) throw MmuError("materialize outside any area");
  if (as.ptes.contains(vpage)) throw MmuError("page already present");

  std::vector<std::uint8_t> frame(config_.page_size, 0);
  if (area->backing) {
    const std::size_t off = area->backing_offset + (vpage - area->start_vpage) * config_.page_size;
    if (off < area->backing->size()) {
      const std::size_t n = std::min(config_.page_size, area->backing->size() - off);
      std::memcpy(frame.data(), area->backing->data() + off, n);
    }
  }
  frames_.push_back(std::move(frame));
  PageTableEntry& p = as.ptes[vpage];
  p.present = true;
  p.frame = frames_.size() - 1;
  return p;
}

bool Mmu::alive(Pid pid) const { return has_process(pid) && space(pid).alive; }

bool Mmu::blocked(Pid pid) const { return space(pid).blocked; }

void Mmu::set_blocked(Pid pid, bool blocked) { space_mut(pid).blocked = blocked; }

const AddressSpace& Mmu::space(Pid pid) const {
  auto it = spaces_.find(pid);
  if (it == spaces_.end()) throw MmuError("unknown pid " + std::to_string(pid.value));
  return it->second;
}

AddressSpace& Mmu::space_mut(Pid pid) {
  auto it = spaces_.find(pid);
  if (it == spaces_.end()) throw MmuError("unknown pid " + std::to_string(pid.value));
  return it->second;
}

AddressSpace& Mmu::live_space(Pid pid) {
  AddressSpace& as = space_mut(pid);
  if (!as.alive) throw MmuError("process " + std::to_string(pid.value) + " is dead");
  return as;
}

std::vector<Pid> Mmu::pids() const {
  std::vector<Pid> out;
  out.reserve(spaces_.size());
  for (const auto& [pid, as] : spaces_) out.push_back(pid);
  return out;
}

std::optional<TlbEntry> Mmu::tlb_lookup(CpuId cpu, Pid pid, VPage vpage) const {
  const auto& tlb = cpus_.at(cpu.value).tlb;
  auto it = tlb.find({pid, vpage});
  if (it == tlb.end()) return std::nullopt;
  return it->second;
}

}  // namespace jitscan
