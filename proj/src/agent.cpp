#include "jitscan/agent.hpp"

#include <json.hpp>
#include <sstream>

namespace jitscan {

std::string_view to_string(DetectionPath p) { return p == DetectionPath::sync ? "sync" : "async"; }
std::string_view to_string(ActionCause c) { return c == ActionCause::signature ? "signature" : "throttle"; }

std::vector<Detection> Report::detections() const {
  std::vector<Detection> out;
  for (const Record& r : records)
    if (const auto* d = std::get_if<Detection>(&r)) out.push_back(*d);
  return out;
}

std::vector<ActionRecord> Report::actions() const {
  std::vector<ActionRecord> out;
  for (const Record& r : records)
    if (const auto* a = std::get_if<ActionRecord>(&r)) out.push_back(*a);
  return out;
}

bool Report::kill_severity_detected() const {
  for (const Record& r : records)
    if (const auto* d = std::get_if<Detection>(&r); d && d->severity == Severity::kill) return true;
  return false;
}

// ---------------------------------------------------------------------------

Agent::Agent(SnapshotTable& table, const RuleSet& rules, Mmu& mmu, ThreatResponse response, AgentSink& sink)
    : table_(table), rules_(rules), mmu_(mmu), response_(response), sink_(sink) {}

std::size_t Agent::step(std::size_t batch, Tick now) {
  std::vector<PageSnapshot> batch_items = table_.drain(batch, now);
  for (const PageSnapshot& s : batch_items) {
    ++scans_;
    const ScanResult result = rules_.scan(s.content);
    for (const RuleMatch& m : result.matches) {
      const SignatureRule* rule = rules_.find(m.rule);
      Detection d;
      d.tick = now;
      d.pid = s.pid;
      d.uid = s.uid;
      d.tid = s.tid;
      d.vpage = s.vpage();
      d.vaddr = s.vaddr;
      d.offset = s.offset;
      d.match_offset = m.offset;
      d.rule = m.rule;
      d.family = rule->family;
      d.severity = rule->severity;
      d.path = DetectionPath::async;
      d.seq = s.seq;
      sink_.on_detection(d);

      ActionRecord a{now, s.pid, s.uid, "alert", ActionCause::signature, DetectionPath::async, m.rule};
      if (rule->severity == Severity::kill && response_ != ThreatResponse::alert) {
        // Only a live, not yet handled process gets an action.
        if (!mmu_.alive(s.pid)) continue;
        if (response_ == ThreatResponse::kill) {
          mmu_.kill_process(s.pid);
          a.action = "kill";
        } else {
          if (mmu_.blocked(s.pid)) continue;
          mmu_.set_blocked(s.pid, true);
          a.action = "block";
        }
      }
      sink_.on_action(a);
    }
  }
  return batch_items.size();
}

// ---------------------------------------------------------------------------

Session::Session(const RuleSet& rules, ReplayConfig config) : rules_(rules), config_(config) {
  config_.guard.validate();
  Mmu::Config mc;
  mc.page_size = config_.page_size;
  mc.n_cpus = config_.n_cpus == 0 ? 1 : config_.n_cpus;
  mmu_ = std::make_unique<Mmu>(mc);
  mmu_->set_flush_suppressed(config_.suppress_tlb_flush);
  guard_ = std::make_unique<DosGuard>(config_.guard);
  table_ = std::make_unique<SnapshotTable>(config_.page_size, config_.buckets, guard_.get());
  if (config_.shadow) {
    engine_ = std::make_unique<ShadowEngine>(SyncChecker(rules_, config_.sync_check), *guard_, *table_,
                                             static_cast<ShadowObserver*>(this), config_.response);
    mmu_->set_fault_handler(engine_.get());
  }
  agent_ = std::make_unique<Agent>(*table_, rules_, *mmu_, config_.response, static_cast<AgentSink&>(*this));
}

Session::~Session() { mmu_->set_fault_handler(nullptr); }

void Session::on_snapshot(const PageSnapshot& s) {
  if (config_.record_snapshots) snapshots_.push_back(s);
}

void Session::on_sync_threat(const FaultEvent& fault, Uid uid, const RuleMatch& match) {
  const SignatureRule* rule = rules_.find(match.rule);
  Detection d;
  d.tick = now_;
  d.pid = fault.pid;
  d.uid = uid;
  d.tid = fault.tid;
  d.vpage = mmu_->page_of(fault.vaddr);
  d.vaddr = fault.vaddr;
  d.offset = mmu_->page_offset(fault.vaddr);
  d.match_offset = match.offset;
  d.rule = match.rule;
  d.family = rule ? rule->family : "";
  d.severity = rule ? rule->severity : Severity::kill;
  d.path = DetectionPath::sync;
  on_detection(d);
  on_action({now_, fault.pid, uid, std::string(to_string(config_.response)), ActionCause::signature,
             DetectionPath::sync, match.rule});
}

void Session::on_throttle(const FaultEvent& fault, Uid uid, PenaltyAction action) {
  on_action({now_, fault.pid, uid, std::string(to_string(action)), ActionCause::throttle, std::nullopt, ""});
}

void Session::on_detection(const Detection& d) {
  ++report_.metrics.detections;
  report_.records.emplace_back(d);
}

void Session::on_action(const ActionRecord& a) {
  if (a.action == "kill") {
    ++report_.metrics.kills;
  } else if (a.action == "block") {
    ++report_.metrics.blocks;
    if (a.cause == ActionCause::signature && engine_) engine_->hold_block(a.pid);
  } else {
    ++report_.metrics.alerts;
  }
  if (a.cause == ActionCause::throttle) ++report_.metrics.throttle_denials;
  report_.records.emplace_back(a);
}

std::size_t Session::agent_step(std::size_t batch) { return agent_->step(batch, now_); }

namespace {

// Splits a write at page boundaries; the first non-ok chunk decides.
AccessResult write_bytes(Mmu& mmu, const WriteEvent& w) {
  std::size_t done = 0;
  while (done < w.bytes.size()) {
    const VAddr addr = w.addr + done;
    const std::size_t room = mmu.page_size() - mmu.page_offset(addr);
    const std::size_t n = std::min(room, w.bytes.size() - done);
    AccessRequest req{w.pid, w.tid, w.cpu, addr, AccessKind::write,
                      std::span<const std::uint8_t>(w.bytes).subspan(done, n)};
    const AccessResult r = mmu.access(req);
    if (r != AccessResult::ok) return r;
    done += n;
  }
  return AccessResult::ok;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

}  // namespace

EventOutcome Session::run(const TraceEvent& ev) {
  EventOutcome out;
  out.op = std::string(event_name(ev));
  out.outcome = "ok";
  Mmu& mmu = *mmu_;
  const std::size_t ps = mmu.page_size();

  auto page_aligned = [&](VAddr a) {
    if (a % ps != 0) throw MmuError("address " + hex(a) + " is not page-aligned");
    return a / ps;
  };

  std::visit(
      [&](const auto& e) {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, ProcEvent>) {
          std::vector<VmArea> image;
          for (const AreaSpec& a : e.areas) image.push_back(make_area(page_aligned(a.addr), a.n_pages, a.perms, a.content));
          out.detail = "pid=" + std::to_string(mmu.create_process(e.uid, std::move(image)).value);
        } else if constexpr (std::is_same_v<E, MmapEvent>) {
          VPage start;
          if (e.addr) {
            start = mmu.map_area(e.pid, make_area(page_aligned(*e.addr), e.n_pages, e.perms, e.content));
          } else {
            start = mmu.map_anywhere(e.pid, e.n_pages, e.perms, e.content);
          }
          out.detail = "addr=" + hex(start * ps);
        } else if constexpr (std::is_same_v<E, MprotectEvent>) {
          mmu.mprotect(e.pid, page_aligned(e.addr), e.n_pages, e.perms);
        } else if constexpr (std::is_same_v<E, WriteEvent>) {
          out.outcome = std::string(to_string(write_bytes(mmu, e)));
        } else if constexpr (std::is_same_v<E, FetchEvent>) {
          out.outcome = std::string(to_string(mmu.access({e.pid, e.tid, e.cpu, e.addr, AccessKind::fetch, {}})));
        } else if constexpr (std::is_same_v<E, ReadEvent>) {
          out.outcome = std::string(to_string(mmu.access({e.pid, e.tid, e.cpu, e.addr, AccessKind::read, {}})));
        }
      },
      ev);
  return out;
}

const EventOutcome& Session::apply(const TraceLine& line) {
  const Tick step = std::holds_alternative<TickEvent>(line.event) ? std::get<TickEvent>(line.event).n : 1;
  now_ += step;
  if (engine_) {
    report_.metrics.evictions += engine_->tick(*mmu_, now_).size();
  } else {
    report_.metrics.evictions += guard_->tick(now_).size();
  }

  EventOutcome out;
  try {
    out = run(line.event);
  } catch (const MmuError& e) {
    out.op = std::string(event_name(line.event));
    out.outcome = "error";
    out.detail = e.what();
    ++report_.metrics.event_errors;
  }
  out.line = line.line;
  out.tick = now_;
  ++report_.metrics.events;
  report_.events.push_back(std::move(out));

  if (config_.drain_every != 0 && ++since_drain_ >= config_.drain_every) {
    since_drain_ = 0;
    agent_step(config_.drain_batch);
  }
  return report_.events.back();
}

Report Session::finish() {
  if (config_.drain_every != 0)
    while (agent_step(config_.drain_batch) != 0) {
    }
  Metrics& m = report_.metrics;
  m.snapshots_emitted = engine_ ? engine_->stats().snapshots_emitted : 0;
  m.pending_high_watermark = table_->high_watermark();
  m.pending_final = table_->pending_count();
  m.scans_run = agent_->scans_run();
  m.unknown_deliveries = guard_->unknown_deliveries();
  return report_;
}

Report replay(const Trace& trace, const RuleSet& rules, ReplayConfig config) {
  if (config.n_cpus == 0) config.n_cpus = trace.cpus_needed();
  Session session(rules, config);
  for (const TraceLine& line : trace.events) session.apply(line);
  return session.finish();
}

// ---------------------------------------------------------------------------

namespace {

using json = nlohmann::ordered_json;

json to_json(const Detection& d) {
  json j;
  j["type"] = "detection";
  j["tick"] = d.tick;
  j["pid"] = d.pid.value;
  j["uid"] = d.uid.value;
  j["tid"] = d.tid.value;
  j["page"] = hex(d.vpage);
  j["vaddr"] = hex(d.vaddr);
  j["offset"] = d.offset;
  j["match_offset"] = d.match_offset;
  j["rule"] = d.rule;
  j["family"] = d.family;
  j["severity"] = to_string(d.severity);
  j["path"] = to_string(d.path);
  j["seq"] = d.seq ? json(*d.seq) : json(nullptr);
  return j;
}

json to_json(const ActionRecord& a) {
  json j;
  j["type"] = "action";
  j["tick"] = a.tick;
  j["pid"] = a.pid.value;
  j["uid"] = a.uid.value;
  j["action"] = a.action;
  j["cause"] = to_string(a.cause);
  j["path"] = a.path ? json(to_string(*a.path)) : json(nullptr);
  j["rule"] = a.rule.empty() ? json(nullptr) : json(a.rule);
  return j;
}

json summary_json(const Report& r) {
  const Metrics& m = r.metrics;
  json j;
  j["type"] = "summary";
  j["events"] = m.events;
  j["event_errors"] = m.event_errors;
  j["snapshots_emitted"] = m.snapshots_emitted;
  j["pending_high_watermark"] = m.pending_high_watermark;
  j["pending_final"] = m.pending_final;
  j["scans_run"] = m.scans_run;
  j["detections"] = m.detections;
  j["kills"] = m.kills;
  j["blocks"] = m.blocks;
  j["alerts"] = m.alerts;
  j["throttle_denials"] = m.throttle_denials;
  j["evictions"] = m.evictions;
  j["unknown_deliveries"] = m.unknown_deliveries;
  j["kill_severity_detected"] = r.kill_severity_detected();
  return j;
}

}  // namespace

std::string emit_report(const Report& report, std::string_view format) {
  std::ostringstream os;
  if (format == "jsonl") {
    for (const Report::Record& rec : report.records)
      std::visit([&](const auto& r) { os << to_json(r).dump() << '\n'; }, rec);
    os << summary_json(report).dump() << '\n';
  } else if (format == "text") {
    for (const EventOutcome& e : report.events) {
      os << "line " << e.line << " t=" << e.tick << ' ' << e.op << ": " << e.outcome;
      if (!e.detail.empty()) os << " (" << e.detail << ')';
      os << '\n';
    }
    for (const Report::Record& rec : report.records) {
      if (const auto* d = std::get_if<Detection>(&rec)) {
        os << "detection t=" << d->tick << " pid=" << d->pid << " uid=" << d->uid << " page=" << hex(d->vpage)
           << " offset=" << d->offset << " rule=" << d->rule << " family=" << d->family
           << " severity=" << to_string(d->severity) << " path=" << to_string(d->path) << '\n';
      } else {
        const auto& a = std::get<ActionRecord>(rec);
        os << "action t=" << a.tick << " pid=" << a.pid << " uid=" << a.uid << ' ' << a.action
           << " cause=" << to_string(a.cause);
        if (!a.rule.empty()) os << " rule=" << a.rule;
        os << '\n';
      }
    }
    const Metrics& m = report.metrics;
    os << "summary events=" << m.events << " errors=" << m.event_errors << " snapshots=" << m.snapshots_emitted
       << " pending_hwm=" << m.pending_high_watermark << " scans=" << m.scans_run << " detections=" << m.detections
       << " kills=" << m.kills << " blocks=" << m.blocks << " alerts=" << m.alerts
       << " throttle_denials=" << m.throttle_denials << " evictions=" << m.evictions << '\n';
  } else {
    throw std::invalid_argument("unknown report format '" + std::string(format) + "'");
  }
  return os.str();
}

}  // namespace jitscan
