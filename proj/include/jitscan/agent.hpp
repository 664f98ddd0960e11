#pragma once

// User-level agent and the deterministic replay driver that wires the MMU,
// shadow engine, snapshot table, throttle and agent together.

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "jitscan/dos_guard.hpp"
#include "jitscan/mmu.hpp"
#include "jitscan/shadow_engine.hpp"
#include "jitscan/signature.hpp"
#include "jitscan/snapshot_table.hpp"
#include "jitscan/trace.hpp"

namespace jitscan {

enum class DetectionPath { sync, async };
enum class ActionCause { signature, throttle };

std::string_view to_string(DetectionPath p);
std::string_view to_string(ActionCause c);

struct Detection {
  Tick tick = 0;
  Pid pid;
  Uid uid;
  Tid tid;
  VPage vpage = 0;
  VAddr vaddr = 0;
  std::size_t offset = 0;  // in-page offset of the fetched instruction
  std::size_t match_offset = 0;
  std::string rule;
  std::string family;
  Severity severity = Severity::alert;
  DetectionPath path = DetectionPath::async;
  std::optional<std::uint64_t> seq;  // snapshot sequence number, async only
};

struct ActionRecord {
  Tick tick = 0;
  Pid pid;
  Uid uid;
  std::string action;  // kill, block or alert
  ActionCause cause = ActionCause::signature;
  std::optional<DetectionPath> path;
  std::string rule;  // empty for throttle actions
};

struct EventOutcome {
  std::size_t line = 0;
  Tick tick = 0;
  std::string op;
  std::string outcome;  // ok, segv, killed, blocked, error
  std::string detail;
};

struct Metrics {
  std::uint64_t events = 0;
  std::uint64_t event_errors = 0;
  std::uint64_t snapshots_emitted = 0;
  std::uint64_t pending_high_watermark = 0;
  std::uint64_t pending_final = 0;
  std::uint64_t scans_run = 0;
  std::uint64_t detections = 0;
  std::uint64_t kills = 0;
  std::uint64_t blocks = 0;
  std::uint64_t alerts = 0;
  std::uint64_t throttle_denials = 0;
  std::uint64_t evictions = 0;
  std::uint64_t unknown_deliveries = 0;
};

struct Report {
  using Record = std::variant<Detection, ActionRecord>;

  std::vector<EventOutcome> events;
  std::vector<Record> records;  // chronological
  Metrics metrics;

  std::vector<Detection> detections() const;
  std::vector<ActionRecord> actions() const;
  bool kill_severity_detected() const;
};

// Serializes a report. "jsonl": one JSON object per detection/action then a
// summary object. "text": human-readable including per-event outcomes.
// Throws std::invalid_argument on an unknown format.
std::string emit_report(const Report& report, std::string_view format = "jsonl");

class AgentSink {
 public:
  virtual ~AgentSink() = default;
  virtual void on_detection(const Detection& d) = 0;
  virtual void on_action(const ActionRecord& a) = 0;
};

// Drains snapshots, runs the full scan on each and applies the policy.
class Agent {
 public:
  Agent(SnapshotTable& table, const RuleSet& rules, Mmu& mmu, ThreatResponse response, AgentSink& sink);

  std::size_t step(std::size_t batch, Tick now);
  std::uint64_t scans_run() const { return scans_; }

 private:
  SnapshotTable& table_;
  const RuleSet& rules_;
  Mmu& mmu_;
  ThreatResponse response_;
  AgentSink& sink_;
  std::uint64_t scans_ = 0;
};

struct ReplayConfig {
  std::size_t page_size = 4096;
  std::size_t n_cpus = 0;  // 0: as many as the trace references
  std::size_t buckets = SnapshotTable::kDefaultBuckets;
  bool sync_check = true;
  ThreatResponse response = ThreatResponse::kill;
  GuardConfig guard;
  std::size_t drain_every = 1;  // 0 disables the agent
  std::size_t drain_batch = std::numeric_limits<std::size_t>::max();
  bool shadow = true;  // false runs the plain MMU with no shadow engine
  bool suppress_tlb_flush = false;
  bool record_snapshots = false;  // keep a copy of every emitted snapshot
};

class Session final : private ShadowObserver, private AgentSink {
 public:
  Session(const RuleSet& rules, ReplayConfig config);
  ~Session() override;

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  // Advances the clock, applies one event, then lets the agent run if due.
  const EventOutcome& apply(const TraceLine& line);
  std::size_t agent_step(std::size_t batch);
  // Final drain (when the agent is enabled) and metric roll-up.
  Report finish();

  Tick now() const { return now_; }
  Mmu& mmu() { return *mmu_; }
  const Mmu& mmu() const { return *mmu_; }
  SnapshotTable& table() { return *table_; }
  DosGuard& guard() { return *guard_; }
  ShadowEngine* engine() { return engine_.get(); }
  const Report& report() const { return report_; }
  const std::vector<PageSnapshot>& snapshots() const { return snapshots_; }
  const ReplayConfig& config() const { return config_; }

 private:
  void on_snapshot(const PageSnapshot& s) override;
  void on_sync_threat(const FaultEvent& fault, Uid uid, const RuleMatch& match) override;
  void on_throttle(const FaultEvent& fault, Uid uid, PenaltyAction action) override;
  void on_detection(const Detection& d) override;
  void on_action(const ActionRecord& a) override;

  EventOutcome run(const TraceEvent& ev);

  const RuleSet& rules_;
  ReplayConfig config_;
  std::unique_ptr<Mmu> mmu_;
  std::unique_ptr<DosGuard> guard_;
  std::unique_ptr<SnapshotTable> table_;
  std::unique_ptr<ShadowEngine> engine_;
  std::unique_ptr<Agent> agent_;
  Report report_;
  std::vector<PageSnapshot> snapshots_;
  Tick now_ = 0;
  std::size_t since_drain_ = 0;
};

Report replay(const Trace& trace, const RuleSet& rules, ReplayConfig config = {});

}  // namespace jitscan
