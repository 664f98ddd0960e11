// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every expected value comes from an independent oracle or from
// construction, never from the code under test.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "jitscan/agent.hpp"
#include "oracles.hpp"

using namespace jitscan;
namespace oracle = jitscan::testing;

namespace {

constexpr std::size_t kPage = 4096;

const char* kFixtureRules =
    "rule stub family=fixture severity=kill sync { fc 48 83 e4 f0 e8 ?? 00 00 00 41 51 }\n"
    "rule marker family=adware severity=alert { de ad be ef }\n";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string hex_addr(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

std::string hex_bytes(const std::vector<std::uint8_t>& b) { return to_hex(b); }

// Random multi-process workload generator. Content bytes stay below 0x40 so
// nothing can match a fixture rule (each has a literal byte >= 0x80).
class TraceGen {
 public:
  TraceGen(std::mt19937_64& rng, std::vector<std::string> perm_pool) : rng_(rng), pool_(std::move(perm_pool)) {}

  std::string generate(std::size_t n_procs, std::size_t n_events) {
    std::ostringstream t;
    areas_.assign(n_procs, {});
    for (std::size_t p = 0; p < n_procs; ++p) {
      const std::uint32_t uid = p == 2 ? 2000 : 1000;
      t << "PROC " << uid;
      const std::size_t n_areas = pick(2, 5);
      for (std::size_t k = 0; k < n_areas; ++k) {
        const VPage start = 0x100 + k * 8;
        const std::size_t pages = pick(1, 3);
        const std::string perms = pool_[pick(0, pool_.size() - 1)];
        t << ' ' << hex_addr(start * kPage) << ':' << pages << ':' << perms;
        if (coin(0.5)) t << ':' << hex_bytes(benign(pick(1, 64)));
        areas_[p].push_back({start, pages});
      }
      t << '\n';
    }
    std::vector<VPage> next_free(n_procs, 0x100 + 6 * 8);
    for (std::size_t i = 0; i < n_events; ++i) {
      const std::size_t p = pick(0, n_procs - 1);
      const int pid = static_cast<int>(p) + 1;
      const int cpu = static_cast<int>(pick(0, 3));
      const int tid = static_cast<int>(pick(1, 3));
      const int roll = static_cast<int>(pick(0, 99));
      if (roll < 30) {
        const VAddr a = addr(p);
        t << "WRITE " << pid << ' ' << tid << ' ' << cpu << ' ' << hex_addr(a) << ' '
          << hex_bytes(benign(pick(1, 16))) << '\n';
      } else if (roll < 58) {
        t << "FETCH " << pid << ' ' << tid << ' ' << cpu << ' ' << hex_addr(addr(p)) << '\n';
      } else if (roll < 80) {
        t << "READ " << pid << ' ' << tid << ' ' << cpu << ' ' << hex_addr(addr(p)) << '\n';
      } else if (roll < 92) {
        const auto& [start, pages] = areas_[p][pick(0, areas_[p].size() - 1)];
        const std::size_t first = pick(0, pages - 1);
        const std::size_t n = pick(1, pages - first);
        t << "MPROTECT " << pid << ' ' << hex_addr((start + first) * kPage) << ' ' << n << ' '
          << pool_[pick(0, pool_.size() - 1)] << '\n';
      } else if (roll < 95) {
        const std::size_t pages = pick(1, 2);
        const VPage start = next_free[p];
        next_free[p] += pages + 1;
        t << "MMAP " << pid << ' ' << pool_[pick(0, pool_.size() - 1)] << ' ' << pages << " @"
          << hex_addr(start * kPage);
        if (coin(0.5)) t << ' ' << hex_bytes(benign(pick(1, 32)));
        t << '\n';
        areas_[p].push_back({start, pages});
      } else {
        t << "TICK " << pick(1, 20) << '\n';
      }
    }
    return t.str();
  }

 private:
  std::size_t pick(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }

  std::vector<std::uint8_t> benign(std::size_t n) { return oracle::random_bytes(rng_, n, 0x40); }

  // Mostly inside a declared area, sometimes in the gap after it. Writes of
  // up to 16 bytes may straddle into the next page.
  VAddr addr(std::size_t p) {
    const auto& [start, pages] = areas_[p][pick(0, areas_[p].size() - 1)];
    const VPage vp = coin(0.05) ? start + pages : start + pick(0, pages - 1);
    return vp * kPage + pick(0, kPage - 1);
  }

  std::mt19937_64& rng_;
  std::vector<std::string> pool_;
  std::vector<std::vector<std::pair<VPage, std::size_t>>> areas_;
};

ReplayConfig multi_cpu() {
  ReplayConfig c;
  c.n_cpus = 4;
  return c;
}

// --- criteria --------------------------------------------------------------

Outcome snapshot_oracle() {
  const RuleSet rules = parse_rules(kFixtureRules);
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t traces = 0, mismatches = 0;
  for (std::size_t len = 0; len <= 8; ++len) {
    for (std::size_t bits = 0; bits < (std::size_t{1} << len); ++bits) {
      std::vector<bool> is_fetch(len);
      std::ostringstream text;
      text << "PROC 1000 0x10000:1:rwx\n";
      for (std::size_t i = 0; i < len; ++i) {
        is_fetch[i] = (bits >> i) & 1;
        if (is_fetch[i])
          text << "FETCH 1 1 0 0x10000\n";
        else
          text << "WRITE 1 1 0 0x" << std::hex << (0x10000 + i) << std::dec << " 0" << i << "\n";
      }
      const Trace trace = parse_trace(text.str());
      Session s(rules, ReplayConfig{});
      s.apply(trace.events[0]);
      std::vector<bool> got;
      for (std::size_t i = 1; i < trace.events.size(); ++i) {
        const auto before = s.engine()->stats().snapshots_emitted;
        s.apply(trace.events[i]);
        got.push_back(s.engine()->stats().snapshots_emitted == before + 1);
      }
      if (got != oracle::reference_snapshots(is_fetch)) ++mismatches;
      ++traces;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {mismatches == 0 && traces == 511 && secs < 5.0,
          std::to_string(traces) + " traces, " + std::to_string(mismatches) + " mismatches, " +
              std::to_string(secs).substr(0, 5) + " s"};
}

Outcome mutual_exclusion() {
  const RuleSet rules = parse_rules(kFixtureRules);
  std::mt19937_64 rng(0x5eed);
  std::size_t events = 0, violations = 0, wx_pages_seen = 0;
  for (int round = 0; round < 4; ++round) {
    TraceGen gen(rng, {"rwx", "rwx", "rw-", "r-x", "r--", "--x", "-wx"});
    const Trace trace = parse_trace(gen.generate(3, 3000));
    Session s(rules, multi_cpu());
    for (const TraceLine& l : trace.events) {
      s.apply(l);
      ++events;
      violations += find_wx_violations(s.mmu()).size();
    }
    for (Pid pid : s.mmu().pids())
      for (const auto& [vp, pte] : s.mmu().space(pid).ptes)
        if (const VmArea* a = s.mmu().find_area(pid, vp); a && a->perms.is_wx()) ++wx_pages_seen;
  }
  return {violations == 0 && events >= 10000 && wx_pages_seen > 0,
          std::to_string(events) + " events, " + std::to_string(violations) + " violations, " +
              std::to_string(wx_pages_seen) + " WX pages live at the end"};
}

Outcome packed_retention() {
  std::mt19937_64 rng(0xbadc0de);
  int static_hits = 0, detected = 0;
  const int rounds = 100;
  for (int round = 0; round < rounds; ++round) {
    const std::size_t len = std::uniform_int_distribution<std::size_t>(15, 20)(rng);
    std::vector<std::uint8_t> sig = oracle::random_bytes(rng, len);
    std::string pattern;
    for (std::size_t i = 0; i < len; ++i) {
      const bool wild = i > 0 && i + 1 < len && std::bernoulli_distribution(0.1)(rng);
      pattern += wild ? "?? " : to_hex(std::span(&sig[i], 1)) + " ";
    }
    const std::string rules_text = std::string(kFixtureRules) + "rule packed family=dropper severity=kill { " + pattern + "}\n";
    const RuleSet rules = parse_rules(rules_text);

    const std::uint8_t key = static_cast<std::uint8_t>(std::uniform_int_distribution<int>(1, 255)(rng));
    std::vector<std::uint8_t> encoded = sig;
    for (auto& b : encoded) b ^= key;
    const std::vector<std::uint8_t> loader = oracle::random_bytes(rng, 200);

    const std::size_t wx_pages = 3;
    const std::size_t page = std::uniform_int_distribution<std::size_t>(0, wx_pages - 1)(rng);
    const std::size_t off = std::uniform_int_distribution<std::size_t>(0, kPage - len)(rng);
    const VAddr target = 0x30000 + page * kPage + off;
    const std::size_t split = std::uniform_int_distribution<std::size_t>(1, len - 1)(rng);

    std::ostringstream t;
    t << "PROC 1000 0x10000:1:r-x:" << to_hex(loader) << " 0x20000:1:rw-:" << to_hex(encoded) << " 0x30000:"
      << wx_pages << ":rwx\n";
    t << "READ 1 1 0 0x20000\n";
    t << "WRITE 1 1 0 " << hex_addr(target) << ' ' << to_hex(std::span(sig).first(split)) << '\n';
    t << "WRITE 1 1 1 " << hex_addr(target + split) << ' ' << to_hex(std::span(sig).subspan(split)) << '\n';
    t << "FETCH 1 1 0 " << hex_addr(target) << '\n';
    const Trace trace = parse_trace(t.str());

    // One-shot static scan of every page of the initial image.
    const ProcEvent& proc = std::get<ProcEvent>(trace.events[0].event);
    for (const AreaSpec& a : proc.areas) {
      for (std::size_t p = 0; p < a.n_pages; ++p) {
        std::vector<std::uint8_t> content(kPage, 0);
        for (std::size_t i = 0; i < kPage && p * kPage + i < a.content.size(); ++i) content[i] = a.content[p * kPage + i];
        static_hits += static_cast<int>(scan_page(content, rules).matches.size());
      }
    }

    const Report r = replay(trace, rules);
    bool found = false;
    for (const Detection& d : r.detections())
      found = found || (d.rule == "packed" && d.pid == Pid{1} && d.vpage == target / kPage && d.match_offset == off);
    bool killed = false;
    for (const ActionRecord& a : r.actions()) killed = killed || (a.action == "kill" && a.rule == "packed");
    if (found && killed) ++detected;
  }
  return {static_hits == 0 && detected == rounds,
          std::to_string(detected) + "/" + std::to_string(rounds) + " detected after unpacking, " +
              std::to_string(static_hits) + " static-image matches"};
}

Outcome read_only_exclusion() {
  const RuleSet rules = parse_rules(kFixtureRules);
  std::mt19937_64 rng(44);
  std::uint64_t snapshots = 0, events = 0, fetch_faults = 0;
  for (int round = 0; round < 20; ++round) {
    TraceGen gen(rng, {"r--", "rw-", "---"});
    const Trace trace = parse_trace(gen.generate(3, 500));
    const Report r = replay(trace, rules, multi_cpu());
    snapshots += r.metrics.snapshots_emitted + r.metrics.pending_high_watermark;
    events += r.metrics.events;
    for (std::size_t i = 0; i < trace.events.size(); ++i)
      if (std::holds_alternative<FetchEvent>(trace.events[i].event) && r.events[i].outcome == "segv") ++fetch_faults;
  }
  return {snapshots == 0 && fetch_faults > 0,
          std::to_string(events) + " events, " + std::to_string(snapshots) + " snapshots, " +
              std::to_string(fetch_faults) + " refused fetches"};
}

Outcome tlb_flush_necessity() {
  const RuleSet rules = parse_rules(kFixtureRules);
  const Trace trace = parse_trace(
      "PROC 1000 0x10000:1:rwx\n"
      "WRITE 1 1 1 0x10000 90\n"  // cpu 1 caches the page in write mode
      "FETCH 1 2 0 0x10000\n"     // cpu 0 moves it to exec mode
      "WRITE 1 1 1 0x10001 c3\n"  // cpu 1 writes through its cached entry
      "FETCH 1 2 0 0x10001\n");

  auto run = [&](bool suppress, std::size_t& flagged, std::uint64_t& snaps) {
    ReplayConfig cfg;
    cfg.n_cpus = 2;
    cfg.suppress_tlb_flush = suppress;
    Session s(rules, cfg);
    flagged = 0;
    for (const TraceLine& l : trace.events) {
      s.apply(l);
      flagged += find_wx_violations(s.mmu()).size();
    }
    snaps = s.engine()->stats().snapshots_emitted;
  };
  std::size_t flagged_suppressed = 0, flagged_flushed = 0;
  std::uint64_t snaps_suppressed = 0, snaps_flushed = 0;
  run(true, flagged_suppressed, snaps_suppressed);
  run(false, flagged_flushed, snaps_flushed);
  // With flushes the second write faults back to write mode and the second
  // fetch is snapshotted; without them the modified page runs unchecked.
  return {flagged_suppressed > 0 && flagged_flushed == 0 && snaps_flushed == 2 && snaps_suppressed == 1,
          "suppressed: " + std::to_string(flagged_suppressed) + " violations, " + std::to_string(snaps_suppressed) +
              " snapshots; flushed: " + std::to_string(flagged_flushed) + " violations, " +
              std::to_string(snaps_flushed) + " snapshots"};
}

Outcome dos_guard() {
  std::vector<std::string> problems;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };

  // Guard level: 20 rapid requests against T=8.
  {
    DosGuard g(GuardConfig{8, PenaltyAction::kill, 100, 300});
    int admitted = 0, first_deny = -1;
    for (int i = 0; i < 20; ++i) {
      const bool ok = g.admit(Uid{1000}, Pid{1}, 1).admitted;
      admitted += ok;
      if (!ok && first_deny < 0) first_deny = i;
    }
    expect(admitted == 8 && first_deny == 8, "guard admitted " + std::to_string(admitted));
  }

  // End to end through the fault path with the agent disabled.
  const RuleSet rules = parse_rules(kFixtureRules);
  std::ostringstream t;
  t << "PROC 1000 0x100000:20:r-x\nPROC 1000 0x200000:1:r-x\n";
  for (int i = 0; i < 20; ++i) t << "FETCH 1 1 0 " << hex_addr(0x100000 + i * kPage) << '\n';
  t << "FETCH 2 1 0 0x200000\n";
  t << "TICK 299\nTICK 1\n";
  t << "PROC 1000 0x300000:1:r-x\nFETCH 3 1 0 0x300000\n";
  const Trace trace = parse_trace(t.str());

  ReplayConfig cfg;
  cfg.guard = GuardConfig{8, PenaltyAction::kill, 100, 300};
  cfg.drain_every = 0;
  Session s(rules, cfg);
  std::size_t i = 0;
  for (; i < 23; ++i) s.apply(trace.events[i]);
  const Report& r = s.report();
  int ok = 0;
  for (std::size_t k = 2; k < 10; ++k) ok += r.events[k].outcome == "ok";
  expect(ok == 8, "flood admissions " + std::to_string(ok));
  expect(r.events[10].outcome == "killed", "9th fault not denied");
  expect(s.engine()->stats().snapshots_emitted == 8, "snapshots emitted");
  expect(r.events[22].outcome == "killed", "second pid not denied in window");
  const auto acts = r.actions();
  expect(acts.size() == 2 && acts[0].cause == ActionCause::throttle && acts[1].pid == Pid{2}, "throttle actions");
  expect(s.table().pending_count() == 8 && s.guard().entry(Uid{1000})->pending == 8, "pending before drain");

  s.agent_step(std::numeric_limits<std::size_t>::max());
  expect(s.guard().entry(Uid{1000})->pending == 0, "pending after drain");
  s.apply(trace.events[i++]);  // TICK 299
  expect(s.guard().entry(Uid{1000}).has_value(), "evicted too early");
  s.apply(trace.events[i++]);  // TICK 1
  expect(!s.guard().entry(Uid{1000}).has_value() && s.guard().evictions() == 1, "not evicted after ttl_evict");
  s.apply(trace.events[i++]);
  s.apply(trace.events[i++]);
  expect(s.report().events.back().outcome == "ok", "re-admission refused");
  expect(s.guard().entry(Uid{1000}).has_value() && s.guard().entry(Uid{1000})->pending == 1, "entry not recreated");

  std::string detail = "8 admits, deny on fault 9, sibling pid denied, evicted after 300 idle ticks, recreated";
  if (!problems.empty()) {
    detail.clear();
    for (const auto& p : problems) detail += p + "; ";
  }
  return {problems.empty(), detail};
}

Outcome mprotect_recheck() {
  const RuleSet rules = parse_rules(std::string(kFixtureRules));
  ReplayConfig cfg;
  cfg.record_snapshots = true;

  auto run = [&](const std::string& text, std::uint64_t& snaps, std::size_t& marker_hits, bool& content_ok,
                 std::size_t expect_at) {
    const Trace trace = parse_trace(text);
    Session s(rules, cfg);
    for (const TraceLine& l : trace.events) s.apply(l);
    const Report r = s.finish();
    snaps = r.metrics.snapshots_emitted;
    marker_hits = 0;
    for (const Detection& d : r.detections()) marker_hits += d.rule == "marker" && d.match_offset == expect_at;
    const auto& last = s.snapshots().back().content;
    content_ok = last[expect_at] == 0xde && last[expect_at + 3] == 0xef;
  };

  std::uint64_t a_snaps = 0, b_snaps = 0;
  std::size_t a_hits = 0, b_hits = 0;
  bool a_content = false, b_content = false;
  run("PROC 1000 0x10000:1:rw-\n"
      "WRITE 1 1 0 0x10100 deadbeef\n"
      "MPROTECT 1 0x10000 1 r-x\n"
      "FETCH 1 1 0 0x10100\n",
      a_snaps, a_hits, a_content, 0x100);
  run("PROC 1000 0x20000:1:r-x:90\n"
      "FETCH 1 1 0 0x20000\n"
      "MPROTECT 1 0x20000 1 rwx\n"
      "WRITE 1 1 0 0x20200 deadbeef\n"
      "FETCH 1 1 0 0x20200\n",
      b_snaps, b_hits, b_content, 0x200);
  return {a_snaps == 1 && a_hits == 1 && a_content && b_snaps == 2 && b_hits == 1 && b_content,
          "RW->RX: " + std::to_string(a_snaps) + " snapshot, X->WX->write->fetch: " + std::to_string(b_snaps) +
              " snapshots, written bytes scanned"};
}

Outcome pipeline_integrity() {
  constexpr int kProducers = 8;
  constexpr int kEach = 1000;
  constexpr int kReps = 100;
  int bad = 0;
  for (int rep = 0; rep < kReps; ++rep) {
    SnapshotTable table(64, SnapshotTable::kDefaultBuckets);
    std::vector<std::vector<std::uint64_t>> issued(kProducers);
    std::atomic<int> done{0};
    std::vector<PageSnapshot> got;
    std::thread drainer([&] {
      std::mt19937 r(static_cast<unsigned>(rep));
      while (true) {
        const bool finished = done.load() == kProducers;
        auto part = table.drain(std::uniform_int_distribution<std::size_t>(1, 64)(r));
        for (auto& s : part) got.push_back(std::move(s));
        if (finished && table.pending_count() == 0) break;
      }
    });
    std::vector<std::thread> producers;
    for (int p = 0; p < kProducers; ++p) {
      producers.emplace_back([&, p] {
        for (int i = 0; i < kEach; ++i) {
          PageSnapshot s;
          s.content.assign(64, static_cast<std::uint8_t>(p));
          s.pid = Pid{static_cast<std::uint32_t>(p * 100 + i % 5)};
          s.tid = Tid{static_cast<std::uint32_t>(i)};
          issued[p].push_back(table.enqueue(std::move(s)));
        }
        done.fetch_add(1);
      });
    }
    for (auto& th : producers) th.join();
    drainer.join();

    std::multiset<std::uint64_t> want, have;
    for (const auto& v : issued) want.insert(v.begin(), v.end());
    for (const auto& s : got) have.insert(s.seq);
    // Every snapshot carries its producer's fill byte; a torn copy would not.
    bool intact = true;
    for (const auto& s : got) intact = intact && s.content[0] == s.pid.value / 100 && s.content[63] == s.content[0];
    if (want != have || have.size() != kProducers * kEach || !intact) ++bad;
  }
  return {bad == 0, std::to_string(kReps) + " repetitions of 8x1000, " + std::to_string(bad) + " with loss or duplication"};
}

Outcome scanner_oracle() {
  std::mt19937_64 rng(99);
  const std::size_t sizes[] = {16, 64, 256, 1024, 4096};
  int mismatches = 0, total_matches = 0, edge_matches = 0;
  const int pairs = 10000;
  for (int i = 0; i < pairs; ++i) {
    const std::size_t ps = sizes[i % 5];
    const unsigned alphabet = 2 + static_cast<unsigned>(i % 4);
    auto rules = oracle::random_rules(rng, 32, std::min<std::size_t>(32, ps), alphabet, 0.15);
    const RuleSet rs(rules, ps);
    auto page = oracle::random_bytes(rng, ps, alphabet);
    const auto& last = rules[i % rules.size()];
    oracle::plant(rng, page, last, ps - last.pattern.size());
    const ScanResult got = scan_page(page, rs);
    const ScanResult want = oracle::naive_scan(page, rules);
    if (got != want) ++mismatches;
    total_matches += static_cast<int>(want.matches.size());
    for (const RuleMatch& m : want.matches)
      if (m.offset + rs.find(m.rule)->pattern.size() == ps) ++edge_matches;
  }
  return {mismatches == 0, std::to_string(pairs) + " pairs, " + std::to_string(mismatches) + " mismatches (" +
                               std::to_string(total_matches) + " matches, " + std::to_string(edge_matches) +
                               " ending on the page boundary)"};
}

Outcome transparency() {
  const RuleSet rules = parse_rules(kFixtureRules);
  std::mt19937_64 rng(1010);
  int differing = 0;
  std::uint64_t shadow_snapshots = 0;
  auto memory = [](const Session& s) {
    std::map<std::pair<std::uint32_t, VPage>, std::vector<std::uint8_t>> m;
    for (Pid pid : s.mmu().pids())
      for (const auto& [vp, pte] : s.mmu().space(pid).ptes)
        if (pte.present) m[{pid.value, vp}] = s.mmu().read_page(pid, vp);
    return m;
  };
  auto outcomes = [](const Report& r) {
    std::vector<std::string> v;
    for (const EventOutcome& e : r.events) v.push_back(e.op + ":" + e.outcome + ":" + e.detail);
    return v;
  };
  for (int round = 0; round < 100; ++round) {
    TraceGen gen(rng, {"rwx", "rw-", "r-x", "r--", "--x", "-wx", "---"});
    const Trace trace = parse_trace(gen.generate(3, 300));
    ReplayConfig with = multi_cpu();
    ReplayConfig without = multi_cpu();
    without.shadow = false;
    Session a(rules, with), b(rules, without);
    for (const TraceLine& l : trace.events) {
      a.apply(l);
      b.apply(l);
    }
    const Report ra = a.finish(), rb = b.finish();
    shadow_snapshots += ra.metrics.snapshots_emitted;
    if (outcomes(ra) != outcomes(rb) || memory(a) != memory(b) || !ra.records.empty()) ++differing;
  }
  return {differing == 0 && shadow_snapshots > 0,
          "100 traces, " + std::to_string(differing) + " differing, " + std::to_string(shadow_snapshots) +
              " snapshots taken along the way"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"snapshot-oracle-equivalence", snapshot_oracle},
      {"wx-mutual-exclusion", mutual_exclusion},
      {"packed-payload-retention", packed_retention},
      {"read-only-exclusion", read_only_exclusion},
      {"tlb-flush-necessity", tlb_flush_necessity},
      {"dos-guard", dos_guard},
      {"mprotect-recheck", mprotect_recheck},
      {"pipeline-integrity", pipeline_integrity},
      {"scanner-oracle", scanner_oracle},
      {"transparency", transparency},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %-28s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
