// jitscan: replay workload traces through the simulated engine, scan single
// pages, or validate trace files.
//
// Exit status: 0 clean, 1 a kill-severity signature was detected,
// 2 usage or input error.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "jitscan/agent.hpp"
#include "jitscan/signature.hpp"
#include "jitscan/trace.hpp"

namespace {

constexpr int kExitDetected = 1;
constexpr int kExitError = 2;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_out(const std::string& path, const std::string& data) {
  if (path.empty() || path == "-") {
    std::cout << data;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << data;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace jitscan;

  CLI::App app{"Just-in-time executable page scanner (simulation)"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI/TOML file");

  // run
  auto* run = app.add_subcommand("run", "Replay a trace and report detections");
  std::string trace_path, rules_path, report_path, format = "jsonl";
  std::string sync_check = "on", action = "kill", penalty = "kill";
  ReplayConfig cfg;
  const std::map<std::string, ThreatResponse> responses{
      {"kill", ThreatResponse::kill}, {"block", ThreatResponse::block}, {"alert", ThreatResponse::alert}};
  const std::map<std::string, PenaltyAction> penalties{{"kill", PenaltyAction::kill}, {"block", PenaltyAction::block}};
  const std::map<std::string, bool> on_off{{"on", true}, {"off", false}};

  run->add_option("--trace", trace_path, "Trace file")->required()->check(CLI::ExistingFile);
  run->add_option("--rules", rules_path, "Rule file")->required()->check(CLI::ExistingFile);
  run->add_option("--sync-check", sync_check, "In-fault-path check (on|off)")
      ->check(CLI::IsMember(on_off))
      ->capture_default_str();
  run->add_option("--action", action, "Response to kill-severity matches (kill|block|alert)")
      ->check(CLI::IsMember(responses))
      ->capture_default_str();
  run->add_option("--penalty", penalty, "Throttle penalty action (kill|block)")
      ->check(CLI::IsMember(penalties))
      ->capture_default_str();
  run->add_option("--threshold", cfg.guard.threshold, "Pending snapshots allowed per uid")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--ttl-penalty", cfg.guard.ttl_penalty, "Penalty window in ticks")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--ttl-evict", cfg.guard.ttl_evict, "Idle ticks before a throttle entry is dropped")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--page-size", cfg.page_size, "Page size in bytes (power of two)")->capture_default_str();
  run->add_option("--drain-every", cfg.drain_every, "Run the agent after every N events (0 = never)")
      ->capture_default_str();
  run->add_option("--report", report_path, "Write the report here instead of stdout");
  run->add_option("--format", format, "Report format")->check(CLI::IsMember({"jsonl", "text"}))->capture_default_str();

  // scan
  auto* scan = app.add_subcommand("scan", "Scan one page file against a rule file");
  std::string page_path, scan_rules;
  std::size_t scan_page_size = 4096;
  scan->add_option("--rules", scan_rules, "Rule file")->required()->check(CLI::ExistingFile);
  scan->add_option("--page", page_path, "Raw page bytes; shorter files are zero-padded")
      ->required()
      ->check(CLI::ExistingFile);
  scan->add_option("--page-size", scan_page_size, "Page size in bytes")->capture_default_str();

  // check-trace
  auto* check = app.add_subcommand("check-trace", "Validate a trace file");
  std::string check_path;
  check->add_option("file", check_path, "Trace file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitError;
  }

  try {
    if (*run) {
      cfg.sync_check = on_off.at(sync_check);
      cfg.response = responses.at(action);
      cfg.guard.penalty_action = penalties.at(penalty);
      const Trace trace = parse_trace(slurp(trace_path));
      const RuleSet rules = parse_rules(slurp(rules_path), cfg.page_size);
      const Report report = replay(trace, rules, cfg);
      write_out(report_path, emit_report(report, format));
      return report.kill_severity_detected() ? kExitDetected : 0;
    }
    if (*scan) {
      const RuleSet rules = parse_rules(slurp(scan_rules), scan_page_size);
      const std::string raw = slurp(page_path);
      if (raw.size() > scan_page_size) throw std::runtime_error("page file is larger than one page");
      std::vector<std::uint8_t> page(scan_page_size, 0);
      std::copy(raw.begin(), raw.end(), page.begin());
      const ScanResult result = scan_page(page, rules);
      bool kill = false;
      for (const RuleMatch& m : result.matches) {
        const SignatureRule* r = rules.find(m.rule);
        kill = kill || r->severity == Severity::kill;
        std::cout << "match rule=" << m.rule << " family=" << r->family << " severity=" << to_string(r->severity)
                  << " offset=" << m.offset << '\n';
      }
      std::cout << "matches=" << result.matches.size() << '\n';
      return kill ? kExitDetected : 0;
    }
    if (*check) {
      const Trace trace = parse_trace(slurp(check_path));
      std::cout << check_path << ": " << trace.events.size() << " events ok\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "jitscan: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
