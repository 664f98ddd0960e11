#pragma once

// Plain-text workload traces, one event per line, '#' comments:
//
//   PROC <uid> [<addr>:<n_pages>:<perms>[:<hex>]]...
//   MMAP <pid> <perms> <n_pages> [@<addr>] [<hex>]
//   MPROTECT <pid> <addr> <n_pages> <perms>
//   WRITE <pid> <tid> <cpu> <addr> <hex>
//   FETCH <pid> <tid> <cpu> <addr>
//   READ <pid> <tid> <cpu> <addr>
//   TICK <n>
//
// Numbers are decimal or 0x-prefixed hex. Perms use the rwx / r-x / --- form.
// PROC events create pids 1, 2, 3, ... in order of appearance.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "jitscan/ids.hpp"
#include "jitscan/mmu.hpp"

namespace jitscan {

class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct AreaSpec {
  VAddr addr = 0;
  std::uint64_t n_pages = 0;
  Perms perms;
  std::vector<std::uint8_t> content;
};

struct ProcEvent {
  Uid uid;
  std::vector<AreaSpec> areas;
};

struct MmapEvent {
  Pid pid;
  Perms perms;
  std::uint64_t n_pages = 0;
  std::optional<VAddr> addr;
  std::vector<std::uint8_t> content;
};

struct MprotectEvent {
  Pid pid;
  VAddr addr = 0;
  std::uint64_t n_pages = 0;
  Perms perms;
};

struct WriteEvent {
  Pid pid;
  Tid tid;
  CpuId cpu;
  VAddr addr = 0;
  std::vector<std::uint8_t> bytes;
};

struct FetchEvent {
  Pid pid;
  Tid tid;
  CpuId cpu;
  VAddr addr = 0;
};

struct ReadEvent {
  Pid pid;
  Tid tid;
  CpuId cpu;
  VAddr addr = 0;
};

struct TickEvent {
  Tick n = 1;
};

using TraceEvent = std::variant<ProcEvent, MmapEvent, MprotectEvent, WriteEvent, FetchEvent, ReadEvent, TickEvent>;

struct TraceLine {
  std::size_t line = 0;
  TraceEvent event;
};

struct Trace {
  std::vector<TraceLine> events;

  // Highest cpu index referenced, plus one; at least one.
  std::size_t cpus_needed() const;
};

Trace parse_trace(std::string_view text);

// Canonical one-line rendering; parse_trace accepts it back.
std::string format_event(const TraceEvent& event);
std::string_view event_name(const TraceEvent& event);

std::vector<std::uint8_t> parse_hex_bytes(std::string_view hex);
std::string to_hex(std::span<const std::uint8_t> bytes);

}  // namespace jitscan
