#include "jitscan/trace.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace jitscan {

TraceParseError::TraceParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<std::uint64_t> to_u64(std::string_view s) {
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    s.remove_prefix(2);
    base = 16;
  }
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

class LineParser {
 public:
  LineParser(std::size_t line, std::vector<std::string_view> w) : line_(line), w_(std::move(w)) {}

  std::size_t argc() const { return w_.size() - 1; }

  void expect_args(std::size_t lo, std::size_t hi) const {
    if (argc() < lo || argc() > hi)
      fail(std::string(w_[0]) + " takes " + (lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi)) +
           " arguments, got " + std::to_string(argc()));
  }

  std::string_view arg(std::size_t i) const { return w_.at(i + 1); }

  std::uint64_t number(std::size_t i, const char* what) const { return number_of(arg(i), what); }

  std::uint64_t number_of(std::string_view s, const char* what) const {
    auto v = to_u64(s);
    if (!v) fail(std::string("bad ") + what + " '" + std::string(s) + "'");
    return *v;
  }

  std::uint32_t id(std::size_t i, const char* what) const {
    const std::uint64_t v = number(i, what);
    if (v > UINT32_MAX) fail(std::string(what) + " out of range");
    return static_cast<std::uint32_t>(v);
  }

  Perms perms_of(std::string_view s) const {
    try {
      return Perms::parse(s);
    } catch (const MmuError& e) {
      fail(e.what());
    }
  }

  std::vector<std::uint8_t> hex_of(std::string_view s) const {
    try {
      return parse_hex_bytes(s);
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }

  [[noreturn]] void fail(const std::string& msg) const { throw TraceParseError(line_, msg); }

 private:
  std::size_t line_;
  std::vector<std::string_view> w_;
};

}  // namespace

std::vector<std::uint8_t> parse_hex_bytes(std::string_view hex) {
  if (hex.size() % 2 != 0) throw std::invalid_argument("odd-length hex string");
  std::vector<std::uint8_t> out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    std::uint8_t b = 0;
    auto [p, ec] = std::from_chars(hex.data() + i, hex.data() + i + 2, b, 16);
    if (ec != std::errc{} || p != hex.data() + i + 2) throw std::invalid_argument("bad hex byte '" + std::string(hex.substr(i, 2)) + "'");
    out.push_back(b);
  }
  return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

std::size_t Trace::cpus_needed() const {
  std::size_t n = 1;
  for (const TraceLine& l : events) {
    std::visit(
        [&](const auto& e) {
          if constexpr (requires { e.cpu; }) n = std::max<std::size_t>(n, e.cpu.value + 1);
        },
        l.event);
  }
  return n;
}

Trace parse_trace(std::string_view text) {
  Trace trace;
  std::uint32_t procs = 0;
  std::size_t line_no = 0;
  for (std::string_view raw : split(text, '\n')) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    auto w = words(raw);
    if (w.empty()) continue;
    std::string op(w[0]);
    std::transform(op.begin(), op.end(), op.begin(), [](unsigned char c) { return std::toupper(c); });
    const LineParser p(line_no, std::move(w));

    auto pid_arg = [&](std::size_t i) {
      const std::uint32_t v = p.id(i, "pid");
      if (v == 0 || v > procs) p.fail("pid " + std::to_string(v) + " was not created by an earlier PROC");
      return Pid{v};
    };

    TraceEvent ev;
    if (op == "PROC") {
      if (p.argc() < 1) p.fail("PROC needs a uid");
      ProcEvent e{Uid{p.id(0, "uid")}, {}};
      for (std::size_t i = 1; i < p.argc(); ++i) {
        auto parts = split(p.arg(i), ':');
        if (parts.size() < 3 || parts.size() > 4) p.fail("area must be addr:n_pages:perms[:hex]");
        AreaSpec a;
        a.addr = p.number_of(parts[0], "area address");
        a.n_pages = p.number_of(parts[1], "page count");
        if (a.n_pages == 0) p.fail("area with zero pages");
        a.perms = p.perms_of(parts[2]);
        if (parts.size() == 4) a.content = p.hex_of(parts[3]);
        e.areas.push_back(std::move(a));
      }
      ++procs;
      ev = std::move(e);
    } else if (op == "MMAP") {
      p.expect_args(3, 5);
      MmapEvent e;
      e.pid = pid_arg(0);
      e.perms = p.perms_of(p.arg(1));
      e.n_pages = p.number(2, "page count");
      if (e.n_pages == 0) p.fail("mapping with zero pages");
      for (std::size_t i = 3; i < p.argc(); ++i) {
        std::string_view a = p.arg(i);
        if (a.starts_with('@')) {
          if (e.addr || !e.content.empty()) p.fail("@addr must come before the content and appear once");
          e.addr = p.number_of(a.substr(1), "address");
        } else {
          if (!e.content.empty()) p.fail("MMAP takes one content argument");
          e.content = p.hex_of(a);
        }
      }
      ev = std::move(e);
    } else if (op == "MPROTECT") {
      p.expect_args(4, 4);
      ev = MprotectEvent{pid_arg(0), p.number(1, "address"), p.number(2, "page count"), p.perms_of(p.arg(3))};
    } else if (op == "WRITE") {
      p.expect_args(5, 5);
      WriteEvent e{pid_arg(0), Tid{p.id(1, "tid")}, CpuId{p.id(2, "cpu")}, p.number(3, "address"), p.hex_of(p.arg(4))};
      if (e.bytes.empty()) p.fail("WRITE needs at least one byte");
      ev = std::move(e);
    } else if (op == "FETCH") {
      p.expect_args(4, 4);
      ev = FetchEvent{pid_arg(0), Tid{p.id(1, "tid")}, CpuId{p.id(2, "cpu")}, p.number(3, "address")};
    } else if (op == "READ") {
      p.expect_args(4, 4);
      ev = ReadEvent{pid_arg(0), Tid{p.id(1, "tid")}, CpuId{p.id(2, "cpu")}, p.number(3, "address")};
    } else if (op == "TICK") {
      p.expect_args(1, 1);
      ev = TickEvent{p.number(0, "tick count")};
    } else {
      p.fail("unknown event '" + std::string(op) + "'");
    }
    trace.events.push_back({line_no, std::move(ev)});
  }
  return trace;
}

namespace {
std::string hex_addr(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}
}  // namespace

std::string_view event_name(const TraceEvent& event) {
  static constexpr std::string_view names[] = {"PROC", "MMAP", "MPROTECT", "WRITE", "FETCH", "READ", "TICK"};
  return names[event.index()];
}

std::string format_event(const TraceEvent& event) {
  std::ostringstream os;
  os << event_name(event);
  std::visit(
      [&](const auto& e) {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, ProcEvent>) {
          os << ' ' << e.uid;
          for (const AreaSpec& a : e.areas) {
            os << ' ' << hex_addr(a.addr) << ':' << a.n_pages << ':' << a.perms.str();
            if (!a.content.empty()) os << ':' << to_hex(a.content);
          }
        } else if constexpr (std::is_same_v<E, MmapEvent>) {
          os << ' ' << e.pid << ' ' << e.perms.str() << ' ' << e.n_pages;
          if (e.addr) os << " @" << hex_addr(*e.addr);
          if (!e.content.empty()) os << ' ' << to_hex(e.content);
        } else if constexpr (std::is_same_v<E, MprotectEvent>) {
          os << ' ' << e.pid << ' ' << hex_addr(e.addr) << ' ' << e.n_pages << ' ' << e.perms.str();
        } else if constexpr (std::is_same_v<E, WriteEvent>) {
          os << ' ' << e.pid << ' ' << e.tid << ' ' << e.cpu << ' ' << hex_addr(e.addr) << ' ' << to_hex(e.bytes);
        } else if constexpr (std::is_same_v<E, FetchEvent> || std::is_same_v<E, ReadEvent>) {
          os << ' ' << e.pid << ' ' << e.tid << ' ' << e.cpu << ' ' << hex_addr(e.addr);
        } else {
          os << ' ' << e.n;
        }
      },
      event);
  return os.str();
}

}  // namespace jitscan
