#pragma once

// Core value types shared by every malfeed module: activity classes, IPv4
// addresses, country codes, host keys, the Report record and error types.

#include <array>
#include <chrono>
#include <charconv>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace malfeed {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// A record or field that could not be parsed. Carries path, line and field context.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::string field, std::string detail, std::string path = {})
      : std::runtime_error(compose(path, line, field, detail)),
        path_(std::move(path)),
        line_(line),
        field_(std::move(field)),
        detail_(std::move(detail)) {}

  /// Same error re-anchored to a file.
  ParseError in_file(std::string path) const { return {line_, field_, detail_, std::move(path)}; }

  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  static std::string compose(const std::string& path, std::size_t line, const std::string& field,
                             const std::string& detail) {
    std::string out = path;
    if (line != 0) out += (path.empty() ? "line " : ":") + std::to_string(line);
    if (!out.empty()) out += ": ";
    if (!field.empty()) out += "field '" + field + "': ";
    return out + detail;
  }

  std::string path_;
  std::size_t line_;
  std::string field_;
  std::string detail_;
};

/// Input outside an operation's mathematical domain (empty histogram, zero total, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Activity classes
// ---------------------------------------------------------------------------

/// The six mal-activity classes. Declaration order is the fixed class order
/// used for tie-breaking and for every per-class vector.
enum class ActivityClass : std::uint8_t {
  Malware = 0,
  Phishing,
  FraudulentServices,
  Spammers,
  Exploits,
  PUP,
};

inline constexpr std::size_t kNumClasses = 6;

inline constexpr std::array<ActivityClass, kNumClasses> kAllClasses{
    ActivityClass::Malware,  ActivityClass::Phishing, ActivityClass::FraudulentServices,
    ActivityClass::Spammers, ActivityClass::Exploits, ActivityClass::PUP,
};

constexpr std::size_t index_of(ActivityClass c) noexcept { return static_cast<std::size_t>(c); }

constexpr std::string_view to_string(ActivityClass c) noexcept {
  switch (c) {
    case ActivityClass::Malware: return "malware";
    case ActivityClass::Phishing: return "phishing";
    case ActivityClass::FraudulentServices: return "fraudulent_services";
    case ActivityClass::Spammers: return "spammers";
    case ActivityClass::Exploits: return "exploits";
    case ActivityClass::PUP: return "pup";
  }
  return "unknown";
}

namespace detail {

constexpr char ascii_lower(char c) noexcept { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

constexpr bool iequals(std::string_view a, std::string_view b) noexcept {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (ascii_lower(a[i]) != ascii_lower(b[i])) return false;
  return true;
}

constexpr std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) noexcept {
  Int value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

/// SplitMix64 finalizer; derives independent sub-seeds from (seed, index).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Case-insensitive match against the exact label strings; unknown labels yield nullopt.
constexpr std::optional<ActivityClass> parse_activity(std::string_view label) noexcept {
  for (auto c : kAllClasses)
    if (detail::iequals(label, to_string(c))) return c;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// IPv4
// ---------------------------------------------------------------------------

struct Ipv4 {
  std::uint32_t value = 0;

  constexpr Ipv4() = default;
  constexpr explicit Ipv4(std::uint32_t v) : value(v) {}
  constexpr Ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
      : value((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) | (std::uint32_t{c} << 8) | d) {}

  constexpr std::uint8_t octet(std::size_t i) const noexcept {
    return static_cast<std::uint8_t>(value >> (8 * (3 - i)));
  }

  /// Strict dotted-quad parser. Rejects IPv6, missing octets and values > 255.
  static std::optional<Ipv4> parse(std::string_view s) noexcept {
    std::uint32_t out = 0;
    for (int part = 0; part < 4; ++part) {
      std::size_t len = 0;
      while (len < s.size() && s[len] >= '0' && s[len] <= '9') ++len;
      if (len == 0 || len > 3) return std::nullopt;
      unsigned v = 0;
      for (std::size_t i = 0; i < len; ++i) v = v * 10 + static_cast<unsigned>(s[i] - '0');
      if (v > 255) return std::nullopt;
      out = (out << 8) | v;
      s.remove_prefix(len);
      if (part < 3) {
        if (s.empty() || s.front() != '.') return std::nullopt;
        s.remove_prefix(1);
      }
    }
    if (!s.empty()) return std::nullopt;
    return Ipv4{out};
  }

  std::string to_string() const {
    std::string out;
    out.reserve(15);
    for (std::size_t i = 0; i < 4; ++i) {
      if (i) out += '.';
      out += std::to_string(octet(i));
    }
    return out;
  }

  friend constexpr auto operator<=>(Ipv4, Ipv4) = default;
};

// ---------------------------------------------------------------------------
// Country codes
// ---------------------------------------------------------------------------

/// ISO-3166 alpha-2 code, stored upper-case.
struct CountryCode {
  std::array<char, 2> letters{'?', '?'};

  static std::optional<CountryCode> parse(std::string_view s) noexcept {
    if (s.size() != 2) return std::nullopt;
    CountryCode cc;
    for (std::size_t i = 0; i < 2; ++i) {
      char c = s[i];
      if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
      if (c < 'A' || c > 'Z') return std::nullopt;
      cc.letters[i] = c;
    }
    return cc;
  }

  std::string to_string() const { return {letters[0], letters[1]}; }
  constexpr std::uint16_t packed() const noexcept {
    return static_cast<std::uint16_t>((static_cast<unsigned char>(letters[0]) << 8) |
                                      static_cast<unsigned char>(letters[1]));
  }

  friend constexpr auto operator<=>(const CountryCode&, const CountryCode&) = default;
};

/// Accepts "AS123", "as123" or "123". ASN 0 is reserved and rejected.
inline std::optional<std::uint32_t> parse_asn(std::string_view s) noexcept {
  if (s.size() > 2 && detail::iequals(s.substr(0, 2), "as")) s.remove_prefix(2);
  auto v = detail::parse_int<std::uint32_t>(s);
  if (!v || *v == 0) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// Time
// ---------------------------------------------------------------------------

inline constexpr std::int64_t kSecondsPerDay = 86'400;
inline constexpr std::int64_t kSecondsPerWeek = 7 * kSecondsPerDay;

/// Absolute 7-day bin counted from the Unix epoch.
constexpr std::int64_t week_index(std::int64_t ts) noexcept {
  return ts >= 0 ? ts / kSecondsPerWeek : -((-ts + kSecondsPerWeek - 1) / kSecondsPerWeek);
}

constexpr std::int64_t day_index(std::int64_t ts) noexcept {
  return ts >= 0 ? ts / kSecondsPerDay : -((-ts + kSecondsPerDay - 1) / kSecondsPerDay);
}

/// Unix seconds or ISO-8601 ("YYYY-MM-DD", optional "THH:MM[:SS[.frac]]" or
/// space separator, optional "Z" / "+HH:MM" / "-HH:MM"). Returns UTC seconds.
inline std::optional<std::int64_t> parse_timestamp(std::string_view s) noexcept {
  using namespace std::chrono;
  s = detail::trim(s);
  if (s.empty()) return std::nullopt;
  if (auto v = detail::parse_int<std::int64_t>(s)) return v;

  auto take = [&](std::size_t n) -> std::optional<int> {
    if (s.size() < n) return std::nullopt;
    auto v = detail::parse_int<int>(s.substr(0, n));
    if (!v) return std::nullopt;
    s.remove_prefix(n);
    return v;
  };
  auto expect = [&](char c) {
    if (s.empty() || s.front() != c) return false;
    s.remove_prefix(1);
    return true;
  };

  auto y = take(4);
  if (!y || !expect('-')) return std::nullopt;
  auto mo = take(2);
  if (!mo || !expect('-')) return std::nullopt;
  auto d = take(2);
  if (!d) return std::nullopt;
  year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)}, day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  std::int64_t secs = sys_days{ymd}.time_since_epoch().count() * kSecondsPerDay;

  if (!s.empty() && (s.front() == 'T' || s.front() == 't' || s.front() == ' ')) {
    s.remove_prefix(1);
    auto hh = take(2);
    if (!hh || !expect(':')) return std::nullopt;
    auto mm = take(2);
    if (!mm) return std::nullopt;
    int ss = 0;
    if (!s.empty() && s.front() == ':') {
      s.remove_prefix(1);
      auto v = take(2);
      if (!v) return std::nullopt;
      ss = *v;
    }
    if (!s.empty() && s.front() == '.') {
      s.remove_prefix(1);
      while (!s.empty() && s.front() >= '0' && s.front() <= '9') s.remove_prefix(1);
    }
    if (*hh > 23 || *mm > 59 || ss > 60) return std::nullopt;
    secs += *hh * 3600 + *mm * 60 + ss;
  }
  if (s.empty() || s == "Z" || s == "z") return secs;
  if (s.front() == '+' || s.front() == '-') {
    const int sign = s.front() == '+' ? 1 : -1;
    s.remove_prefix(1);
    auto oh = take(2);
    if (!oh) return std::nullopt;
    expect(':');
    auto om = take(2);
    if (!om || !s.empty()) return std::nullopt;
    return secs - sign * (*oh * 3600 + *om * 60);
  }
  return std::nullopt;
}

/// UTC calendar date "YYYY-MM-DD" of a Unix timestamp.
inline std::string format_date(std::int64_t ts) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{days{day_index(ts)}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// One timestamped mal-activity observation.
struct Report {
  std::int64_t timestamp = 0;  // Unix seconds, UTC
  Ipv4 ip;
  std::optional<std::string> url;
  std::optional<ActivityClass> activity;
  std::string source;
  std::optional<std::uint32_t> av_positives;
  std::optional<std::uint32_t> av_total;
  std::optional<std::uint32_t> asn;
  std::optional<CountryCode> country;
  std::optional<std::string> organization;
  bool unmapped = false;  // set by enrichment when neither ASN nor country could be resolved

  bool operator==(const Report&) const = default;
};

/// Throws DomainError when a Report violates its invariants.
inline void validate(const Report& r) {
  if (r.timestamp <= 0) throw DomainError("report timestamp must be positive");
  if (r.av_total && *r.av_total == 0) throw DomainError("av_total must be positive");
  if (r.av_positives && r.av_total && *r.av_positives > *r.av_total)
    throw DomainError("av_positives exceeds av_total");
}

// ---------------------------------------------------------------------------
// Host keys
// ---------------------------------------------------------------------------

enum class HostLevel : std::uint8_t { IP = 0, ASN, CC };

constexpr std::string_view to_string(HostLevel l) noexcept {
  switch (l) {
    case HostLevel::IP: return "ip";
    case HostLevel::ASN: return "asn";
    case HostLevel::CC: return "cc";
  }
  return "?";
}

constexpr std::optional<HostLevel> parse_level(std::string_view s) noexcept {
  if (detail::iequals(s, "ip")) return HostLevel::IP;
  if (detail::iequals(s, "asn") || detail::iequals(s, "as")) return HostLevel::ASN;
  if (detail::iequals(s, "cc") || detail::iequals(s, "country")) return HostLevel::CC;
  return std::nullopt;
}

/// Aggregation identity at one level. The reserved unknown key collects
/// reports that cannot be placed at ASN/CC level; it sorts after every real key.
struct HostKey {
  HostLevel level = HostLevel::IP;
  bool unknown = false;
  std::uint64_t id = 0;  // IPv4 value, ASN, or packed country letters

  static constexpr HostKey ip(Ipv4 a) noexcept { return {HostLevel::IP, false, a.value}; }
  static constexpr HostKey asn(std::uint32_t n) noexcept { return {HostLevel::ASN, false, n}; }
  static constexpr HostKey country(CountryCode c) noexcept { return {HostLevel::CC, false, c.packed()}; }
  static constexpr HostKey unknown_at(HostLevel l) noexcept { return {l, true, 0}; }

  std::string to_string() const {
    if (unknown) return "unknown";
    switch (level) {
      case HostLevel::IP: return Ipv4{static_cast<std::uint32_t>(id)}.to_string();
      case HostLevel::ASN: return std::to_string(id);
      case HostLevel::CC: return {static_cast<char>(id >> 8), static_cast<char>(id & 0xff)};
    }
    return "?";
  }

  friend constexpr auto operator<=>(const HostKey&, const HostKey&) = default;
};

struct HostKeyHash {
  std::size_t operator()(const HostKey& k) const noexcept {
    std::uint64_t x = k.id ^ (std::uint64_t{static_cast<std::uint8_t>(k.level)} << 56) ^
                      (std::uint64_t{k.unknown} << 60);
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return static_cast<std::size_t>(x);
  }
};

/// Key of a report at a level; nullopt when the report lacks that metadata.
constexpr std::optional<HostKey> host_key(const Report& r, HostLevel level) noexcept {
  switch (level) {
    case HostLevel::IP: return HostKey::ip(r.ip);
    case HostLevel::ASN:
      if (r.asn) return HostKey::asn(*r.asn);
      return std::nullopt;
    case HostLevel::CC:
      if (r.country) return HostKey::country(*r.country);
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace malfeed
