#pragma once

// Historical IP → ASN / country enrichment from dated prefix snapshots, and
// partitioning of reports by host level.

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "malfeed/core.hpp"
#include "malfeed/csv.hpp"
#include "malfeed/ingest.hpp"

namespace malfeed {

/// IPv4 prefix in CIDR notation. Host bits are masked off on construction.
struct Cidr {
  std::uint32_t network = 0;
  std::uint8_t length = 0;

  static constexpr std::uint32_t mask_for(std::uint8_t len) noexcept {
    return len == 0 ? 0u : ~std::uint32_t{0} << (32 - len);
  }

  constexpr Cidr() = default;
  constexpr Cidr(Ipv4 addr, std::uint8_t len) : network(addr.value & mask_for(len)), length(len) {}

  static std::optional<Cidr> parse(std::string_view s) noexcept {
    s = detail::trim(s);
    const auto slash = s.find('/');
    auto addr = Ipv4::parse(s.substr(0, slash));
    if (!addr) return std::nullopt;
    if (slash == std::string_view::npos) return Cidr{*addr, 32};
    auto len = detail::parse_int<unsigned>(s.substr(slash + 1));
    if (!len || *len > 32) return std::nullopt;
    return Cidr{*addr, static_cast<std::uint8_t>(*len)};
  }

  constexpr bool contains(Ipv4 ip) const noexcept { return (ip.value & mask_for(length)) == network; }

  std::string to_string() const { return Ipv4{network}.to_string() + "/" + std::to_string(length); }

  friend constexpr auto operator<=>(const Cidr&, const Cidr&) = default;
};

/// Dated prefix→value mapping (one mapping kind per table). Immutable after
/// construction; lookups are read-only and thread-safe.
class SnapshotTable {
 public:
  struct Entry {
    std::int64_t snapshot_date = 0;  // Unix seconds
    Cidr prefix;
    std::string value;
  };

  explicit SnapshotTable(std::vector<Entry> entries) {
    if (entries.empty()) throw DomainError("snapshot table is empty");
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      if (a.snapshot_date != b.snapshot_date) return a.snapshot_date < b.snapshot_date;
      return a.prefix.length > b.prefix.length;
    });
    for (auto& e : entries) {
      if (snapshots_.empty() || snapshots_.back().date != e.snapshot_date) snapshots_.push_back({e.snapshot_date, {}, 0});
      auto& snap = snapshots_.back();
      auto& bucket = snap.by_length[e.prefix.length];
      // first entry for a prefix wins within a snapshot
      if (bucket.emplace(e.prefix.network, static_cast<std::uint32_t>(values_.size())).second) {
        values_.push_back(std::move(e.value));
        snap.lengths_present |= std::uint64_t{1} << e.prefix.length;
      }
    }
    for (const auto& s : snapshots_) dates_.push_back(s.date);
  }

  /// Loads `snapshot_date,prefix,value` rows (header optional). Dates may be
  /// Unix seconds or ISO-8601.
  static SnapshotTable load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open snapshot table '" + path + "'");
    std::vector<Entry> entries;
    std::string line;
    std::vector<std::string> fields;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::trim(line).empty()) continue;
      if (!csv::split_line(line, fields) || fields.size() != 3)
        throw ParseError(line_no, "", "expected 3 fields: snapshot_date,prefix,value", path);
      if (line_no == 1 && detail::iequals(detail::trim(fields[0]), "snapshot_date")) continue;
      auto date = parse_timestamp(fields[0]);
      if (!date) throw ParseError(line_no, "snapshot_date", "unparsable date '" + fields[0] + "'", path);
      auto prefix = Cidr::parse(fields[1]);
      if (!prefix) throw ParseError(line_no, "prefix", "invalid CIDR '" + fields[1] + "'", path);
      const auto value = detail::trim(fields[2]);
      if (value.empty()) throw ParseError(line_no, "value", "empty value", path);
      entries.push_back({*date, *prefix, std::string(value)});
    }
    if (entries.empty()) throw ParseError(0, "", "snapshot table has no entries", path);
    return SnapshotTable(std::move(entries));
  }

  std::span<const std::int64_t> snapshot_dates() const noexcept { return dates_; }

  /// Index of the snapshot nearest to ts; equidistant ties go to the earlier one.
  std::size_t nearest_snapshot(std::int64_t ts) const noexcept {
    auto it = std::lower_bound(dates_.begin(), dates_.end(), ts);
    if (it == dates_.end()) return dates_.size() - 1;
    if (it == dates_.begin()) return 0;
    const auto after = static_cast<std::size_t>(it - dates_.begin());
    const auto before = after - 1;
    return (ts - dates_[before]) <= (dates_[after] - ts) ? before : after;
  }

  /// Longest-prefix match inside the snapshot nearest to ts.
  std::optional<std::string_view> lookup(Ipv4 ip, std::int64_t ts) const noexcept {
    const auto& snap = snapshots_[nearest_snapshot(ts)];
    for (int len = 32; len >= 0; --len) {
      if (!(snap.lengths_present >> len & 1u)) continue;
      const auto& bucket = snap.by_length[static_cast<std::size_t>(len)];
      auto it = bucket.find(ip.value & Cidr::mask_for(static_cast<std::uint8_t>(len)));
      if (it != bucket.end()) return std::string_view(values_[it->second]);
    }
    return std::nullopt;
  }

 private:
  struct Snapshot {
    std::int64_t date;
    std::array<std::unordered_map<std::uint32_t, std::uint32_t>, 33> by_length;
    std::uint64_t lengths_present;
  };

  std::vector<Snapshot> snapshots_;
  std::vector<std::int64_t> dates_;
  std::vector<std::string> values_;
};

inline std::optional<std::string_view> map_ip(const SnapshotTable& table, Ipv4 ip, std::int64_t ts) {
  return table.lookup(ip, ts);
}

/// Optional mapping tables used for enrichment.
struct EnrichTables {
  const SnapshotTable* asn = nullptr;
  const SnapshotTable* geo = nullptr;

  bool any() const noexcept { return asn || geo; }
};

/// Fills absent asn/country fields from the tables. Values supplied by the
/// feed are kept. Table values that are not a valid ASN / country code are
/// ignored. A report that ends up with neither field is flagged unmapped.
inline void enrich_report(Report& r, const EnrichTables& tables) {
  if (!r.asn && tables.asn)
    if (auto v = tables.asn->lookup(r.ip, r.timestamp)) r.asn = parse_asn(*v);
  if (!r.country && tables.geo)
    if (auto v = tables.geo->lookup(r.ip, r.timestamp)) r.country = CountryCode::parse(*v);
  r.unmapped = !r.asn && !r.country;
}

inline ReportStore enrich_store(const ReportStore& store, const EnrichTables& tables) {
  std::vector<Report> out(store.begin(), store.end());
  for (auto& r : out) enrich_report(r, tables);
  return ReportStore(std::move(out));
}

/// Partitions reports by host key at `level`. Reports without metadata for
/// that level land under HostKey::unknown_at(level).
inline std::map<HostKey, std::vector<Report>> aggregate(const ReportStore& store, HostLevel level) {
  std::map<HostKey, std::vector<Report>> groups;
  for (const auto& r : store) groups[host_key(r, level).value_or(HostKey::unknown_at(level))].push_back(r);
  return groups;
}

}  // namespace malfeed
