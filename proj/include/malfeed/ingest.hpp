#pragma once

// Report ingestion: line parsing for CSV and JSON-lines feeds, (time, IP, URL)
// deduplication, the sorted in-memory ReportStore, and a streaming reader for
// pipelines that only keep per-host aggregates resident.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "malfeed/core.hpp"
#include "malfeed/csv.hpp"
#include "malfeed/parallel.hpp"

namespace malfeed {

// ---------------------------------------------------------------------------
// Formats
// ---------------------------------------------------------------------------

enum class Column : std::uint8_t {
  Timestamp,
  Ip,
  Url,
  Activity,
  Source,
  AvPositives,
  AvTotal,
  Asn,
  Country,
  Organization,
  Ignored,
};

inline constexpr std::array<Column, 10> kCanonicalColumns{
    Column::Timestamp, Column::Ip,      Column::Url, Column::Activity, Column::Source,
    Column::AvPositives, Column::AvTotal, Column::Asn, Column::Country,  Column::Organization,
};

constexpr std::string_view to_string(Column c) noexcept {
  switch (c) {
    case Column::Timestamp: return "timestamp";
    case Column::Ip: return "ip";
    case Column::Url: return "url";
    case Column::Activity: return "activity";
    case Column::Source: return "source";
    case Column::AvPositives: return "av_positives";
    case Column::AvTotal: return "av_total";
    case Column::Asn: return "asn";
    case Column::Country: return "country";
    case Column::Organization: return "organization";
    case Column::Ignored: return "";
  }
  return "";
}

inline Column parse_column(std::string_view name) noexcept {
  name = detail::trim(name);
  for (auto c : kCanonicalColumns)
    if (detail::iequals(name, to_string(c))) return c;
  return Column::Ignored;
}

enum class InputFormat : std::uint8_t { Auto, Csv, JsonLines };

/// How to read one input. CSV inputs either declare their columns up front
/// (headerless) or carry a header row naming them in any order.
struct FormatSpec {
  InputFormat format = InputFormat::Auto;
  std::vector<Column> columns;  // empty: taken from the header row

  static FormatSpec csv(std::vector<Column> columns = {}) { return {InputFormat::Csv, std::move(columns)}; }
  static FormatSpec json_lines() { return {InputFormat::JsonLines, {}}; }

  /// Parses a header row; unknown names are ignored, timestamp and ip are required.
  static FormatSpec csv_from_header(std::string_view header) {
    std::vector<std::string> names;
    if (!csv::split_line(header, names)) throw ParseError(1, "", "malformed header row");
    FormatSpec spec{InputFormat::Csv, {}};
    for (const auto& n : names) {
      auto col = parse_column(n);
      if (col != Column::Ignored &&
          std::find(spec.columns.begin(), spec.columns.end(), col) != spec.columns.end())
        throw ParseError(1, std::string(to_string(col)), "duplicate column in header");
      spec.columns.push_back(col);
    }
    for (auto required : {Column::Timestamp, Column::Ip})
      if (std::find(spec.columns.begin(), spec.columns.end(), required) == spec.columns.end())
        throw ParseError(1, std::string(to_string(required)), "required column missing from header");
    return spec;
  }

  /// Resolves Auto from a file extension (.jsonl / .ndjson / .json → JSON lines).
  FormatSpec resolved_for(const std::string& path) const {
    if (format != InputFormat::Auto) return *this;
    const auto ext = std::filesystem::path(path).extension().string();
    if (detail::iequals(ext, ".jsonl") || detail::iequals(ext, ".ndjson") || detail::iequals(ext, ".json"))
      return {InputFormat::JsonLines, columns};
    return {InputFormat::Csv, columns};
  }
};

enum class ParseMode : std::uint8_t { Strict, Lenient };

// ---------------------------------------------------------------------------
// Field parsing
// ---------------------------------------------------------------------------

namespace detail {

inline void assign_field(Report& r, Column col, std::string_view raw, std::size_t line) {
  const auto value = trim(raw);
  if (value.empty() || col == Column::Ignored) return;
  const std::string name(to_string(col));
  auto fail = [&](const std::string& why) -> void { throw ParseError(line, name, why); };

  switch (col) {
    case Column::Timestamp: {
      auto ts = parse_timestamp(value);
      if (!ts) fail("unparsable timestamp '" + std::string(value) + "'");
      if (*ts <= 0) fail("timestamp must be positive");
      r.timestamp = *ts;
      break;
    }
    case Column::Ip: {
      if (value.find(':') != std::string_view::npos) fail("IPv6 is not supported '" + std::string(value) + "'");
      auto ip = Ipv4::parse(value);
      if (!ip) fail("invalid IPv4 '" + std::string(value) + "'");
      r.ip = *ip;
      break;
    }
    case Column::Url: r.url = std::string(value); break;
    case Column::Activity: {
      auto a = parse_activity(value);
      if (!a) fail("unknown activity label '" + std::string(value) + "'");
      r.activity = *a;
      break;
    }
    case Column::Source: r.source = std::string(value); break;
    case Column::AvPositives:
    case Column::AvTotal: {
      auto v = parse_int<std::uint32_t>(value);
      if (!v) fail("expected a non-negative count, got '" + std::string(value) + "'");
      (col == Column::AvPositives ? r.av_positives : r.av_total) = *v;
      break;
    }
    case Column::Asn: {
      auto v = parse_asn(value);
      if (!v) fail("invalid ASN '" + std::string(value) + "'");
      r.asn = *v;
      break;
    }
    case Column::Country: {
      auto v = CountryCode::parse(value);
      if (!v) fail("invalid country code '" + std::string(value) + "'");
      r.country = *v;
      break;
    }
    case Column::Organization: r.organization = std::string(value); break;
    case Column::Ignored: break;
  }
}

inline void finish_report(const Report& r, std::size_t line) {
  if (r.timestamp <= 0) throw ParseError(line, "timestamp", "missing timestamp");
  if (r.av_total && *r.av_total == 0) throw ParseError(line, "av_total", "av_total must be positive");
  if (r.av_positives && r.av_total && *r.av_positives > *r.av_total)
    throw ParseError(line, "av_positives", "av_positives exceeds av_total");
}

inline Report parse_json_report(std::string_view line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line_no, "", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line_no, "", "JSON record must be an object");
  Report r;
  bool has_ip = false;
  for (auto col : kCanonicalColumns) {
    auto it = j.find(std::string(to_string(col)));
    if (it == j.end() || it->is_null()) continue;
    std::string text;
    if (it->is_string()) text = it->get<std::string>();
    else if (it->is_number_unsigned()) text = std::to_string(it->get<std::uint64_t>());
    else if (it->is_number_integer()) text = std::to_string(it->get<std::int64_t>());
    else throw ParseError(line_no, std::string(to_string(col)), "unsupported JSON value type");
    if (col == Column::Ip && !trim(text).empty()) has_ip = true;
    assign_field(r, col, text, line_no);
  }
  if (!has_ip) throw ParseError(line_no, "ip", "missing ip");
  finish_report(r, line_no);
  return r;
}

}  // namespace detail

/// Parses one record. `fields` is scratch storage reused across calls.
inline Report parse_report_line(std::string_view line, const FormatSpec& format, std::size_t line_no,
                                std::vector<std::string>& fields) {
  if (format.format == InputFormat::JsonLines) return detail::parse_json_report(line, line_no);
  if (format.columns.empty()) throw ParseError(line_no, "", "CSV format has no declared columns");
  if (!csv::split_line(line, fields)) throw ParseError(line_no, "", "unterminated quoted field");
  if (fields.size() != format.columns.size())
    throw ParseError(line_no, "", "expected " + std::to_string(format.columns.size()) + " fields, found " +
                                      std::to_string(fields.size()));
  Report r;
  bool has_ip = false;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (format.columns[i] == Column::Ip && !detail::trim(fields[i]).empty()) has_ip = true;
    detail::assign_field(r, format.columns[i], fields[i], line_no);
  }
  if (!has_ip) throw ParseError(line_no, "ip", "missing ip");
  detail::finish_report(r, line_no);
  return r;
}

inline Report parse_report_line(std::string_view line, const FormatSpec& format, std::size_t line_no = 0) {
  std::vector<std::string> scratch;
  return parse_report_line(line, format, line_no, scratch);
}

// ---------------------------------------------------------------------------
// Canonical CSV output
// ---------------------------------------------------------------------------

inline void write_canonical_header(std::ostream& out) {
  for (std::size_t i = 0; i < kCanonicalColumns.size(); ++i) out << (i ? "," : "") << to_string(kCanonicalColumns[i]);
  out << '\n';
}

/// Writes the canonical columns without the trailing newline so callers can append columns.
inline void write_canonical_fields(std::ostream& out, const Report& r) {
  auto opt_num = [&](const std::optional<std::uint32_t>& v) {
    if (v) out << *v;
  };
  out << r.timestamp << ',' << r.ip.to_string() << ',';
  if (r.url) csv::write_field(out, *r.url);
  out << ',';
  if (r.activity) out << to_string(*r.activity);
  out << ',';
  csv::write_field(out, r.source);
  out << ',';
  opt_num(r.av_positives);
  out << ',';
  opt_num(r.av_total);
  out << ',';
  opt_num(r.asn);
  out << ',';
  if (r.country) out << r.country->to_string();
  out << ',';
  if (r.organization) csv::write_field(out, *r.organization);
}

inline void write_canonical_row(std::ostream& out, const Report& r) {
  write_canonical_fields(out, r);
  out << '\n';
}

// ---------------------------------------------------------------------------
// Deduplication
// ---------------------------------------------------------------------------

/// Identity of a report for deduplication: (timestamp, ip, url). An absent
/// URL is its own value, distinct from every present URL.
struct DedupeKey {
  std::int64_t timestamp;
  std::uint32_t ip;
  std::optional<std::string> url;

  bool operator==(const DedupeKey&) const = default;
};

struct DedupeKeyHash {
  std::size_t operator()(const DedupeKey& k) const noexcept {
    std::size_t h = std::hash<std::int64_t>{}(k.timestamp) * 0x9E3779B97F4A7C15ULL;
    h ^= std::hash<std::uint32_t>{}(k.ip) + 0x7f4a7c15 + (h << 6) + (h >> 2);
    if (k.url) h ^= std::hash<std::string>{}(*k.url) + 0x165667b1 + (h << 6) + (h >> 2);
    return h;
  }
};

inline DedupeKey dedupe_key(const Report& r) { return {r.timestamp, r.ip.value, r.url}; }

/// Keeps the first occurrence of each (timestamp, ip, url) triple, in input order.
inline std::vector<Report> dedupe(std::vector<Report> reports) {
  std::unordered_set<DedupeKey, DedupeKeyHash> seen;
  seen.reserve(reports.size());
  std::vector<Report> out;
  out.reserve(reports.size());
  for (auto& r : reports)
    if (seen.insert(dedupe_key(r)).second) out.push_back(std::move(r));
  return out;
}

/// Streaming duplicate filter. While input timestamps are non-decreasing only
/// the keys of the current second are retained; `accept` reports an ordering
/// violation through `out_of_order()` so the caller can rescan in full mode.
class DedupeFilter {
 public:
  explicit DedupeFilter(bool windowed = true) : windowed_(windowed) {}

  /// True if the report is new. In windowed mode an out-of-order timestamp
  /// marks the filter broken and returns false.
  bool accept(const Report& r) {
    if (windowed_) {
      if (r.timestamp < current_ts_) {
        out_of_order_ = true;
        return false;
      }
      if (r.timestamp > current_ts_) {
        seen_.clear();
        current_ts_ = r.timestamp;
      }
    }
    const bool fresh = seen_.insert(dedupe_key(r)).second;
    if (!fresh) ++duplicates_;
    return fresh;
  }

  bool windowed() const noexcept { return windowed_; }
  bool out_of_order() const noexcept { return out_of_order_; }
  std::size_t duplicates() const noexcept { return duplicates_; }

 private:
  bool windowed_;
  bool out_of_order_ = false;
  std::int64_t current_ts_ = std::numeric_limits<std::int64_t>::min();
  std::size_t duplicates_ = 0;
  std::unordered_set<DedupeKey, DedupeKeyHash> seen_;
};

// ---------------------------------------------------------------------------
// ReportStore
// ---------------------------------------------------------------------------

/// Canonical report order: timestamp, then (ip, url, source).
inline bool canonical_less(const Report& a, const Report& b) {
  return std::tie(a.timestamp, a.ip, a.url, a.source) < std::tie(b.timestamp, b.ip, b.url, b.source);
}

/// Immutable, deduplicated, timestamp-sorted collection of reports with an IP index.
class ReportStore {
 public:
  ReportStore() = default;

  /// Deduplicates (first occurrence wins) and sorts into canonical order.
  explicit ReportStore(std::vector<Report> reports) : reports_(dedupe(std::move(reports))) {
    for (const auto& r : reports_) validate(r);
    std::stable_sort(reports_.begin(), reports_.end(), canonical_less);
    for (std::size_t i = 0; i < reports_.size(); ++i) by_ip_[reports_[i].ip.value].push_back(i);
  }

  std::span<const Report> reports() const noexcept { return reports_; }
  std::size_t size() const noexcept { return reports_.size(); }
  bool empty() const noexcept { return reports_.empty(); }
  auto begin() const noexcept { return reports_.begin(); }
  auto end() const noexcept { return reports_.end(); }
  const Report& operator[](std::size_t i) const { return reports_[i]; }

  std::int64_t t_min() const noexcept { return reports_.empty() ? 0 : reports_.front().timestamp; }
  std::int64_t t_max() const noexcept { return reports_.empty() ? 0 : reports_.back().timestamp; }

  /// Positions of the reports for one IP, in canonical order.
  std::span<const std::size_t> indices_for(Ipv4 ip) const {
    auto it = by_ip_.find(ip.value);
    if (it == by_ip_.end()) return {};
    return it->second;
  }

  bool operator==(const ReportStore& other) const { return reports_ == other.reports_; }

 private:
  std::vector<Report> reports_;
  std::unordered_map<std::uint32_t, std::vector<std::size_t>> by_ip_;
};

inline void write_store_csv(std::ostream& out, const ReportStore& store) {
  write_canonical_header(out);
  for (const auto& r : store) write_canonical_row(out, r);
}

// ---------------------------------------------------------------------------
// Reading files
// ---------------------------------------------------------------------------

struct IngestOptions {
  ParseMode mode = ParseMode::Lenient;
  std::size_t threads = 0;  // 0: resolve_threads()
};

struct IngestStats {
  std::size_t rows = 0;        // data rows seen (excluding headers and blank lines)
  std::size_t bad_rows = 0;    // skipped in lenient mode
  std::size_t duplicates = 0;  // dropped by deduplication
};

/// Line-oriented reader over one input ("-" reads standard input). Reports
/// missing a source inherit the file's stem as feed identifier.
class ReportReader {
 public:
  ReportReader(std::string path, FormatSpec format, ParseMode mode)
      : path_(std::move(path)), format_(format.resolved_for(path_)), mode_(mode) {
    if (path_ == "-") {
      in_ = &std::cin;
      default_source_ = "stdin";
    } else {
      file_ = std::make_unique<std::ifstream>(path_);
      if (!*file_) throw IoError("cannot open '" + path_ + "'");
      in_ = file_.get();
      default_source_ = std::filesystem::path(path_).stem().string();
    }
  }

  /// Reads the next valid report. Returns false at end of input.
  bool next(Report& out) {
    while (std::getline(*in_, line_)) {
      ++line_no_;
      if (detail::trim(line_).empty()) continue;
      if (format_.format == InputFormat::Csv && format_.columns.empty()) {
        try {
          format_ = FormatSpec::csv_from_header(line_);
        } catch (const ParseError& e) {
          throw ParseError(line_no_, e.field(), e.detail(), path_);
        }
        continue;
      }
      ++stats_.rows;
      try {
        out = parse_report_line(line_, format_, line_no_, fields_);
      } catch (const ParseError& e) {
        if (mode_ == ParseMode::Strict) throw e.in_file(path_);
        ++stats_.bad_rows;
        continue;
      }
      if (out.source.empty()) out.source = default_source_;
      return true;
    }
    if (in_->bad()) throw IoError("read failure on '" + path_ + "'");
    return false;
  }

  const IngestStats& stats() const noexcept { return stats_; }
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  FormatSpec format_;
  ParseMode mode_;
  std::unique_ptr<std::ifstream> file_;
  std::istream* in_ = nullptr;
  std::string default_source_;
  std::string line_;
  std::vector<std::string> fields_;
  std::size_t line_no_ = 0;
  IngestStats stats_;
};

/// Anything that consumes a report stream and can be cleared for a rescan.
template <typename S>
concept ReportSink = requires(S s, const Report& r) {
  s.add(r);
  s.reset();
};

/// Streams deduplicated reports from `paths` into `sink` in file order.
/// Sorted inputs are deduplicated with a one-second window; if an input turns
/// out to be unsorted the sink is reset and the files are rescanned with a
/// full duplicate set. Standard input always uses the full set.
template <ReportSink Sink>
IngestStats stream_reports(const std::vector<std::string>& paths, const std::vector<FormatSpec>& formats,
                           const IngestOptions& options, Sink& sink) {
  if (!formats.empty() && formats.size() != 1 && formats.size() != paths.size())
    throw DomainError("need one format per input path");
  const bool uses_stdin = std::find(paths.begin(), paths.end(), "-") != paths.end();

  auto pass = [&](bool windowed) -> std::optional<IngestStats> {
    DedupeFilter filter(windowed);
    IngestStats total;
    Report r;
    for (std::size_t i = 0; i < paths.size(); ++i) {
      const FormatSpec fmt = formats.empty() ? FormatSpec{} : formats[formats.size() == 1 ? 0 : i];
      ReportReader reader(paths[i], fmt, options.mode);
      while (reader.next(r)) {
        if (filter.accept(r)) sink.add(r);
        else if (filter.out_of_order()) return std::nullopt;
      }
      total.rows += reader.stats().rows;
      total.bad_rows += reader.stats().bad_rows;
    }
    total.duplicates = filter.duplicates();
    return total;
  };

  if (!uses_stdin) {
    if (auto stats = pass(true)) return *stats;
    sink.reset();
  }
  return *pass(false);
}

/// Parses every input (in parallel, one task per file), then merges,
/// deduplicates across files and sorts into a ReportStore.
inline ReportStore build_store(const std::vector<std::string>& paths, const std::vector<FormatSpec>& formats = {},
                               const IngestOptions& options = {}, IngestStats* stats = nullptr) {
  if (!formats.empty() && formats.size() != 1 && formats.size() != paths.size())
    throw DomainError("need one format per input path");
  std::vector<std::vector<Report>> per_file(paths.size());
  std::vector<IngestStats> per_stats(paths.size());
  parallel_for(paths.size(), options.threads, [&](std::size_t i) {
    const FormatSpec fmt = formats.empty() ? FormatSpec{} : formats[formats.size() == 1 ? 0 : i];
    ReportReader reader(paths[i], fmt, options.mode);
    Report r;
    while (reader.next(r)) per_file[i].push_back(std::move(r));
    per_stats[i] = reader.stats();
  });
  std::vector<Report> all;
  IngestStats total;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    total.rows += per_stats[i].rows;
    total.bad_rows += per_stats[i].bad_rows;
    std::move(per_file[i].begin(), per_file[i].end(), std::back_inserter(all));
  }
  const std::size_t before = all.size();
  ReportStore store(std::move(all));
  total.duplicates = before - store.size();
  if (stats) *stats = total;
  return store;
}

}  // namespace malfeed
