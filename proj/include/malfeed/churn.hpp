#pragma once

// Host churn model. Each host's reports are binned into absolute weeks; an
// occupied week means the host is alive. Maximal runs of occupied weeks are
// lifetimes (ON), the empty runs between them deathtimes (OFF).

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "malfeed/core.hpp"
#include "malfeed/hosts.hpp"
#include "malfeed/ingest.hpp"
#include "malfeed/parallel.hpp"

namespace malfeed {

/// Weekly report counts of one host, trimmed to its active span:
/// bins.front() > 0 and bins.back() > 0.
struct WeeklyTrace {
  std::int64_t origin_week = 0;
  std::vector<std::uint64_t> bins;

  std::uint64_t total() const { return std::accumulate(bins.begin(), bins.end(), std::uint64_t{0}); }
  bool operator==(const WeeklyTrace&) const = default;
};

/// One ON run and the OFF run after it. The last cycle of a trace is open:
/// its deathtime is unobserved (closed == false, deathtime == 0).
struct Cycle {
  std::uint32_t lifetime = 0;    // weeks, >= 1
  std::uint64_t reports = 0;     // reports inside the ON run
  std::uint32_t deathtime = 0;   // weeks, >= 1 when closed
  bool closed = false;

  bool operator==(const Cycle&) const = default;
};

struct ChurnSummary {
  double mean_lifetime = 0.0;
  std::optional<double> mean_deathtime;   // closed deathtimes only
  std::optional<double> rate_of_arrival;  // 1 / (L + D), defined iff D is
  double severity = 0.0;                  // mean of reports / lifetime over cycles
  std::size_t n_cycles = 0;
};

/// Bins reports into weeks counted from `anchor` (Unix seconds, default: epoch).
inline WeeklyTrace build_trace(std::span<const Report> reports, std::int64_t anchor = 0) {
  if (reports.empty()) throw DomainError("build_trace: no reports");
  std::vector<std::int64_t> weeks;
  weeks.reserve(reports.size());
  for (const auto& r : reports) weeks.push_back(week_index(r.timestamp - anchor));
  const auto [lo, hi] = std::minmax_element(weeks.begin(), weeks.end());
  WeeklyTrace t{*lo, std::vector<std::uint64_t>(static_cast<std::size_t>(*hi - *lo + 1), 0)};
  for (auto w : weeks) ++t.bins[static_cast<std::size_t>(w - *lo)];
  return t;
}

inline WeeklyTrace trace_from_weeks(const WeekCounts& weeks) {
  const auto bins = weeks.bins();
  if (bins.empty()) throw DomainError("trace_from_weeks: no occupied weeks");
  WeeklyTrace t{bins.front().week,
                std::vector<std::uint64_t>(static_cast<std::size_t>(bins.back().week - bins.front().week + 1), 0)};
  for (const auto& b : bins) t.bins[static_cast<std::size_t>(b.week - t.origin_week)] += b.count;
  return t;
}

/// Run-length reading of a trace into cycles.
inline std::vector<Cycle> extract_cycles(const WeeklyTrace& trace) {
  std::vector<Cycle> cycles;
  const auto& b = trace.bins;
  std::size_t i = 0;
  while (i < b.size()) {
    while (i < b.size() && b[i] == 0) ++i;  // leading zeros only occur in untrimmed traces
    if (i == b.size()) break;
    Cycle c;
    while (i < b.size() && b[i] > 0) {
      ++c.lifetime;
      c.reports += b[i++];
    }
    std::uint32_t gap = 0;
    while (i < b.size() && b[i] == 0) {
      ++gap;
      ++i;
    }
    if (i < b.size()) {
      c.deathtime = gap;
      c.closed = true;
    }
    cycles.push_back(c);
  }
  return cycles;
}

/// Inverse of extract_cycles for a given origin. Reports are spread as evenly
/// as possible over each ON run; extract_cycles(cycles_to_trace(...)) == cycles.
inline WeeklyTrace cycles_to_trace(std::int64_t origin_week, std::span<const Cycle> cycles) {
  WeeklyTrace t{origin_week, {}};
  for (const auto& c : cycles) {
    if (c.lifetime == 0 || c.reports < c.lifetime) throw DomainError("cycle needs >= 1 report per ON week");
    for (std::uint32_t w = 0; w < c.lifetime; ++w)
      t.bins.push_back(c.reports / c.lifetime + (w < c.reports % c.lifetime ? 1 : 0));
    if (c.closed) t.bins.insert(t.bins.end(), c.deathtime, 0);
  }
  return t;
}

inline ChurnSummary summarize(std::span<const Cycle> cycles) {
  if (cycles.empty()) throw DomainError("summarize: no cycles");
  ChurnSummary s;
  s.n_cycles = cycles.size();
  double life = 0.0, sev = 0.0, death = 0.0;
  std::size_t closed = 0;
  for (const auto& c : cycles) {
    life += c.lifetime;
    sev += static_cast<double>(c.reports) / static_cast<double>(c.lifetime);
    if (c.closed) {
      death += c.deathtime;
      ++closed;
    }
  }
  const double n = static_cast<double>(cycles.size());
  s.mean_lifetime = life / n;
  s.severity = sev / n;
  if (closed > 0) {
    s.mean_deathtime = death / static_cast<double>(closed);
    s.rate_of_arrival = 1.0 / (s.mean_lifetime + *s.mean_deathtime);
  }
  return s;
}

using ChurnTable = std::vector<std::pair<HostKey, ChurnSummary>>;

/// Churn summary for every host of a profile set (keys ascending).
inline ChurnTable churn_table(const ProfileSet& profiles, std::size_t threads = 0) {
  ChurnTable out(profiles.hosts.size());
  parallel_for(profiles.hosts.size(), threads, [&](std::size_t i) {
    const auto& [key, p] = profiles.hosts[i];
    const auto cycles = extract_cycles(trace_from_weeks(p.weeks));
    out[i] = {key, summarize(cycles)};
  });
  return out;
}

/// Per-host churn using only reports of `activity`.
inline ChurnTable churn_by_class(const ReportStore& store, HostLevel level, ActivityClass activity,
                                 std::size_t threads = 0) {
  return churn_table(build_profiles(store, level, activity), threads);
}

inline ChurnTable churn_by_level(const ReportStore& store, HostLevel level, std::size_t threads = 0) {
  return churn_table(build_profiles(store, level), threads);
}

/// Severity divided by the table-wide maximum, for plotting.
inline std::vector<std::pair<HostKey, double>> normalized_severity(const ChurnTable& table) {
  double max_s = 0.0;
  for (const auto& [k, s] : table) max_s = std::max(max_s, s.severity);
  std::vector<std::pair<HostKey, double>> out;
  out.reserve(table.size());
  for (const auto& [k, s] : table) out.emplace_back(k, max_s > 0 ? s.severity / max_s : 0.0);
  return out;
}

}  // namespace malfeed
