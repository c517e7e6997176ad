#pragma once

// Descriptive statistics: Spearman correlation with average ranks for ties,
// empirical CDFs, per-class evolution series, volume distributions and top-K
// rankings.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "malfeed/churn.hpp"
#include "malfeed/core.hpp"
#include "malfeed/hosts.hpp"
#include "malfeed/ingest.hpp"

namespace malfeed {

// ---------------------------------------------------------------------------
// Ranks and correlation
// ---------------------------------------------------------------------------

using PairedSeries = std::vector<std::pair<double, double>>;

/// 1-based ranks; tied values share the average of their positions.
inline std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("pearson: need two equal-length series of length >= 2");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DomainError("correlation of a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Pearson correlation of fractional ranks.
inline double spearman(const PairedSeries& pairs) {
  if (pairs.size() < 2) throw DomainError("spearman: need at least 2 pairs");
  std::vector<double> x, y;
  x.reserve(pairs.size());
  y.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    x.push_back(a);
    y.push_back(b);
  }
  const auto rx = fractional_ranks(x), ry = fractional_ranks(y);
  return pearson(rx, ry);
}

// ---------------------------------------------------------------------------
// Empirical CDF
// ---------------------------------------------------------------------------

struct EcdfPoint {
  double value;
  double cdf;  // fraction of samples <= value
};

/// One point per distinct value, ascending.
inline std::vector<EcdfPoint> ecdf(std::vector<double> values) {
  std::vector<EcdfPoint> out;
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    if (i + 1 == values.size() || values[i + 1] != values[i])
      out.push_back({values[i], static_cast<double>(i + 1) / n});
  return out;
}

// ---------------------------------------------------------------------------
// Evolution of report volume per class
// ---------------------------------------------------------------------------

enum class Granularity : std::uint8_t { Day, Week, Month };

constexpr std::optional<Granularity> parse_granularity(std::string_view s) noexcept {
  if (detail::iequals(s, "day")) return Granularity::Day;
  if (detail::iequals(s, "week")) return Granularity::Week;
  if (detail::iequals(s, "month")) return Granularity::Month;
  return std::nullopt;
}

/// Bin index of a timestamp: days or weeks since epoch, or months since 1970-01.
inline std::int64_t time_bin(std::int64_t ts, Granularity g) {
  switch (g) {
    case Granularity::Day: return day_index(ts);
    case Granularity::Week: return week_index(ts);
    case Granularity::Month: {
      using namespace std::chrono;
      const year_month_day ymd{sys_days{days{day_index(ts)}}};
      return (static_cast<int>(ymd.year()) - 1970) * 12 + static_cast<int>(static_cast<unsigned>(ymd.month())) - 1;
    }
  }
  return 0;
}

/// First timestamp covered by a bin.
inline std::int64_t bin_start(std::int64_t bin, Granularity g) {
  switch (g) {
    case Granularity::Day: return bin * kSecondsPerDay;
    case Granularity::Week: return bin * kSecondsPerWeek;
    case Granularity::Month: {
      using namespace std::chrono;
      const auto y = static_cast<int>(bin >= 0 ? bin / 12 : (bin - 11) / 12);
      const auto m = static_cast<unsigned>(bin - std::int64_t{y} * 12);
      return sys_days{year{1970 + y} / month{m + 1} / day{1}}.time_since_epoch().count() * kSecondsPerDay;
    }
  }
  return 0;
}

struct TimePoint {
  std::int64_t bin = 0;
  std::array<std::uint64_t, kNumClasses> counts{};

  std::uint64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

  /// Per-class share of the bin; all zero for an empty bin.
  std::array<double, kNumClasses> proportions() const {
    std::array<double, kNumClasses> p{};
    const auto t = total();
    if (t == 0) return p;
    for (std::size_t i = 0; i < kNumClasses; ++i) p[i] = static_cast<double>(counts[i]) / static_cast<double>(t);
    return p;
  }
};

/// Contiguous bins from the first to the last labeled report.
struct TimeSeries {
  Granularity granularity = Granularity::Week;
  std::vector<TimePoint> points;
  std::uint64_t unlabeled = 0;
};

class EvolutionBuilder {
 public:
  explicit EvolutionBuilder(Granularity g) : g_(g) {}

  void add(const Report& r) {
    if (!r.activity) {
      ++unlabeled_;
      return;
    }
    ++bins_[time_bin(r.timestamp, g_)][index_of(*r.activity)];
  }

  void reset() { *this = EvolutionBuilder(g_); }

  TimeSeries finish() const {
    TimeSeries ts{g_, {}, unlabeled_};
    if (bins_.empty()) return ts;
    const auto first = bins_.begin()->first, last = bins_.rbegin()->first;
    for (auto b = first; b <= last; ++b) {
      TimePoint p{b, {}};
      if (auto it = bins_.find(b); it != bins_.end()) p.counts = it->second;
      ts.points.push_back(p);
    }
    return ts;
  }

 private:
  Granularity g_;
  std::map<std::int64_t, std::array<std::uint64_t, kNumClasses>> bins_;
  std::uint64_t unlabeled_ = 0;
};

inline TimeSeries evolution(const ReportStore& store, Granularity g) {
  EvolutionBuilder b(g);
  for (const auto& r : store) b.add(r);
  return b.finish();
}

// ---------------------------------------------------------------------------
// Volume distribution
// ---------------------------------------------------------------------------

struct VolumeDistribution {
  std::vector<std::pair<HostKey, std::uint64_t>> counts;  // reports per host
  std::vector<EcdfPoint> cdf;
  double repeat_offender_share = 0.0;  // fraction of hosts with more than one report
};

inline VolumeDistribution volume_distribution(const ProfileSet& profiles) {
  VolumeDistribution v;
  std::vector<double> values;
  std::size_t repeat = 0;
  for (const auto& [key, p] : profiles.hosts) {
    v.counts.emplace_back(key, p.reports);
    values.push_back(static_cast<double>(p.reports));
    if (p.reports > 1) ++repeat;
  }
  v.cdf = ecdf(values);
  if (!values.empty()) v.repeat_offender_share = static_cast<double>(repeat) / static_cast<double>(values.size());
  return v;
}

inline VolumeDistribution volume_distribution(const ReportStore& store, HostLevel level) {
  return volume_distribution(build_profiles(store, level));
}

// ---------------------------------------------------------------------------
// Top-K ranking
// ---------------------------------------------------------------------------

enum class RankMetric : std::uint8_t { Lifetime, Deathtime, RateOfArrival, Severity, Volume };

constexpr std::optional<RankMetric> parse_rank_metric(std::string_view s) noexcept {
  if (detail::iequals(s, "lifetime")) return RankMetric::Lifetime;
  if (detail::iequals(s, "deathtime")) return RankMetric::Deathtime;
  if (detail::iequals(s, "roa")) return RankMetric::RateOfArrival;
  if (detail::iequals(s, "severity")) return RankMetric::Severity;
  if (detail::iequals(s, "volume")) return RankMetric::Volume;
  return std::nullopt;
}

constexpr std::string_view to_string(RankMetric m) noexcept {
  switch (m) {
    case RankMetric::Lifetime: return "lifetime";
    case RankMetric::Deathtime: return "deathtime";
    case RankMetric::RateOfArrival: return "roa";
    case RankMetric::Severity: return "severity";
    case RankMetric::Volume: return "volume";
  }
  return "";
}

enum class RankOrder : std::uint8_t { Descending, Ascending };

/// Deathtime ranks lowest-first (most resilient); every other metric highest-first.
constexpr RankOrder default_order(RankMetric m) noexcept {
  return m == RankMetric::Deathtime ? RankOrder::Ascending : RankOrder::Descending;
}

struct MetricRow {
  HostKey key;
  double value;
};

/// Top k rows by value; ties broken by ascending key.
inline std::vector<MetricRow> rank_top_k(std::vector<MetricRow> rows, RankOrder order, std::size_t k) {
  auto better = [order](const MetricRow& a, const MetricRow& b) {
    if (a.value != b.value) return order == RankOrder::Descending ? a.value > b.value : a.value < b.value;
    return a.key < b.key;
  };
  k = std::min(k, rows.size());
  std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(k), rows.end(), better);
  rows.resize(k);
  return rows;
}

/// Metric column of a churn table; hosts with an undefined value are omitted.
inline std::vector<MetricRow> metric_rows(const ChurnTable& table, RankMetric m) {
  std::vector<MetricRow> rows;
  rows.reserve(table.size());
  for (const auto& [key, s] : table) {
    switch (m) {
      case RankMetric::Lifetime: rows.push_back({key, s.mean_lifetime}); break;
      case RankMetric::Deathtime:
        if (s.mean_deathtime) rows.push_back({key, *s.mean_deathtime});
        break;
      case RankMetric::RateOfArrival:
        if (s.rate_of_arrival) rows.push_back({key, *s.rate_of_arrival});
        break;
      case RankMetric::Severity: rows.push_back({key, s.severity}); break;
      case RankMetric::Volume: break;
    }
  }
  return rows;
}

inline std::vector<MetricRow> metric_rows(const ProfileSet& profiles, RankMetric m, std::size_t threads = 0) {
  if (m != RankMetric::Volume) return metric_rows(churn_table(profiles, threads), m);
  std::vector<MetricRow> rows;
  rows.reserve(profiles.hosts.size());
  for (const auto& [key, p] : profiles.hosts) rows.push_back({key, static_cast<double>(p.reports)});
  return rows;
}

/// (severity, lifetime) or (severity, deathtime) pairs for correlation; hosts
/// with an undefined second coordinate are skipped.
inline PairedSeries severity_pairs(const ChurnTable& table, RankMetric against) {
  PairedSeries out;
  for (const auto& [key, s] : table) {
    if (against == RankMetric::Lifetime) out.emplace_back(s.severity, s.mean_lifetime);
    else if (against == RankMetric::Deathtime && s.mean_deathtime) out.emplace_back(s.severity, *s.mean_deathtime);
  }
  return out;
}

}  // namespace malfeed
