#pragma once

// Per-host aggregates built from a report stream. Every analysis that works
// at IP/ASN/CC level reads from a ProfileSet, so the same numbers come out
// whether reports were streamed from disk or taken from a ReportStore.

#include <algorithm>
#include <array>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "malfeed/core.hpp"
#include "malfeed/ingest.hpp"

namespace malfeed {

/// Sparse weekly report counts. Appends in non-decreasing week order are O(1)
/// and stay compact; out-of-order appends are merged lazily.
class WeekCounts {
 public:
  struct Bin {
    std::int64_t week;
    std::uint64_t count;
    bool operator==(const Bin&) const = default;
  };

  void add(std::int64_t week, std::uint64_t n = 1) {
    total_ += n;
    if (!bins_.empty() && bins_.back().week == week) {
      bins_.back().count += n;
      return;
    }
    if (!bins_.empty() && week < bins_.back().week) sorted_ = false;
    bins_.push_back({week, n});
    if (!sorted_ && bins_.size() > 2 * compacted_size_ + 64) compact();
  }

  void compact() {
    if (!sorted_) {
      std::sort(bins_.begin(), bins_.end(), [](const Bin& a, const Bin& b) { return a.week < b.week; });
      std::vector<Bin> merged;
      merged.reserve(bins_.size());
      for (const auto& b : bins_) {
        if (!merged.empty() && merged.back().week == b.week) merged.back().count += b.count;
        else merged.push_back(b);
      }
      bins_ = std::move(merged);
      sorted_ = true;
    }
    compacted_size_ = bins_.size();
  }

  /// Occupied weeks in ascending order. Call compact() first after out-of-order adds.
  std::span<const Bin> bins() const noexcept { return bins_; }
  std::uint64_t total() const noexcept { return total_; }
  bool empty() const noexcept { return bins_.empty(); }
  bool sorted() const noexcept { return sorted_; }

 private:
  std::vector<Bin> bins_;
  std::size_t compacted_size_ = 0;
  std::uint64_t total_ = 0;
  bool sorted_ = true;
};

struct HostProfile {
  std::uint64_t reports = 0;
  std::array<std::uint64_t, kNumClasses> by_class{};
  std::uint64_t unlabeled = 0;
  WeekCounts weeks;
  std::int64_t first_ts = std::numeric_limits<std::int64_t>::max();
  std::int64_t last_ts = std::numeric_limits<std::int64_t>::min();
  std::vector<std::uint32_t> sources;  // ids into ProfileSet::source_names, sorted
};

/// Aggregates for every host at one level, optionally restricted to one class.
struct ProfileSet {
  HostLevel level = HostLevel::IP;
  std::optional<ActivityClass> only;
  std::vector<std::pair<HostKey, HostProfile>> hosts;  // sorted by key, unknown excluded
  std::uint64_t unknown_reports = 0;
  std::uint64_t reports_seen = 0;          // before the class filter
  std::vector<std::string> source_names;
  std::vector<std::int64_t> source_last_ts;  // last report per source, before the class filter
};

class ProfileBuilder {
 public:
  explicit ProfileBuilder(HostLevel level, std::optional<ActivityClass> only = std::nullopt)
      : level_(level), only_(only) {}

  void add(const Report& r) {
    ++reports_seen_;
    const auto source = intern_source(r.source);
    source_last_ts_[source] = std::max(source_last_ts_[source], r.timestamp);
    if (only_ && r.activity != only_) return;
    const auto key = host_key(r, level_);
    if (!key) {
      ++unknown_;
      return;
    }
    auto [it, inserted] = index_.try_emplace(*key, hosts_.size());
    if (inserted) hosts_.emplace_back(*key, HostProfile{});
    auto& p = hosts_[it->second].second;
    ++p.reports;
    if (r.activity) ++p.by_class[index_of(*r.activity)];
    else ++p.unlabeled;
    p.weeks.add(week_index(r.timestamp));
    p.first_ts = std::min(p.first_ts, r.timestamp);
    p.last_ts = std::max(p.last_ts, r.timestamp);
    if (std::find(p.sources.begin(), p.sources.end(), source) == p.sources.end()) p.sources.push_back(source);
  }

  void reset() { *this = ProfileBuilder(level_, only_); }

  ProfileSet finish() && {
    for (auto& [key, p] : hosts_) {
      p.weeks.compact();
      std::sort(p.sources.begin(), p.sources.end());
    }
    std::sort(hosts_.begin(), hosts_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    ProfileSet out;
    out.level = level_;
    out.only = only_;
    out.hosts = std::move(hosts_);
    out.unknown_reports = unknown_;
    out.reports_seen = reports_seen_;
    out.source_names = std::move(source_names_);
    out.source_last_ts = std::move(source_last_ts_);
    return out;
  }

 private:
  std::uint32_t intern_source(const std::string& name) {
    if (name == last_source_name_ && last_source_id_ < source_names_.size()) return last_source_id_;
    auto [it, inserted] = source_ids_.try_emplace(name, static_cast<std::uint32_t>(source_names_.size()));
    if (inserted) {
      source_names_.push_back(name);
      source_last_ts_.push_back(std::numeric_limits<std::int64_t>::min());
    }
    last_source_name_ = name;
    last_source_id_ = it->second;
    return it->second;
  }

  HostLevel level_;
  std::optional<ActivityClass> only_;
  std::unordered_map<HostKey, std::size_t, HostKeyHash> index_;
  std::vector<std::pair<HostKey, HostProfile>> hosts_;
  std::uint64_t unknown_ = 0;
  std::uint64_t reports_seen_ = 0;
  std::unordered_map<std::string, std::uint32_t> source_ids_;
  std::vector<std::string> source_names_;
  std::vector<std::int64_t> source_last_ts_;
  std::string last_source_name_;
  std::uint32_t last_source_id_ = std::numeric_limits<std::uint32_t>::max();
};

inline ProfileSet build_profiles(const ReportStore& store, HostLevel level,
                                 std::optional<ActivityClass> only = std::nullopt) {
  ProfileBuilder b(level, only);
  for (const auto& r : store) b.add(r);
  return std::move(b).finish();
}

}  // namespace malfeed
