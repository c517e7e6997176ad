#pragma once

// One-pass summary document: dataset volumes per class, and per host level
// the churn, severity, survival, entropy and correlation headline numbers
// with top-K tables.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "malfeed/churn.hpp"
#include "malfeed/core.hpp"
#include "malfeed/entropy.hpp"
#include "malfeed/hosts.hpp"
#include "malfeed/stats.hpp"
#include "malfeed/survival.hpp"

namespace malfeed {

class SummaryBuilder {
 public:
  explicit SummaryBuilder(std::size_t top_k = 5, double confidence = 0.95)
      : top_k_(top_k), confidence_(confidence), weekly_(Granularity::Week) {
    for (auto level : {HostLevel::IP, HostLevel::ASN, HostLevel::CC}) {
      all_.emplace_back(level);
      for (auto c : kAllClasses) per_class_.emplace_back(level, c);
    }
  }

  void add(const Report& r) {
    ++reports_;
    if (r.activity) ++class_reports_[index_of(*r.activity)];
    if (!r.asn && !r.country) ++unmapped_;
    first_ = std::min(first_, r.timestamp);
    last_ = std::max(last_, r.timestamp);
    for (auto& b : all_) b.add(r);
    for (auto& b : per_class_) b.add(r);
    weekly_.add(r);
  }

  void reset() { *this = SummaryBuilder(top_k_, confidence_); }

  nlohmann::json finish(std::size_t threads = 0) && {
    using nlohmann::json;
    json doc;
    doc["reports"] = reports_;
    std::uint64_t labeled = 0;
    for (auto n : class_reports_) labeled += n;
    doc["labeled"] = labeled;
    doc["unlabeled"] = reports_ - labeled;
    doc["unmapped"] = unmapped_;
    doc["first_report"] = reports_ ? json(format_date(first_)) : json(nullptr);
    doc["last_report"] = reports_ ? json(format_date(last_)) : json(nullptr);

    std::vector<ProfileSet> all;
    for (auto& b : all_) all.push_back(std::move(b).finish());
    std::vector<ProfileSet> per_class;
    for (auto& b : per_class_) per_class.push_back(std::move(b).finish());

    // dataset volume table
    json classes = json::array();
    for (auto c : kAllClasses) {
      json row{{"class", to_string(c)}, {"reports", class_reports_[index_of(c)]}};
      for (std::size_t l = 0; l < all.size(); ++l)
        row[std::string(level_column(all[l].level))] = per_class[l * kNumClasses + index_of(c)].hosts.size();
      classes.push_back(std::move(row));
    }
    json total{{"class", "total"}, {"reports", reports_}};
    for (const auto& ps : all) total[std::string(level_column(ps.level))] = ps.hosts.size();
    classes.push_back(std::move(total));
    doc["classes"] = std::move(classes);

    // stability of each class over weekly bins, independent of host
    const auto series = weekly_.finish();
    json class_stability = json::object();
    std::vector<std::uint64_t> bins;
    for (auto c : kAllClasses) {
      bins.clear();
      for (const auto& pt : series.points) bins.push_back(pt.counts[index_of(c)]);
      class_stability[std::string(to_string(c))] = stability_or_null(bins);
    }
    bins.clear();
    for (const auto& pt : series.points) bins.push_back(pt.total());
    class_stability["total"] = stability_or_null(bins);
    doc["class_stability"] = std::move(class_stability);

    json levels = json::object();
    for (std::size_t l = 0; l < all.size(); ++l) {
      json level = describe(all[l], threads, true);
      json by_class = json::object();
      for (auto c : kAllClasses) {
        const auto& ps = per_class[l * kNumClasses + index_of(c)];
        if (ps.hosts.empty()) continue;
        by_class[std::string(to_string(c))] = describe(ps, threads, false);
      }
      level["by_class"] = std::move(by_class);
      levels[std::string(to_string(all[l].level))] = std::move(level);
    }
    doc["levels"] = std::move(levels);
    return doc;
  }

 private:
  static std::string_view level_column(HostLevel l) {
    switch (l) {
      case HostLevel::IP: return "ips";
      case HostLevel::ASN: return "asns";
      case HostLevel::CC: return "countries";
    }
    return "";
  }

  static nlohmann::json stability_or_null(const std::vector<std::uint64_t>& bins) {
    for (auto b : bins)
      if (b) return stability(BinHistogram{bins});
    return nullptr;
  }

  static nlohmann::json mean_or_null(const std::vector<double>& v) {
    if (v.empty()) return nullptr;
    double s = 0.0;
    for (auto x : v) s += x;
    return s / static_cast<double>(v.size());
  }

  static nlohmann::json spearman_or_null(const PairedSeries& s) {
    try {
      return spearman(s);
    } catch (const DomainError&) {
      return nullptr;
    }
  }

  nlohmann::json describe(const ProfileSet& ps, std::size_t threads, bool with_tables) const {
    using nlohmann::json;
    json out;
    out["hosts"] = ps.hosts.size();
    out["unknown_reports"] = ps.unknown_reports;
    if (ps.hosts.empty()) return out;

    const auto volume = volume_distribution(ps);
    out["repeat_offender_share"] = volume.repeat_offender_share;

    const auto table = churn_table(ps, threads);
    std::vector<double> life, death, roa, sev;
    std::size_t one_week = 0;
    for (const auto& [key, s] : table) {
      life.push_back(s.mean_lifetime);
      sev.push_back(s.severity);
      if (s.mean_deathtime) death.push_back(*s.mean_deathtime);
      if (s.rate_of_arrival) roa.push_back(*s.rate_of_arrival);
      if (s.n_cycles == 1 && s.mean_lifetime == 1.0) ++one_week;
    }
    out["churn"] = {{"mean_lifetime", mean_or_null(life)},
                    {"mean_deathtime", mean_or_null(death)},
                    {"rate_of_arrival", mean_or_null(roa)},
                    {"severity", mean_or_null(sev)},
                    {"one_time_offender_share", static_cast<double>(one_week) / static_cast<double>(table.size())}};
    out["spearman"] = {{"severity_lifetime", spearman_or_null(severity_pairs(table, RankMetric::Lifetime))},
                       {"severity_deathtime", spearman_or_null(severity_pairs(table, RankMetric::Deathtime))}};

    const auto samples = durations_from_profiles(ps);
    const auto curve = km_estimate(samples, confidence_);
    std::size_t censored = 0;
    for (const auto& s : samples) censored += s.censored;
    json median = curve.median() ? json(*curve.median()) : json(nullptr);
    out["survival"] = {{"samples", samples.size()},
                       {"censored", censored},
                       {"median_weeks", median},
                       {"s_1w", curve.at(1)},
                       {"s_4w", curve.at(4)},
                       {"s_52w", curve.at(52)}};

    std::vector<double> stab, spec;
    for (const auto& e : stability_by_host(ps)) stab.push_back(e.entropy.value);
    for (const auto& e : specialization_by_host(ps)) spec.push_back(e.entropy.value);
    out["stability_mean"] = mean_or_null(stab);
    if (!ps.only) out["specialization_mean"] = mean_or_null(spec);

    if (with_tables) {
      json affinity = json::object();
      for (const auto& a : affinity_by_class(ps)) affinity[std::string(to_string(a.activity))] = a.entropy.value;
      out["affinity"] = std::move(affinity);
      json top = json::object();
      for (auto m : {RankMetric::Lifetime, RankMetric::Deathtime, RankMetric::RateOfArrival, RankMetric::Severity}) {
        json rows = json::array();
        for (const auto& row : rank_top_k(metric_rows(table, m), default_order(m), top_k_))
          rows.push_back({{"key", row.key.to_string()}, {"value", row.value}});
        top[std::string(to_string(m))] = std::move(rows);
      }
      out["top"] = std::move(top);
    }
    return out;
  }

  std::size_t top_k_;
  double confidence_;
  std::uint64_t reports_ = 0;
  std::uint64_t unmapped_ = 0;
  std::array<std::uint64_t, kNumClasses> class_reports_{};
  std::int64_t first_ = std::numeric_limits<std::int64_t>::max();
  std::int64_t last_ = std::numeric_limits<std::int64_t>::min();
  std::vector<ProfileBuilder> all_;
  std::vector<ProfileBuilder> per_class_;
  EvolutionBuilder weekly_;
};

inline nlohmann::json summarize_store(const ReportStore& store, std::size_t top_k = 5, std::size_t threads = 0) {
  SummaryBuilder b(top_k);
  for (const auto& r : store) b.add(r);
  return std::move(b).finish(threads);
}

}  // namespace malfeed
