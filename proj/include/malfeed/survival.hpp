#pragma once

// Kaplan-Meier survival of hosts. A host's duration is the number of weeks
// between its first and last report; it is right-censored when its last
// report falls in the final covered week of every source that reported it.

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "malfeed/core.hpp"
#include "malfeed/hosts.hpp"
#include "malfeed/ingest.hpp"

namespace malfeed {

struct DurationSample {
  std::uint32_t duration = 0;  // weeks
  bool censored = false;

  bool operator==(const DurationSample&) const = default;
};

struct SurvivalStep {
  double t = 0.0;  // weeks
  double survival = 1.0;
  double ci_low = 1.0;
  double ci_high = 1.0;
  std::uint64_t at_risk = 0;
  std::uint64_t deaths = 0;
};

/// Right-continuous step function; one step per distinct observed duration.
struct SurvivalCurve {
  std::vector<SurvivalStep> steps;

  /// S(t); 1 before the first step.
  double at(double t) const {
    double s = 1.0;
    for (const auto& step : steps) {
      if (step.t > t) break;
      s = step.survival;
    }
    return s;
  }

  /// Smallest t with S(t) <= 0.5, or nullopt if the curve never gets there.
  std::optional<double> median() const {
    for (const auto& step : steps)
      if (step.survival <= 0.5) return step.t;
    return std::nullopt;
  }
};

/// Last-coverage timestamp per source name; overrides the per-source last
/// report observed in the data.
using SourceWindows = std::map<std::string, std::int64_t>;

inline std::vector<DurationSample> durations_from_profiles(const ProfileSet& profiles,
                                                           const SourceWindows& end_of_window = {}) {
  std::vector<std::int64_t> final_week(profiles.source_names.size());
  for (std::size_t s = 0; s < final_week.size(); ++s) {
    auto it = end_of_window.find(profiles.source_names[s]);
    final_week[s] = week_index(it != end_of_window.end() ? it->second : profiles.source_last_ts[s]);
  }
  std::vector<DurationSample> out;
  out.reserve(profiles.hosts.size());
  for (const auto& [key, p] : profiles.hosts) {
    const auto first = week_index(p.first_ts), last = week_index(p.last_ts);
    const bool censored = !p.sources.empty() && std::all_of(p.sources.begin(), p.sources.end(), [&](auto s) {
      return last >= final_week[s];
    });
    out.push_back({static_cast<std::uint32_t>(last - first), censored});
  }
  return out;
}

inline std::vector<DurationSample> durations_from_store(const ReportStore& store, HostLevel level,
                                                        const SourceWindows& end_of_window = {},
                                                        std::optional<ActivityClass> only = std::nullopt) {
  return durations_from_profiles(build_profiles(store, level, only), end_of_window);
}

/// Two-sided standard-normal critical value for a confidence level in (0,1).
inline double normal_critical_value(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>{}, 0.5 + confidence / 2.0);
}

/// Product-limit estimate with Greenwood variance and a normal-approximation
/// band on the survival scale, clipped to [0,1].
inline SurvivalCurve km_estimate(std::span<const DurationSample> samples, double confidence = 0.95) {
  if (samples.empty()) throw DomainError("km_estimate: no samples");
  const double z = normal_critical_value(confidence);

  std::vector<DurationSample> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const DurationSample& a, const DurationSample& b) { return a.duration < b.duration; });

  SurvivalCurve curve;
  double s = 1.0;
  double greenwood = 0.0;  // sum d / (n (n - d))
  std::uint64_t at_risk = sorted.size();
  for (std::size_t i = 0; i < sorted.size();) {
    const auto t = sorted[i].duration;
    std::uint64_t deaths = 0, removed = 0;
    for (; i < sorted.size() && sorted[i].duration == t; ++i, ++removed)
      if (!sorted[i].censored) ++deaths;

    SurvivalStep step;
    step.t = t;
    step.at_risk = at_risk;
    step.deaths = deaths;
    if (deaths > 0) {
      s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      if (deaths < at_risk)
        greenwood += static_cast<double>(deaths) / (static_cast<double>(at_risk) * static_cast<double>(at_risk - deaths));
    }
    const double variance = (s <= 0.0 || s >= 1.0) ? 0.0 : s * s * greenwood;
    const double half = z * std::sqrt(variance);
    step.survival = s;
    step.ci_low = std::clamp(s - half, 0.0, 1.0);
    step.ci_high = std::clamp(s + half, 0.0, 1.0);
    curve.steps.push_back(step);
    at_risk -= removed;
  }
  return curve;
}

inline SurvivalCurve km_by_class(const ReportStore& store, ActivityClass activity, double confidence = 0.95,
                                 HostLevel level = HostLevel::IP, const SourceWindows& end_of_window = {}) {
  const auto samples = durations_from_store(store, level, end_of_window, activity);
  return km_estimate(samples, confidence);
}

}  // namespace malfeed
