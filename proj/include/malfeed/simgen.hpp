#pragma once

// Synthetic report corpora from an alternating ON/OFF renewal process with
// geometric durations. The generator keeps its own cycle log per host, which
// is the ground truth the churn, stability and survival estimators are
// checked against.

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "malfeed/churn.hpp"
#include "malfeed/core.hpp"
#include "malfeed/enrich.hpp"
#include "malfeed/ingest.hpp"

namespace malfeed {

struct SimParams {
  std::size_t n_hosts = 1000;
  double mean_lifetime = 3.0;            // weeks, >= 1
  double mean_deathtime = 2.0;           // weeks, >= 1
  double reports_per_active_week = 1.0;  // mean, >= 1
  std::uint32_t horizon = 520;           // weeks
  std::array<double, kNumClasses> class_mix{1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6};
  std::uint64_t seed = 1;
  std::int64_t origin_week = 1930;  // first simulated week (1930 starts 2006-12-28)
  std::string source = "sim";
};

inline void validate(const SimParams& p) {
  if (p.n_hosts == 0 || p.n_hosts >= (std::size_t{1} << 24) - 1) throw DomainError("n_hosts must lie in [1, 2^24 - 2]");
  if (!(p.mean_lifetime >= 1.0)) throw DomainError("mean_lifetime must be >= 1 week");
  if (!(p.mean_deathtime >= 1.0)) throw DomainError("mean_deathtime must be >= 1 week");
  if (!(p.reports_per_active_week >= 1.0)) throw DomainError("reports_per_active_week must be >= 1");
  if (p.horizon == 0) throw DomainError("horizon must be >= 1 week");
  if (p.origin_week <= 0) throw DomainError("origin_week must be positive");
  double sum = 0.0;
  for (auto w : p.class_mix) {
    if (!(w >= 0.0)) throw DomainError("class_mix entries must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DomainError("class_mix must sum to 1");
}

/// Generator-side record of one host.
struct SimHost {
  Ipv4 ip;
  ActivityClass activity = ActivityClass::Malware;
  std::vector<Cycle> cycles;  // truncated at the horizon
};

inline constexpr std::uint32_t kSimIpBase = 0x0A000001;  // 10.0.0.1

inline Ipv4 sim_host_ip(std::size_t host) { return Ipv4{kSimIpBase + static_cast<std::uint32_t>(host)}; }

namespace detail {

/// ON/OFF schedule of one host; reports are filled in during emission.
inline std::vector<Cycle> sim_schedule(const SimParams& p, std::mt19937_64& rng) {
  std::geometric_distribution<std::int64_t> on(1.0 / p.mean_lifetime), off(1.0 / p.mean_deathtime);
  std::vector<Cycle> cycles;
  std::int64_t t = 0;
  const std::int64_t h = p.horizon;
  while (t < h) {
    Cycle c;
    const auto life = std::min<std::int64_t>(on(rng) + 1, h - t);
    c.lifetime = static_cast<std::uint32_t>(life);
    t += life;
    if (t < h) {
      const auto death = off(rng) + 1;
      if (t + death < h) {
        c.deathtime = static_cast<std::uint32_t>(death);
        c.closed = true;
      }
      t += death;
    }
    cycles.push_back(c);
  }
  return cycles;
}

}  // namespace detail

/// Emits every report, week by week in canonical order, to `emit` and returns
/// the generator's per-host truth. Each host draws from its own RNG streams
/// (derived from seed and host index), so output is fully determined by params.
template <typename Emit>
std::vector<SimHost> simulate_stream(const SimParams& p, Emit&& emit) {
  validate(p);
  std::vector<SimHost> hosts(p.n_hosts);
  std::vector<std::mt19937_64> emit_rng;
  emit_rng.reserve(p.n_hosts);
  std::discrete_distribution<std::size_t> pick_class(p.class_mix.begin(), p.class_mix.end());
  for (std::size_t i = 0; i < p.n_hosts; ++i) {
    std::mt19937_64 rng(detail::mix_seed(p.seed, 2 * i));
    hosts[i].ip = sim_host_ip(i);
    hosts[i].activity = kAllClasses[pick_class(rng)];
    hosts[i].cycles = detail::sim_schedule(p, rng);
    emit_rng.emplace_back(detail::mix_seed(p.seed, 2 * i + 1));
  }

  // cursor per host: current cycle, week offset within it
  struct Cursor {
    std::size_t cycle = 0;
    std::uint32_t pos = 0;
  };
  std::vector<Cursor> cursors(p.n_hosts);
  const double extra = p.reports_per_active_week - 1.0;
  std::vector<Report> week_reports;
  std::vector<std::int64_t> offsets;
  std::uniform_int_distribution<std::int64_t> offset_dist(0, kSecondsPerWeek - 1);

  for (std::uint32_t w = 0; w < p.horizon; ++w) {
    week_reports.clear();
    const std::int64_t week_start = (p.origin_week + w) * kSecondsPerWeek;
    for (std::size_t i = 0; i < p.n_hosts; ++i) {
      auto& host = hosts[i];
      auto& cur = cursors[i];
      if (cur.cycle >= host.cycles.size()) continue;
      auto& cycle = host.cycles[cur.cycle];
      const bool alive = cur.pos < cycle.lifetime;
      if (alive) {
        auto& rng = emit_rng[i];
        std::uint64_t count = 1;
        if (extra > 0.0) count += std::poisson_distribution<std::uint64_t>(extra)(rng);
        cycle.reports += count;
        offsets.clear();
        while (offsets.size() < count) {
          const auto o = offset_dist(rng);
          if (std::find(offsets.begin(), offsets.end(), o) == offsets.end()) offsets.push_back(o);
        }
        for (auto o : offsets) {
          Report r;
          r.timestamp = week_start + o;
          r.ip = host.ip;
          r.activity = host.activity;
          r.source = p.source;
          week_reports.push_back(std::move(r));
        }
      }
      const std::uint32_t span = cycle.lifetime + (cycle.closed ? cycle.deathtime : 0);
      if (++cur.pos >= span && cycle.closed) cur = {cur.cycle + 1, 0};
    }
    std::sort(week_reports.begin(), week_reports.end(), canonical_less);
    for (const auto& r : week_reports) emit(r);
  }
  return hosts;
}

struct SimResult {
  ReportStore store;
  std::vector<SimHost> truth;
};

inline SimResult simulate(const SimParams& p) {
  std::vector<Report> reports;
  auto truth = simulate_stream(p, [&](const Report& r) { reports.push_back(r); });
  return {ReportStore(std::move(reports)), std::move(truth)};
}

/// Prefix tables that place simulated hosts: one ASN per /24, one country per /20.
inline std::vector<SnapshotTable::Entry> sim_asn_entries(const SimParams& p) {
  std::vector<SnapshotTable::Entry> out;
  const std::uint32_t first = kSimIpBase >> 8, last = (kSimIpBase + static_cast<std::uint32_t>(p.n_hosts) - 1) >> 8;
  for (auto b = first; b <= last; ++b)
    out.push_back({p.origin_week * kSecondsPerWeek, Cidr{Ipv4{b << 8}, 24}, std::to_string(64512 + (b - first))});
  return out;
}

inline std::vector<SnapshotTable::Entry> sim_geo_entries(const SimParams& p) {
  static constexpr std::array<const char*, 12> kCodes{"US", "CN", "DE", "RU", "NL", "GB",
                                                      "FR", "UA", "CA", "KR", "JP", "BR"};
  std::vector<SnapshotTable::Entry> out;
  const std::uint32_t first = kSimIpBase >> 12, last = (kSimIpBase + static_cast<std::uint32_t>(p.n_hosts) - 1) >> 12;
  for (auto b = first; b <= last; ++b)
    out.push_back({p.origin_week * kSecondsPerWeek, Cidr{Ipv4{b << 12}, 20}, kCodes[(b - first) % kCodes.size()]});
  return out;
}

}  // namespace malfeed
