#pragma once

// Normalized Shannon entropy metrics (specialization over classes, affinity
// over hosts, stability over weekly bins) plus AV-Score and geo-density.
//
// All three entropy metrics share one definition:
//   H = -sum_i p_i log2 p_i  over categories with nonzero count,
//   metric = H / log2 k      where k is the number of nonzero categories,
// with the metric defined as 0 when k == 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "malfeed/core.hpp"
#include "malfeed/hosts.hpp"

namespace malfeed {

struct EntropyValue {
  double value = 0.0;
  std::size_t k = 0;       // occupied categories
  std::uint64_t total = 0;
};

/// Normalized entropy of a count vector. Counts are summed in sorted order so
/// the result is bit-identical under any permutation of the categories.
inline EntropyValue normalized_entropy(std::span<const std::uint64_t> counts) {
  std::vector<std::uint64_t> nz;
  nz.reserve(counts.size());
  std::uint64_t total = 0;
  for (auto c : counts) {
    if (c == 0) continue;
    nz.push_back(c);
    total += c;
  }
  if (total == 0) throw DomainError("entropy of an empty histogram");
  if (nz.size() == 1) return {0.0, 1, total};
  std::sort(nz.begin(), nz.end());
  const double t = static_cast<double>(total);
  double h = 0.0;
  for (auto c : nz) {
    const double p = static_cast<double>(c) / t;
    h -= p * std::log2(p);
  }
  const double v = h / std::log2(static_cast<double>(nz.size()));
  return {std::clamp(v, 0.0, 1.0), nz.size(), total};
}

/// Report counts of one host per activity class.
struct ClassHistogram {
  std::array<std::uint64_t, kNumClasses> counts{};

  ClassHistogram& add(ActivityClass c, std::uint64_t n = 1) {
    counts[index_of(c)] += n;
    return *this;
  }
};

/// Report counts of one activity class per host.
struct HostHistogram {
  std::vector<std::uint64_t> counts;
};

/// Report counts of one host (optionally one class) per weekly bin.
struct BinHistogram {
  std::vector<std::uint64_t> counts;
};

/// S(h): 0 for a host active in a single class, 1 for an even spread over its classes.
inline double specialization(const ClassHistogram& h) { return normalized_entropy(h.counts).value; }

/// A(a): 0 when one host carries every report of the class, 1 for a uniform spread.
inline double affinity(const HostHistogram& h) { return normalized_entropy(h.counts).value; }

/// 0 for reports concentrated in one week, 1 for an even spread over the occupied weeks.
inline double stability(const BinHistogram& h) { return normalized_entropy(h.counts).value; }

/// Fraction of antivirus tools that flag the target.
inline double av_score(std::uint64_t positives, std::uint64_t total) {
  if (total == 0) throw DomainError("av_score: no tools available");
  if (positives > total) throw DomainError("av_score: positives exceed total");
  return static_cast<double>(positives) / static_cast<double>(total);
}

/// Malicious IPs per allocated IP in a region (country or AS).
inline double geo_density(std::uint64_t mal_ips, std::uint64_t allocated_ips) {
  if (allocated_ips == 0) throw DomainError("geo_density: zero allocated addresses");
  if (mal_ips > allocated_ips) throw DomainError("geo_density: more malicious IPs than allocated");
  return static_cast<double>(mal_ips) / static_cast<double>(allocated_ips);
}

// ---------------------------------------------------------------------------
// Per-host / per-class evaluation over profiles
// ---------------------------------------------------------------------------

struct KeyedEntropy {
  HostKey key;
  EntropyValue entropy;
};

/// Specialization per host over its labeled reports; hosts without labels are skipped.
inline std::vector<KeyedEntropy> specialization_by_host(const ProfileSet& profiles) {
  std::vector<KeyedEntropy> out;
  for (const auto& [key, p] : profiles.hosts) {
    if (p.reports == p.unlabeled) continue;
    out.push_back({key, normalized_entropy(p.by_class)});
  }
  return out;
}

/// Stability per host over its occupied weeks.
inline std::vector<KeyedEntropy> stability_by_host(const ProfileSet& profiles) {
  std::vector<KeyedEntropy> out;
  out.reserve(profiles.hosts.size());
  std::vector<std::uint64_t> counts;
  for (const auto& [key, p] : profiles.hosts) {
    counts.clear();
    for (const auto& b : p.weeks.bins()) counts.push_back(b.count);
    out.push_back({key, normalized_entropy(counts)});
  }
  return out;
}

struct ClassEntropy {
  ActivityClass activity;
  EntropyValue entropy;
};

/// Affinity of each class with at least one report, over the hosts of `profiles`.
inline std::vector<ClassEntropy> affinity_by_class(const ProfileSet& profiles) {
  std::vector<ClassEntropy> out;
  std::vector<std::uint64_t> counts;
  for (auto c : kAllClasses) {
    counts.clear();
    for (const auto& [key, p] : profiles.hosts) counts.push_back(p.by_class[index_of(c)]);
    if (std::all_of(counts.begin(), counts.end(), [](auto n) { return n == 0; })) continue;
    out.push_back({c, normalized_entropy(counts)});
  }
  return out;
}

}  // namespace malfeed
