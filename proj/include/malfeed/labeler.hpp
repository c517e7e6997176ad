#pragma once

// Activity-class labeling. Reports are encoded as calendar fields, IP octets,
// ASN and one-hot country / organization blocks; an ensemble of learners
// trained on bootstrap resamples soft-votes a class for unlabeled reports.

#include <algorithm>
#include <array>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "malfeed/core.hpp"
#include "malfeed/parallel.hpp"

namespace malfeed {

using ClassProbabilities = std::array<double, kNumClasses>;

// ---------------------------------------------------------------------------
// Feature encoding
// ---------------------------------------------------------------------------

/// One-hot dictionaries, frozen at training time.
struct Vocabulary {
  std::vector<std::string> countries;      // sorted, unique
  std::vector<std::string> organizations;  // sorted, unique

  static Vocabulary build(std::span<const Report> reports) {
    Vocabulary v;
    for (const auto& r : reports) {
      if (r.country) v.countries.push_back(r.country->to_string());
      if (r.organization) v.organizations.push_back(*r.organization);
    }
    for (auto* list : {&v.countries, &v.organizations}) {
      std::sort(list->begin(), list->end());
      list->erase(std::unique(list->begin(), list->end()), list->end());
    }
    return v;
  }

  static std::optional<std::size_t> find(const std::vector<std::string>& list, std::string_view s) {
    auto it = std::lower_bound(list.begin(), list.end(), s);
    if (it == list.end() || *it != s) return std::nullopt;
    return static_cast<std::size_t>(it - list.begin());
  }

  bool operator==(const Vocabulary&) const = default;
};

struct FeatureVector {
  int day = 1;    // 1-31
  int month = 1;  // 1-12
  int year = 1970;
  std::array<std::uint8_t, 4> octets{};
  std::uint32_t asn = 0;  // 0: unknown
  std::vector<std::uint8_t> country_onehot;
  std::vector<std::uint8_t> org_onehot;

  static constexpr std::size_t kNumericFeatures = 8;

  std::size_t width() const noexcept { return kNumericFeatures + country_onehot.size() + org_onehot.size(); }

  /// Value of flattened feature j: numeric fields, then the country block, then the organization block.
  double feature(std::size_t j) const noexcept {
    switch (j) {
      case 0: return day;
      case 1: return month;
      case 2: return year;
      case 3: case 4: case 5: case 6: return octets[j - 3];
      case 7: return asn;
      default: break;
    }
    j -= kNumericFeatures;
    if (j < country_onehot.size()) return country_onehot[j];
    j -= country_onehot.size();
    return j < org_onehot.size() ? org_onehot[j] : 0.0;
  }

  std::vector<double> flatten() const {
    std::vector<double> out(width());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = feature(j);
    return out;
  }

  bool operator==(const FeatureVector&) const = default;
};

/// Out-of-vocabulary countries and organizations encode as all-zero blocks.
inline FeatureVector encode(const Report& r, const Vocabulary& vocab) {
  using namespace std::chrono;
  FeatureVector f;
  const year_month_day ymd{sys_days{days{day_index(r.timestamp)}}};
  f.day = static_cast<int>(static_cast<unsigned>(ymd.day()));
  f.month = static_cast<int>(static_cast<unsigned>(ymd.month()));
  f.year = static_cast<int>(ymd.year());
  for (std::size_t i = 0; i < 4; ++i) f.octets[i] = r.ip.octet(i);
  f.asn = r.asn.value_or(0);
  f.country_onehot.assign(vocab.countries.size(), 0);
  f.org_onehot.assign(vocab.organizations.size(), 0);
  if (r.country)
    if (auto i = Vocabulary::find(vocab.countries, r.country->to_string())) f.country_onehot[*i] = 1;
  if (r.organization)
    if (auto i = Vocabulary::find(vocab.organizations, *r.organization)) f.org_onehot[*i] = 1;
  return f;
}

struct LabeledExample {
  FeatureVector features;
  ActivityClass label;
};

// ---------------------------------------------------------------------------
// Stratified split
// ---------------------------------------------------------------------------

namespace detail {
inline ActivityClass label_of(const LabeledExample& ex) { return ex.label; }
inline ActivityClass label_of(const Report& r) {
  if (!r.activity) throw DomainError("stratified_split: unlabeled report");
  return *r.activity;
}
}  // namespace detail

/// Per class, round(train_fraction * class size) examples go to train. Both
/// halves keep input order. Deterministic in `seed`.
template <typename Example>
std::pair<std::vector<Example>, std::vector<Example>> stratified_split(std::span<const Example> examples,
                                                                       double train_fraction, std::uint64_t seed) {
  if (examples.empty()) throw DomainError("stratified_split: no examples");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw DomainError("train_fraction must lie in [0,1]");
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < examples.size(); ++i) by_class[index_of(detail::label_of(examples[i]))].push_back(i);

  std::vector<bool> in_train(examples.size(), false);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[c];
    std::mt19937_64 rng(detail::mix_seed(seed, c));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto take = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < take && i < idx.size(); ++i) in_train[idx[i]] = true;
  }
  std::pair<std::vector<Example>, std::vector<Example>> out;
  for (std::size_t i = 0; i < examples.size(); ++i) (in_train[i] ? out.first : out.second).push_back(examples[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Learners
// ---------------------------------------------------------------------------

/// Contract every ensemble member satisfies: fit on labeled examples, then
/// emit a normalized per-class probability vector.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual void fit(std::span<const LabeledExample> examples) = 0;
  virtual ClassProbabilities predict_proba(const FeatureVector& x) const = 0;
  virtual nlohmann::json to_json() const = 0;
};

using LearnerFactory = std::function<std::unique_ptr<Learner>(std::uint64_t seed)>;

/// CART classifier with Gini impurity and a depth limit. Numeric features
/// split on midpoints between sorted values; one-hot blocks split one
/// category against the rest.
class DecisionTree final : public Learner {
 public:
  struct Options {
    std::size_t max_depth = 16;
    std::size_t min_samples_split = 2;
  };

  DecisionTree() = default;
  explicit DecisionTree(Options opts) : opts_(opts) {}

  void fit(std::span<const LabeledExample> examples) override {
    if (examples.empty()) throw DomainError("decision tree: empty training set");
    nodes_.clear();
    data_ = examples;
    std::vector<std::size_t> idx(examples.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    grow(idx, 0);
    data_ = {};
  }

  ClassProbabilities predict_proba(const FeatureVector& x) const override {
    if (nodes_.empty()) throw DomainError("decision tree: not fitted");
    std::size_t n = 0;
    while (nodes_[n].feature >= 0) {
      const auto& node = nodes_[n];
      n = x.feature(static_cast<std::size_t>(node.feature)) < node.threshold ? node.left : node.right;
    }
    return nodes_[n].proba;
  }

  nlohmann::json to_json() const override {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : nodes_) {
      if (n.feature < 0) nodes.push_back({{"leaf", n.proba}});
      else nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
    }
    return {{"type", "decision_tree"}, {"max_depth", opts_.max_depth}, {"nodes", std::move(nodes)}};
  }

  static std::unique_ptr<DecisionTree> from_json(const nlohmann::json& j) {
    if (j.at("type") != "decision_tree") throw DomainError("unsupported learner type");
    auto tree = std::make_unique<DecisionTree>(Options{j.value("max_depth", std::size_t{16}), 2});
    for (const auto& n : j.at("nodes")) {
      Node node;
      if (n.contains("leaf")) {
        node.proba = n.at("leaf").get<ClassProbabilities>();
      } else {
        node.feature = n.at("feature").get<int>();
        node.threshold = n.at("threshold").get<double>();
        node.left = n.at("left").get<std::size_t>();
        node.right = n.at("right").get<std::size_t>();
      }
      tree->nodes_.push_back(node);
    }
    for (const auto& n : tree->nodes_)
      if (n.feature >= 0 && (n.left >= tree->nodes_.size() || n.right >= tree->nodes_.size()))
        throw DomainError("decision tree: child index out of range");
    if (tree->nodes_.empty()) throw DomainError("decision tree: no nodes");
    return tree;
  }

  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    std::size_t left = 0, right = 0;
    ClassProbabilities proba{};
  };

  using Counts = std::array<std::uint64_t, kNumClasses>;

  static double gini(const Counts& c, std::uint64_t n) {
    if (n == 0) return 0.0;
    double s = 0.0;
    for (auto v : c) {
      const double p = static_cast<double>(v) / static_cast<double>(n);
      s += p * p;
    }
    return 1.0 - s;
  }

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
  };

  Split best_split(const std::vector<std::size_t>& idx, const Counts& total) const {
    const auto n = idx.size();
    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    auto consider = [&](int feature, double threshold, const Counts& left, std::uint64_t nl) {
      Counts right{};
      for (std::size_t c = 0; c < kNumClasses; ++c) right[c] = total[c] - left[c];
      const auto nr = n - nl;
      const double imp = (static_cast<double>(nl) * gini(left, nl) + static_cast<double>(nr) * gini(right, nr)) /
                         static_cast<double>(n);
      if (imp < best.impurity) best = {feature, threshold, imp};
    };

    // numeric features
    std::vector<std::pair<double, std::size_t>> column(n);
    for (std::size_t f = 0; f < FeatureVector::kNumericFeatures; ++f) {
      for (std::size_t i = 0; i < n; ++i) column[i] = {data_[idx[i]].features.feature(f), idx[i]};
      std::sort(column.begin(), column.end());
      Counts left{};
      for (std::size_t i = 0; i + 1 < n; ++i) {
        ++left[index_of(data_[column[i].second].label)];
        if (column[i].first == column[i + 1].first) continue;
        consider(static_cast<int>(f), (column[i].first + column[i + 1].first) / 2.0, left, i + 1);
      }
    }

    // one-hot blocks: "category c" goes right (value 1 >= 0.5)
    const auto& first = data_[idx.front()].features;
    const std::size_t country_width = first.country_onehot.size();
    auto scan_block = [&](std::size_t offset, auto hot_index) {
      std::map<std::size_t, Counts> per_category;
      for (auto i : idx)
        if (auto c = hot_index(data_[i].features)) ++per_category[*c][index_of(data_[i].label)];
      for (const auto& [cat, counts] : per_category) {
        const auto in_cat = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
        if (in_cat == n) continue;
        Counts left{};
        for (std::size_t c = 0; c < kNumClasses; ++c) left[c] = total[c] - counts[c];
        consider(static_cast<int>(offset + cat), 0.5, left, n - in_cat);
      }
    };
    auto hot = [](const std::vector<std::uint8_t>& block) -> std::optional<std::size_t> {
      auto it = std::find(block.begin(), block.end(), std::uint8_t{1});
      if (it == block.end()) return std::nullopt;
      return static_cast<std::size_t>(it - block.begin());
    };
    scan_block(FeatureVector::kNumericFeatures, [&](const FeatureVector& f) { return hot(f.country_onehot); });
    scan_block(FeatureVector::kNumericFeatures + country_width,
               [&](const FeatureVector& f) { return hot(f.org_onehot); });
    return best;
  }

  std::size_t grow(const std::vector<std::size_t>& idx, std::size_t depth) {
    Counts counts{};
    for (auto i : idx) ++counts[index_of(data_[i].label)];
    const auto node_id = nodes_.size();
    nodes_.emplace_back();
    for (std::size_t c = 0; c < kNumClasses; ++c)
      nodes_[node_id].proba[c] = static_cast<double>(counts[c]) / static_cast<double>(idx.size());

    const bool pure = std::count_if(counts.begin(), counts.end(), [](auto v) { return v > 0; }) <= 1;
    if (pure || depth >= opts_.max_depth || idx.size() < opts_.min_samples_split) return node_id;
    const auto split = best_split(idx, counts);
    if (split.feature < 0) return node_id;

    std::vector<std::size_t> left, right;
    for (auto i : idx)
      (data_[i].features.feature(static_cast<std::size_t>(split.feature)) < split.threshold ? left : right).push_back(i);
    nodes_[node_id].feature = split.feature;
    nodes_[node_id].threshold = split.threshold;
    const auto l = grow(left, depth + 1);
    const auto r = grow(right, depth + 1);
    nodes_[node_id].left = l;
    nodes_[node_id].right = r;
    return node_id;
  }

  Options opts_;
  std::vector<Node> nodes_;
  std::span<const LabeledExample> data_;
};

inline LearnerFactory decision_tree_factory(DecisionTree::Options opts = {}) {
  return [opts](std::uint64_t) { return std::make_unique<DecisionTree>(opts); };
}

// ---------------------------------------------------------------------------
// Ensemble and soft voting
// ---------------------------------------------------------------------------

/// Learners sharing one vocabulary.
struct Ensemble {
  std::vector<std::unique_ptr<Learner>> members;
  Vocabulary vocabulary;
};

namespace detail {

/// Mean of the vectors, summed in sorted order so member order cannot change a bit.
inline ClassProbabilities mean_vote(std::span<const ClassProbabilities> votes) {
  std::vector<ClassProbabilities> sorted(votes.begin(), votes.end());
  std::sort(sorted.begin(), sorted.end());
  ClassProbabilities avg{};
  for (const auto& v : sorted)
    for (std::size_t c = 0; c < kNumClasses; ++c) avg[c] += v[c];
  for (auto& a : avg) a /= static_cast<double>(sorted.size());
  return avg;
}

}  // namespace detail

/// Averages per-class vectors; argmax with ties resolved by class order.
inline std::pair<ActivityClass, double> soft_vote(std::span<const ClassProbabilities> votes) {
  if (votes.empty()) throw DomainError("soft_vote: no votes");
  const auto avg = detail::mean_vote(votes);
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c)
    if (avg[c] > avg[best]) best = c;
  return {kAllClasses[best], avg[best]};
}

inline ClassProbabilities average_probabilities(const Ensemble& e, const FeatureVector& x) {
  if (e.members.empty()) throw DomainError("average_probabilities: empty ensemble");
  std::vector<ClassProbabilities> votes;
  votes.reserve(e.members.size());
  for (const auto& m : e.members) votes.push_back(m->predict_proba(x));
  return detail::mean_vote(votes);
}

inline std::pair<ActivityClass, double> soft_vote(const Ensemble& e, const FeatureVector& x) {
  if (e.members.empty()) throw DomainError("soft_vote: empty ensemble");
  std::vector<ClassProbabilities> votes;
  votes.reserve(e.members.size());
  for (const auto& m : e.members) votes.push_back(m->predict_proba(x));
  return soft_vote(votes);
}

/// Thrown when a member fails to train; names the member.
class LearnerError : public std::runtime_error {
 public:
  LearnerError(std::size_t member, const std::string& what)
      : std::runtime_error("ensemble member " + std::to_string(member) + ": " + what), member_(member) {}
  std::size_t member() const noexcept { return member_; }

 private:
  std::size_t member_;
};

/// Trains `k` members, member m on a bootstrap resample drawn with
/// mix_seed(seed, m). Members train in parallel; the result does not depend
/// on the thread count.
inline Ensemble train_ensemble(std::span<const LabeledExample> train, Vocabulary vocabulary,
                               const LearnerFactory& factory, std::size_t k, std::uint64_t seed,
                               std::size_t threads = 0) {
  if (train.empty()) throw DomainError("train_ensemble: empty training set");
  if (k == 0) throw DomainError("train_ensemble: need at least one member");
  Ensemble e;
  e.vocabulary = std::move(vocabulary);
  e.members.resize(k);
  parallel_for(k, threads, [&](std::size_t m) {
    try {
      const auto member_seed = detail::mix_seed(seed, m);
      std::mt19937_64 rng(member_seed);
      std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
      std::vector<LabeledExample> sample;
      sample.reserve(train.size());
      for (std::size_t i = 0; i < train.size(); ++i) sample.push_back(train[pick(rng)]);
      auto learner = factory(member_seed);
      if (!learner) throw DomainError("factory returned no learner");
      learner->fit(sample);
      e.members[m] = std::move(learner);
    } catch (const LearnerError&) {
      throw;
    } catch (const std::exception& ex) {
      throw LearnerError(m, ex.what());
    }
  });
  return e;
}

// ---------------------------------------------------------------------------
// Accuracy
// ---------------------------------------------------------------------------

/// sum(acc_c * n_c) / sum(n_c).
inline double weighted_accuracy(const std::map<ActivityClass, double>& per_class_accuracy,
                                const std::map<ActivityClass, std::uint64_t>& class_counts) {
  if (per_class_accuracy.size() != class_counts.size()) throw DomainError("weighted_accuracy: key sets differ");
  double num = 0.0, den = 0.0;
  for (const auto& [c, acc] : per_class_accuracy) {
    auto it = class_counts.find(c);
    if (it == class_counts.end()) throw DomainError("weighted_accuracy: key sets differ");
    if (it->second == 0) throw DomainError("weighted_accuracy: zero class count");
    num += acc * static_cast<double>(it->second);
    den += static_cast<double>(it->second);
  }
  if (den == 0.0) throw DomainError("weighted_accuracy: no classes");
  return num / den;
}

struct Evaluation {
  std::map<ActivityClass, double> accuracy;       // per class present in the test set
  std::map<ActivityClass, std::uint64_t> counts;  // test examples per class
  double weighted = 0.0;
};

inline Evaluation evaluate(const Ensemble& e, std::span<const LabeledExample> test) {
  if (test.empty()) throw DomainError("evaluate: empty test set");
  std::map<ActivityClass, std::uint64_t> correct;
  Evaluation ev;
  for (const auto& ex : test) {
    ++ev.counts[ex.label];
    if (soft_vote(e, ex.features).first == ex.label) ++correct[ex.label];
  }
  for (const auto& [c, n] : ev.counts) ev.accuracy[c] = static_cast<double>(correct[c]) / static_cast<double>(n);
  ev.weighted = weighted_accuracy(ev.accuracy, ev.counts);
  return ev;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const Ensemble& e) {
  nlohmann::json classes = nlohmann::json::array();
  for (auto c : kAllClasses) classes.push_back(std::string(to_string(c)));
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : e.members) members.push_back(m->to_json());
  return {{"format", "malfeed-model"},
          {"version", 1},
          {"class_order", std::move(classes)},
          {"vocabulary", {{"country", e.vocabulary.countries}, {"organization", e.vocabulary.organizations}}},
          {"members", std::move(members)}};
}

inline Ensemble ensemble_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "malfeed-model" || j.at("version") != 1) throw DomainError("not a malfeed model file");
    const auto& order = j.at("class_order");
    if (order.size() != kNumClasses) throw DomainError("model class order mismatch");
    for (std::size_t c = 0; c < kNumClasses; ++c)
      if (order[c] != to_string(kAllClasses[c])) throw DomainError("model class order mismatch");
    Ensemble e;
    e.vocabulary.countries = j.at("vocabulary").at("country").get<std::vector<std::string>>();
    e.vocabulary.organizations = j.at("vocabulary").at("organization").get<std::vector<std::string>>();
    for (const auto& m : j.at("members")) e.members.push_back(DecisionTree::from_json(m));
    if (e.members.empty()) throw DomainError("model has no members");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw DomainError(std::string("malformed model file: ") + ex.what());
  }
}

}  // namespace malfeed
