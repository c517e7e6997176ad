#include <gtest/gtest.h>

#include <random>

#include "malfeed/labeler.hpp"
#include "support.hpp"

using namespace malfeed;
using malfeed::test::make_report;

namespace {

std::vector<LabeledExample> examples(std::size_t per_class, std::initializer_list<ActivityClass> classes) {
  std::vector<LabeledExample> out;
  for (auto c : classes)
    for (std::size_t i = 0; i < per_class; ++i)
      out.push_back({encode(make_report(1'400'000'000 + 1000 * static_cast<std::int64_t>(i),
                                        std::to_string(10 + index_of(c)) + ".0.0." + std::to_string(i % 250)),
                            {}),
                     c});
  return out;
}

/// Constant-output learner for voting tests.
class Fixed final : public Learner {
 public:
  explicit Fixed(ClassProbabilities p) : p_(p) {}
  void fit(std::span<const LabeledExample>) override {}
  ClassProbabilities predict_proba(const FeatureVector&) const override { return p_; }
  nlohmann::json to_json() const override { return {}; }

 private:
  ClassProbabilities p_;
};

class Failing final : public Learner {
 public:
  void fit(std::span<const LabeledExample>) override { throw DomainError("cannot fit"); }
  ClassProbabilities predict_proba(const FeatureVector&) const override { return {}; }
  nlohmann::json to_json() const override { return {}; }
};

}  // namespace

TEST(Encode, OctetsAndDate) {
  auto f = encode(make_report(*parse_timestamp("2017-01-10"), "192.168.1.5"), {});
  EXPECT_EQ(f.octets, (std::array<std::uint8_t, 4>{192, 168, 1, 5}));
  EXPECT_EQ(f.day, 10);
  EXPECT_EQ(f.month, 1);
  EXPECT_EQ(f.year, 2017);
  EXPECT_EQ(f.asn, 0u);
  EXPECT_EQ(f.width(), FeatureVector::kNumericFeatures);
}

TEST(Encode, OneHotAndOutOfVocabulary) {
  Vocabulary v{{"CN", "DE", "US"}, {}};
  auto r = make_report(1, "1.2.3.4");
  r.country = CountryCode::parse("US");
  EXPECT_EQ(encode(r, v).country_onehot, (std::vector<std::uint8_t>{0, 0, 1}));
  r.country = CountryCode::parse("BR");
  EXPECT_EQ(encode(r, v).country_onehot, (std::vector<std::uint8_t>{0, 0, 0}));
}

TEST(Encode, VocabularySortedUnique) {
  std::vector<Report> rs(3, make_report(1, "1.1.1.1"));
  rs[0].country = CountryCode::parse("US");
  rs[1].country = CountryCode::parse("CN");
  rs[2].country = CountryCode::parse("US");
  rs[0].organization = "Acme";
  EXPECT_EQ(Vocabulary::build(rs).countries, (std::vector<std::string>{"CN", "US"}));
  EXPECT_EQ(Vocabulary::build(rs).organizations, (std::vector<std::string>{"Acme"}));
}

TEST(Encode, InjectiveWithinVocabulary) {
  std::mt19937_64 rng(81);
  Vocabulary v{{"CN", "DE", "US"}, {"a", "b"}};
  std::uniform_int_distribution<std::uint32_t> ip(0, 50);
  std::uniform_int_distribution<int> day(0, 40), pick(0, 3);
  std::map<std::vector<double>, std::tuple<std::int64_t, std::uint32_t, std::uint32_t, int, int>> seen;
  for (int i = 0; i < 3000; ++i) {
    Report r;
    r.timestamp = (17000 + day(rng)) * kSecondsPerDay;
    r.ip = Ipv4{0x0A000000u + ip(rng)};
    const auto asn = static_cast<std::uint32_t>(pick(rng));
    if (asn) r.asn = asn;
    const int cc = pick(rng), org = pick(rng) % 3;
    if (cc < 3) r.country = CountryCode::parse(v.countries[cc]);
    if (org < 2) r.organization = v.organizations[org];
    const auto key = std::make_tuple(day_index(r.timestamp), r.ip.value, asn, cc, org);
    auto [it, fresh] = seen.emplace(encode(r, v).flatten(), key);
    if (!fresh) ASSERT_EQ(it->second, key);
  }
}

TEST(Split, FortyPercentPerClass) {
  auto ex = examples(10, {ActivityClass::Malware, ActivityClass::Phishing});
  auto [train, test] = stratified_split<LabeledExample>(ex, 0.4, 1);
  EXPECT_EQ(std::count_if(train.begin(), train.end(), [](auto& e) { return e.label == ActivityClass::Malware; }), 4);
  EXPECT_EQ(std::count_if(train.begin(), train.end(), [](auto& e) { return e.label == ActivityClass::Phishing; }), 4);
  EXPECT_EQ(test.size(), 12u);
}

TEST(Split, FullFractionLeavesTestEmpty) {
  auto ex = examples(5, {ActivityClass::Malware});
  auto [train, test] = stratified_split<LabeledExample>(ex, 1.0, 1);
  EXPECT_EQ(train.size(), 5u);
  EXPECT_TRUE(test.empty());
  EXPECT_THROW(stratified_split<LabeledExample>(ex, 1.5, 1), DomainError);
  EXPECT_THROW(stratified_split<LabeledExample>({}, 0.5, 1), DomainError);
}

TEST(Split, DeterministicPartition) {
  auto ex = examples(50, {ActivityClass::Malware, ActivityClass::PUP, ActivityClass::Exploits});
  auto a = stratified_split<LabeledExample>(ex, 0.4, 7);
  auto b = stratified_split<LabeledExample>(ex, 0.4, 7);
  auto c = stratified_split<LabeledExample>(ex, 0.4, 8);
  auto flat = [](const auto& v) {
    std::vector<std::vector<double>> out;
    for (const auto& e : v) out.push_back(e.features.flatten());
    return out;
  };
  EXPECT_EQ(flat(a.first), flat(b.first));
  EXPECT_NE(flat(a.first), flat(c.first));
  // partition: sizes add up and every example lands on exactly one side
  EXPECT_EQ(a.first.size() + a.second.size(), ex.size());
  auto all = flat(a.first);
  auto rest = flat(a.second);
  all.insert(all.end(), rest.begin(), rest.end());
  auto orig = flat(ex);
  std::sort(all.begin(), all.end());
  std::sort(orig.begin(), orig.end());
  EXPECT_EQ(all, orig);
}

TEST(Tree, SingleClassPredictsWithCertainty) {
  auto ex = examples(20, {ActivityClass::Spammers});
  auto ens = train_ensemble(ex, {}, decision_tree_factory(), 1, 3);
  for (const auto& e : ex) {
    auto [c, p] = soft_vote(ens, e.features);
    EXPECT_EQ(c, ActivityClass::Spammers);
    EXPECT_EQ(p, 1.0);
  }
}

TEST(Tree, SeparableParityFitsTrainingSet) {
  std::vector<LabeledExample> ex;
  for (int i = 0; i < 200; ++i) {
    const int o0 = 1 + i % 40;
    ex.push_back({encode(make_report(1'400'000'000, std::to_string(o0) + ".1.2.3"), {}),
                  o0 % 2 ? ActivityClass::Malware : ActivityClass::Phishing});
  }
  DecisionTree tree{DecisionTree::Options{64, 2}};
  tree.fit(ex);
  for (const auto& e : ex) {
    const auto p = tree.predict_proba(e.features);
    EXPECT_EQ(p[index_of(e.label)], 1.0);
  }
}

TEST(Tree, JsonRoundTrip) {
  auto ex = examples(30, {ActivityClass::Malware, ActivityClass::Exploits, ActivityClass::PUP});
  DecisionTree tree;
  tree.fit(ex);
  auto back = DecisionTree::from_json(tree.to_json());
  EXPECT_EQ(back->node_count(), tree.node_count());
  for (const auto& e : ex) EXPECT_EQ(back->predict_proba(e.features), tree.predict_proba(e.features));
}

TEST(SoftVote, HandAverage) {
  std::vector<ClassProbabilities> votes{{0.6, 0.3, 0.1}, {0.2, 0.6, 0.2}};
  auto [c, p] = soft_vote(votes);
  EXPECT_EQ(c, kAllClasses[1]);
  EXPECT_NEAR(p, 0.45, 1e-12);
}

TEST(SoftVote, IdenticalMembersAndTie) {
  std::vector<ClassProbabilities> same(4, ClassProbabilities{0.1, 0.2, 0.7});
  EXPECT_EQ(soft_vote(same).first, kAllClasses[2]);
  std::vector<ClassProbabilities> tie{{0.5, 0.5}};
  EXPECT_EQ(soft_vote(tie).first, kAllClasses[0]);
  EXPECT_THROW(soft_vote(std::vector<ClassProbabilities>{}), DomainError);
}

TEST(SoftVote, MemberOrderInvariantAndNormalized) {
  std::mt19937_64 rng(83);
  std::gamma_distribution<double> g(1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<ClassProbabilities> votes(1 + trial % 9);
    for (auto& v : votes) {
      double s = 0;
      for (auto& x : v) s += (x = g(rng));
      for (auto& x : v) x /= s;
    }
    const auto base = soft_vote(votes);
    const auto avg = detail::mean_vote(votes);
    ASSERT_NEAR(std::accumulate(avg.begin(), avg.end(), 0.0), 1.0, 1e-9);
    for (int k = 0; k < 5; ++k) {
      std::shuffle(votes.begin(), votes.end(), rng);
      ASSERT_EQ(soft_vote(votes), base);
      ASSERT_EQ(detail::mean_vote(votes), avg);
    }
  }
}

TEST(Ensemble, IdenticalMembersEqualSingleMember) {
  auto ex = examples(40, {ActivityClass::Malware, ActivityClass::Phishing, ActivityClass::PUP});
  DecisionTree single;
  single.fit(ex);
  const auto model = single.to_json();
  Ensemble five;
  for (int i = 0; i < 5; ++i) five.members.push_back(DecisionTree::from_json(model));
  for (const auto& e : ex) {
    const auto p = single.predict_proba(e.features);
    EXPECT_EQ(average_probabilities(five, e.features), p);
    const std::vector<ClassProbabilities> one{p};
    EXPECT_EQ(soft_vote(five, e.features), soft_vote(one));
  }
}

TEST(Ensemble, ThreadCountDoesNotMatter) {
  auto ex = examples(60, {ActivityClass::Malware, ActivityClass::Phishing, ActivityClass::Exploits});
  const auto a = to_json(train_ensemble(ex, {}, decision_tree_factory({4, 2}), 5, 9, 1));
  const auto b = to_json(train_ensemble(ex, {}, decision_tree_factory({4, 2}), 5, 9, 4));
  EXPECT_EQ(a, b);
}

TEST(Ensemble, FailingMemberIsNamed) {
  auto ex = examples(5, {ActivityClass::Malware});
  int calls = 0;
  LearnerFactory f = [&](std::uint64_t) -> std::unique_ptr<Learner> {
    if (calls++ == 2) return std::make_unique<Failing>();
    return std::make_unique<Fixed>(ClassProbabilities{1});
  };
  try {
    train_ensemble(ex, {}, f, 4, 1, 1);
    FAIL() << "expected LearnerError";
  } catch (const LearnerError& e) {
    EXPECT_EQ(e.member(), 2u);
  }
}

TEST(Ensemble, ModelJsonRoundTrip) {
  auto ex = examples(30, {ActivityClass::Malware, ActivityClass::Phishing});
  const auto ens = train_ensemble(ex, Vocabulary{{"US"}, {"org"}}, decision_tree_factory(), 3, 5, 2);
  const auto j = to_json(ens);
  EXPECT_EQ(j.at("format"), "malfeed-model");
  const auto back = ensemble_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.vocabulary, ens.vocabulary);
  for (const auto& e : ex) EXPECT_EQ(soft_vote(back, e.features), soft_vote(ens, e.features));
  EXPECT_THROW(ensemble_from_json(nlohmann::json{{"format", "other"}}), DomainError);
}

TEST(WeightedAccuracy, Examples) {
  EXPECT_EQ(weighted_accuracy({{ActivityClass::Malware, 1.0}, {ActivityClass::Phishing, 0.0}},
                              {{ActivityClass::Malware, 1}, {ActivityClass::Phishing, 1}}),
            0.5);
  std::mt19937_64 rng(89);
  std::uniform_int_distribution<std::uint64_t> n(1, 100000);
  for (double a : {0.0, 0.25, 0.9}) {
    std::map<ActivityClass, double> acc;
    std::map<ActivityClass, std::uint64_t> counts;
    for (auto c : kAllClasses) {
      acc[c] = a;
      counts[c] = n(rng);
    }
    EXPECT_NEAR(weighted_accuracy(acc, counts), a, 1e-15);
  }
  EXPECT_THROW(weighted_accuracy({{ActivityClass::Malware, 1.0}}, {{ActivityClass::PUP, 1}}), DomainError);
}

TEST(Evaluate, SeparableCorpus) {
  auto ex = examples(100, {ActivityClass::Malware, ActivityClass::Phishing, ActivityClass::Exploits});
  auto [train, test] = stratified_split<LabeledExample>(ex, 0.4, 2);
  const auto ens = train_ensemble(train, {}, decision_tree_factory(), 5, 2);
  const auto ev = evaluate(ens, test);
  EXPECT_EQ(ev.weighted, 1.0);
  EXPECT_EQ(ev.counts.at(ActivityClass::Malware), 60u);
}
