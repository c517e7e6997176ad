#include <gtest/gtest.h>

#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "support.hpp"

using malfeed::cli::run;
using malfeed::test::slurp;
using malfeed::test::TempDir;

namespace {

/// Runs the CLI with standard output captured.
std::pair<int, std::string> capture(const std::vector<std::string>& args) {
  std::ostringstream out;
  auto* old = std::cout.rdbuf(out.rdbuf());
  const int rc = run(args);
  std::cout.rdbuf(old);
  return {rc, out.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    ASSERT_EQ(run({"simulate", "--hosts", "120", "--horizon", "40", "--rate", "1.5", "--seed", "4", "--out",
                   dir.file("sim.csv"), "--truth", dir.file("truth.csv"), "--asn-map-out", dir.file("asn.csv"),
                   "--geo-map-out", dir.file("geo.csv")}),
              0);
  }
  std::string sim() const { return dir.file("sim.csv"); }
  TempDir dir{"cli"};
};

}  // namespace

TEST_F(Cli, UnknownSubcommandIsUsageError) {
  EXPECT_EQ(run({"frobnicate"}), 2);
  EXPECT_EQ(run({}), 2);
  EXPECT_EQ(run({"churn", "--no-such-flag"}), 2);
  EXPECT_EQ(run({"rank", "--in", sim(), "--by", "speed"}), 2);
  EXPECT_EQ(run({"entropy", "--in", sim(), "--metric", "stability", "--level", "galaxy"}), 2);
}

TEST_F(Cli, DataErrorsExitOne) {
  EXPECT_EQ(run({"churn", "--in", dir.file("missing.csv")}), 1);
  const auto bad = dir.write("bad.csv", "timestamp,ip\n100,999.1.1.1\n");
  EXPECT_EQ(run({"ingest", "--strict", "--in", bad, "--out", dir.file("o.csv")}), 1);
  EXPECT_EQ(run({"ingest", "--in", bad, "--out", dir.file("o.csv")}), 0);
  EXPECT_EQ(run({"label", "predict", "--model", dir.file("nope.json"), "--in", sim()}), 1);
}

TEST_F(Cli, SimulateThenChurnIsDeterministic) {
  ASSERT_EQ(run({"churn", "--in", sim(), "--out", dir.file("a.csv")}), 0);
  ASSERT_EQ(run({"simulate", "--hosts", "120", "--horizon", "40", "--rate", "1.5", "--seed", "4", "--out",
                 dir.file("sim2.csv")}),
            0);
  ASSERT_EQ(run({"churn", "--in", dir.file("sim2.csv"), "--out", dir.file("b.csv"), "--threads", "3"}), 0);
  EXPECT_EQ(slurp(sim()), slurp(dir.file("sim2.csv")));
  EXPECT_EQ(slurp(dir.file("a.csv")), slurp(dir.file("b.csv")));
  // the estimator reads back the generator's truth exactly
  EXPECT_EQ(slurp(dir.file("a.csv")), slurp(dir.file("truth.csv")));
}

TEST_F(Cli, EverySubcommandWritesHeaderToStdout) {
  const std::vector<std::vector<std::string>> cmds{
      {"ingest", "--in", sim()},
      {"enrich", "--in", sim(), "--asn-map", dir.file("asn.csv")},
      {"entropy", "--in", sim(), "--metric", "specialization"},
      {"churn", "--in", sim()},
      {"survival", "--in", sim()},
      {"evolution", "--in", sim()},
      {"rank", "--in", sim(), "--by", "volume"},
      {"label", "eval", "--in", sim()},
  };
  for (auto args : cmds) {
    args.insert(args.end(), {"--out", "-"});
    auto [rc, out] = capture(args);
    EXPECT_EQ(rc, 0) << args[0];
    EXPECT_FALSE(out.empty()) << args[0];
    EXPECT_TRUE(std::isalpha(static_cast<unsigned char>(out[0]))) << args[0];
  }
  auto [rc, out] = capture({"report", "--in", sim(), "--out", "-"});
  EXPECT_EQ(rc, 0);
  const auto text = slurp(sim());
  EXPECT_EQ(nlohmann::json::parse(out)["reports"].get<std::size_t>() + 1,
            static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
}

TEST_F(Cli, ReportOnHandCorpus) {
  const auto corpus = dir.write("hand.csv",
                                "timestamp,ip,activity,source,asn,country\n"
                                "1209600000,1.1.1.1,malware,a,AS10,US\n"
                                "1210204800,1.1.1.1,malware,a,AS10,US\n"
                                "1209600005,1.1.1.2,phishing,b,AS10,US\n"
                                "1209600005,1.1.1.2,phishing,b,AS10,US\n"
                                "1211414400,2.2.2.2,phishing,b,AS20,US\n"
                                "1211414409,3.3.3.3,pup,a,,\n"
                                "1212019200,3.3.3.4,,a,,\n");
  ASSERT_EQ(run({"report", "--in", corpus, "--out", dir.file("r.json")}), 0);
  const auto doc = nlohmann::json::parse(slurp(dir.file("r.json")));
  EXPECT_EQ(doc["reports"], 6);
  EXPECT_EQ(doc["labeled"], 5);
  EXPECT_EQ(doc["classes"][0]["reports"], 2);
  EXPECT_EQ(doc["classes"][1]["reports"], 2);
  EXPECT_EQ(doc["classes"][5]["reports"], 1);
  EXPECT_EQ(doc["classes"][6]["ips"], 5);
  EXPECT_EQ(doc["classes"][6]["asns"], 2);
  EXPECT_EQ(doc["classes"][6]["countries"], 1);
}

TEST_F(Cli, ThreadCountDoesNotChangeOutputs) {
  for (const std::vector<std::string> base :
       {std::vector<std::string>{"report", "--in", sim(), "--asn-map", dir.file("asn.csv")},
        std::vector<std::string>{"rank", "--in", sim(), "--by", "severity", "--level", "ip"},
        std::vector<std::string>{"label", "train", "--in", sim(), "--members", "3"}}) {
    auto one = base, eight = base;
    one.insert(one.end(), {"--threads", "1", "--out", dir.file("one")});
    eight.insert(eight.end(), {"--threads", "8", "--out", dir.file("eight")});
    ASSERT_EQ(run(one), 0);
    ASSERT_EQ(run(eight), 0);
    EXPECT_EQ(slurp(dir.file("one")), slurp(dir.file("eight"))) << base[0];
  }
}

TEST_F(Cli, LabelTrainPredictRoundTrip) {
  ASSERT_EQ(run({"label", "train", "--in", sim(), "--out", dir.file("m.json"), "--members", "3", "--seed", "2"}), 0);
  ASSERT_EQ(run({"label", "predict", "--model", dir.file("m.json"), "--in", sim(), "--out", dir.file("p.csv")}), 0);
  const auto out = slurp(dir.file("p.csv"));
  EXPECT_EQ(out.substr(0, out.find('\n')),
            "timestamp,ip,url,activity,source,av_positives,av_total,asn,country,organization,predicted_class,confidence");
  const auto text = slurp(sim());
  EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), std::count(text.begin(), text.end(), '\n'));
  ASSERT_EQ(run({"label", "eval", "--model", dir.file("m.json"), "--in", sim(), "--out", dir.file("e.csv")}), 0);
  EXPECT_NE(slurp(dir.file("e.csv")).find("weighted,"), std::string::npos);
}

TEST_F(Cli, ChurnTopAndCdf) {
  ASSERT_EQ(run({"churn", "--in", sim(), "--top", "5", "--by", "deathtime", "--out", dir.file("t.csv"), "--cdf",
                 dir.file("cdf.csv")}),
            0);
  const auto top = slurp(dir.file("t.csv"));
  EXPECT_EQ(std::count(top.begin(), top.end(), '\n'), 6);
  EXPECT_NE(slurp(dir.file("cdf.csv")).find("roa,"), std::string::npos);
}

TEST_F(Cli, SurvivalWindowOverride) {
  ASSERT_EQ(run({"survival", "--in", sim(), "--out", dir.file("s1.csv")}), 0);
  ASSERT_EQ(run({"survival", "--in", sim(), "--window", "sim=2030-01-01", "--out", dir.file("s2.csv")}), 0);
  EXPECT_NE(slurp(dir.file("s1.csv")), slurp(dir.file("s2.csv")));
  EXPECT_EQ(run({"survival", "--in", sim(), "--window", "sim"}), 2);
}
