#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "malfeed/malfeed.hpp"

namespace malfeed::cli {
namespace {

/// Usage problems detected after CLI11 parsing (bad enum values, missing flags).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "-" is standard output; anything else is a file truncated on open.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path == "-") return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*file_) throw IoError("cannot open '" + path + "' for writing");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }
  void close() {
    stream().flush();
    if (file_) {
      file_->close();
      if (file_->fail()) throw IoError("write failure");
    }
  }

 private:
  std::unique_ptr<std::ofstream> file_;
};

struct InputOptions {
  std::vector<std::string> paths{"-"};
  std::string format = "auto";
  bool strict = false;
  std::string asn_map;
  std::string geo_map;
  std::size_t threads = 0;
};

struct LoadedTables {
  std::optional<SnapshotTable> asn, geo;
  EnrichTables view() const { return {asn ? &*asn : nullptr, geo ? &*geo : nullptr}; }
};

void add_input_options(CLI::App* cmd, InputOptions& in, bool with_maps = true) {
  cmd->add_option("--in", in.paths, "Input file(s); '-' reads standard input")->capture_default_str();
  cmd->add_option("--format", in.format, "Input format: auto, csv or jsonl")->capture_default_str();
  cmd->add_flag("--strict", in.strict, "Abort on the first malformed row (default: skip and count)");
  if (with_maps) {
    cmd->add_option("--asn-map", in.asn_map, "Snapshot CSV mapping prefixes to ASNs");
    cmd->add_option("--geo-map", in.geo_map, "Snapshot CSV mapping prefixes to country codes");
  }
  cmd->add_option("--threads", in.threads, "Worker threads (default: MALFEED_THREADS or all cores)");
}

std::vector<FormatSpec> formats_of(const InputOptions& in) {
  if (in.format == "auto") return {FormatSpec{}};
  if (in.format == "csv") return {FormatSpec::csv()};
  if (in.format == "jsonl") return {FormatSpec::json_lines()};
  throw UsageError("unknown --format '" + in.format + "'");
}

IngestOptions ingest_options(const InputOptions& in) {
  return {in.strict ? ParseMode::Strict : ParseMode::Lenient, in.threads};
}

LoadedTables load_tables(const InputOptions& in) {
  LoadedTables t;
  if (!in.asn_map.empty()) t.asn.emplace(SnapshotTable::load_csv(in.asn_map));
  if (!in.geo_map.empty()) t.geo.emplace(SnapshotTable::load_csv(in.geo_map));
  return t;
}

void report_ingest(const IngestStats& stats, const char* command) {
  if (stats.bad_rows > 0 || stats.duplicates > 0)
    std::cerr << "malfeed " << command << ": " << stats.rows << " rows, " << stats.bad_rows
              << " malformed rows skipped, " << stats.duplicates << " duplicates dropped\n";
}

/// Enriches each report (when tables are loaded) before handing it on.
template <typename Inner>
struct EnrichingSink {
  EnrichTables tables;
  Inner& inner;
  Report scratch;

  void add(const Report& r) {
    if (!tables.any()) {
      inner.add(r);
      return;
    }
    scratch = r;
    enrich_report(scratch, tables);
    inner.add(scratch);
  }
  void reset() { inner.reset(); }
};

/// Streams, deduplicates and enriches every input into `sink`.
template <typename Sink>
void stream_into(const InputOptions& in, Sink& sink, const char* command) {
  const auto tables = load_tables(in);
  EnrichingSink<Sink> wrapped{tables.view(), sink, {}};
  report_ingest(stream_reports(in.paths, formats_of(in), ingest_options(in), wrapped), command);
}

/// Row-by-row pass over the inputs without deduplication.
template <typename Fn>
IngestStats for_each_row(const InputOptions& in, Fn&& fn) {
  const auto formats = formats_of(in);
  IngestStats total;
  Report r;
  for (const auto& path : in.paths) {
    ReportReader reader(path, formats.front(), ingest_options(in).mode);
    while (reader.next(r)) fn(r);
    total.rows += reader.stats().rows;
    total.bad_rows += reader.stats().bad_rows;
  }
  return total;
}

HostLevel level_of(const std::string& s) {
  if (auto l = parse_level(s)) return *l;
  throw UsageError("unknown --level '" + s + "' (expected ip, asn or cc)");
}

std::optional<ActivityClass> class_of(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (auto c = parse_activity(s)) return c;
  throw UsageError("unknown --class '" + s + "'");
}

std::string opt_num(const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); }

void write_churn_header(std::ostream& out) {
  out << "key,mean_lifetime,mean_deathtime,rate_of_arrival,severity,n_cycles\n";
}

void write_churn_row(std::ostream& out, const HostKey& key, const ChurnSummary& s) {
  out << key.to_string() << ',' << csv::format_double(s.mean_lifetime) << ',' << opt_num(s.mean_deathtime) << ','
      << opt_num(s.rate_of_arrival) << ',' << csv::format_double(s.severity) << ',' << s.n_cycles << '\n';
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct IngestCmd {
  InputOptions in;
  std::string out = "-";

  void run() {
    IngestStats stats;
    const auto store = build_store(in.paths, formats_of(in), ingest_options(in), &stats);
    report_ingest(stats, "ingest");
    Output o(out);
    write_store_csv(o.stream(), store);
    o.close();
  }
};

struct EnrichCmd {
  InputOptions in;
  std::string out = "-";

  void run() {
    if (in.asn_map.empty() && in.geo_map.empty()) throw UsageError("enrich needs --asn-map and/or --geo-map");
    const auto tables = load_tables(in);
    const auto view = tables.view();
    Output o(out);
    auto& os = o.stream();
    write_canonical_header(os);
    std::size_t unmapped = 0;
    Report copy;
    const auto stats = for_each_row(in, [&](const Report& r) {
      copy = r;
      enrich_report(copy, view);
      unmapped += copy.unmapped;
      write_canonical_row(os, copy);
    });
    o.close();
    report_ingest(stats, "enrich");
    if (unmapped) std::cerr << "malfeed enrich: " << unmapped << " reports unmapped\n";
  }
};

struct EntropyCmd {
  InputOptions in;
  std::string metric;
  std::string level = "ip";
  std::string activity;
  std::string out = "-";

  void run() {
    const auto lvl = level_of(level);
    const auto only = class_of(activity);
    if (metric != "specialization" && metric != "affinity" && metric != "stability")
      throw UsageError("unknown --metric '" + metric + "'");
    ProfileBuilder builder(lvl, only);
    stream_into(in, builder, "entropy");
    const auto profiles = std::move(builder).finish();
    Output o(out);
    auto& os = o.stream();
    os << "key,value,k,total\n";
    auto row = [&](const std::string& key, const EntropyValue& e) {
      os << key << ',' << csv::format_double(e.value) << ',' << e.k << ',' << e.total << '\n';
    };
    if (metric == "affinity") {
      for (const auto& a : affinity_by_class(profiles)) row(std::string(to_string(a.activity)), a.entropy);
    } else {
      const auto values = metric == "stability" ? stability_by_host(profiles) : specialization_by_host(profiles);
      for (const auto& v : values) row(v.key.to_string(), v.entropy);
    }
    o.close();
  }
};

struct ChurnCmd {
  InputOptions in;
  std::string level = "ip";
  std::string activity;
  std::string out = "-";
  std::size_t top = 0;
  std::string by = "lifetime";
  std::string cdf;

  void run() {
    const auto lvl = level_of(level);
    ProfileBuilder builder(lvl, class_of(activity));
    stream_into(in, builder, "churn");
    const auto table = churn_table(std::move(builder).finish(), in.threads);

    Output o(out);
    auto& os = o.stream();
    write_churn_header(os);
    if (top > 0) {
      const auto metric = parse_rank_metric(by);
      if (!metric || *metric == RankMetric::Volume) throw UsageError("unknown --by '" + by + "'");
      std::map<HostKey, const ChurnSummary*> lookup;
      for (const auto& [k, s] : table) lookup[k] = &s;
      for (const auto& row : rank_top_k(metric_rows(table, *metric), default_order(*metric), top))
        write_churn_row(os, row.key, *lookup.at(row.key));
    } else {
      for (const auto& [k, s] : table) write_churn_row(os, k, s);
    }
    o.close();

    if (!cdf.empty()) {
      Output c(cdf);
      c.stream() << "metric,value,cdf\n";
      for (auto m : {RankMetric::Lifetime, RankMetric::Deathtime, RankMetric::RateOfArrival, RankMetric::Severity}) {
        std::vector<double> values;
        for (const auto& r : metric_rows(table, m)) values.push_back(r.value);
        for (const auto& p : ecdf(values))
          c.stream() << to_string(m) << ',' << csv::format_double(p.value) << ',' << csv::format_double(p.cdf) << '\n';
      }
      c.close();
    }
  }
};

struct SurvivalCmd {
  InputOptions in;
  std::string level = "ip";
  std::string activity;
  double confidence = 0.95;
  std::vector<std::string> windows;
  std::string out = "-";

  void run() {
    SourceWindows end_of_window;
    for (const auto& w : windows) {
      const auto eq = w.rfind('=');
      std::optional<std::int64_t> ts;
      if (eq != std::string::npos) ts = parse_timestamp(w.substr(eq + 1));
      if (!ts) throw UsageError("--window expects SOURCE=TIMESTAMP, got '" + w + "'");
      end_of_window[w.substr(0, eq)] = *ts;
    }
    if (!(confidence > 0.0 && confidence < 1.0)) throw UsageError("--confidence must lie in (0,1)");
    ProfileBuilder builder(level_of(level), class_of(activity));
    stream_into(in, builder, "survival");
    const auto samples = durations_from_profiles(std::move(builder).finish(), end_of_window);
    if (samples.empty()) throw DomainError("no hosts to estimate survival for");
    const auto curve = km_estimate(samples, confidence);
    Output o(out);
    auto& os = o.stream();
    os << "t,survival,ci_low,ci_high,at_risk,deaths\n";
    for (const auto& s : curve.steps)
      os << csv::format_double(s.t) << ',' << csv::format_double(s.survival) << ',' << csv::format_double(s.ci_low)
         << ',' << csv::format_double(s.ci_high) << ',' << s.at_risk << ',' << s.deaths << '\n';
    o.close();
  }
};

struct EvolutionCmd {
  InputOptions in;
  std::string granularity = "week";
  std::string out = "-";

  void run() {
    const auto g = parse_granularity(granularity);
    if (!g) throw UsageError("unknown --granularity '" + granularity + "'");
    EvolutionBuilder builder(*g);
    stream_into(in, builder, "evolution");
    const auto series = builder.finish();
    Output o(out);
    auto& os = o.stream();
    os << "bin,bin_start";
    for (auto c : kAllClasses) os << ',' << to_string(c);
    os << ",total";
    for (auto c : kAllClasses) os << ',' << to_string(c) << "_share";
    os << '\n';
    for (const auto& p : series.points) {
      os << p.bin << ',' << format_date(bin_start(p.bin, *g));
      for (auto n : p.counts) os << ',' << n;
      os << ',' << p.total();
      for (auto share : p.proportions()) os << ',' << csv::format_double(share);
      os << '\n';
    }
    o.close();
  }
};

struct RankCmd {
  InputOptions in;
  std::string by = "lifetime";
  std::string level = "ip";
  std::string activity;
  std::size_t top = 10;
  std::string out = "-";

  void run() {
    const auto metric = parse_rank_metric(by);
    if (!metric) throw UsageError("unknown --by '" + by + "'");
    ProfileBuilder builder(level_of(level), class_of(activity));
    stream_into(in, builder, "rank");
    const auto rows =
        rank_top_k(metric_rows(std::move(builder).finish(), *metric, in.threads), default_order(*metric), top);
    Output o(out);
    auto& os = o.stream();
    os << "rank,key," << to_string(*metric) << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i)
      os << i + 1 << ',' << rows[i].key.to_string() << ',' << csv::format_double(rows[i].value) << '\n';
    o.close();
  }
};

// -- labeler ------------------------------------------------------------------

std::vector<Report> labeled_reports(const ReportStore& store) {
  std::vector<Report> out;
  for (const auto& r : store)
    if (r.activity) out.push_back(r);
  if (out.empty()) throw DomainError("no labeled reports in input");
  return out;
}

ReportStore load_enriched(const InputOptions& in, const char* command) {
  IngestStats stats;
  auto store = build_store(in.paths, formats_of(in), ingest_options(in), &stats);
  report_ingest(stats, command);
  const auto tables = load_tables(in);
  return tables.view().any() ? enrich_store(store, tables.view()) : store;
}

std::vector<LabeledExample> encode_all(std::span<const Report> reports, const Vocabulary& vocab) {
  std::vector<LabeledExample> out;
  out.reserve(reports.size());
  for (const auto& r : reports) out.push_back({encode(r, vocab), *r.activity});
  return out;
}

void write_evaluation(std::ostream& os, const Evaluation& ev) {
  os << "class,accuracy,count\n";
  for (const auto& [c, acc] : ev.accuracy) os << to_string(c) << ',' << csv::format_double(acc) << ',' << ev.counts.at(c) << '\n';
  std::uint64_t n = 0;
  for (const auto& [c, k] : ev.counts) n += k;
  os << "weighted," << csv::format_double(ev.weighted) << ',' << n << '\n';
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError("malformed JSON in '" + path + "': " + e.what());
  }
}

struct LabelTrainCmd {
  InputOptions in;
  std::string out = "model.json";
  std::size_t members = 5;
  std::uint64_t seed = 1;
  std::size_t max_depth = 16;

  void run() {
    const auto store = load_enriched(in, "label train");
    const auto reports = labeled_reports(store);
    auto vocab = Vocabulary::build(reports);
    const auto examples = encode_all(reports, vocab);
    const auto ensemble = train_ensemble(examples, std::move(vocab), decision_tree_factory({max_depth, 2}), members,
                                         seed, in.threads);
    Output o(out);
    o.stream() << to_json(ensemble).dump(1) << '\n';
    o.close();
  }
};

struct LabelPredictCmd {
  InputOptions in;
  std::string model;
  std::string out = "-";

  void run() {
    const auto ensemble = ensemble_from_json(read_json(model));
    const auto tables = load_tables(in);
    const auto view = tables.view();
    Output o(out);
    auto& os = o.stream();
    for (auto c : kCanonicalColumns) os << to_string(c) << ',';
    os << "predicted_class,confidence\n";
    Report copy;
    const auto stats = for_each_row(in, [&](const Report& r) {
      copy = r;
      if (view.any()) enrich_report(copy, view);
      const auto [label, p] = soft_vote(ensemble, encode(copy, ensemble.vocabulary));
      write_canonical_fields(os, copy);
      os << ',' << to_string(label) << ',' << csv::format_double(p) << '\n';
    });
    o.close();
    report_ingest(stats, "label predict");
  }
};

struct LabelEvalCmd {
  InputOptions in;
  std::string model;
  double train_fraction = 0.4;
  std::size_t members = 5;
  std::uint64_t seed = 1;
  std::size_t max_depth = 16;
  std::string out = "-";

  void run() {
    const auto store = load_enriched(in, "label eval");
    const auto reports = labeled_reports(store);
    Evaluation ev;
    if (!model.empty()) {
      const auto ensemble = ensemble_from_json(read_json(model));
      ev = evaluate(ensemble, encode_all(reports, ensemble.vocabulary));
    } else {
      auto [train, test] = stratified_split<Report>(reports, train_fraction, seed);
      if (train.empty() || test.empty()) throw DomainError("split left an empty train or test set");
      auto vocab = Vocabulary::build(train);
      const auto train_ex = encode_all(train, vocab);
      const auto test_ex = encode_all(test, vocab);
      const auto ensemble = train_ensemble(train_ex, std::move(vocab), decision_tree_factory({max_depth, 2}), members,
                                           seed, in.threads);
      ev = evaluate(ensemble, test_ex);
    }
    Output o(out);
    write_evaluation(o.stream(), ev);
    o.close();
  }
};

// -- simulate -----------------------------------------------------------------

struct SimulateCmd {
  SimParams params;
  std::string class_mix;
  std::string out = "-";
  std::string truth;
  std::string asn_map_out;
  std::string geo_map_out;

  void run() {
    if (!class_mix.empty()) {
      std::vector<std::string> parts;
      csv::split_line(class_mix, parts);
      if (parts.size() != kNumClasses) throw UsageError("--class-mix needs 6 comma-separated weights");
      for (std::size_t i = 0; i < kNumClasses; ++i) {
        try {
          params.class_mix[i] = std::stod(parts[i]);
        } catch (const std::exception&) {
          throw UsageError("--class-mix: invalid weight '" + parts[i] + "'");
        }
      }
    }
    Output o(out);
    auto& os = o.stream();
    write_canonical_header(os);
    const auto hosts = simulate_stream(params, [&](const Report& r) { write_canonical_row(os, r); });
    o.close();

    if (!truth.empty()) {
      Output t(truth);
      write_churn_header(t.stream());
      for (const auto& h : hosts) write_churn_row(t.stream(), HostKey::ip(h.ip), summarize(h.cycles));
      t.close();
    }
    auto write_table = [&](const std::string& path, const std::vector<SnapshotTable::Entry>& entries) {
      if (path.empty()) return;
      Output m(path);
      m.stream() << "snapshot_date,prefix,value\n";
      for (const auto& e : entries) m.stream() << e.snapshot_date << ',' << e.prefix.to_string() << ',' << e.value << '\n';
      m.close();
    };
    write_table(asn_map_out, sim_asn_entries(params));
    write_table(geo_map_out, sim_geo_entries(params));
  }
};

struct ReportCmd {
  InputOptions in;
  std::size_t top = 5;
  double confidence = 0.95;
  std::string out = "-";

  void run() {
    SummaryBuilder builder(top, confidence);
    stream_into(in, builder, "report");
    const auto doc = std::move(builder).finish(in.threads);
    Output o(out);
    o.stream() << doc.dump(2) << '\n';
    o.close();
  }
};

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"malfeed: temporal analytics for blacklist mal-activity reports"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  IngestCmd ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Parse, deduplicate and sort reports into canonical CSV");
  add_input_options(c_ingest, ingest.in, false);
  c_ingest->add_option("--out", ingest.out, "Output CSV");

  EnrichCmd enrich;
  auto* c_enrich = app.add_subcommand("enrich", "Fill ASN and country fields from snapshot tables");
  add_input_options(c_enrich, enrich.in);
  c_enrich->add_option("--out", enrich.out, "Output CSV");

  EntropyCmd entropy;
  auto* c_entropy = app.add_subcommand("entropy", "Specialization, affinity or stability per key");
  add_input_options(c_entropy, entropy.in);
  c_entropy->add_option("--metric", entropy.metric, "specialization, affinity or stability")->required();
  c_entropy->add_option("--level", entropy.level, "ip, asn or cc")->capture_default_str();
  c_entropy->add_option("--class", entropy.activity, "Restrict to one activity class");
  c_entropy->add_option("--out", entropy.out, "Output CSV");

  ChurnCmd churn;
  auto* c_churn = app.add_subcommand("churn", "Mean lifetime, deathtime, rate of arrival and severity per host");
  add_input_options(c_churn, churn.in);
  c_churn->add_option("--level", churn.level, "ip, asn or cc")->capture_default_str();
  c_churn->add_option("--class", churn.activity, "Restrict to one activity class");
  c_churn->add_option("--out", churn.out, "Output CSV");
  c_churn->add_option("--top", churn.top, "Only the top K hosts");
  c_churn->add_option("--by", churn.by, "Ranking metric for --top: lifetime, deathtime, roa, severity");
  c_churn->add_option("--cdf", churn.cdf, "Also write per-metric empirical CDFs here");

  SurvivalCmd survival;
  auto* c_survival = app.add_subcommand("survival", "Kaplan-Meier survival curve of host durations");
  add_input_options(c_survival, survival.in);
  c_survival->add_option("--level", survival.level, "ip, asn or cc")->capture_default_str();
  c_survival->add_option("--class", survival.activity, "Restrict to one activity class");
  c_survival->add_option("--confidence", survival.confidence, "Confidence level of the band")->capture_default_str();
  c_survival->add_option("--window", survival.windows, "Override a source's last covered time: SOURCE=TIMESTAMP");
  c_survival->add_option("--out", survival.out, "Output CSV");

  EvolutionCmd evo;
  auto* c_evo = app.add_subcommand("evolution", "Per-class report volume and share over time");
  add_input_options(c_evo, evo.in);
  c_evo->add_option("--granularity", evo.granularity, "day, week or month")->capture_default_str();
  c_evo->add_option("--out", evo.out, "Output CSV");

  RankCmd rank;
  auto* c_rank = app.add_subcommand("rank", "Top-K hosts by one metric");
  add_input_options(c_rank, rank.in);
  c_rank->add_option("--by", rank.by, "lifetime, deathtime, roa, severity or volume")->capture_default_str();
  c_rank->add_option("--level", rank.level, "ip, asn or cc")->capture_default_str();
  c_rank->add_option("--class", rank.activity, "Restrict to one activity class");
  c_rank->add_option("--top", rank.top, "Number of rows")->capture_default_str();
  c_rank->add_option("--out", rank.out, "Output CSV");

  auto* c_label = app.add_subcommand("label", "Train, apply and evaluate the activity-class labeler");
  c_label->require_subcommand(1);
  LabelTrainCmd train;
  auto* c_train = c_label->add_subcommand("train", "Train a soft-voting ensemble");
  add_input_options(c_train, train.in);
  c_train->add_option("--out", train.out, "Model JSON")->capture_default_str();
  c_train->add_option("--members", train.members, "Ensemble size")->capture_default_str();
  c_train->add_option("--seed", train.seed, "Random seed")->capture_default_str();
  c_train->add_option("--max-depth", train.max_depth, "Tree depth limit")->capture_default_str();
  LabelPredictCmd predict;
  auto* c_predict = c_label->add_subcommand("predict", "Label reports with a trained model");
  add_input_options(c_predict, predict.in);
  c_predict->add_option("--model", predict.model, "Model JSON")->required();
  c_predict->add_option("--out", predict.out, "Output CSV");
  LabelEvalCmd eval;
  auto* c_eval = c_label->add_subcommand("eval", "Per-class and weighted accuracy");
  add_input_options(c_eval, eval.in);
  c_eval->add_option("--model", eval.model, "Evaluate this model instead of a fresh split");
  c_eval->add_option("--train-fraction", eval.train_fraction, "Stratified train share")->capture_default_str();
  c_eval->add_option("--members", eval.members, "Ensemble size")->capture_default_str();
  c_eval->add_option("--seed", eval.seed, "Random seed")->capture_default_str();
  c_eval->add_option("--max-depth", eval.max_depth, "Tree depth limit")->capture_default_str();
  c_eval->add_option("--out", eval.out, "Output CSV");

  SimulateCmd sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate a synthetic corpus from the ON/OFF churn model");
  c_sim->add_option("--hosts", sim.params.n_hosts, "Number of hosts")->capture_default_str();
  c_sim->add_option("--mean-life", sim.params.mean_lifetime, "Mean ON run (weeks)")->capture_default_str();
  c_sim->add_option("--mean-death", sim.params.mean_deathtime, "Mean OFF run (weeks)")->capture_default_str();
  c_sim->add_option("--rate", sim.params.reports_per_active_week, "Mean reports per ON week")->capture_default_str();
  c_sim->add_option("--horizon", sim.params.horizon, "Weeks simulated")->capture_default_str();
  c_sim->add_option("--seed", sim.params.seed, "Random seed")->capture_default_str();
  c_sim->add_option("--origin-week", sim.params.origin_week, "First week (weeks since epoch)")->capture_default_str();
  c_sim->add_option("--class-mix", sim.class_mix, "Six comma-separated class weights");
  c_sim->add_option("--out", sim.out, "Output CSV");
  c_sim->add_option("--truth", sim.truth, "Write generator ground-truth churn here");
  c_sim->add_option("--asn-map-out", sim.asn_map_out, "Write a matching ASN snapshot table here");
  c_sim->add_option("--geo-map-out", sim.geo_map_out, "Write a matching country snapshot table here");

  ReportCmd report;
  auto* c_report = app.add_subcommand("report", "Full pipeline summary as JSON");
  add_input_options(c_report, report.in);
  c_report->add_option("--top", report.top, "Rows per top-K table")->capture_default_str();
  c_report->add_option("--confidence", report.confidence, "Survival band confidence")->capture_default_str();
  c_report->add_option("--out", report.out, "Output JSON");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (c_ingest->parsed()) ingest.run();
    else if (c_enrich->parsed()) enrich.run();
    else if (c_entropy->parsed()) entropy.run();
    else if (c_churn->parsed()) churn.run();
    else if (c_survival->parsed()) survival.run();
    else if (c_evo->parsed()) evo.run();
    else if (c_rank->parsed()) rank.run();
    else if (c_train->parsed()) train.run();
    else if (c_predict->parsed()) predict.run();
    else if (c_eval->parsed()) eval.run();
    else if (c_sim->parsed()) sim.run();
    else if (c_report->parsed()) report.run();
  } catch (const UsageError& e) {
    std::cerr << "malfeed: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "malfeed: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace malfeed::cli
