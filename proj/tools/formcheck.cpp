// formcheck command-line front end.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "formcheck/config.hpp"
#include "formcheck/io.hpp"
#include "formcheck/parallel.hpp"

using namespace formcheck;
namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, usage = 1, config_error = 2, data_error = 3, model_error = 4 };

struct Options {
  std::string config, corpus, model, out, variant, csv;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::vector<std::string> queries;
};

RunConfig resolve(const Options& o) {
  std::string path = o.config;
  if (path.empty()) {
    if (const char* env = std::getenv("FORMCHECK_CONFIG")) path = env;
  }
  RunConfig c = path.empty() ? parse_run_config("{}") : load_run_config(path);
  if (o.seed) {
    c.ladder.seed = *o.seed;
    c.crossval.seed = *o.seed;
    c.corpus.seed = *o.seed;
  }
  if (o.workers) {
    if (*o.workers < 0) throw ConfigError("--workers must not be negative");
    c.ladder.workers = *o.workers;
    c.crossval.workers = *o.workers;
  }
  if (!o.variant.empty()) c.ladder.variant = variant_from_string(o.variant);
  std::cerr << "# config " << dump_run_config(c, -1);
  return c;
}

std::vector<LabeledSample> load_samples(const Options& o) {
  if (o.corpus.empty()) throw ConfigError("--corpus is required");
  return read_corpus(o.corpus).samples;
}

std::ofstream open_out(const std::string& path) {
  if (path.empty()) throw ConfigError("--out is required");
  std::ofstream out(path);
  if (!out) throw NotFoundError("cannot write " + path);
  return out;
}

int cmd_gen(const Options& o) {
  const RunConfig c = resolve(o);
  if (o.out.empty()) throw ConfigError("--out is required");
  const Corpus corpus = generate_corpus(c.corpus);
  write_corpus(o.out, corpus.samples, corpus.truth_segments);
  std::cerr << "wrote " << corpus.samples.size() << " samples to " << o.out << "\n";
  return ok;
}

int cmd_segment(const Options& o) {
  const RunConfig c = resolve(o);
  std::vector<Trajectory> ts;
  if (!o.corpus.empty() && fs::is_directory(o.corpus)) {
    for (LabeledSample& s : read_corpus(o.corpus).samples) ts.push_back(std::move(s.trajectory));
  }
  for (const std::string& q : o.queries) ts.push_back(read_trajectory_file(q));
  if (ts.empty()) throw ConfigError("give --corpus or trajectory files");
  std::vector<std::string> ids;
  std::vector<Segmentation> segs;
  int failed = 0;
  for (const Trajectory& t : ts) {
    try {
      segs.push_back(segment(t, c.ladder.segmentation));
      ids.push_back(t.sample_id());
    } catch (const SegmentationError& e) {
      ++failed;
      std::cerr << t.sample_id() << ": " << e.what() << "\n";
    }
  }
  if (o.out.empty()) {
    write_segmentations(std::cout, ids, segs);
  } else {
    std::ofstream out = open_out(o.out);
    write_segmentations(out, ids, segs);
  }
  return failed > 0 ? data_error : ok;
}

int cmd_train(const Options& o) {
  const RunConfig c = resolve(o);
  if (o.model.empty()) throw ConfigError("--model is required");
  const TrainedLadder ladder = train_ladder(load_samples(o), c.ladder);
  for (const SkippedPattern& s : ladder.skipped) std::cerr << "warning: " << to_string(s.pattern) << " skipped: " << s.reason << "\n";
  for (const SkippedPattern& s : ladder.warnings) std::cerr << "warning: " << to_string(s.pattern) << ": " << s.reason << "\n";
  for (const std::string& id : ladder.unsegmented) std::cerr << "warning: " << id << " did not segment and was left out\n";
  write_model_bundle(o.model, ladder);
  std::cerr << "wrote " << to_string(ladder.config.variant) << " model to " << o.model << "\n";
  return ok;
}

// A loaded model carries its own configuration; an explicit variant must agree with it.
void check_variant(const Options& o, const TrainedLadder& ladder) {
  if (!o.variant.empty() && variant_from_string(o.variant) != ladder.config.variant) {
    throw ConfigError("--variant " + o.variant + " does not match the model's " + std::string(to_string(ladder.config.variant)));
  }
}

int cmd_classify(const Options& o) {
  resolve(o);
  if (o.model.empty()) throw ConfigError("--model is required");
  if (o.queries.empty()) throw ConfigError("give at least one trajectory file to classify");
  std::vector<LabeledSample> corpus;
  if (!o.corpus.empty()) corpus = load_samples(o);
  const TrainedLadder ladder = read_model_bundle(o.model, corpus);
  check_variant(o, ladder);
  for (const std::string& path : o.queries) {
    const Trajectory q = read_trajectory_file(path);
    const Prediction p = predict(ladder, q);
    std::cout << q.sample_id() << "\n";
    for (const PatternPrediction& r : p.patterns) {
      std::cout << "  " << to_string(r.pattern) << " " << to_string(r.label) << " score " << format_double(r.score);
      if (r.segment) std::cout << " segment " << to_string(*r.segment);
      if (r.constant) std::cout << " (constant)";
      std::cout << "\n";
    }
    std::cout << "  latency_ms segment " << p.latency.segment_ms << " align " << p.latency.align_ms << " feature "
              << p.latency.feature_ms << " classify " << p.latency.classify_ms << " total " << p.latency.total() << "\n";
  }
  return ok;
}

int cmd_crossval(const Options& o) {
  const RunConfig c = resolve(o);
  const std::vector<LabeledSample> samples = load_samples(o);
  const ScoreReport r = run_crossval(samples, c.ladder, c.crossval);
  {
    std::ofstream out = open_out(o.out);
    write_report(out, r);
  }
  if (!o.csv.empty()) {
    std::ofstream csv(o.csv);
    write_scores_csv(csv, r);
  }
  write_report_table(std::cout, r);
  write_latency(std::cerr, r.variant, r.latency);
  return ok;
}

int cmd_bench(const Options& o) {
  RunConfig c = resolve(o);
  const std::vector<LabeledSample> samples = load_samples(o);
  TrainedLadder ladder;
  if (o.model.empty()) {
    ladder = train_ladder(samples, c.ladder);
  } else {
    ladder = read_model_bundle(o.model, samples);
    check_variant(o, ladder);
  }
  std::vector<Trajectory> queries;
  for (const LabeledSample& s : samples) queries.push_back(s.trajectory);
  const BenchResult b = bench_latency(ladder, queries, c.bench);
  if (o.out.empty()) {
    write_latency(std::cout, b.variant, b.per_query, b.single_dtw);
  } else {
    std::ofstream out = open_out(o.out);
    write_latency(out, b.variant, b.per_query, b.single_dtw);
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Squat error-pattern classification"};
  app.require_subcommand(1);
  Options o;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration (default: $FORMCHECK_CONFIG)");
    sub->add_option("--seed", o.seed, "Overrides the configured seed");
    sub->add_option("--workers", o.workers, "Worker threads, 0 for all cores");
    sub->add_option("--variant", o.variant, "Overrides the configured classifier variant");
  };
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Command commands[] = {
      {"gen", "Generate a synthetic corpus directory (--out)", cmd_gen},
      {"segment", "Segment a corpus (--corpus) or trajectory files", cmd_segment},
      {"train", "Train on --corpus and write --model", cmd_train},
      {"classify", "Classify trajectory files with --model", cmd_classify},
      {"crossval", "Subject-disjoint cross-validation on --corpus, report to --out", cmd_crossval},
      {"bench", "Per-query latency on --corpus", cmd_bench},
  };
  std::vector<std::pair<CLI::App*, int (*)(const Options&)>> subs;
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    sub->add_option("--corpus", o.corpus, "Corpus directory");
    sub->add_option("--model", o.model, "Model bundle");
    sub->add_option("--out", o.out, "Output path");
    if (std::string(c.name) == "crossval") sub->add_option("--csv", o.csv, "Per-pattern scores as CSV");
    if (std::string(c.name) == "classify" || std::string(c.name) == "segment") {
      sub->add_option("trajectories", o.queries, "Trajectory files");
    }
    subs.emplace_back(sub, c.run);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ok : usage;
  }
  try {
    for (const auto& [sub, run] : subs) {
      if (sub->parsed()) return run(o);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return model_error;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return data_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  }
  return usage;
}
