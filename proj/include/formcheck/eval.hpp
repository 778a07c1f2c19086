#pragma once

// Subject-disjoint cross-validation, metrics and latency benchmarks.

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "formcheck/ladder.hpp"
#include "formcheck/sample.hpp"

namespace formcheck {

/// Folds of subject ids. Samples of a subject always share a fold.
struct FoldPlan {
  std::vector<std::vector<std::string>> folds;

  std::size_t size() const { return folds.size(); }
  /// Throws NotFoundError for an unknown subject.
  std::size_t fold_of(const std::string& subject) const;
  bool operator==(const FoldPlan&) const = default;
};

/// Greedy assignment: subjects in a seeded order, largest first, each placed
/// in the fold that minimizes the summed deviation of per-pattern positive and
/// negative counts from their proportional share. Throws InvalidInputError when
/// there are fewer subjects than folds or k < 2.
FoldPlan make_folds(std::span<const LabeledSample> corpus, int k, std::uint64_t seed);
/// Same on bare data: the subject and label row of each sample.
FoldPlan make_folds(std::span<const std::string> subjects, std::span<const LabelRow> labels, int k,
                    std::uint64_t seed);

/// Throws InvalidInputError unless the folds partition the corpus subjects.
void validate_fold_plan(const FoldPlan& plan, std::span<const LabeledSample> corpus);

struct ConfusionCounts {
  long tp = 0, tn = 0, fp = 0, fn = 0;
  long total() const { return tp + tn + fp + fn; }
  void add(bool truth, bool predicted);
  bool operator==(const ConfusionCounts&) const = default;
};

/// (tp + tn) / total; 0 for an empty table.
double accuracy(const ConfusionCounts& c);
/// 2 tp / (2 tp + fp + fn); 0 when the denominator is 0.
double f1(const ConfusionCounts& c);
/// Mann-Whitney estimate with ties counted one half. Throws
/// DegenerateLabelsError when one class is missing.
double roc_auc(std::span<const std::pair<double, bool>> scored);

struct ScoredQuery {
  std::string sample_id;
  bool truth = false;
  bool predicted = false;
  double score = 0.0;
};

struct FoldScore {
  ConfusionCounts counts;
  /// Unset when the fold's test labels hold a single class.
  std::optional<double> roc_auc;
  std::uint64_t model_hash = 0;
  /// The fold's model was a constant fallback for this pattern.
  bool constant = false;
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

struct PatternScore {
  ErrorPattern pattern = ErrorPattern::arched_neck;
  /// Over folds with at least one scored sample.
  MeanSd accuracy, f1;
  /// Over folds with both classes in the test labels.
  std::optional<MeanSd> roc_auc;
  /// All folds pooled.
  ConfusionCounts pooled;
  std::vector<FoldScore> folds;
  /// Per-fold notes such as an omitted ROC.
  std::vector<std::string> flags;
  /// Segment chosen per fold (segment variants).
  std::vector<std::string> segments;
};

struct LatencyStats {
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double mean_ms = 0.0;
  std::size_t count = 0;
};

/// Per stage, per query.
struct LatencySummary {
  LatencyStats segment, align, feature, classify, total;
};

LatencyStats latency_stats(std::vector<double> samples_ms);
LatencySummary summarize_latency(std::span<const Latency> per_query);

struct ScoreReport {
  std::string variant;
  int folds = 0;
  std::uint64_t seed = 0;
  FoldPlan plan;
  std::vector<PatternScore> patterns;
  /// Timing from the cross-validation queries; not part of the deterministic report body.
  LatencySummary latency;
  const PatternScore* find(ErrorPattern p) const;
};

/// Output of a trained classifier on one query.
using QueryPredictor = std::function<Prediction(const Trajectory&)>;

/// What cross-validation needs from a classifier: training on the training
/// folds, a predictor and a hash of the bytes of each pattern's model.
struct TrainedFold {
  QueryPredictor predict;
  std::map<ErrorPattern, std::uint64_t> model_hashes;
  /// Chosen segment per pattern, for segment variants.
  std::map<ErrorPattern, std::string> segments;
};
using FoldTrainer = std::function<TrainedFold(std::span<const LabeledSample> training)>;

struct CrossvalConfig {
  int folds = 5;
  std::uint64_t seed = 1;
  /// Replaces make_folds when set.
  std::optional<FoldPlan> plan;
  std::vector<ErrorPattern> patterns{kErrorPatterns.begin(), kErrorPatterns.end()};
  /// Folds trained concurrently; 0 uses default_workers().
  int workers = 1;
};

/// Trains on k-1 folds and scores the held-out fold. Samples unlabeled for a
/// pattern are not scored for it, and neither are samples without a prediction
/// for it (e.g. a query that failed to segment, which is flagged).
ScoreReport run_crossval(std::span<const LabeledSample> corpus, const FoldTrainer& trainer, const CrossvalConfig& cfg,
                         const std::string& name);
/// Ladder training with the given configuration on every fold.
ScoreReport run_crossval(std::span<const LabeledSample> corpus, const LadderConfig& ladder, const CrossvalConfig& cfg);
/// FNV-1a of the serialized model of every trained pattern.
std::map<ErrorPattern, std::uint64_t> model_hashes(const TrainedLadder& ladder);

struct BenchConfig {
  int warmup = 1;
  int repetitions = 3;
};

struct BenchResult {
  std::string variant;
  LatencySummary per_query;
  /// One full-trajectory DTW (distance only) between the first query and reference.
  LatencyStats single_dtw;
};

/// Times predict() on every query, single-threaded.
BenchResult bench_latency(const TrainedLadder& ladder, std::span<const Trajectory> queries, const BenchConfig& cfg = {});

}  // namespace formcheck
