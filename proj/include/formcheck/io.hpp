#pragma once

// Text file formats. Every file starts with a "# formcheck-<kind> v<major>"
// line; an unknown major version is a FormatVersionError. Numbers are written
// in the shortest form that reads back to the same double.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "formcheck/eval.hpp"
#include "formcheck/ladder.hpp"
#include "formcheck/sample.hpp"
#include "formcheck/segment.hpp"

namespace formcheck {

inline constexpr int kFormatVersion = 1;

/// Shortest round-trip decimal form.
std::string format_double(double v);

/// Header lines (skeleton, rate, ids, frame count), then one row per frame:
/// 4k quaternion components (w x y z per joint) then 3k positions.
void write_trajectory(std::ostream& out, const Trajectory& t);
/// Throws ParseError with the offending line, FormatVersionError.
Trajectory read_trajectory(std::istream& in);
void write_trajectory_file(const std::filesystem::path& path, const Trajectory& t);
Trajectory read_trajectory_file(const std::filesystem::path& path);

struct AnnotationRow {
  std::string subject_id;
  std::string sample_id;
  ErrorPattern pattern = ErrorPattern::arched_neck;
  Label label = Label::absent;
  bool operator==(const AnnotationRow&) const = default;
};

/// CSV rows subject_id,sample_id,pattern,label; unlabeled entries are omitted.
void write_annotations(std::ostream& out, std::span<const LabeledSample> samples);
/// Throws ParseError on duplicate (subject, sample, pattern) keys or bad fields.
std::vector<AnnotationRow> read_annotations(std::istream& in);

/// CSV rows sample_id,segment,start,end.
void write_segmentations(std::ostream& out, std::span<const std::string> sample_ids,
                         std::span<const Segmentation> segs);
std::vector<std::pair<std::string, Segmentation>> read_segmentations(std::istream& in);

/// Corpus directory: manifest.txt (sample ids in order), trajectories/<id>.traj,
/// annotations.csv and, when given, segments.csv with true phase boundaries.
void write_corpus(const std::filesystem::path& dir, std::span<const LabeledSample> samples,
                  std::span<const Segmentation> truth = {});
struct CorpusFiles {
  std::vector<LabeledSample> samples;
  /// Empty when the corpus has no segments.csv.
  std::vector<Segmentation> truth;
};
/// Throws NotFoundError for missing files; samples without any label are an InvalidInputError.
CorpusFiles read_corpus(const std::filesystem::path& dir);

/// Canonical bytes of one pattern's model.
std::string serialize_pattern_model(const PatternModel& m);

/// JSON bundle with configuration, reference trajectory and hash, and per-pattern
/// models. Nearest-neighbor variants record their training samples by id and
/// content hash instead of embedding them.
void write_model_bundle(const std::filesystem::path& path, const TrainedLadder& ladder);
/// `corpus` resolves the training samples of nearest-neighbor bundles; a missing
/// or changed sample is a ModelError.
TrainedLadder read_model_bundle(const std::filesystem::path& path,
                                std::span<const LabeledSample> corpus = {});

/// FNV-1a over ids, rate, skeleton and the raw frame values.
std::uint64_t trajectory_hash(const Trajectory& t);

/// Deterministic JSON: scores, plan and flags; no timing.
void write_report(std::ostream& out, const ScoreReport& r);
ScoreReport read_report(std::istream& in);
/// Fixed-width table of mean and SD per pattern.
void write_report_table(std::ostream& out, const ScoreReport& r);
/// pattern,accuracy,accuracy_sd,f1,f1_sd,roc_auc,roc_auc_sd
void write_scores_csv(std::ostream& out, const ScoreReport& r);
void write_latency(std::ostream& out, const std::string& variant, const LatencySummary& s,
                   const std::optional<LatencyStats>& single_dtw = std::nullopt);

}  // namespace formcheck
