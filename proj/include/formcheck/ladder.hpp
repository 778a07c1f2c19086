#pragma once

// The classifier ladder: seven variants behind one train/predict interface.
//
//   1nn-dtw          nearest neighbor under full DTW
//   1nn-refdtw       nearest neighbor on frame-wise distance after warping to a reference
//   refdtw-svm       warp, extract, scale, one margin model per pattern on all features
//   refdtw-rf-svm    as refdtw-svm on the features kept by random-probe selection
//   refdtw-rf        forest vote on all warped features
//   segment-rf-svm   refdtw-rf-svm on one movement segment chosen per pattern
//   segment-1nn-dtw  nearest neighbor under DTW of one segment chosen per pattern

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "formcheck/align.hpp"
#include "formcheck/features.hpp"
#include "formcheck/learn.hpp"
#include "formcheck/sample.hpp"
#include "formcheck/segment.hpp"

namespace formcheck {

enum class Variant { nn_dtw, nn_refdtw, refdtw_svm, refdtw_rf_svm, refdtw_rf, segment_rf_svm, segment_nn_dtw };

inline constexpr std::array<Variant, 7> kVariants = {Variant::nn_dtw,        Variant::nn_refdtw,
                                                     Variant::refdtw_svm,    Variant::refdtw_rf_svm,
                                                     Variant::refdtw_rf,     Variant::segment_rf_svm,
                                                     Variant::segment_nn_dtw};

/// "1nn-dtw", "refdtw-rf-svm", ...
std::string_view to_string(Variant v);
/// Throws ConfigError.
Variant variant_from_string(std::string_view name);
bool uses_reference(Variant v);
bool uses_segments(Variant v);
bool is_nearest_neighbor(Variant v);

struct LadderConfig {
  Variant variant = Variant::segment_rf_svm;
  FeatureSet features = FeatureSet::euler_positions;
  Kernel kernel = Kernel::linear;
  SvmConfig svm;
  /// Forest used by random-probe selection.
  SelectionConfig selection;
  /// Forest used as the classifier of refdtw-rf.
  ForestConfig forest;
  SegmentConfig segmentation;
  DtwOptions dtw;
  /// Subject-disjoint folds inside the training data used to choose the segment.
  int inner_folds = 3;
  /// Use this training sample as the reference instead of selecting one.
  std::optional<std::string> reference_id;
  std::vector<ErrorPattern> patterns{kErrorPatterns.begin(), kErrorPatterns.end()};
  std::uint64_t seed = 1;
  int workers = 0;
};

/// Per-pattern classifier state.
struct PatternModel {
  ErrorPattern pattern = ErrorPattern::arched_neck;
  /// Segment the model reads (segment variants only).
  std::optional<SegmentLabel> segment;
  /// Inner cross-validated accuracy per segment, canonical order (segment variants only).
  std::vector<double> segment_accuracy;
  /// Layout of the (segment) reference the features are read from.
  FeatureLayout layout;
  /// Flat indices into `layout`; every feature for refdtw-svm and refdtw-rf.
  FeatureMask mask;
  /// Standardization of the masked features.
  Scaler scaler;
  std::optional<LinearModel> linear;
  std::optional<RbfModel> rbf;
  std::optional<RandomForest> forest;
  /// Set when training labels held one class only; predictions return it.
  std::optional<Label> constant;
};

/// Nearest-neighbor memory: trajectories (raw, warped or one segment) with label rows.
struct NeighborSet {
  std::vector<Trajectory> trajectories;
  std::vector<LabelRow> labels;
};

struct SkippedPattern {
  ErrorPattern pattern;
  std::string reason;
};

struct TrainedLadder {
  LadderConfig config;
  std::optional<Trajectory> reference;
  std::optional<Segmentation> reference_segments;
  std::vector<PatternModel> models;
  /// Patterns with no labeled training sample; they get no prediction.
  std::vector<SkippedPattern> skipped;
  /// Patterns whose labeled training samples hold a single class; they predict that class.
  std::vector<SkippedPattern> warnings;
  /// Training samples without a segmentation (segment variants).
  std::vector<std::string> unsegmented;
  /// 1nn-dtw: raw training trajectories; 1nn-refdtw: warped.
  NeighborSet neighbors;
  /// segment-1nn-dtw: per canonical segment, the training segments.
  std::array<NeighborSet, 5> segment_neighbors;

  const PatternModel* model(ErrorPattern p) const;
};

/// Training data must hold at least one sample that is labeled for a
/// configured pattern. Unlabeled patterns go to `skipped`; single-class ones
/// keep a constant prediction and are listed in `warnings`.
TrainedLadder train_ladder(std::span<const LabeledSample> corpus, const LadderConfig& cfg);

/// Milliseconds of wall-clock time.
struct Latency {
  double segment_ms = 0.0;
  double align_ms = 0.0;
  double feature_ms = 0.0;
  double classify_ms = 0.0;
  double total() const { return segment_ms + align_ms + feature_ms + classify_ms; }
};

struct PatternPrediction {
  ErrorPattern pattern = ErrorPattern::arched_neck;
  Label label = Label::absent;
  /// Higher means more likely present: decision value, vote fraction, or for
  /// nearest neighbors the nearest absent distance minus the nearest present one.
  double score = 0.0;
  /// Work this pattern needed; shared stages are counted for every pattern using them.
  Latency latency;
  std::optional<SegmentLabel> segment;
  /// The model was a constant fallback.
  bool constant = false;
};

struct Prediction {
  std::vector<PatternPrediction> patterns;
  /// Wall-clock time of the whole query, each shared stage counted once.
  Latency latency;
  const PatternPrediction* find(ErrorPattern p) const;
};

/// Throws SegmentationError for segment variants when the query does not
/// segment; StructuralError on a skeleton mismatch.
Prediction predict(const TrainedLadder& ladder, const Trajectory& query);

/// 1NN under a given distance over the neighbors labeled for `p`. Returns
/// (index of nearest labeled neighbor, score). Throws NoDataError.
std::pair<std::size_t, double> nearest_labeled(std::span<const double> distances, std::span<const LabelRow> labels,
                                               ErrorPattern p);

/// Masked feature rows of warped trajectories.
Eigen::MatrixXd feature_rows(std::span<const Trajectory> warped, const FeatureLayout& layout,
                             std::span<const Index> mask);

/// Expands a quaternion-feature mask to whole quaternions; other sets are unchanged.
FeatureMask expand_quaternion_groups(const FeatureMask& mask, const FeatureLayout& layout);

}  // namespace formcheck
