#pragma once

#include <Eigen/Core>

#include <span>
#include <string_view>
#include <vector>

#include "formcheck/motion.hpp"

namespace formcheck {

enum class FeatureSet { euler, positions, euler_positions, quaternions };

std::string_view to_string(FeatureSet set);
FeatureSet feature_set_from_string(std::string_view name);

/// Number of values per (frame, joint): 3, 3, 6 or 4.
Index channels_per_joint(FeatureSet set);

struct FeatureCoord {
  Index frame = 0;
  Index joint = 0;
  /// euler: flexion, abduction, twist; positions: x, y, z; euler_positions: the
  /// three angles then x, y, z; quaternions: w, x, y, z.
  Index channel = 0;
  bool operator==(const FeatureCoord&) const = default;
};

/// Frame-major, joint-minor, channel-innermost flat layout.
class FeatureLayout {
 public:
  FeatureLayout() = default;
  FeatureLayout(Index frames, Index joints, FeatureSet set);

  Index frames() const { return frames_; }
  Index joints() const { return joints_; }
  FeatureSet set() const { return set_; }
  Index channels() const { return channels_per_joint(set_); }
  Index size() const { return frames_ * joints_ * channels(); }
  Index values_per_frame() const { return joints_ * channels(); }

  FeatureCoord coord(Index flat) const;
  Index flat(const FeatureCoord& c) const;

  bool operator==(const FeatureLayout&) const = default;

 private:
  Index frames_ = 0;
  Index joints_ = 0;
  FeatureSet set_ = FeatureSet::euler_positions;
};

struct FeatureVector {
  Eigen::VectorXd values;
  FeatureLayout layout;
};

FeatureVector extract(const Trajectory& warped, FeatureSet set);

/// Only the entries listed in `indices` (flat indices into `layout`), in that
/// order. Each needed (frame, joint) rotation is decomposed once.
Eigen::VectorXd extract_selected(const Trajectory& warped, const FeatureLayout& layout, std::span<const Index> indices);

/// Rows are samples.
Eigen::MatrixXd stack_rows(std::span<const FeatureVector> vectors);

/// Standard deviations below this transform to zero.
inline constexpr double kScalerEpsilon = 1e-12;

/// Per-feature standardization with population statistics.
class Scaler {
 public:
  Scaler() = default;
  Scaler(Eigen::VectorXd mean, Eigen::VectorXd stddev);

  /// Rows are samples; at least two rows.
  static Scaler fit(const Eigen::MatrixXd& samples);

  Index size() const { return mean_.size(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stddev() const { return stddev_; }

  Eigen::VectorXd transform(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  void transform_rows_in_place(Eigen::MatrixXd& samples) const;
  Eigen::VectorXd inverse_transform(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  /// Statistics of the listed features only.
  Scaler restricted(std::span<const Index> indices) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd stddev_;
  Eigen::VectorXd inv_stddev_;  // 0 where stddev < kScalerEpsilon
};

/// Throws StructuralError on length mismatch, InvalidInputError on fewer than two vectors.
Scaler fit_scaler(std::span<const FeatureVector> vectors);
FeatureVector apply_scaler(const Scaler& s, const FeatureVector& v);

}  // namespace formcheck
