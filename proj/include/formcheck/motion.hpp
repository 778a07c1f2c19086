#pragma once

// Skeleton trajectory model and the rotation math shared by every stage.
//
// Rotation storage uses (w, x, y, z) rows, one column per joint. Joint local
// frames are aligned with the world frame in the standing rest pose:
// x forward, y up, z lateral (to the subject's right). Flexion/extension is
// therefore a rotation about z, abduction/adduction about x, twist about y.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "formcheck/error.hpp"

namespace formcheck {

using Index = Eigen::Index;
using Quaternion = Eigen::Quaterniond;

template <typename Scalar>
struct BasicEulerTriple {
  Scalar flexion_extension{0};
  Scalar abduction_adduction{0};
  Scalar twist{0};
};
using EulerTriple = BasicEulerTriple<double>;

/// Pitch distance from +-pi/2 below which the decomposition treats the rotation
/// as gimbal locked.
inline constexpr double kGimbalLockTolerance = 1e-4;

/// Inputs whose norm deviates from one by more than this are rejected.
inline constexpr double kQuaternionNormTolerance = 1e-3;

/// Unit quaternion from (w, x, y, z); throws InvalidInputError on non-finite
/// components or a norm outside 1 +- kQuaternionNormTolerance.
Quaternion make_rotation(double w, double x, double y, double z);

/// 1 - |<a, b>|. Zero for identical rotations, including the q / -q pair.
template <typename Scalar>
Scalar quat_distance(const Eigen::Quaternion<Scalar>& a, const Eigen::Quaternion<Scalar>& b) {
  if (!a.coeffs().allFinite() || !b.coeffs().allFinite()) {
    throw InvalidInputError("quat_distance: non-finite quaternion component");
  }
  return std::clamp(Scalar(1) - std::abs(a.dot(b)), Scalar(0), Scalar(1));
}

namespace detail {
template <typename Scalar>
Scalar wrap_half_open(Scalar angle) {
  // (-pi, pi]
  return angle <= -std::numbers::pi_v<Scalar> ? angle + 2 * std::numbers::pi_v<Scalar> : angle;
}
}  // namespace detail

/// Intrinsic Z-X-Y decomposition, R = Rz(flexion) * Rx(abduction) * Ry(twist).
/// Within kGimbalLockTolerance of the singular pitch the twist is set to zero
/// and the remaining rotation is folded into flexion.
template <typename Scalar>
BasicEulerTriple<Scalar> to_euler(const Eigen::Quaternion<Scalar>& q) {
  using std::asin;
  using std::atan2;
  const Eigen::Matrix<Scalar, 3, 3> r = q.normalized().toRotationMatrix();
  const Scalar s = std::clamp(r(2, 1), Scalar(-1), Scalar(1));
  BasicEulerTriple<Scalar> e;
  e.abduction_adduction = asin(s);
  if (std::numbers::pi_v<Scalar> / 2 - std::abs(e.abduction_adduction) < Scalar(kGimbalLockTolerance)) {
    e.flexion_extension = atan2(r(1, 0), r(0, 0));
    e.twist = Scalar(0);
  } else {
    e.flexion_extension = atan2(-r(0, 1), r(1, 1));
    e.twist = atan2(-r(2, 0), r(2, 2));
  }
  e.flexion_extension = detail::wrap_half_open(e.flexion_extension);
  e.twist = detail::wrap_half_open(e.twist);
  return e;
}

template <typename Scalar>
Eigen::Quaternion<Scalar> from_euler(const BasicEulerTriple<Scalar>& e) {
  using AngleAxis = Eigen::AngleAxis<Scalar>;
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  return Eigen::Quaternion<Scalar>(AngleAxis(e.flexion_extension, Vec3::UnitZ()) *
                                   AngleAxis(e.abduction_adduction, Vec3::UnitX()) *
                                   AngleAxis(e.twist, Vec3::UnitY()));
}

struct Joint {
  Index index = 0;
  std::string name;
  std::optional<Index> parent;
  /// Offset from the parent joint in the parent's frame at rest, meters.
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
};

/// Joint hierarchy. Joint 0 is the root and every parent index is smaller than
/// its child's, which makes the parent graph a tree.
class Skeleton {
 public:
  explicit Skeleton(std::vector<Joint> joints);

  /// The 19-joint hierarchy used throughout the project (hips as root).
  static std::shared_ptr<const Skeleton> standard();

  Index size() const { return static_cast<Index>(joints_.size()); }
  const Joint& joint(Index i) const { return joints_.at(static_cast<std::size_t>(i)); }
  const std::vector<Joint>& joints() const { return joints_; }
  std::optional<Index> find(const std::string& name) const;
  /// Throws NotFoundError.
  Index index_of(const std::string& name) const;

  bool operator==(const Skeleton& other) const;

 private:
  std::vector<Joint> joints_;
};

/// One skeleton pose.
class Frame {
 public:
  Frame() = default;
  /// Columns are joints. Rotations are validated and renormalized.
  Frame(Eigen::Matrix4Xd rotations, Eigen::Matrix3Xd positions);

  Index joint_count() const { return rotations_.cols(); }
  Quaternion rotation(Index joint) const {
    return Quaternion(rotations_(0, joint), rotations_(1, joint), rotations_(2, joint), rotations_(3, joint));
  }
  Eigen::Vector3d position(Index joint) const { return positions_.col(joint); }
  const Eigen::Matrix4Xd& rotations() const { return rotations_; }
  const Eigen::Matrix3Xd& positions() const { return positions_; }

  bool operator==(const Frame& other) const {
    return rotations_ == other.rotations_ && positions_ == other.positions_;
  }

 private:
  Eigen::Matrix4Xd rotations_;
  Eigen::Matrix3Xd positions_;
};

/// Sum over joints of quat_distance; throws StructuralError on joint count mismatch.
double frame_distance(const Frame& a, const Frame& b);

class Trajectory {
 public:
  Trajectory(std::shared_ptr<const Skeleton> skeleton, std::vector<Frame> frames, double sample_rate,
             std::string subject_id, std::string sample_id);

  Index size() const { return static_cast<Index>(frames_.size()); }
  Index joint_count() const { return skeleton_->size(); }
  const std::vector<Frame>& frames() const { return frames_; }
  const Frame& frame(Index i) const { return frames_[static_cast<std::size_t>(i)]; }
  double sample_rate() const { return sample_rate_; }
  const std::string& subject_id() const { return subject_id_; }
  const std::string& sample_id() const { return sample_id_; }
  const std::shared_ptr<const Skeleton>& skeleton() const { return skeleton_; }

  /// Frames [first, last], metadata preserved.
  Trajectory slice(Index first, Index last) const;
  /// Same metadata, new frames.
  Trajectory with_frames(std::vector<Frame> frames) const;
  Trajectory reversed() const;

  bool operator==(const Trajectory& other) const;

 private:
  std::shared_ptr<const Skeleton> skeleton_;
  std::vector<Frame> frames_;
  double sample_rate_;
  std::string subject_id_;
  std::string sample_id_;
};

}  // namespace formcheck
