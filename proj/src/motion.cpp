#include "formcheck/motion.hpp"

#include <set>

namespace formcheck {

Quaternion make_rotation(double w, double x, double y, double z) {
  if (!std::isfinite(w) || !std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
    throw InvalidInputError("quaternion has a non-finite component");
  }
  Quaternion q(w, x, y, z);
  const double norm = q.norm();
  if (std::abs(norm - 1.0) > kQuaternionNormTolerance) {
    throw InvalidInputError("quaternion norm " + std::to_string(norm) + " is not within 1e-3 of 1");
  }
  q.normalize();
  return q;
}

Skeleton::Skeleton(std::vector<Joint> joints) : joints_(std::move(joints)) {
  if (joints_.empty()) {
    throw InvalidInputError("skeleton has no joints");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    Joint& j = joints_[i];
    j.index = static_cast<Index>(i);
    if (i == 0 && j.parent) {
      throw StructuralError("root joint '" + j.name + "' must not have a parent");
    }
    if (i > 0) {
      if (!j.parent) {
        throw StructuralError("joint '" + j.name + "' has no parent; only joint 0 may be a root");
      }
      if (*j.parent < 0 || *j.parent >= j.index) {
        throw StructuralError("joint '" + j.name + "' must reference an earlier joint as parent");
      }
    }
    if (j.name.empty() || !names.insert(j.name).second) {
      throw StructuralError("joint names must be unique and non-empty");
    }
  }
}

std::shared_ptr<const Skeleton> Skeleton::standard() {
  static const std::shared_ptr<const Skeleton> instance = [] {
    struct Def {
      const char* name;
      int parent;
      double x, y, z;
    };
    static const Def defs[] = {
        {"hips", -1, 0.0, 0.0, 0.0},        {"spine", 0, 0.0, 0.10, 0.0},
        {"chest", 1, 0.0, 0.18, 0.0},       {"neck", 2, 0.0, 0.22, 0.0},
        {"head", 3, 0.0, 0.10, 0.0},        {"l_shoulder", 2, 0.0, 0.18, -0.04},
        {"l_arm", 5, 0.0, 0.0, -0.14},      {"l_forearm", 6, 0.0, -0.28, 0.0},
        {"l_hand", 7, 0.0, -0.25, 0.0},     {"r_shoulder", 2, 0.0, 0.18, 0.04},
        {"r_arm", 9, 0.0, 0.0, 0.14},       {"r_forearm", 10, 0.0, -0.28, 0.0},
        {"r_hand", 11, 0.0, -0.25, 0.0},    {"l_upleg", 0, 0.0, -0.06, -0.09},
        {"l_leg", 13, 0.0, -0.43, 0.0},     {"l_foot", 14, 0.0, -0.42, 0.0},
        {"r_upleg", 0, 0.0, -0.06, 0.09},   {"r_leg", 16, 0.0, -0.43, 0.0},
        {"r_foot", 17, 0.0, -0.42, 0.0},
    };
    std::vector<Joint> joints;
    for (const Def& d : defs) {
      Joint j;
      j.name = d.name;
      if (d.parent >= 0) j.parent = d.parent;
      j.offset = Eigen::Vector3d(d.x, d.y, d.z);
      joints.push_back(std::move(j));
    }
    return std::make_shared<const Skeleton>(std::move(joints));
  }();
  return instance;
}

std::optional<Index> Skeleton::find(const std::string& name) const {
  for (const Joint& j : joints_) {
    if (j.name == name) return j.index;
  }
  return std::nullopt;
}

Index Skeleton::index_of(const std::string& name) const {
  if (auto i = find(name)) return *i;
  throw NotFoundError("skeleton has no joint named '" + name + "'");
}

bool Skeleton::operator==(const Skeleton& other) const {
  if (joints_.size() != other.joints_.size()) return false;
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    const Joint& a = joints_[i];
    const Joint& b = other.joints_[i];
    if (a.name != b.name || a.parent != b.parent || a.offset != b.offset) return false;
  }
  return true;
}

Frame::Frame(Eigen::Matrix4Xd rotations, Eigen::Matrix3Xd positions)
    : rotations_(std::move(rotations)), positions_(std::move(positions)) {
  if (rotations_.cols() != positions_.cols()) {
    throw StructuralError("frame has " + std::to_string(rotations_.cols()) + " rotations but " +
                          std::to_string(positions_.cols()) + " positions");
  }
  if (!rotations_.allFinite() || !positions_.allFinite()) {
    throw InvalidInputError("frame contains non-finite values");
  }
  for (Index j = 0; j < rotations_.cols(); ++j) {
    const double norm = rotations_.col(j).norm();
    if (std::abs(norm - 1.0) > kQuaternionNormTolerance) {
      throw InvalidInputError("joint " + std::to_string(j) + " rotation norm " + std::to_string(norm) +
                              " is not within 1e-3 of 1");
    }
    // Leave already-unit columns untouched so that write/read cycles are bit stable.
    if (std::abs(rotations_.col(j).squaredNorm() - 1.0) > 1e-12) {
      rotations_.col(j) /= norm;
    }
  }
}

double frame_distance(const Frame& a, const Frame& b) {
  if (a.joint_count() != b.joint_count()) {
    throw StructuralError("frame_distance: joint counts differ (" + std::to_string(a.joint_count()) + " vs " +
                          std::to_string(b.joint_count()) + ")");
  }
  const auto dots = (a.rotations().array() * b.rotations().array()).colwise().sum().abs();
  return (1.0 - dots).max(0.0).sum();
}

Trajectory::Trajectory(std::shared_ptr<const Skeleton> skeleton, std::vector<Frame> frames, double sample_rate,
                       std::string subject_id, std::string sample_id)
    : skeleton_(std::move(skeleton)),
      frames_(std::move(frames)),
      sample_rate_(sample_rate),
      subject_id_(std::move(subject_id)),
      sample_id_(std::move(sample_id)) {
  if (!skeleton_) throw InvalidInputError("trajectory requires a skeleton");
  if (frames_.empty()) throw InvalidInputError("trajectory '" + sample_id_ + "' has no frames");
  if (!(sample_rate_ > 0.0) || !std::isfinite(sample_rate_)) {
    throw InvalidInputError("trajectory sample rate must be positive");
  }
  for (const Frame& f : frames_) {
    if (f.joint_count() != skeleton_->size()) {
      throw StructuralError("trajectory '" + sample_id_ + "': frame joint count " + std::to_string(f.joint_count()) +
                            " does not match skeleton size " + std::to_string(skeleton_->size()));
    }
  }
}

Trajectory Trajectory::slice(Index first, Index last) const {
  if (first < 0 || last < first || last >= size()) {
    throw InvalidInputError("slice [" + std::to_string(first) + ", " + std::to_string(last) +
                            "] outside trajectory of " + std::to_string(size()) + " frames");
  }
  std::vector<Frame> part(frames_.begin() + first, frames_.begin() + last + 1);
  return with_frames(std::move(part));
}

Trajectory Trajectory::with_frames(std::vector<Frame> frames) const {
  return Trajectory(skeleton_, std::move(frames), sample_rate_, subject_id_, sample_id_);
}

Trajectory Trajectory::reversed() const {
  return with_frames(std::vector<Frame>(frames_.rbegin(), frames_.rend()));
}

bool Trajectory::operator==(const Trajectory& other) const {
  return sample_rate_ == other.sample_rate_ && subject_id_ == other.subject_id_ && sample_id_ == other.sample_id_ &&
         (skeleton_ == other.skeleton_ || *skeleton_ == *other.skeleton_) && frames_ == other.frames_;
}

}  // namespace formcheck
