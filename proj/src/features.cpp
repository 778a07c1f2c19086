#include "formcheck/features.hpp"

#include <unordered_map>

namespace formcheck {
namespace {

constexpr const char* kSetNames[] = {"euler", "positions", "euler+positions", "quaternions"};

bool uses_euler(FeatureSet set) { return set == FeatureSet::euler || set == FeatureSet::euler_positions; }

double channel_value(const Frame& f, Index joint, FeatureSet set, Index channel, const EulerTriple* euler) {
  switch (set) {
    case FeatureSet::euler:
      return channel == 0 ? euler->flexion_extension : channel == 1 ? euler->abduction_adduction : euler->twist;
    case FeatureSet::positions:
      return f.positions()(channel, joint);
    case FeatureSet::euler_positions:
      if (channel < 3) {
        return channel == 0 ? euler->flexion_extension : channel == 1 ? euler->abduction_adduction : euler->twist;
      }
      return f.positions()(channel - 3, joint);
    case FeatureSet::quaternions:
      return f.rotations()(channel, joint);
  }
  return 0.0;
}

}  // namespace

std::string_view to_string(FeatureSet set) { return kSetNames[static_cast<int>(set)]; }

FeatureSet feature_set_from_string(std::string_view name) {
  for (int i = 0; i < 4; ++i) {
    if (name == kSetNames[i]) return static_cast<FeatureSet>(i);
  }
  throw InvalidInputError("unknown feature set '" + std::string(name) + "'");
}

Index channels_per_joint(FeatureSet set) {
  switch (set) {
    case FeatureSet::euler:
    case FeatureSet::positions:
      return 3;
    case FeatureSet::euler_positions:
      return 6;
    case FeatureSet::quaternions:
      return 4;
  }
  return 0;
}

FeatureLayout::FeatureLayout(Index frames, Index joints, FeatureSet set) : frames_(frames), joints_(joints), set_(set) {
  if (frames < 0 || joints < 0) throw InvalidInputError("feature layout dimensions must be non-negative");
}

FeatureCoord FeatureLayout::coord(Index flat) const {
  if (flat < 0 || flat >= size()) throw InvalidInputError("feature index " + std::to_string(flat) + " out of range");
  const Index c = channels();
  FeatureCoord out;
  out.channel = flat % c;
  const Index fj = flat / c;
  out.joint = fj % joints_;
  out.frame = fj / joints_;
  return out;
}

Index FeatureLayout::flat(const FeatureCoord& c) const {
  if (c.frame < 0 || c.frame >= frames_ || c.joint < 0 || c.joint >= joints_ || c.channel < 0 ||
      c.channel >= channels()) {
    throw InvalidInputError("feature coordinate out of range");
  }
  return (c.frame * joints_ + c.joint) * channels() + c.channel;
}

FeatureVector extract(const Trajectory& warped, FeatureSet set) {
  FeatureVector out;
  out.layout = FeatureLayout(warped.size(), warped.joint_count(), set);
  out.values.resize(out.layout.size());
  const Index channels = out.layout.channels();
  Index k = 0;
  for (const Frame& f : warped.frames()) {
    for (Index j = 0; j < f.joint_count(); ++j) {
      EulerTriple e;
      if (uses_euler(set)) e = to_euler(f.rotation(j));
      for (Index c = 0; c < channels; ++c) out.values[k++] = channel_value(f, j, set, c, &e);
    }
  }
  return out;
}

Eigen::VectorXd extract_selected(const Trajectory& warped, const FeatureLayout& layout, std::span<const Index> indices) {
  if (warped.size() != layout.frames() || warped.joint_count() != layout.joints()) {
    throw StructuralError("extract_selected: trajectory shape does not match the feature layout");
  }
  Eigen::VectorXd out(static_cast<Index>(indices.size()));
  const bool euler = uses_euler(layout.set());
  // Sorted masks visit each (frame, joint) in one run, so remembering the last
  // decomposition is enough; other orders fall back to a map.
  const bool sorted = std::is_sorted(indices.begin(), indices.end());
  std::unordered_map<Index, EulerTriple> cache;
  Index last_key = -1;
  EulerTriple last{};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const FeatureCoord c = layout.coord(indices[i]);
    const Frame& f = warped.frame(c.frame);
    const EulerTriple* e = nullptr;
    if (euler && c.channel < 3) {
      const Index key = c.frame * layout.joints() + c.joint;
      if (sorted) {
        if (key != last_key) {
          last = to_euler(f.rotation(c.joint));
          last_key = key;
        }
        e = &last;
      } else {
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, to_euler(f.rotation(c.joint))).first;
        e = &it->second;
      }
    }
    out[static_cast<Index>(i)] = channel_value(f, c.joint, layout.set(), c.channel, e);
  }
  return out;
}

Eigen::MatrixXd stack_rows(std::span<const FeatureVector> vectors) {
  if (vectors.empty()) return {};
  const Index d = vectors.front().values.size();
  Eigen::MatrixXd m(static_cast<Index>(vectors.size()), d);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].values.size() != d) throw StructuralError("feature vectors differ in length");
    m.row(static_cast<Index>(i)) = vectors[i].values.transpose();
  }
  return m;
}

Scaler::Scaler(Eigen::VectorXd mean, Eigen::VectorXd stddev) : mean_(std::move(mean)), stddev_(std::move(stddev)) {
  if (mean_.size() != stddev_.size()) throw StructuralError("scaler mean and stddev lengths differ");
  inv_stddev_ = (stddev_.array() < kScalerEpsilon).select(0.0, stddev_.array().inverse()).matrix();
}

Scaler Scaler::fit(const Eigen::MatrixXd& samples) {
  if (samples.rows() < 2) throw InvalidInputError("scaler needs at least two samples");
  Eigen::VectorXd mean = samples.colwise().mean().transpose();
  Eigen::VectorXd var = (samples.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
  return Scaler(std::move(mean), var.array().sqrt().matrix());
}

Eigen::VectorXd Scaler::transform(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (v.size() != size()) throw StructuralError("scaler: vector length does not match");
  return ((v - mean_).array() * inv_stddev_.array()).matrix();
}

void Scaler::transform_rows_in_place(Eigen::MatrixXd& samples) const {
  if (samples.cols() != size()) throw StructuralError("scaler: matrix width does not match");
  samples.rowwise() -= mean_.transpose();
  samples.array().rowwise() *= inv_stddev_.transpose().array();
}

Eigen::VectorXd Scaler::inverse_transform(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (v.size() != size()) throw StructuralError("scaler: vector length does not match");
  const Eigen::VectorXd scale = (stddev_.array() < kScalerEpsilon).select(0.0, stddev_.array()).matrix();
  return (v.array() * scale.array()).matrix() + mean_;
}

Scaler Scaler::restricted(std::span<const Index> indices) const {
  Eigen::VectorXd m(static_cast<Index>(indices.size())), s(static_cast<Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    m[static_cast<Index>(i)] = mean_[indices[i]];
    s[static_cast<Index>(i)] = stddev_[indices[i]];
  }
  return Scaler(std::move(m), std::move(s));
}

Scaler fit_scaler(std::span<const FeatureVector> vectors) {
  if (vectors.size() < 2) throw InvalidInputError("fit_scaler needs at least two vectors");
  return Scaler::fit(stack_rows(vectors));
}

FeatureVector apply_scaler(const Scaler& s, const FeatureVector& v) { return {s.transform(v.values), v.layout}; }

}  // namespace formcheck
