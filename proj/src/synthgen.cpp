#include "formcheck/synthgen.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "formcheck/learn.hpp"
#include "formcheck/parallel.hpp"

namespace formcheck {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Standard skeleton joint indices.
enum J : int {
  hips = 0, spine, chest, neck, head,
  l_shoulder, l_arm, l_forearm, l_hand,
  r_shoulder, r_arm, r_forearm, r_hand,
  l_upleg, l_leg, l_foot, r_upleg, r_leg, r_foot,
  joint_count
};

constexpr double kAnchorHeight = 0.08;

// Thresholds of the geometric oracles; the direction is in kAbove.
constexpr double kThreshold[kPatternCount] = {
    10.0,   // max neck flexion, degrees
    2.5,    // preparation ankle gap / hip gap
    0.02,   // lean onset minus knee onset, seconds
    5.0,    // spine rounding at the bottom, degrees
    36.5,   // lean at the bottom, degrees
    0.25,   // detrended lateral knee RMS, degrees
    -2.0,   // knee flexion over the last 0.25 s, degrees
    3.0,    // largest smoothed left/right difference, degrees
    0.50,   // lowest root height / standing root height
    0.85,   // descent time / ascent time
};
constexpr bool kAbove[kPatternCount] = {true, false, true, false, true, true, true, true, false, false};

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

double ease(double u) { return 0.5 * (1.0 - std::cos(std::numbers::pi * std::clamp(u, 0.0, 1.0))); }

// Standing until a, eased to bottom over [a, b], held until c, eased to end over [c, d].
struct Profile {
  double standing = 0.0, bottom = 0.0, end = 0.0;
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
  double at(double t) const {
    if (t <= a) return standing;
    if (t < b) return standing + (bottom - standing) * ease((t - a) / (b - a));
    if (t <= c) return bottom;
    if (t < d) return bottom + (end - bottom) * ease((t - c) / (d - c));
    return end;
  }
};

// 1 inside [a, b], eased over `ramp` on both sides within the window.
double window(double t, double a, double b, double ramp) {
  if (t <= a || t >= b) return 0.0;
  return ease((t - a) / ramp) * ease((b - t) / ramp);
}

struct Plan {
  std::array<double, 6> times{};  // phase starts, then the end time
  Profile lean, thigh, knee, curvature, arm, plantar, arch;
  double stance = 0.0;
  double tremble_amp = 0.0, tremble_freq = 0.0, tremble_phase = 0.0;
  double tremble_a = 0.0, tremble_b = 0.0;
  int asym_channel = 0;
  double asym_offset = 0.0, asym_a = 0.0, asym_b = 0.0, asym_ramp = 0.1;
  bool asym_left = true;
};

std::mt19937_64 edit_rng(const SquatParams& p, ErrorPattern e) {
  return std::mt19937_64(mix_seed(p.noise_seed, 0x65646974ULL + index_of(e)));
}

Plan make_plan(const SquatParams& p) {
  const SubjectStyle& s = p.style;
  const auto& in = p.intensity;
  const auto intensity = [&](ErrorPattern e) { return in[index_of(e)]; };
  Plan plan;

  std::array<double, 5> d = p.durations;
  const double dyn = intensity(ErrorPattern::wrong_dynamics);
  const double f = 1.0 / (1.0 + 1.5 * dyn);
  d[1] *= f;
  d[3] /= f;
  plan.times[0] = 0.0;
  for (std::size_t k = 0; k < 5; ++k) plan.times[k + 1] = plan.times[k] + d[k];
  const double t1 = plan.times[1], t2 = plan.times[2], t3 = plan.times[3], t4 = plan.times[4];

  const auto keyed = [&](double standing, double bottom, double end) {
    return Profile{standing, bottom, end, t1, t2, t3, t4};
  };

  double knee_bottom = s.knee_bottom, thigh_bottom = s.thigh_bottom;
  const double deep = intensity(ErrorPattern::too_deep);
  thigh_bottom += 30.0 * deep;
  knee_bottom -= 35.0 * deep;
  const double knee_end = s.knee_standing + 12.0 * intensity(ErrorPattern::legs_extended_at_end);
  plan.knee = keyed(s.knee_standing, knee_bottom, knee_end);
  plan.thigh = keyed(-0.5 * s.knee_standing, thigh_bottom, -0.5 * knee_end);

  const double lean_standing = 2.0;
  plan.lean = keyed(lean_standing,
                    s.lean_bottom + 24.0 * intensity(ErrorPattern::incorrect_weight_distribution),
                    lean_standing);
  const double late = intensity(ErrorPattern::hips_do_not_initiate);
  plan.lean.a = std::min(t1 - s.hip_lead + late * (s.hip_lead + 0.5), t2 - 0.2);

  plan.curvature = keyed(s.curvature_standing,
                         s.curvature_bottom - 16.0 * intensity(ErrorPattern::hollow_back),
                         s.curvature_standing);
  plan.arm = keyed(10.0, s.arm_flex_bottom, 10.0);
  plan.plantar = keyed(0.0, -8.0 * dyn, 0.0);
  plan.arch = keyed(0.0, 40.0 * intensity(ErrorPattern::arched_neck), 0.0);
  plan.stance = s.stance_abduction - 12.0 * intensity(ErrorPattern::feet_distance);

  const double tremble = intensity(ErrorPattern::knees_tremble_sideways);
  if (tremble > 0.0) {
    std::mt19937_64 rng = edit_rng(p, ErrorPattern::knees_tremble_sideways);
    plan.tremble_amp = 5.0 * tremble;
    plan.tremble_freq = uniform(rng, 3.0, 6.0);
    plan.tremble_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    plan.tremble_a = t1;
    plan.tremble_b = t4;
  }

  const double asym = intensity(ErrorPattern::not_symmetric);
  if (asym > 0.0) {
    std::mt19937_64 rng = edit_rng(p, ErrorPattern::not_symmetric);
    plan.asym_channel = std::uniform_int_distribution<int>(0, 2)(rng);
    plan.asym_left = std::uniform_int_distribution<int>(0, 1)(rng) == 0;
    const double sign = std::uniform_int_distribution<int>(0, 1)(rng) == 0 ? 1.0 : -1.0;
    const int phase = std::uniform_int_distribution<int>(0, 3)(rng);
    plan.asym_offset = sign * 25.0 * asym;
    plan.asym_a = phase == 3 ? t1 : plan.times[static_cast<std::size_t>(phase) + 1];
    plan.asym_b = phase == 3 ? t4 : plan.times[static_cast<std::size_t>(phase) + 2];
    plan.asym_ramp = std::min(0.2, (plan.asym_b - plan.asym_a) / 3.0);
  }
  return plan;
}

// Slow drift (two sinusoids) plus a little white noise on every channel.
class ChannelNoise {
 public:
  ChannelNoise(std::uint64_t seed, double level, Index frames) : white_(static_cast<std::size_t>(frames) * kSize) {
    std::mt19937_64 rng(seed);
    for (auto& c : waves_) {
      for (auto& w : c) w = {level * uniform(rng, 0.25, 0.5), uniform(rng, 0.2, 0.8), uniform(rng, 0.0, 6.283185307179586)};
    }
    std::normal_distribution<double> white(0.0, 0.03);
    for (double& v : white_) v = white(rng);
  }

  double at(Index frame, double t, int joint, int channel) const {
    const int c = joint * 3 + channel;
    double v = white_[static_cast<std::size_t>(frame) * kSize + static_cast<std::size_t>(c)];
    for (const Wave& w : waves_[static_cast<std::size_t>(c)]) {
      v += w.amp * std::sin(2.0 * std::numbers::pi * w.freq * t + w.phase);
    }
    return v;
  }

 private:
  static constexpr std::size_t kSize = static_cast<std::size_t>(joint_count) * 3;
  struct Wave {
    double amp, freq, phase;
  };
  std::array<std::array<Wave, 2>, kSize> waves_{};
  std::vector<double> white_;
};

using Pose = std::array<std::array<double, 3>, joint_count>;  // flexion, abduction, twist in degrees

Pose pose_at(const Plan& plan, const SubjectStyle& s, double t) {
  Pose e{};
  const double lean = plan.lean.at(t), thigh = plan.thigh.at(t), knee = plan.knee.at(t);
  const double curve = plan.curvature.at(t);
  e[hips] = {-lean, 0.0, 0.0};
  e[spine] = {-0.5 * curve, 0.0, 0.0};
  e[chest] = {-0.5 * curve, 0.0, 0.0};
  e[neck] = {s.neck + plan.arch.at(t), 0.0, 0.0};
  const double arm = plan.arm.at(t);
  const double ankle = -(thigh + knee) + plan.plantar.at(t);
  const double tremble = plan.tremble_amp > 0.0
                             ? plan.tremble_amp * window(t, plan.tremble_a, plan.tremble_b, 0.2) *
                                   std::sin(2.0 * std::numbers::pi * plan.tremble_freq * (t - plan.tremble_a) +
                                            plan.tremble_phase)
                             : 0.0;
  // Left side values; the right side mirrors abduction and twist.
  for (int side = 0; side < 2; ++side) {
    const double m = side == 0 ? 1.0 : -1.0;
    const int sh = side == 0 ? l_shoulder : r_shoulder;
    e[sh] = {0.0, m * s.shoulder_abduction, 0.0};
    e[sh + 1] = {arm, 0.0, m * s.arm_twist};
    e[sh + 2] = {s.elbow_flex, 0.0, 0.0};
    const int hip = side == 0 ? l_upleg : r_upleg;
    e[hip] = {thigh + lean, m * plan.stance, m * s.hip_twist};
    e[hip + 1] = {knee, m * (s.knee_valgus + tremble), m * s.knee_twist};
    e[hip + 2] = {ankle, 0.0, 0.0};
  }
  if (plan.asym_offset != 0.0) {
    const double off = plan.asym_offset * window(t, plan.asym_a, plan.asym_b, plan.asym_ramp);
    const int base = plan.asym_channel == 2 ? (plan.asym_left ? l_upleg : r_upleg)
                                            : (plan.asym_left ? l_shoulder : r_shoulder);
    if (plan.asym_channel == 0) e[base][1] += off;
    if (plan.asym_channel == 1) e[base + 1][0] += off;
    if (plan.asym_channel == 2) e[base][2] += off;
  }
  return e;
}

// Moving average over a centered window, shrunk at the edges.
std::vector<double> smooth(const std::vector<double>& v, int window) {
  const auto n = static_cast<Index>(v.size());
  std::vector<double> prefix(v.size() + 1, 0.0);
  std::partial_sum(v.begin(), v.end(), prefix.begin() + 1);
  std::vector<double> out(v.size());
  const Index half = window / 2;
  for (Index i = 0; i < n; ++i) {
    const Index lo = std::max<Index>(0, i - half), hi = std::min(n - 1, i + half);
    out[static_cast<std::size_t>(i)] =
        (prefix[static_cast<std::size_t>(hi + 1)] - prefix[static_cast<std::size_t>(lo)]) / static_cast<double>(hi - lo + 1);
  }
  return out;
}

// Euler channel of a joint over all frames, degrees.
std::vector<double> angle(const Trajectory& t, const char* joint, int channel) {
  const Index j = t.skeleton()->index_of(joint);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(t.size()));
  for (const Frame& f : t.frames()) {
    const EulerTriple e = to_euler(f.rotation(j));
    const double v = channel == 0 ? e.flexion_extension : channel == 1 ? e.abduction_adduction : e.twist;
    out.push_back(v / kDeg);
  }
  return out;
}

std::vector<double> position(const Trajectory& t, const char* joint, int axis) {
  const Index j = t.skeleton()->index_of(joint);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(t.size()));
  for (const Frame& f : t.frames()) out.push_back(f.positions()(axis, j));
  return out;
}

std::vector<double> combine(const std::vector<double>& a, const std::vector<double>& b, double wa, double wb) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = wa * a[i] + wb * b[i];
  return out;
}

double mean_range(const std::vector<double>& v, Index lo, Index hi) {
  lo = std::max<Index>(lo, 0);
  hi = std::min<Index>(hi, static_cast<Index>(v.size()) - 1);
  double s = 0.0;
  for (Index i = lo; i <= hi; ++i) s += v[static_cast<std::size_t>(i)];
  return s / static_cast<double>(hi - lo + 1);
}

std::vector<double> knee_signal(const Trajectory& t) {
  return smooth(combine(angle(t, "l_leg", 0), angle(t, "r_leg", 0), 0.5, 0.5), 11);
}

Index bottom_frame(const Trajectory& t) {
  const std::vector<double> y = smooth(position(t, "hips", 1), 11);
  return static_cast<Index>(std::min_element(y.begin(), y.end()) - y.begin());
}

// First frame at or after `from` where the signal crosses `level` in the given direction.
Index crossing(const std::vector<double>& v, Index from, double level, bool downward) {
  for (auto i = static_cast<std::size_t>(std::max<Index>(from, 0)); i < v.size(); ++i) {
    if (downward ? v[i] < level : v[i] > level) return static_cast<Index>(i);
  }
  return static_cast<Index>(v.size()) - 1;
}

double dynamics_ratio(const Trajectory& t) {
  const std::vector<double> k = knee_signal(t);
  const auto n = static_cast<Index>(k.size());
  const double k0 = mean_range(k, 0, 11), k1 = mean_range(k, n - 12, n - 1);
  const auto low = std::min_element(k.begin(), k.end());
  const double kb = *low;
  const Index a10 = crossing(k, 0, k0 - 0.1 * (k0 - kb), true);
  const Index a90 = crossing(k, a10, k0 - 0.9 * (k0 - kb), true);
  // Ascent: leave the bottom band for the last time, then reach 90% of the way up.
  const double band = kb + 0.1 * (k1 - kb);
  Index b10 = a90;
  for (Index i = a90; i < n; ++i) {
    if (k[static_cast<std::size_t>(i)] <= band) b10 = i;
  }
  const Index b90 = crossing(k, b10, kb + 0.9 * (k1 - kb), false);
  return static_cast<double>(a90 - a10) / static_cast<double>(std::max<Index>(1, b90 - b10));
}

void check_intensity(double v, const char* what) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw InvalidInputError(std::string(what) + " intensity must lie in [0, 1]");
  }
}

}  // namespace

SubjectStyle make_style(std::uint64_t seed, int subject) {
  std::mt19937_64 rng(mix_seed(seed, 0x7374796c65ULL + static_cast<std::uint64_t>(subject)));
  SubjectStyle s;
  s.tempo = uniform(rng, 0.9, 1.1);
  s.limb_scale = uniform(rng, 0.9, 1.1);
  s.noise = uniform(rng, 0.2, 0.45);
  s.thigh_bottom = uniform(rng, 81.0, 87.0);
  s.knee_bottom = uniform(rng, -118.0, -112.0);
  s.knee_standing = uniform(rng, -6.0, -4.0);
  s.lean_bottom = uniform(rng, 29.0, 33.0);
  s.curvature_bottom = uniform(rng, 8.5, 11.5);
  s.curvature_standing = uniform(rng, 0.5, 2.5);
  s.stance_abduction = uniform(rng, 11.0, 13.5);
  s.neck = uniform(rng, -4.0, 4.0);
  s.arm_flex_bottom = uniform(rng, 60.0, 85.0);
  s.elbow_flex = uniform(rng, 5.0, 20.0);
  s.hip_lead = uniform(rng, 0.09, 0.14);
  s.hip_twist = uniform(rng, -5.0, 5.0);
  s.knee_twist = uniform(rng, -3.0, 3.0);
  s.knee_valgus = uniform(rng, -2.0, 2.0);
  s.shoulder_abduction = uniform(rng, 2.0, 8.0);
  s.arm_twist = uniform(rng, -10.0, 10.0);
  return s;
}

SquatParams sample_params(const SubjectStyle& style, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x73616d706c65ULL));
  SquatParams p;
  SubjectStyle& s = p.style;
  s = style;
  const auto jitter = [&](double& v, double amount, double lo, double hi) {
    v = std::clamp(v + uniform(rng, -amount, amount), lo, hi);
  };
  jitter(s.thigh_bottom, 1.0, 80.0, 88.0);
  jitter(s.knee_bottom, 1.5, -120.0, -110.0);
  jitter(s.knee_standing, 0.3, -6.5, -3.5);
  jitter(s.lean_bottom, 0.7, 28.0, 34.0);
  jitter(s.curvature_bottom, 0.5, 8.0, 12.0);
  jitter(s.curvature_standing, 0.3, 0.0, 3.0);
  jitter(s.stance_abduction, 0.4, 10.5, 14.0);
  jitter(s.neck, 0.5, -5.0, 5.0);
  jitter(s.arm_flex_bottom, 2.0, 55.0, 90.0);
  jitter(s.elbow_flex, 1.0, 0.0, 25.0);
  jitter(s.hip_lead, 0.01, 0.08, 0.15);
  static constexpr std::array<std::pair<double, double>, 5> ranges{
      {{0.6, 0.9}, {1.1, 1.3}, {0.3, 0.5}, {0.85, 0.95}, {0.6, 0.9}}};
  for (std::size_t k = 0; k < 5; ++k) p.durations[k] = uniform(rng, ranges[k].first, ranges[k].second) * s.tempo;
  p.noise_seed = mix_seed(seed, 0x6e6f697365ULL);
  return p;
}

double min_detectable_intensity(ErrorPattern p) {
  switch (p) {
    case ErrorPattern::knees_tremble_sideways:
    case ErrorPattern::not_symmetric:
      return 0.2;
    default:
      return 0.45;
  }
}

SquatParams inject_error(SquatParams params, const ErrorSpec& spec) {
  check_intensity(spec.intensity, to_string(spec.pattern).data());
  params.intensity[index_of(spec.pattern)] = spec.intensity;
  return params;
}

GeneratedSquat synthesize(const SquatParams& params, const std::string& subject_id, const std::string& sample_id) {
  for (double v : params.intensity) check_intensity(v, "error");
  if (!(params.sample_rate > 0.0)) throw InvalidInputError("sample rate must be positive");
  const Plan plan = make_plan(params);
  const SubjectStyle& style = params.style;
  const auto skeleton = Skeleton::standard();
  const double rate = params.sample_rate;
  const auto n = static_cast<Index>(std::floor(plan.times[5] * rate)) + 1;
  const ChannelNoise noise(params.noise_seed, style.noise, n);

  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(n));
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  for (Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const Pose pose = pose_at(plan, style, t);
    std::array<Quaternion, joint_count> global;
    Eigen::Matrix4Xd rot(4, joint_count);
    Eigen::Matrix3Xd pos(3, joint_count);
    for (int j = 0; j < joint_count; ++j) {
      EulerTriple e;
      e.flexion_extension = (pose[j][0] + noise.at(i, t, j, 0)) * kDeg;
      e.abduction_adduction = (pose[j][1] + noise.at(i, t, j, 1)) * kDeg;
      e.twist = (pose[j][2] + noise.at(i, t, j, 2)) * kDeg;
      const Quaternion local = from_euler(e);
      rot.col(j) << local.w(), local.x(), local.y(), local.z();
      const Joint& joint = skeleton->joint(j);
      if (joint.parent) {
        const auto parent = static_cast<int>(*joint.parent);
        global[static_cast<std::size_t>(j)] = global[static_cast<std::size_t>(parent)] * local;
        pos.col(j) = pos.col(parent) + global[static_cast<std::size_t>(parent)] * (joint.offset * style.limb_scale);
      } else {
        global[0] = local;
        pos.col(0).setZero();
      }
    }
    // Feet stay on the floor anchor.
    const Eigen::Vector3d feet = 0.5 * (pos.col(l_foot) + pos.col(r_foot));
    const Eigen::Vector3d shift = Eigen::Vector3d(0.0, kAnchorHeight * style.limb_scale, 0.0) - feet;
    pos.colwise() += shift;
    if (i == 0) origin = Eigen::Vector3d(pos(0, hips), 0.0, pos(2, hips));
    pos.colwise() -= origin;
    frames.emplace_back(std::move(rot), std::move(pos));
  }

  GeneratedSquat out{params, Trajectory(skeleton, std::move(frames), rate, subject_id, sample_id), {}};
  std::array<Index, 5> starts{};
  for (std::size_t k = 0; k < 5; ++k) starts[k] = static_cast<Index>(std::lround(plan.times[k] * rate));
  for (std::size_t k = 0; k < 5; ++k) {
    const Index end = k + 1 < 5 ? starts[k + 1] - 1 : n - 1;
    out.truth.boundaries.push_back({kSegmentLabels[k], starts[k], end});
  }
  return out;
}

double geometric_statistic(ErrorPattern p, const Trajectory& t) {
  if (t.joint_count() != joint_count) throw StructuralError("geometric checks need the standard skeleton");
  const auto n = static_cast<Index>(t.size());
  const double rate = t.sample_rate();
  switch (p) {
    case ErrorPattern::arched_neck: {
      const std::vector<double> v = smooth(angle(t, "neck", 0), 11);
      return *std::max_element(v.begin(), v.end());
    }
    case ErrorPattern::feet_distance: {
      const std::vector<double> feet =
          combine(position(t, "l_foot", 2), position(t, "r_foot", 2), -1.0, 1.0);
      const std::vector<double> hips_gap =
          combine(position(t, "l_upleg", 2), position(t, "r_upleg", 2), -1.0, 1.0);
      const auto last = static_cast<Index>(0.25 * rate);
      return mean_range(feet, 0, last) / mean_range(hips_gap, 0, last);
    }
    case ErrorPattern::hips_do_not_initiate: {
      const std::vector<double> k = knee_signal(t);
      std::vector<double> lean = smooth(angle(t, "hips", 0), 11);
      for (double& v : lean) v = -v;
      const double k0 = mean_range(k, 0, 11), kb = *std::min_element(k.begin(), k.end());
      const double l0 = mean_range(lean, 0, 11), lb = *std::max_element(lean.begin(), lean.end());
      const Index knee_onset = crossing(k, 0, k0 - 0.1 * (k0 - kb), true);
      const Index lean_onset = crossing(lean, 0, l0 + 0.1 * (lb - l0), false);
      return static_cast<double>(lean_onset - knee_onset) / rate;
    }
    case ErrorPattern::hollow_back: {
      const Index b = bottom_frame(t);
      const std::vector<double> curve = combine(angle(t, "spine", 0), angle(t, "chest", 0), -1.0, -1.0);
      return mean_range(curve, b - 6, b + 6);
    }
    case ErrorPattern::incorrect_weight_distribution: {
      const Index b = bottom_frame(t);
      const std::vector<double> root = angle(t, "hips", 0);
      return -mean_range(root, b - 6, b + 6);
    }
    case ErrorPattern::knees_tremble_sideways: {
      const std::vector<double> lateral = combine(angle(t, "l_leg", 1), angle(t, "r_leg", 1), 0.5, -0.5);
      const std::vector<double> trend = smooth(lateral, 61);
      double ss = 0.0;
      for (std::size_t i = 0; i < lateral.size(); ++i) ss += (lateral[i] - trend[i]) * (lateral[i] - trend[i]);
      return std::sqrt(ss / static_cast<double>(lateral.size()));
    }
    case ErrorPattern::legs_extended_at_end: {
      const std::vector<double> k = combine(angle(t, "l_leg", 0), angle(t, "r_leg", 0), 0.5, 0.5);
      return mean_range(k, n - static_cast<Index>(0.25 * rate), n - 1);
    }
    case ErrorPattern::not_symmetric: {
      const std::vector<double> diffs[] = {
          smooth(combine(angle(t, "l_shoulder", 1), angle(t, "r_shoulder", 1), 1.0, 1.0), 21),
          smooth(combine(angle(t, "l_arm", 0), angle(t, "r_arm", 0), 1.0, -1.0), 21),
          smooth(combine(angle(t, "l_upleg", 2), angle(t, "r_upleg", 2), 1.0, 1.0), 21),
      };
      double worst = 0.0;
      for (const auto& d : diffs) {
        for (double v : d) worst = std::max(worst, std::abs(v));
      }
      return worst;
    }
    case ErrorPattern::too_deep: {
      const std::vector<double> y = smooth(position(t, "hips", 1), 11);
      return *std::min_element(y.begin(), y.end()) / mean_range(y, 0, 11);
    }
    case ErrorPattern::wrong_dynamics:
      return dynamics_ratio(t);
  }
  return 0.0;
}

bool geometric_check(ErrorPattern p, const Trajectory& t) {
  const double v = geometric_statistic(p, t);
  const double thr = kThreshold[index_of(p)];
  return kAbove[index_of(p)] ? v > thr : v < thr;
}

bool is_correct_squat(const Trajectory& t) {
  for (ErrorPattern p : kErrorPatterns) {
    if (geometric_check(p, t)) return false;
  }
  return true;
}

std::array<PatternRate, kPatternCount> reference_rates() {
  static constexpr int erroneous[] = {33, 45, 23, 34, 51, 23, 42, 17, 51, 61};
  static constexpr int correct[] = {29, 33, 51, 42, 16, 33, 38, 46, 34, 27};
  std::array<PatternRate, kPatternCount> out{};
  for (std::size_t p = 0; p < kPatternCount; ++p) {
    const double labeled = erroneous[p] + correct[p];
    out[p] = {erroneous[p] / labeled, labeled / 95.0};
  }
  return out;
}

std::pair<double, double> default_intensity_range(ErrorPattern p) {
  if (p == ErrorPattern::not_symmetric || p == ErrorPattern::knees_tremble_sideways) return {0.2, 0.35};
  return {0.5, 1.0};
}

Corpus generate_corpus(const CorpusConfig& cfg) {
  if (cfg.subjects < 1 || cfg.samples_per_subject < 1 || cfg.single_sample_subjects < 0 ||
      cfg.single_sample_subjects > cfg.subjects) {
    throw InvalidInputError("corpus shape must have at least one subject and one sample per subject");
  }
  std::array<std::pair<double, double>, kPatternCount> ranges{};
  for (ErrorPattern p : kErrorPatterns) {
    const PatternRate& r = cfg.rates[index_of(p)];
    if (!(r.error_rate >= 0.0 && r.error_rate <= 1.0) || !(r.labeled_fraction >= 0.0 && r.labeled_fraction <= 1.0)) {
      throw InvalidInputError("rates for '" + std::string(to_string(p)) + "' must lie in [0, 1]");
    }
    ranges[index_of(p)] = cfg.intensity[index_of(p)].value_or(default_intensity_range(p));
    const auto [lo, hi] = ranges[index_of(p)];
    if (!(lo >= 0.0 && lo <= hi && hi <= 1.0)) {
      throw InvalidInputError("intensity range for '" + std::string(to_string(p)) + "' must lie in [0, 1]");
    }
  }

  struct Slot {
    int subject;
    int repetition;
  };
  std::vector<Slot> slots;
  for (int s = 0; s < cfg.subjects; ++s) {
    const int reps = s >= cfg.subjects - cfg.single_sample_subjects ? 1 : cfg.samples_per_subject;
    for (int r = 0; r < reps; ++r) slots.push_back({s, r});
  }
  const std::size_t n = slots.size();

  std::vector<LabelRow> labels(n);
  std::vector<std::array<bool, kPatternCount>> truth(n);
  std::vector<std::array<double, kPatternCount>> intensity(n);
  for (ErrorPattern p : kErrorPatterns) {
    const std::size_t pi = index_of(p);
    std::mt19937_64 rng(mix_seed(cfg.seed, 0x6c6162656cULL + pi));
    const PatternRate& r = cfg.rates[pi];
    const auto labeled = static_cast<std::size_t>(std::lround(r.labeled_fraction * static_cast<double>(n)));
    const auto present = static_cast<std::size_t>(std::lround(r.error_rate * static_cast<double>(labeled)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::bernoulli_distribution hidden(r.error_rate);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = order[k];
      const bool has = k < labeled ? k < present : hidden(rng);
      labels[i][pi] = k < labeled ? (has ? Label::present : Label::absent) : Label::unlabeled;
      truth[i][pi] = has;
      intensity[i][pi] = has ? uniform(rng, ranges[pi].first, ranges[pi].second) : 0.0;
    }
  }
  // A sample without any label borrows one from a sample that has several.
  const auto label_count = [&](std::size_t i) {
    return std::count_if(labels[i].begin(), labels[i].end(), [](Label l) { return l != Label::unlabeled; });
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (label_count(i) > 0) continue;
    bool fixed = false;
    for (std::size_t j = 0; j < n && !fixed; ++j) {
      if (label_count(j) < 2) continue;
      for (std::size_t p = 0; p < kPatternCount && !fixed; ++p) {
        if (labels[j][p] == Label::unlabeled) continue;
        std::swap(labels[i][p], labels[j][p]);
        std::swap(truth[i][p], truth[j][p]);
        std::swap(intensity[i][p], intensity[j][p]);
        fixed = true;
      }
    }
    if (!fixed) throw InvalidInputError("labeled fractions too small to label every sample");
  }

  std::vector<SubjectStyle> styles;
  for (int s = 0; s < cfg.subjects; ++s) styles.push_back(make_style(cfg.seed, s));

  Corpus c;
  std::vector<std::optional<GeneratedSquat>> generated(n);
  parallel_for(n, [&](std::size_t i) {
    const Slot& slot = slots[i];
    SquatParams params = sample_params(
        styles[static_cast<std::size_t>(slot.subject)],
        mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(slot.subject)), static_cast<std::uint64_t>(slot.repetition)));
    for (ErrorPattern p : kErrorPatterns) {
      if (truth[i][index_of(p)]) params = inject_error(params, {p, intensity[i][index_of(p)]});
    }
    char subject[16];
    std::snprintf(subject, sizeof subject, "s%02d", slot.subject + 1);
    const std::string sample = std::string(subject) + "_r" + std::to_string(slot.repetition + 1);
    generated[i] = synthesize(params, subject, sample);
  });
  for (std::size_t i = 0; i < n; ++i) {
    c.samples.push_back({std::move(generated[i]->trajectory), labels[i]});
    c.truth_segments.push_back(std::move(generated[i]->truth));
    c.params.push_back(generated[i]->params);
  }
  c.truth = std::move(truth);
  return c;
}

}  // namespace formcheck
