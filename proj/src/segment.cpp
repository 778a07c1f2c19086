#include "formcheck/segment.hpp"

#include <cmath>

namespace formcheck {
namespace {

constexpr const char* kNames[] = {"preparation", "going_down", "is_down", "going_up", "wrap_up"};

std::vector<double> moving_average(const std::vector<double>& v, int window) {
  const auto n = static_cast<Index>(v.size());
  const Index half = window / 2;
  std::vector<double> prefix(v.size() + 1, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) prefix[i + 1] = prefix[i] + v[i];
  std::vector<double> out(v.size());
  for (Index i = 0; i < n; ++i) {
    const Index lo = std::max<Index>(0, i - half);
    const Index hi = std::min<Index>(n - 1, i + half);
    out[static_cast<std::size_t>(i)] =
        (prefix[static_cast<std::size_t>(hi + 1)] - prefix[static_cast<std::size_t>(lo)]) / static_cast<double>(hi - lo + 1);
  }
  return out;
}

std::vector<double> derivative(const std::vector<double>& v, double rate) {
  const std::size_t n = v.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  d[0] = (v[1] - v[0]) * rate;
  d[n - 1] = (v[n - 1] - v[n - 2]) * rate;
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (v[i + 1] - v[i - 1]) * rate * 0.5;
  return d;
}

}  // namespace

std::string_view to_string(SegmentLabel label) { return kNames[static_cast<int>(label)]; }

SegmentLabel segment_label_from_string(std::string_view name) {
  for (SegmentLabel l : kSegmentLabels) {
    if (to_string(l) == name) return l;
  }
  throw InvalidInputError("unknown movement segment '" + std::string(name) + "'");
}

bool Segmentation::contains(SegmentLabel label) const {
  for (const auto& b : boundaries) {
    if (b.label == label) return true;
  }
  return false;
}

const SegmentBoundary& Segmentation::get(SegmentLabel label) const {
  for (const auto& b : boundaries) {
    if (b.label == label) return b;
  }
  throw NotFoundError("segmentation has no '" + std::string(to_string(label)) + "' segment");
}

std::vector<SegmentLabel> Segmentation::labels() const {
  std::vector<SegmentLabel> out;
  for (const auto& b : boundaries) out.push_back(b.label);
  return out;
}

void validate_segmentation(const Segmentation& s, Index frame_count) {
  if (s.boundaries.empty()) throw InvalidInputError("segmentation is empty");
  Index expected_start = 0;
  int previous = -1;
  for (const auto& b : s.boundaries) {
    if (static_cast<int>(b.label) <= previous) throw InvalidInputError("segment labels out of canonical order");
    if (b.start != expected_start || b.end < b.start) {
      throw InvalidInputError("segment '" + std::string(to_string(b.label)) + "' is not contiguous");
    }
    previous = static_cast<int>(b.label);
    expected_start = b.end + 1;
  }
  if (expected_start != frame_count) throw InvalidInputError("segments do not cover the trajectory");
}

std::vector<double> knee_flexion_signal(const Trajectory& t, const SegmentConfig& cfg) {
  const Index left = t.skeleton()->index_of(cfg.left_knee);
  const Index right = t.skeleton()->index_of(cfg.right_knee);
  std::vector<double> signal;
  signal.reserve(static_cast<std::size_t>(t.size()));
  constexpr double to_deg = 180.0 / std::numbers::pi;
  for (const Frame& f : t.frames()) {
    const double l = to_euler(f.rotation(left)).flexion_extension;
    const double r = to_euler(f.rotation(right)).flexion_extension;
    signal.push_back(0.5 * (l + r) * to_deg);
  }
  return signal;
}

Segmentation segment(const Trajectory& t, const SegmentConfig& cfg) {
  if (cfg.smoothing_window < 1 || cfg.smoothing_window % 2 == 0) {
    throw ConfigError("segmentation smoothing window must be a positive odd number");
  }
  if (cfg.min_duration < 1 || !(cfg.offset_speed > 0) || !(cfg.onset_speed > cfg.offset_speed)) {
    throw ConfigError("segmentation requires min_duration >= 1 and onset_speed > offset_speed > 0");
  }
  const Index n = t.size();
  const Index min_len = cfg.min_duration;
  if (n < 5 * min_len) {
    throw InvalidInputError("trajectory '" + t.sample_id() + "' is shorter than five minimum-length segments");
  }

  const std::vector<double> knee = moving_average(knee_flexion_signal(t, cfg), cfg.smoothing_window);
  const std::vector<double> speed = derivative(knee, t.sample_rate());
  std::vector<double> height;
  height.reserve(static_cast<std::size_t>(n));
  for (const Frame& f : t.frames()) height.push_back(f.positions()(1, 0));
  height = moving_average(height, cfg.smoothing_window);

  int state = static_cast<int>(SegmentLabel::preparation);
  std::array<Index, 5> starts{0, 0, 0, 0, 0};
  Index run_start = 0;  // first frame of the current run with |speed| >= offset
  for (Index i = 0; i < n && state != static_cast<int>(SegmentLabel::wrap_up); ++i) {
    const double v = std::abs(speed[static_cast<std::size_t>(i)]);
    if (v < cfg.offset_speed) run_start = i + 1;
    const Index seg_start = starts[static_cast<std::size_t>(state)];
    const auto label = static_cast<SegmentLabel>(state);

    const bool onset_state = label == SegmentLabel::preparation || label == SegmentLabel::is_down;
    if (onset_state && v > cfg.onset_speed) {
      const Index begin = std::max(run_start, seg_start + min_len);
      if (begin > i) continue;
      const double dh = height[static_cast<std::size_t>(i)] - height[static_cast<std::size_t>(begin)];
      const bool descending = dh < 0.0;
      if ((label == SegmentLabel::preparation && descending) || (label == SegmentLabel::is_down && !descending)) {
        ++state;
        starts[static_cast<std::size_t>(state)] = begin;
      }
    } else if (!onset_state && v < cfg.offset_speed && i - seg_start >= min_len) {
      ++state;
      starts[static_cast<std::size_t>(state)] = i;
    }
  }

  const auto reached = static_cast<SegmentLabel>(state);
  if (reached != SegmentLabel::wrap_up) {
    const std::string name(to_string(reached));
    throw SegmentationError(name, "segmentation of '" + t.sample_id() + "' failed: stopped in state " + name);
  }
  if (n - starts[4] < min_len) {
    throw SegmentationError("wrap_up", "segmentation of '" + t.sample_id() + "' failed: wrap_up shorter than " +
                                           std::to_string(min_len) + " frames");
  }

  Segmentation s;
  for (std::size_t k = 0; k < kSegmentLabels.size(); ++k) {
    const Index end = k + 1 < kSegmentLabels.size() ? starts[k + 1] - 1 : n - 1;
    s.boundaries.push_back({kSegmentLabels[k], starts[k], end});
  }
  return s;
}

Trajectory extract_segment(const Trajectory& t, const Segmentation& s, SegmentLabel label) {
  const SegmentBoundary& b = s.get(label);
  return t.slice(b.start, b.end);
}

}  // namespace formcheck
