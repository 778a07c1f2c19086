#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "formcheck/motion.hpp"

namespace formcheck {

enum class SegmentLabel { preparation = 0, going_down, is_down, going_up, wrap_up };

inline constexpr std::array<SegmentLabel, 5> kSegmentLabels = {
    SegmentLabel::preparation, SegmentLabel::going_down, SegmentLabel::is_down, SegmentLabel::going_up,
    SegmentLabel::wrap_up};

std::string_view to_string(SegmentLabel label);
/// Throws InvalidInputError for unknown names.
SegmentLabel segment_label_from_string(std::string_view name);

struct SegmentBoundary {
  SegmentLabel label;
  Index start;  // inclusive
  Index end;    // inclusive
  Index length() const { return end - start + 1; }
  bool operator==(const SegmentBoundary&) const = default;
};

/// Contiguous phases in canonical order covering [0, n-1].
struct Segmentation {
  std::vector<SegmentBoundary> boundaries;

  bool contains(SegmentLabel label) const;
  /// Throws NotFoundError.
  const SegmentBoundary& get(SegmentLabel label) const;
  std::vector<SegmentLabel> labels() const;
  bool operator==(const Segmentation&) const = default;
};

/// Throws InvalidInputError unless `s` tiles [0, frame_count-1] in canonical order.
void validate_segmentation(const Segmentation& s, Index frame_count);

struct SegmentConfig {
  /// Centered moving-average width applied to the knee signal, frames (odd).
  int smoothing_window = 11;
  /// Angular speed that starts a movement phase, degrees per second.
  double onset_speed = 15.0;
  /// Angular speed below which a movement phase ends, degrees per second.
  double offset_speed = 5.0;
  int min_duration = 12;
  std::string left_knee = "l_leg";
  std::string right_knee = "r_leg";
};

/// Mean left/right knee flexion in degrees, unsmoothed.
std::vector<double> knee_flexion_signal(const Trajectory& t, const SegmentConfig& cfg);

/// Velocity-threshold state machine over the smoothed knee flexion. A movement
/// onset in the preparation state only counts as going_down when the root
/// descends; the is_down -> going_up onset requires the root to rise.
/// Throws SegmentationError naming the last reached state.
Segmentation segment(const Trajectory& t, const SegmentConfig& cfg = {});

/// Throws NotFoundError when the label is missing from `s`.
Trajectory extract_segment(const Trajectory& t, const Segmentation& s, SegmentLabel label);

}  // namespace formcheck
