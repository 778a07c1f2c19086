#pragma once

// Synthetic squat corpus. A squat is synthesized from keyposes (standing,
// bottom, end) joined by cosine ease curves over five phases, then turned into
// frames by forward kinematics with the feet held at a floor anchor. Error
// patterns are edits of the kinematic parameters, applied before synthesis.
//
// Angle parameters are in degrees, times in seconds.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "formcheck/sample.hpp"
#include "formcheck/segment.hpp"

namespace formcheck {

struct SubjectStyle {
  double tempo = 1.0;
  double limb_scale = 1.0;
  double noise = 0.2;
  double thigh_bottom = 84.0;     // thigh angle from vertical at the bottom
  double knee_bottom = -115.0;    // knee flexion at the bottom (negative = bent)
  double knee_standing = -5.0;
  double lean_bottom = 33.0;      // forward root pitch at the bottom
  double curvature_bottom = 10.0; // forward spine rounding at the bottom
  double curvature_standing = 1.5;
  double stance_abduction = 12.0;
  double neck = 0.0;
  double arm_flex_bottom = 75.0;
  double elbow_flex = 10.0;
  double hip_lead = 0.1;          // lean starts this long before the knees
  // Mirrored posture offsets: equal on both sides after mirroring.
  double hip_twist = 0.0;
  double knee_twist = 0.0;
  double knee_valgus = 0.0;
  double shoulder_abduction = 0.0;
  double arm_twist = 0.0;
};

/// Reproducible from (seed, subject index).
SubjectStyle make_style(std::uint64_t seed, int subject);

struct SquatParams {
  SubjectStyle style;
  /// preparation, going_down, is_down, going_up, wrap_up.
  std::array<double, 5> durations{0.75, 1.2, 0.4, 0.9, 0.75};
  double sample_rate = 120.0;
  std::uint64_t noise_seed = 0;
  /// 0 means the pattern is not injected.
  std::array<double, kPatternCount> intensity{};
};

/// One execution of a subject: style jittered slightly, fresh noise.
SquatParams sample_params(const SubjectStyle& style, std::uint64_t seed);

struct ErrorSpec {
  ErrorPattern pattern;
  /// In [0, 1]; 0 leaves the squat unchanged.
  double intensity = 1.0;
};

/// Lowest intensity at which the geometric check of the pattern is guaranteed to fire.
double min_detectable_intensity(ErrorPattern p);

/// Throws InvalidInputError for an intensity outside [0, 1].
SquatParams inject_error(SquatParams params, const ErrorSpec& spec);

struct GeneratedSquat {
  SquatParams params;
  Trajectory trajectory;
  /// Phase boundaries from the knee key times.
  Segmentation truth;
};

GeneratedSquat synthesize(const SquatParams& params, const std::string& subject_id, const std::string& sample_id);

/// Trajectory-level detector of the pattern, using only the raw frames of a
/// standard-skeleton squat.
bool geometric_check(ErrorPattern p, const Trajectory& t);
/// The statistic geometric_check thresholds.
double geometric_statistic(ErrorPattern p, const Trajectory& t);
/// No pattern detected.
bool is_correct_squat(const Trajectory& t);

struct PatternRate {
  /// Probability that a sample carries the error.
  double error_rate = 0.0;
  /// Fraction of samples with a label for the pattern.
  double labeled_fraction = 1.0;
};

/// Rates shaped like the reference corpus counts (erroneous, correct) out of 95.
std::array<PatternRate, kPatternCount> reference_rates();

struct CorpusConfig {
  int subjects = 49;
  int samples_per_subject = 2;
  /// The last this-many subjects record only one sample.
  int single_sample_subjects = 3;
  std::array<PatternRate, kPatternCount> rates = reference_rates();
  /// Intensity ranges per pattern; unset uses the defaults.
  std::array<std::optional<std::pair<double, double>>, kPatternCount> intensity;
  std::uint64_t seed = 1;
};

/// Default intensity range (the two subtle patterns stay low).
std::pair<double, double> default_intensity_range(ErrorPattern p);

struct Corpus {
  std::vector<LabeledSample> samples;
  std::vector<Segmentation> truth_segments;
  /// Whether the error was injected, including for unlabeled entries.
  std::vector<std::array<bool, kPatternCount>> truth;
  std::vector<SquatParams> params;
};

/// Per pattern, round(labeled_fraction * N) samples are labeled and
/// round(error_rate * labeled) of them present. Unlabeled samples carry the
/// error with probability error_rate. Throws InvalidInputError on rates
/// outside [0, 1] or a non-positive shape.
Corpus generate_corpus(const CorpusConfig& cfg);

}  // namespace formcheck
