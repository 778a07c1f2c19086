#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "formcheck/motion.hpp"

namespace formcheck {

enum class ErrorPattern {
  arched_neck = 0,
  feet_distance,
  hips_do_not_initiate,
  hollow_back,
  incorrect_weight_distribution,
  knees_tremble_sideways,
  legs_extended_at_end,
  not_symmetric,
  too_deep,
  wrong_dynamics,
};

inline constexpr std::size_t kPatternCount = 10;

inline constexpr std::array<ErrorPattern, kPatternCount> kErrorPatterns = {
    ErrorPattern::arched_neck,          ErrorPattern::feet_distance,
    ErrorPattern::hips_do_not_initiate, ErrorPattern::hollow_back,
    ErrorPattern::incorrect_weight_distribution, ErrorPattern::knees_tremble_sideways,
    ErrorPattern::legs_extended_at_end, ErrorPattern::not_symmetric,
    ErrorPattern::too_deep,             ErrorPattern::wrong_dynamics};

/// Identifier used in files and configs, e.g. "too_deep".
std::string_view to_string(ErrorPattern p);
/// Human readable name, e.g. "feet distance not sufficient".
std::string_view description(ErrorPattern p);
/// Throws InvalidInputError.
ErrorPattern error_pattern_from_string(std::string_view id);
inline std::size_t index_of(ErrorPattern p) { return static_cast<std::size_t>(p); }

enum class Label { absent = 0, present = 1, unlabeled = 2 };
std::string_view to_string(Label l);
/// Accepts "present" and "absent".
Label label_from_string(std::string_view s);

using LabelRow = std::array<Label, kPatternCount>;

struct LabeledSample {
  Trajectory trajectory;
  LabelRow labels;

  Label label(ErrorPattern p) const { return labels[index_of(p)]; }
  bool labeled(ErrorPattern p) const { return label(p) != Label::unlabeled; }
};

/// Throws InvalidInputError when every entry is unlabeled.
void validate_labels(const LabelRow& row, const std::string& sample_id);

}  // namespace formcheck
