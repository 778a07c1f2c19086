#include "formcheck/sample.hpp"

namespace formcheck {
namespace {

constexpr const char* kIds[] = {"arched_neck",
                                "feet_distance",
                                "hips_do_not_initiate",
                                "hollow_back",
                                "incorrect_weight_distribution",
                                "knees_tremble_sideways",
                                "legs_extended_at_end",
                                "not_symmetric",
                                "too_deep",
                                "wrong_dynamics"};

constexpr const char* kDescriptions[] = {"arched neck",
                                         "feet distance not sufficient",
                                         "hips do not initiate movement",
                                         "hollow back",
                                         "incorrect weight distribution",
                                         "knees tremble sideways",
                                         "legs extended at end",
                                         "not symmetric",
                                         "too deep",
                                         "wrong dynamics"};

}  // namespace

std::string_view to_string(ErrorPattern p) { return kIds[index_of(p)]; }
std::string_view description(ErrorPattern p) { return kDescriptions[index_of(p)]; }

ErrorPattern error_pattern_from_string(std::string_view id) {
  for (ErrorPattern p : kErrorPatterns) {
    if (to_string(p) == id) return p;
  }
  throw InvalidInputError("unknown error pattern '" + std::string(id) + "'");
}

std::string_view to_string(Label l) {
  switch (l) {
    case Label::absent:
      return "absent";
    case Label::present:
      return "present";
    case Label::unlabeled:
      return "unlabeled";
  }
  return "unlabeled";
}

Label label_from_string(std::string_view s) {
  if (s == "present") return Label::present;
  if (s == "absent") return Label::absent;
  throw InvalidInputError("label must be 'present' or 'absent', got '" + std::string(s) + "'");
}

void validate_labels(const LabelRow& row, const std::string& sample_id) {
  for (Label l : row) {
    if (l != Label::unlabeled) return;
  }
  throw InvalidInputError("sample '" + sample_id + "' has no labeled error pattern");
}

}  // namespace formcheck
