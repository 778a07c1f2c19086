#pragma once

// Internal JSON helpers shared by config and io.

#include <json.hpp>

#include "formcheck/config.hpp"

namespace formcheck::detail {

using Json = nlohmann::json;

Json to_json(const LadderConfig& c);
/// Strict: unknown keys and wrong types throw ConfigError with `where` as key prefix.
void merge_ladder(LadderConfig& c, const Json& j, const std::string& where = "");
LadderConfig ladder_from_json(const Json& j);

}  // namespace formcheck::detail
