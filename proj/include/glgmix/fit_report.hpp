#pragma once

// JSON form of a FitResult. Parameters are listed in estimate order with
// their standard error and z-value (null where not reported).

#include <json.hpp>

#include "glgmix/fit_result.hpp"

namespace glgmix {

nlohmann::json fit_to_json(const FitResult& r);
// Throws ParseError(BadSpec) if required fields are missing.
FitResult fit_from_json(const nlohmann::json& j);

}  // namespace glgmix
