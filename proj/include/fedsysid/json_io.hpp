#pragma once

#include <json.hpp>

#include "fedsysid/state_space.hpp"

namespace fedsysid {

/// {"nx","nu","ny","A","B","C","D"} with row-major nested arrays.
nlohmann::json model_to_json(const StateSpaceModel& model);
StateSpaceModel model_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, const char* name);

}  // namespace fedsysid
