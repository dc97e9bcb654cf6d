#pragma once
// Internal JSON helpers shared by the bench translation units.

#include <json.hpp>

#include "yulefx/dgp.hpp"

namespace yulefx::bench {

nlohmann::json to_json(const DgpConfig& config);
/// Inverse of to_json, with the same validation as the config file's dgp section.
DgpConfig dgp_from_json(const nlohmann::json& j);

}  // namespace yulefx::bench
