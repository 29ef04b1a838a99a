#pragma once

// Internal JSON helpers shared by the bundle writers; not installed.

#include "json.hpp"
#include "mtoo/dataset.hpp"
#include "mtoo/nn.hpp"

namespace mtoo::detail {

nlohmann::json network_to_json(const nn::Network& net);
nn::Network network_from_json(const nlohmann::json& j);

nlohmann::json stats_to_json(const NormalizationStats& st);
NormalizationStats stats_from_json(const nlohmann::json& j);

}  // namespace mtoo::detail
