#pragma once

#include <json.hpp>

#include "condgpc/grid.hpp"

namespace condgpc {

nlohmann::json grid_to_json(const Grid& grid);
Grid grid_from_json(const nlohmann::json& j);

}  // namespace condgpc
