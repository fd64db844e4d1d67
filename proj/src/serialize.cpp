#include "condgpc/serialize.hpp"

namespace condgpc {

nlohmann::json grid_to_json(const Grid& grid) {
  nlohmann::json j;
  j["dimension"] = grid.dimension();
  nlohmann::json extents = nlohmann::json::array();
  nlohmann::json counts = nlohmann::json::array();
  for (int a = 0; a < grid.dimension(); ++a) {
    extents.push_back({grid.extent(a).lo, grid.extent(a).hi});
    counts.push_back(grid.count(a));
  }
  j["extents"] = extents;
  j["counts"] = counts;
  return j;
}

Grid grid_from_json(const nlohmann::json& j) {
  const int dim = j.at("dimension").get<int>();
  std::vector<Interval> extents;
  std::vector<std::size_t> counts;
  for (int a = 0; a < dim; ++a) {
    const auto& e = j.at("extents").at(a);
    extents.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    counts.push_back(j.at("counts").at(a).get<std::size_t>());
  }
  return build_grid(dim, extents, counts);
}

}  // namespace condgpc
