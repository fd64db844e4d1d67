#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "condgpc/grid.hpp"

namespace condgpc {

enum class CriticalKind { Maximum, Minimum, Saddle };

struct CriticalPoint {
  std::size_t index;
  double value;
  CriticalKind kind;
};

struct CriticalOptions {
  bool maxima = true;
  bool minima = false;
  bool saddles = true;  // ignored in 1D
};

/// Strict local extrema (8-neighbour in 2D, one-sided at the boundary) and,
/// in 2D, interior saddles: opposite-signed second differences with the
/// point a maximum along one axis and a minimum along the other.
/// Sorted by value descending, ties to the lower index.
std::vector<CriticalPoint> find_critical_points(const Field& f, const CriticalOptions& options = {});

enum class Provenance { CriticalPoint, BlockFallback, Uniform, Random, Fill };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct PlacementResult {
  Grid grid;
  std::vector<std::size_t> points;
  std::vector<double> scores;
  std::vector<Provenance> provenance;

  std::size_t size() const { return points.size(); }
  std::vector<Point> locations() const;
};

/// Rows x columns for tiling a rectangle into n near-square blocks.
std::array<std::size_t, 2> block_layout(const Grid& grid, std::size_t n);

/// Variance-guided selection: the top critical points of `variance`; if
/// there are fewer than `n`, the domain is cut into `n` equal blocks and
/// the variance maxima of blocks holding no selected point are added,
/// largest first. Points closer than `min_separation` to an already
/// selected point are skipped.
PlacementResult select_locations(const Field& variance, std::size_t n, double min_separation = 0.0);

enum class BaselineStrategy { Uniform, Random };

/// Equally spaced interior points (snapped), or seed-determined distinct
/// grid points.
PlacementResult baseline_locations(const Grid& grid, std::size_t n, BaselineStrategy strategy,
                                   std::uint64_t seed = 0);

void write_placement_csv(const PlacementResult& r, const std::string& path);
PlacementResult read_placement_csv(const Grid& grid, const std::string& path);

}  // namespace condgpc
