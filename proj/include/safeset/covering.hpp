#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "safeset/core.hpp"

namespace safeset::cover {

// Per-dimension neighborhood half-widths. A point s lies in the neighborhood
// of centroid c iff |c[i] - s[i]| <= delta[i] on every dimension.
using DeltaVector = std::vector<double>;

// A finite set of centroids whose axis-aligned delta-neighborhoods cover a
// region of `space`. Grid-built covers keep cell metadata for O(1)
// membership; covers that gained off-grid centroids fall back to a scan.
struct CoveringSet {
  core::SpaceSpec space;
  DeltaVector delta;
  std::vector<core::StateVector> centroids;

  // Grid metadata, valid while grid_aligned is true. grid_counts holds the
  // full-grid cell count per dimension; grid_index maps a flattened cell
  // index to the centroid's position in `centroids` (pruned cells absent).
  bool grid_aligned = false;
  std::vector<int> grid_counts;
  std::unordered_map<long long, std::size_t> grid_index;

  std::size_t size() const { return centroids.size(); }
  bool empty() const { return centroids.empty(); }

  // Coordinate of the grid centroid in cell j of dimension d (last cell
  // clamped to the upper bound).
  double grid_coord(std::size_t d, int j) const;

  // Remove the centroid at this position, keeping order and metadata.
  void prune_at(std::size_t pos);

  // Append an off-grid centroid; clears grid alignment.
  void grow(const core::StateVector& s);
};

// Regular grid: spacing 2*delta[i], first centroid at lo + delta[i], cell
// count ceil((hi - lo) / (2 delta[i])) (at least 1), last centroid clamped
// to hi so no neighborhood overhangs the box by more than delta. Integer
// dimensions require integral delta so centroids stay integral. Throws
// std::invalid_argument on non-positive or non-integral-where-needed delta.
CoveringSet build_covering(const core::SpaceSpec& space, const DeltaVector& delta);

// Element-wise |centroid[i] - s[i]| <= delta[i]; boundary inclusive.
// Throws std::invalid_argument on dimension mismatch.
bool neighborhood_contains(const core::StateVector& centroid, const DeltaVector& delta,
                           const core::StateVector& s);

// Position (in cover.centroids) of a covering centroid, lowest index on
// ties; nullopt when no neighborhood contains s.
std::optional<std::size_t> covering_membership(const CoveringSet& cover, const core::StateVector& s);

inline bool cover_contains(const CoveringSet& cover, const core::StateVector& s) {
  return covering_membership(cover, s).has_value();
}

// CSV serialization: one header row of dimension names, one row per centroid.
std::string centroids_csv(const CoveringSet& cover);

}  // namespace safeset::cover
