#include "safeset/covering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace safeset::cover {

using core::DimKind;
using core::SpaceSpec;
using core::StateVector;

double CoveringSet::grid_coord(std::size_t d, int j) const {
  const auto& dim = space.dims[d];
  return std::min(dim.lo + delta[d] * (2.0 * j + 1.0), dim.hi);
}

void CoveringSet::prune_at(std::size_t pos) {
  centroids.erase(centroids.begin() + static_cast<std::ptrdiff_t>(pos));
  if (!grid_aligned) return;
  for (auto it = grid_index.begin(); it != grid_index.end();) {
    if (it->second == pos) {
      it = grid_index.erase(it);
    } else {
      if (it->second > pos) --(it->second);
      ++it;
    }
  }
}

void CoveringSet::grow(const core::StateVector& s) {
  centroids.push_back(s);
  grid_aligned = false;
  grid_index.clear();
  grid_counts.clear();
}

CoveringSet build_covering(const SpaceSpec& space, const DeltaVector& delta) {
  space.validate();
  if (delta.size() != space.dim())
    throw std::invalid_argument("build_covering: delta dimension mismatch");
  for (std::size_t d = 0; d < delta.size(); ++d) {
    if (!(delta[d] > 0.0)) throw std::invalid_argument("build_covering: delta must be positive");
    if (space.dims[d].kind == DimKind::Integer && delta[d] != std::floor(delta[d]))
      throw std::invalid_argument(
          "build_covering: integer dimensions need integral delta so centroids are integral");
  }

  CoveringSet cover;
  cover.space = space;
  cover.delta = delta;
  cover.grid_aligned = true;

  long long total = 1;
  for (std::size_t d = 0; d < space.dim(); ++d) {
    double span = space.dims[d].hi - space.dims[d].lo;
    int n = std::max(1, static_cast<int>(std::ceil(span / (2.0 * delta[d]))));
    cover.grid_counts.push_back(n);
    total *= n;
    if (total > 50'000'000) throw std::invalid_argument("build_covering: grid too large");
  }

  cover.centroids.reserve(static_cast<std::size_t>(total));
  std::vector<int> cell(space.dim(), 0);
  for (long long flat = 0; flat < total; ++flat) {
    StateVector c(space.dim());
    for (std::size_t d = 0; d < space.dim(); ++d) c[d] = cover.grid_coord(d, cell[d]);
    cover.grid_index.emplace(flat, cover.centroids.size());
    cover.centroids.push_back(std::move(c));
    // odometer, last dimension fastest
    for (std::size_t d = space.dim(); d-- > 0;) {
      if (++cell[d] < cover.grid_counts[d]) break;
      cell[d] = 0;
    }
  }
  return cover;
}

bool neighborhood_contains(const StateVector& centroid, const DeltaVector& delta,
                           const StateVector& s) {
  if (centroid.size() != delta.size() || s.size() != delta.size())
    throw std::invalid_argument("neighborhood_contains: dimension mismatch");
  for (std::size_t d = 0; d < delta.size(); ++d) {
    if (std::abs(centroid[d] - s[d]) > delta[d]) return false;
  }
  return true;
}

std::optional<std::size_t> covering_membership(const CoveringSet& cover, const StateVector& s) {
  if (s.size() != cover.space.dim())
    throw std::invalid_argument("covering_membership: dimension mismatch");
  if (cover.empty()) return std::nullopt;

  if (!cover.grid_aligned) {
    for (std::size_t i = 0; i < cover.centroids.size(); ++i) {
      if (neighborhood_contains(cover.centroids[i], cover.delta, s)) return i;
    }
    return std::nullopt;
  }

  // Per-dimension candidate cells around the containing cell; boundary
  // points can belong to two adjacent cells, so check the neighbors too.
  std::vector<std::vector<int>> cand(cover.space.dim());
  for (std::size_t d = 0; d < cover.space.dim(); ++d) {
    const auto& dim = cover.space.dims[d];
    int n = cover.grid_counts[d];
    int jf = static_cast<int>(std::floor((s[d] - dim.lo) / (2.0 * cover.delta[d])));
    for (int j = jf - 1; j <= jf + 1; ++j) {
      if (j < 0 || j >= n) continue;
      if (std::abs(cover.grid_coord(d, j) - s[d]) <= cover.delta[d]) cand[d].push_back(j);
    }
    if (cand[d].empty()) return std::nullopt;
  }

  // Walk candidate tuples in ascending flat order; the first surviving cell
  // holds the lowest-index covering centroid (pruning keeps centroid order).
  std::vector<std::size_t> pick(cover.space.dim(), 0);
  for (;;) {
    long long flat = 0;
    for (std::size_t d = 0; d < cover.space.dim(); ++d)
      flat = flat * cover.grid_counts[d] + cand[d][pick[d]];
    if (auto it = cover.grid_index.find(flat); it != cover.grid_index.end()) return it->second;
    std::size_t d = cover.space.dim();
    while (d-- > 0) {
      if (++pick[d] < cand[d].size()) break;
      pick[d] = 0;
      if (d == 0) return std::nullopt;
    }
  }
}

std::string centroids_csv(const CoveringSet& cover) {
  std::string out;
  for (std::size_t d = 0; d < cover.space.dim(); ++d) {
    if (d) out.push_back(',');
    out += cover.space.dims[d].name;
  }
  out.push_back('\n');
  char buf[64];
  for (const auto& c : cover.centroids) {
    for (std::size_t d = 0; d < c.size(); ++d) {
      if (d) out.push_back(',');
      std::snprintf(buf, sizeof(buf), "%.17g", c[d]);
      out += buf;
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace safeset::cover
