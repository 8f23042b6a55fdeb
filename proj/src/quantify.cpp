#include "safeset/quantify.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace safeset::quantify {

using core::StateVector;

StateKey::StateKey(const StateVector& s) {
  bits.reserve(s.size());
  for (double x : s) bits.push_back(std::bit_cast<std::uint64_t>(x));
}

std::size_t StateKeyHash::operator()(const StateKey& k) const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint64_t b : k.bits) {
    h ^= b;
    h *= 0x100000001b3ull;
    h ^= h >> 29;
  }
  return static_cast<std::size_t>(h);
}

void StateGraph::add_vertex(const StateVector& s) {
  StateKey key(s);
  if (index_.contains(key)) return;
  index_.emplace(std::move(key), vertices_.size());
  vertices_.push_back(s);
  adj_.emplace_back();
}

void StateGraph::add_edge(const StateVector& from, const StateVector& to) {
  add_vertex(from);
  add_vertex(to);
  std::size_t a = index_.at(StateKey(from));
  std::size_t b = index_.at(StateKey(to));
  adj_[a].push_back(b);
  adj_[b].push_back(a);
  edges_.emplace_back(from, to);
}

bool StateGraph::has_vertex(const StateVector& s) const { return index_.contains(StateKey(s)); }

std::vector<StateVector> StateGraph::reachable(const StateVector& s) const {
  auto it = index_.find(StateKey(s));
  if (it == index_.end()) return {};
  std::vector<bool> seen(vertices_.size(), false);
  std::vector<std::size_t> stack{it->second};
  seen[it->second] = true;
  std::vector<StateVector> out;
  while (!stack.empty()) {
    std::size_t v = stack.back();
    stack.pop_back();
    out.push_back(vertices_[v]);
    for (std::size_t w : adj_[v]) {
      if (!seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
    }
  }
  return out;
}

StateVector ReplayBuffer::pop() {
  if (q_.empty()) throw std::logic_error("ReplayBuffer::pop on empty buffer");
  StateVector s = std::move(q_.front());
  q_.pop_front();
  return s;
}

std::size_t norm_nearest_index(const std::vector<StateVector>& candidates, const StateVector& s,
                               const core::SpaceSpec& space) {
  if (candidates.empty()) throw std::invalid_argument("norm_nearest: empty candidate set");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < space.dim(); ++j) {
      double scale = space.dims[j].hi - space.dims[j].lo;
      if (scale <= 0.0) scale = 1.0;
      double diff = (candidates[i][j] - s[j]) / scale;
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

const StateVector& norm_nearest(const std::vector<StateVector>& candidates, const StateVector& s,
                                const core::SpaceSpec& space) {
  return candidates[norm_nearest_index(candidates, s, space)];
}

namespace {

// Membership of s in the surviving neighborhood union: full-grid cell
// candidates filtered by the surviving-key set. Boundary points may belong
// to two adjacent cells per dimension, hence the neighbor sweep.
bool in_surviving_cover(const cover::CoveringSet& grid, const StateSet& alive,
                        const StateVector& s) {
  std::vector<std::vector<int>> cand(grid.space.dim());
  for (std::size_t d = 0; d < grid.space.dim(); ++d) {
    const auto& dim = grid.space.dims[d];
    int jf = static_cast<int>(std::floor((s[d] - dim.lo) / (2.0 * grid.delta[d])));
    for (int j = jf - 1; j <= jf + 1; ++j) {
      if (j < 0 || j >= grid.grid_counts[d]) continue;
      if (std::abs(grid.grid_coord(d, j) - s[d]) <= grid.delta[d]) cand[d].push_back(j);
    }
    if (cand[d].empty()) return false;
  }
  std::vector<std::size_t> pick(grid.space.dim(), 0);
  for (;;) {
    StateVector c(grid.space.dim());
    for (std::size_t d = 0; d < grid.space.dim(); ++d) c[d] = grid.grid_coord(d, cand[d][pick[d]]);
    if (alive.contains(StateKey(c))) return true;
    std::size_t d = grid.space.dim();
    while (d-- > 0) {
      if (++pick[d] < cand[d].size()) break;
      pick[d] = 0;
      if (d == 0) return false;
    }
  }
}

// Rebuild the result cover from the survivors, keeping grid metadata so
// membership lookups stay O(1). Full-grid flat index == build order.
void rebuild_cover(QuantifyResult& res, const cover::CoveringSet& grid, const StateSet& alive) {
  cover::CoveringSet out;
  out.space = grid.space;
  out.delta = grid.delta;
  out.grid_aligned = true;
  out.grid_counts = grid.grid_counts;
  for (std::size_t flat = 0; flat < grid.centroids.size(); ++flat) {
    if (alive.contains(StateKey(grid.centroids[flat]))) {
      out.grid_index.emplace(static_cast<long long>(flat), out.centroids.size());
      out.centroids.push_back(grid.centroids[flat]);
    }
  }
  res.cover = std::move(out);
}

}  // namespace

QuantifyResult quantify(const core::SpaceSpec& oss, core::SystemModel& system,
                        const stats::ActorSpec& actor, const QuantifyParams& params) {
  if (!actor.policy && !actor.action_box)
    throw std::invalid_argument("quantify: actor has no action source");
  const int target = stats::min_samples(params.spec.epsilon, params.spec.beta);
  if (params.max_runs < target)
    throw std::invalid_argument("quantify: max_runs below the required clean-run count");

  QuantifyResult res;
  const cover::CoveringSet grid = cover::build_covering(oss, params.delta);

  std::vector<StateVector> surviving = grid.centroids;
  StateSet alive;
  for (const auto& c : surviving) alive.insert(StateKey(c));

  auto prune_state = [&](const StateVector& s) {
    StateKey key(s);
    auto it = alive.find(key);
    if (it == alive.end()) return false;
    alive.erase(it);
    for (std::size_t i = 0; i < surviving.size(); ++i) {
      if (StateKey(surviving[i]) == key) {
        surviving.erase(surviving.begin() + static_cast<std::ptrdiff_t>(i));
        break;
      }
    }
    return true;
  };

  // Centroids born unsafe can never anchor a safe neighborhood.
  for (std::size_t i = surviving.size(); i-- > 0;) {
    if (oss.in_failure(surviving[i])) {
      alive.erase(StateKey(surviving[i]));
      surviving.erase(surviving.begin() + static_cast<std::ptrdiff_t>(i));
      ++res.pruned_centroids;
    }
  }

  for (const auto& c : surviving) res.provenance.add_vertex(c);

  ReplayBuffer buffer;
  int streak = 0;
  Rng sampler(child_seed(params.seed, 0));

  while (streak < target && !surviving.empty()) {
    if (res.runs_total >= params.max_runs) {
      rebuild_cover(res, grid, alive);
      res.valid = false;
      return res;
    }

    bool from_buffer = !buffer.empty();
    StateVector s0;
    if (from_buffer) {
      StateVector sb = buffer.pop();
      s0 = surviving[norm_nearest_index(surviving, sb, oss)];
    } else {
      s0 = surviving[sampler.next_below(surviving.size())];
    }

    std::uint64_t run_seed =
        child_seed(params.seed, 1 + static_cast<std::uint64_t>(res.runs_total));
    core::ActionSource src;
    std::vector<core::ActionVector> seq;
    if (actor.controlled()) {
      Rng action_rng(child_seed(run_seed, 0x5eed));
      seq.assign(static_cast<std::size_t>(params.k),
                 stats::sample_action(*actor.action_box, action_rng));
      src.sequence = &seq;
    } else {
      src.policy = actor.policy;
    }

    core::RunRecord run = core::execute_run(system, src, s0, params.k, run_seed);
    ++res.runs_total;

    int pruned_this_run = 0;
    if (run.hit_failure) {
      ++res.failure_runs;
      // Failure prefix, truncated at the first failure state (the absorbed
      // tail repeats it and carries no new information).
      std::vector<const StateVector*> tau{&run.s0};
      for (int i = 0; i < run.failure_index; ++i) tau.push_back(&run.states[i]);
      for (std::size_t i = 0; i + 1 < tau.size(); ++i) {
        buffer.append(*tau[i]);
        for (const auto& s : res.provenance.reachable(*tau[i])) {
          if (prune_state(s)) ++pruned_this_run;
        }
        res.audit.add_edge(*tau[i], *tau[i + 1]);
      }
      buffer.append(*tau.back());
      streak = 0;
    } else {
      const StateVector* anchor = &run.s0;
      std::size_t n_before = surviving.size();
      for (const auto& s : run.states) {
        if (!in_surviving_cover(grid, alive, s)) {
          res.provenance.add_edge(*anchor, s);
          anchor = &s;
        }
      }
      if (n_before == surviving.size() && buffer.empty()) {
        ++streak;
      } else {
        streak = 0;
      }
    }
    res.pruned_centroids += pruned_this_run;

    if (params.keep_log) {
      res.log.push_back({res.runs_total, run.s0, from_buffer, run.hit_failure, pruned_this_run,
                         static_cast<int>(buffer.size()), streak});
    }
  }

  rebuild_cover(res, grid, alive);
  res.valid = true;
  return res;
}

}  // namespace safeset::quantify
