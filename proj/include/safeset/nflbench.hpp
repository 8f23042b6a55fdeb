#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "safeset/core.hpp"

namespace safeset::nfl {

// An explicitly enumerated deterministic transition table f: O x U -> O over
// integer-indexed states and actions.
struct SystemTable {
  int n_states = 0;
  int n_actions = 0;
  std::vector<int> table;  // cell (s * n_actions + u) -> next state

  int next(int s, int u) const { return table[static_cast<std::size_t>(s) * n_actions + u]; }
};

// The number of distinct tables, n_states^(n_states * n_actions). Throws
// std::invalid_argument when it exceeds `cap`.
long long table_space_size(int n_states, int n_actions, long long cap = 10'000'000);

// The table at `index` in lexicographic order: cell (0,0) is the most
// significant base-n_states digit, cells ordered state-major.
SystemTable table_at(int n_states, int n_actions, long long index);

// One exploration entry: an initial state and k actions.
struct Entry {
  int s0 = 0;
  std::vector<int> actions;
};

// A concrete open-loop exploration order: a duplicate-free permutation of
// init_states x U^k. Two orders over the same product space that differ
// only in permutation share state-action coverage (the same configuration).
struct ExplorationOrder {
  int n_states = 0;
  int n_actions = 0;
  int k = 1;
  std::vector<int> init_states;
  std::vector<Entry> entries;

  bool same_space(const ExplorationOrder& other) const;
};

// init_states x U^k in canonical (state-major, action-sequence
// lexicographic) order; init_states defaults to all states.
ExplorationOrder canonical_order(int n_states, int n_actions, int k,
                                 std::vector<int> init_states = {});
// Seeded Fisher-Yates permutation of the canonical order.
ExplorationOrder shuffled_order(int n_states, int n_actions, int k, std::uint64_t seed,
                                std::vector<int> init_states = {});

// One recorded run against a table: sigma(0..k) with the absorbing rule on
// the failure set (a failure state repeats; runs may start in one).
std::vector<int> table_run(const SystemTable& f, int s0, const std::vector<int>& actions,
                           const std::function<bool(int)>& is_failure);

// Cost of one recorded run (states includes sigma(0) = s0).
using TableCost =
    std::function<core::CostValue(const std::vector<int>& states, const std::vector<int>& actions)>;

TableCost table_failure_cost(std::vector<int> failure_states);  // "1" iff any recorded state is unsafe
TableCost table_run_identity();  // the full (states, actions) record, serialized

// Exact tally: cost sequence -> number of tables producing it.
using Tally = std::map<core::CostSequence, long long>;

// Execute the first m entries of the order against every enumerated table
// and tally the resulting cost sequences. Counts are exact and sum to the
// table-space size.
Tally cost_distribution(const ExplorationOrder& order, int m, const TableCost& cost,
                        const std::vector<int>& failure_states, long long cap = 10'000'000);

// Number of enumerated tables mapping (s0, u) to s_next; always the
// table-space size divided by n_states.
long long count_consistent(int n_states, int n_actions, int s0, int u, int s_next,
                           long long cap = 10'000'000);

struct NflVerdict {
  bool equal = false;
  Tally tally1;
  Tally tally2;
  std::optional<core::CostSequence> first_difference;
};

// Tally both orders and compare as exact integer-valued maps.
NflVerdict verify_nfl(const ExplorationOrder& order1, const ExplorationOrder& order2, int m,
                      const TableCost& cost, const std::vector<int>& failure_states,
                      long long cap = 10'000'000);

}  // namespace safeset::nfl
