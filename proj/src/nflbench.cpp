#include "safeset/nflbench.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "safeset/rng.hpp"

namespace safeset::nfl {

namespace {

void check_space(int n_states, int n_actions) {
  if (n_states < 1 || n_actions < 1) {
    throw std::invalid_argument("table space needs at least one state and one action");
  }
}

bool contains(const std::vector<int>& xs, int x) {
  return std::find(xs.begin(), xs.end(), x) != xs.end();
}

}  // namespace

long long table_space_size(int n_states, int n_actions, long long cap) {
  check_space(n_states, n_actions);
  const long long cells = static_cast<long long>(n_states) * n_actions;
  long long size = 1;
  for (long long c = 0; c < cells; ++c) {
    if (size > cap / n_states) {
      throw std::invalid_argument("table space exceeds enumeration cap");
    }
    size *= n_states;
  }
  return size;
}

SystemTable table_at(int n_states, int n_actions, long long index) {
  check_space(n_states, n_actions);
  if (index < 0) throw std::invalid_argument("table index must be non-negative");
  SystemTable f;
  f.n_states = n_states;
  f.n_actions = n_actions;
  const std::size_t cells = static_cast<std::size_t>(n_states) * n_actions;
  f.table.assign(cells, 0);
  // Cell (0,0) is the most significant digit, so fill from the back.
  for (std::size_t c = cells; c-- > 0;) {
    f.table[c] = static_cast<int>(index % n_states);
    index /= n_states;
  }
  if (index != 0) throw std::invalid_argument("table index out of range");
  return f;
}

bool ExplorationOrder::same_space(const ExplorationOrder& other) const {
  if (n_states != other.n_states || n_actions != other.n_actions || k != other.k) return false;
  std::vector<int> a = init_states;
  std::vector<int> b = other.init_states;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

ExplorationOrder canonical_order(int n_states, int n_actions, int k,
                                 std::vector<int> init_states) {
  check_space(n_states, n_actions);
  if (k < 1) throw std::invalid_argument("exploration entries need at least one action");
  if (init_states.empty()) {
    init_states.resize(static_cast<std::size_t>(n_states));
    for (int s = 0; s < n_states; ++s) init_states[static_cast<std::size_t>(s)] = s;
  }
  std::unordered_set<int> seen;
  for (int s : init_states) {
    if (s < 0 || s >= n_states) throw std::invalid_argument("initial state out of range");
    if (!seen.insert(s).second) throw std::invalid_argument("duplicate initial state");
  }

  ExplorationOrder order;
  order.n_states = n_states;
  order.n_actions = n_actions;
  order.k = k;
  order.init_states = init_states;

  long long seqs = 1;
  for (int i = 0; i < k; ++i) {
    if (seqs > (1LL << 40) / n_actions) throw std::invalid_argument("action space too large");
    seqs *= n_actions;
  }
  order.entries.reserve(init_states.size() * static_cast<std::size_t>(seqs));
  for (int s0 : init_states) {
    std::vector<int> actions(static_cast<std::size_t>(k), 0);
    for (long long i = 0; i < seqs; ++i) {
      order.entries.push_back(Entry{s0, actions});
      // Advance the action sequence lexicographically (last action fastest).
      for (std::size_t d = actions.size(); d-- > 0;) {
        if (++actions[d] < n_actions) break;
        actions[d] = 0;
      }
    }
  }
  return order;
}

ExplorationOrder shuffled_order(int n_states, int n_actions, int k, std::uint64_t seed,
                                std::vector<int> init_states) {
  ExplorationOrder order = canonical_order(n_states, n_actions, k, std::move(init_states));
  Rng rng(seed);
  for (std::size_t i = order.entries.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(order.entries[i - 1], order.entries[j]);
  }
  return order;
}

std::vector<int> table_run(const SystemTable& f, int s0, const std::vector<int>& actions,
                           const std::function<bool(int)>& is_failure) {
  if (s0 < 0 || s0 >= f.n_states) throw std::invalid_argument("initial state out of range");
  std::vector<int> states;
  states.reserve(actions.size() + 1);
  states.push_back(s0);
  int s = s0;
  bool absorbed = is_failure(s);
  for (int u : actions) {
    if (u < 0 || u >= f.n_actions) throw std::invalid_argument("action out of range");
    if (!absorbed) {
      s = f.next(s, u);
      absorbed = is_failure(s);
    }
    states.push_back(s);
  }
  return states;
}

TableCost table_failure_cost(std::vector<int> failure_states) {
  return [failure_states = std::move(failure_states)](const std::vector<int>& states,
                                                      const std::vector<int>&) -> core::CostValue {
    for (int s : states) {
      if (contains(failure_states, s)) return "1";
    }
    return "0";
  };
}

TableCost table_run_identity() {
  return [](const std::vector<int>& states, const std::vector<int>& actions) -> core::CostValue {
    std::ostringstream out;
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (i) out << ',';
      out << states[i];
    }
    out << '|';
    for (std::size_t i = 0; i < actions.size(); ++i) {
      if (i) out << ',';
      out << actions[i];
    }
    return out.str();
  };
}

Tally cost_distribution(const ExplorationOrder& order, int m, const TableCost& cost,
                        const std::vector<int>& failure_states, long long cap) {
  if (m < 0 || static_cast<std::size_t>(m) > order.entries.size()) {
    throw std::invalid_argument("sample count must be between 0 and the number of entries");
  }
  for (int s : failure_states) {
    if (s < 0 || s >= order.n_states) throw std::invalid_argument("failure state out of range");
  }
  const auto is_failure = [&](int s) { return contains(failure_states, s); };
  const long long n_tables = table_space_size(order.n_states, order.n_actions, cap);

  Tally tally;
  for (long long idx = 0; idx < n_tables; ++idx) {
    const SystemTable f = table_at(order.n_states, order.n_actions, idx);
    core::CostSequence costs;
    costs.reserve(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      const Entry& e = order.entries[static_cast<std::size_t>(i)];
      const std::vector<int> states = table_run(f, e.s0, e.actions, is_failure);
      costs.push_back(cost(states, e.actions));
    }
    ++tally[costs];
  }
  return tally;
}

long long count_consistent(int n_states, int n_actions, int s0, int u, int s_next, long long cap) {
  check_space(n_states, n_actions);
  if (s0 < 0 || s0 >= n_states || s_next < 0 || s_next >= n_states || u < 0 || u >= n_actions) {
    throw std::invalid_argument("transition out of range");
  }
  const long long n_tables = table_space_size(n_states, n_actions, cap);
  long long count = 0;
  for (long long idx = 0; idx < n_tables; ++idx) {
    if (table_at(n_states, n_actions, idx).next(s0, u) == s_next) ++count;
  }
  return count;
}

NflVerdict verify_nfl(const ExplorationOrder& order1, const ExplorationOrder& order2, int m,
                      const TableCost& cost, const std::vector<int>& failure_states,
                      long long cap) {
  if (!order1.same_space(order2)) {
    throw std::invalid_argument("exploration orders cover different product spaces");
  }
  NflVerdict v;
  v.tally1 = cost_distribution(order1, m, cost, failure_states, cap);
  v.tally2 = cost_distribution(order2, m, cost, failure_states, cap);
  v.equal = (v.tally1 == v.tally2);
  if (!v.equal) {
    auto it1 = v.tally1.begin();
    auto it2 = v.tally2.begin();
    while (it1 != v.tally1.end() && it2 != v.tally2.end()) {
      if (it1->first != it2->first) {
        v.first_difference = std::min(it1->first, it2->first);
        return v;
      }
      if (it1->second != it2->second) {
        v.first_difference = it1->first;
        return v;
      }
      ++it1;
      ++it2;
    }
    v.first_difference =
        (it1 != v.tally1.end()) ? it1->first : it2->first;
  }
  return v;
}

}  // namespace safeset::nfl
