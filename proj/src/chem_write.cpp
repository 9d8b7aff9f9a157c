#include <algorithm>
#include <map>
#include <set>

#include "chem_internal.hpp"
#include "retrokit/chem.hpp"
#include "retrokit/rng.hpp"

namespace retro::chem {

namespace detail {

// Writes one connected component as SMILES, visiting neighbors in the order
// `adj` lists them. Randomized and canonical writers differ only in how they
// permute `adj` and pick `start`.
std::string emit_component(const MolGraph& g, const Adjacency& adj, int start) {
  int n = g.atom_count();
  std::vector<bool> visited(n, false);
  std::vector<std::vector<int>> children(n);  // tree children in visit order
  std::vector<std::vector<int>> ring_at(n);   // ring-closure bond ids per atom
  std::vector<int> parent_bond(n, -1);
  std::set<int> ring_bond_set;

  // DFS pass: classify tree vs ring-closure edges
  {
    std::vector<std::pair<int, size_t>> stack;  // (atom, next neighbor slot)
    visited[start] = true;
    stack.push_back({start, 0});
    while (!stack.empty()) {
      auto& [v, slot] = stack.back();
      if (slot >= adj[v].size()) {
        stack.pop_back();
        continue;
      }
      auto [to, bi] = adj[v][slot++];
      if (bi == parent_bond[v]) continue;
      if (visited[to]) {
        if (ring_bond_set.insert(bi).second) {
          ring_at[v].push_back(bi);
          ring_at[to].push_back(bi);
        }
      } else {
        visited[to] = true;
        parent_bond[to] = bi;
        children[v].push_back(to);
        stack.push_back({to, 0});
      }
    }
  }

  std::string out;
  std::map<int, int> open_digit;  // bond id -> digit
  std::set<int> used_digits;

  auto alloc_digit = [&]() {
    for (int d = 1; d < 100; ++d)
      if (!used_digits.count(d)) {
        used_digits.insert(d);
        return d;
      }
    throw std::runtime_error("more than 99 concurrently open ring bonds");
  };
  auto digit_str = [](int d) {
    return d < 10 ? std::to_string(d) : "%" + std::to_string(d);
  };

  auto emit_atom = [&](int v) {
    out += atom_token(g, adj, v);
    for (int bi : ring_at[v]) {
      auto it = open_digit.find(bi);
      if (it == open_digit.end()) {
        int d = alloc_digit();
        open_digit[bi] = d;
        out += bond_symbol(g, g.bonds[bi]);
        out += digit_str(d);
      } else {
        int d = it->second;
        open_digit.erase(it);
        used_digits.erase(d);
        out += digit_str(d);
      }
    }
  };

  // Action stack: atom >= 0 emits that subtree root, else append literal text.
  struct Action {
    int atom;
    std::string text;
  };
  std::vector<Action> todo;
  todo.push_back({start, ""});
  while (!todo.empty()) {
    Action act = std::move(todo.back());
    todo.pop_back();
    if (act.atom < 0) {
      out += act.text;
      continue;
    }
    int v = act.atom;
    emit_atom(v);
    const auto& ch = children[v];
    for (int k = static_cast<int>(ch.size()) - 1; k >= 0; --k) {
      int c = ch[k];
      bool last = (k + 1 == static_cast<int>(ch.size()));
      std::string sym = bond_symbol(g, g.bonds[parent_bond[c]]);
      if (last) {
        todo.push_back({c, ""});
        todo.push_back({-1, sym});
      } else {
        todo.push_back({-1, ")"});
        todo.push_back({c, ""});
        todo.push_back({-1, "(" + sym});
      }
    }
  }
  return out;
}

}  // namespace detail

std::string write_smiles(const MolGraph& g, uint64_t seed) {
  if (g.atoms.empty()) return "";
  Rng rng(seed);
  Adjacency adj = adjacency(g);
  for (auto& lst : adj) rng.shuffle(lst);

  auto labels = component_labels(g);
  int ncomp = 0;
  for (int l : labels) ncomp = std::max(ncomp, l + 1);

  // random start atom per component, components in shuffled order
  std::vector<int> starts(ncomp, -1);
  std::vector<std::vector<int>> members(ncomp);
  for (int i = 0; i < g.atom_count(); ++i) members[labels[i]].push_back(i);
  for (int c = 0; c < ncomp; ++c) starts[c] = members[c][rng.below(members[c].size())];

  std::vector<int> order(ncomp);
  for (int c = 0; c < ncomp; ++c) order[c] = c;
  rng.shuffle(order);

  std::string out;
  for (int k = 0; k < ncomp; ++k) {
    if (k) out += '.';
    out += detail::emit_component(g, adj, starts[order[k]]);
  }
  return out;
}

}  // namespace retro::chem
