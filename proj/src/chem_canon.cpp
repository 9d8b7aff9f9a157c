#include <algorithm>
#include <functional>
#include <map>
#include <tuple>

#include "chem_internal.hpp"
#include "retrokit/chem.hpp"

namespace retro::chem {

namespace {

// Maps alternating single/double 6-rings of aromatic-capable atoms to the
// aromatic form, so kekulized benzene rings and their lowercase spellings
// share one canonical string. No general aromaticity perception.
MolGraph normalize_aromatic(const MolGraph& g) {
  MolGraph out = g;
  Adjacency adj = adjacency(g);
  int n = g.atom_count();

  std::vector<bool> atom_flag(n, false);
  std::vector<bool> bond_flag(g.bonds.size(), false);

  auto qualifies = [&](int atom) {
    const Atom& a = g.atoms[atom];
    return !a.aromatic && aromatic_capable(a.element);
  };
  auto alternates = [&](const std::vector<int>& cycle_bonds) {
    BondOrder first = g.bonds[cycle_bonds[0]].order;
    if (first != BondOrder::Single && first != BondOrder::Double) return false;
    for (size_t i = 0; i < cycle_bonds.size(); ++i) {
      BondOrder o = g.bonds[cycle_bonds[i]].order;
      BondOrder want = (i % 2 == 0) ? first
                       : (first == BondOrder::Single ? BondOrder::Double : BondOrder::Single);
      if (o != want) return false;
    }
    return true;
  };

  // Enumerate simple 6-cycles anchored at their minimum atom index.
  std::vector<int> path, path_bonds;
  std::vector<bool> on_path(n, false);
  std::function<void(int, int)> dfs = [&](int anchor, int v) {
    if (path.size() == 6) {
      for (auto [to, bi] : adj[v]) {
        if (to == anchor && path[1] < path.back()) {  // direction dedup
          path_bonds.push_back(bi);
          if (alternates(path_bonds)) {
            for (int a : path) atom_flag[a] = true;
            for (int b : path_bonds) bond_flag[b] = true;
          }
          path_bonds.pop_back();
        }
      }
      return;
    }
    for (auto [to, bi] : adj[v]) {
      if (on_path[to] || to < anchor || !qualifies(to)) continue;
      path.push_back(to);
      path_bonds.push_back(bi);
      on_path[to] = true;
      dfs(anchor, to);
      on_path[to] = false;
      path.pop_back();
      path_bonds.pop_back();
    }
  };
  for (int v = 0; v < n; ++v) {
    if (!qualifies(v)) continue;
    path = {v};
    path_bonds.clear();
    on_path.assign(n, false);
    on_path[v] = true;
    dfs(v, v);
  }

  for (int i = 0; i < n; ++i)
    if (atom_flag[i]) out.atoms[i].aromatic = true;
  for (size_t i = 0; i < g.bonds.size(); ++i)
    if (bond_flag[i]) out.bonds[i].order = BondOrder::Aromatic;
  return out;
}

// Iterative neighborhood refinement (Morgan-style) with artificial tie
// splitting: the lowest-index atom of the lowest tied class is promoted and
// refinement reruns, until every atom holds a distinct rank.
std::vector<int> canonical_ranks(const MolGraph& g) {
  int n = g.atom_count();
  Adjacency adj = adjacency(g);

  using Seed = std::tuple<std::string, int, int, bool, int, int, int>;
  std::vector<int> ranks(n);
  {
    std::vector<std::pair<Seed, int>> seeds(n);
    for (int i = 0; i < n; ++i) {
      const Atom& a = g.atoms[i];
      seeds[i] = {Seed{a.element, a.charge, static_cast<int>(adj[i].size()), a.aromatic,
                       detail::effective_h_adj(g, adj, i), a.isotope.value_or(0),
                       a.atom_map.value_or(0)},
                  i};
    }
    std::vector<std::pair<Seed, int>> sorted = seeds;
    std::sort(sorted.begin(), sorted.end());
    int rank = -1;
    for (size_t k = 0; k < sorted.size(); ++k) {
      if (k == 0 || sorted[k].first != sorted[k - 1].first) ++rank;
      ranks[sorted[k].second] = rank;
    }
  }

  auto refine = [&]() {
    using Sig = std::pair<int, std::vector<std::pair<int, int>>>;
    while (true) {
      std::vector<std::pair<Sig, int>> sigs(n);
      for (int i = 0; i < n; ++i) {
        std::vector<std::pair<int, int>> nb;
        nb.reserve(adj[i].size());
        for (auto [to, bi] : adj[i])
          nb.push_back({static_cast<int>(g.bonds[bi].order), ranks[to]});
        std::sort(nb.begin(), nb.end());
        sigs[i] = {Sig{ranks[i], std::move(nb)}, i};
      }
      std::vector<std::pair<Sig, int>> sorted = sigs;
      std::sort(sorted.begin(), sorted.end());
      std::vector<int> next(n);
      int rank = -1;
      for (size_t k = 0; k < sorted.size(); ++k) {
        if (k == 0 || sorted[k].first != sorted[k - 1].first) ++rank;
        next[sorted[k].second] = rank;
      }
      bool same = std::equal(next.begin(), next.end(), ranks.begin());
      ranks = std::move(next);
      if (same) break;
    }
  };

  refine();
  while (true) {
    // find the lowest tied class
    std::map<int, std::vector<int>> classes;
    for (int i = 0; i < n; ++i) classes[ranks[i]].push_back(i);
    int tie_atom = -1;
    for (auto& [r, members] : classes) {
      (void)r;
      if (members.size() > 1) {
        tie_atom = members.front();
        break;
      }
    }
    if (tie_atom < 0) break;
    for (int i = 0; i < n; ++i)
      if (i != tie_atom && ranks[i] >= ranks[tie_atom]) ++ranks[i];
    refine();
  }
  return ranks;
}

std::string canonical_component(const MolGraph& mol) {
  std::vector<int> ranks = canonical_ranks(mol);
  Adjacency adj = adjacency(mol);
  for (auto& lst : adj)
    std::sort(lst.begin(), lst.end(),
              [&](const auto& x, const auto& y) { return ranks[x.first] < ranks[y.first]; });
  int start = 0;
  for (int i = 1; i < mol.atom_count(); ++i)
    if (ranks[i] < ranks[start]) start = i;
  return detail::emit_component(mol, adj, start);
}

}  // namespace

std::string canonicalize(const MolGraph& g) {
  if (g.atoms.empty()) return "";
  MolGraph norm = normalize_aromatic(g);
  std::vector<MolGraph> comps = split_components(norm);
  std::vector<std::string> parts;
  parts.reserve(comps.size());
  for (const MolGraph& c : comps) parts.push_back(canonical_component(c));
  std::sort(parts.begin(), parts.end());
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += '.';
    out += parts[i];
  }
  return out;
}

std::string canonicalize_smiles(const std::string& s) {
  return canonicalize(parse_smiles(s));
}

}  // namespace retro::chem
