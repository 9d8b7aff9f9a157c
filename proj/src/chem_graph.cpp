#include "retrokit/chem.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <set>
#include <unordered_set>

#include "chem_internal.hpp"

namespace retro::chem {

const char* to_string(ParseErrorKind k) {
  switch (k) {
    case ParseErrorKind::EmptyInput: return "EmptyInput";
    case ParseErrorKind::UnbalancedParenthesis: return "UnbalancedParenthesis";
    case ParseErrorKind::UnclosedRingBond: return "UnclosedRingBond";
    case ParseErrorKind::InvalidRingBond: return "InvalidRingBond";
    case ParseErrorKind::InvalidAtomToken: return "InvalidAtomToken";
    case ParseErrorKind::InvalidBond: return "InvalidBond";
    case ParseErrorKind::ValenceViolation: return "ValenceViolation";
    case ParseErrorKind::UnlexableCharacter: return "UnlexableCharacter";
  }
  return "ParseError";
}

namespace {

const std::unordered_set<std::string>& periodic_symbols() {
  static const std::unordered_set<std::string> tbl = {
      "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",
      "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
      "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh",
      "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
      "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re",
      "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
      "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db",
      "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};
  return tbl;
}

}  // namespace

bool is_periodic_symbol(const std::string& s) { return periodic_symbols().count(s) > 0; }

bool aromatic_capable(const std::string& element) {
  return element == "B" || element == "C" || element == "N" || element == "O" ||
         element == "P" || element == "S" || element == "Se" || element == "As";
}

Adjacency adjacency(const MolGraph& g) {
  Adjacency adj(g.atoms.size());
  for (int i = 0; i < g.bond_count(); ++i) {
    const Bond& b = g.bonds[i];
    adj[b.a].push_back({b.b, i});
    adj[b.b].push_back({b.a, i});
  }
  return adj;
}

std::vector<int> component_labels(const MolGraph& g) {
  std::vector<int> label(g.atoms.size(), -1);
  Adjacency adj = adjacency(g);
  int next = 0;
  for (int s = 0; s < g.atom_count(); ++s) {
    if (label[s] >= 0) continue;
    std::vector<int> stack = {s};
    label[s] = next;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (auto [n, bi] : adj[v]) {
        (void)bi;
        if (label[n] < 0) {
          label[n] = next;
          stack.push_back(n);
        }
      }
    }
    ++next;
  }
  return label;
}

int component_count(const MolGraph& g) {
  auto lab = component_labels(g);
  int mx = -1;
  for (int l : lab) mx = std::max(mx, l);
  return mx + 1;
}

std::vector<MolGraph> split_components(const MolGraph& g) {
  auto lab = component_labels(g);
  int n = component_count(g);
  std::vector<MolGraph> out(n);
  std::vector<int> remap(g.atoms.size(), -1);
  for (int i = 0; i < g.atom_count(); ++i) {
    remap[i] = out[lab[i]].atom_count();
    out[lab[i]].atoms.push_back(g.atoms[i]);
  }
  for (const Bond& b : g.bonds) {
    Bond nb = b;
    nb.a = remap[b.a];
    nb.b = remap[b.b];
    out[lab[b.a]].bonds.push_back(nb);
  }
  return out;
}

// Bonds on a cycle are exactly the non-bridge edges (iterative Tarjan).
std::vector<int> ring_bonds(const MolGraph& g) {
  int n = g.atom_count();
  Adjacency adj = adjacency(g);
  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<bool> is_bridge(g.bonds.size(), false);
  int timer = 0;

  struct Frame {
    int v;
    int parent_edge;
    size_t next;
  };
  for (int s = 0; s < n; ++s) {
    if (disc[s] >= 0) continue;
    std::vector<Frame> stack;
    disc[s] = low[s] = timer++;
    stack.push_back({s, -1, 0});
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < adj[f.v].size()) {
        auto [to, ei] = adj[f.v][f.next++];
        if (ei == f.parent_edge) continue;
        if (disc[to] >= 0) {
          low[f.v] = std::min(low[f.v], disc[to]);
        } else {
          disc[to] = low[to] = timer++;
          stack.push_back({to, ei, 0});
        }
      } else {
        int v = f.v;
        int pe = f.parent_edge;
        stack.pop_back();
        if (!stack.empty()) {
          int p = stack.back().v;
          low[p] = std::min(low[p], low[v]);
          if (low[v] > disc[p]) is_bridge[pe] = true;
        }
      }
    }
  }
  std::vector<int> rings;
  for (int i = 0; i < g.bond_count(); ++i)
    if (!is_bridge[i]) rings.push_back(i);
  return rings;
}

int effective_h(const MolGraph& g, int atom) {
  return detail::effective_h_adj(g, adjacency(g), atom);
}

std::vector<std::string> valence_warnings(const MolGraph& g) {
  std::vector<std::string> out;
  Adjacency adj = adjacency(g);
  for (int i = 0; i < g.atom_count(); ++i) {
    const Atom& a = g.atoms[i];
    auto allowed = detail::allowed_valences(a);
    if (allowed.empty()) continue;
    int total = detail::bond_order_sum(g, adj, i) + (a.explicit_h ? *a.explicit_h : 0);
    int mx = allowed.back();
    if (total > mx) {
      out.push_back("atom " + std::to_string(i) + " (" + a.element +
                    "): valence " + std::to_string(total) + " exceeds " + std::to_string(mx));
    }
  }
  return out;
}

MolGraph strip_atom_maps(const MolGraph& g) {
  MolGraph out = g;
  for (Atom& a : out.atoms) a.atom_map.reset();
  return out;
}

MoleculeSet to_molecule_set(const MolGraph& g) {
  MoleculeSet ms;
  ms.molecules = split_components(g);
  return ms;
}

std::string canonical_set_key(const MoleculeSet& ms) {
  std::vector<std::string> keys;
  keys.reserve(ms.molecules.size());
  for (const MolGraph& m : ms.molecules) keys.push_back(canonicalize(m));
  std::sort(keys.begin(), keys.end());
  std::string out;
  for (size_t i = 0; i < keys.size(); ++i) {
    if (i) out += '.';
    out += keys[i];
  }
  return out;
}

bool molecule_set_equal(const MoleculeSet& a, const MoleculeSet& b) {
  if (a.size() != b.size()) return false;
  return canonical_set_key(a) == canonical_set_key(b);
}

}  // namespace retro::chem
