#include <algorithm>
#include <cstdlib>

#include "chem_internal.hpp"

namespace retro::chem::detail {

std::vector<int> allowed_valences(const Atom& a) {
  std::vector<int> base;
  const std::string& e = a.element;
  if (e == "B") base = {3};
  else if (e == "C") base = {4};
  else if (e == "N") base = {3, 5};
  else if (e == "O") base = {2};
  else if (e == "P") base = {3, 5};
  else if (e == "S") base = {2, 4, 6};
  else if (e == "Se") base = {2, 4, 6};
  else if (e == "As") base = {3, 5};
  else if (e == "F" || e == "Cl" || e == "Br" || e == "I") base = {1};
  else return {};

  // charge widens/narrows valence: +1 on N gives 4, -1 on O gives 1; for the
  // electron-poor B/C side a charge always removes a bonding slot
  int shift = (e == "B" || e == "C") ? -std::abs(a.charge) : a.charge;
  for (int& v : base) v = std::max(0, v + shift);
  return base;
}

int bond_order_sum(const MolGraph& g, const Adjacency& adj, int atom) {
  const Atom& a = g.atoms[atom];
  bool arom_counts_one = (a.element == "O" || a.element == "S" || a.element == "Se");
  int twice = 0;
  for (auto [n, bi] : adj[atom]) {
    (void)n;
    switch (g.bonds[bi].order) {
      case BondOrder::Single: twice += 2; break;
      case BondOrder::Double: twice += 4; break;
      case BondOrder::Triple: twice += 6; break;
      case BondOrder::Aromatic: twice += arom_counts_one ? 2 : 3; break;
    }
  }
  return twice / 2;
}

int implicit_h_count(const MolGraph& g, const Adjacency& adj, int atom) {
  const Atom& a = g.atoms[atom];
  if (a.charge != 0) return -1;
  auto allowed = allowed_valences(a);
  if (allowed.empty()) return -1;
  int sum = bond_order_sum(g, adj, atom);
  for (int v : allowed)
    if (v >= sum) return v - sum;
  return 0;  // over max valence; no room for hydrogens
}

int effective_h_adj(const MolGraph& g, const Adjacency& adj, int atom) {
  const Atom& a = g.atoms[atom];
  if (a.explicit_h) return *a.explicit_h;
  int ih = implicit_h_count(g, adj, atom);
  return ih < 0 ? 0 : ih;
}

bool bare_writable(const Atom& a) {
  static const char* organic[] = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"};
  static const char* arom[] = {"B", "C", "N", "O", "P", "S"};
  if (a.charge != 0 || a.isotope || a.atom_map) return false;
  if (a.aromatic) {
    for (const char* e : arom)
      if (a.element == e) return true;
    return false;
  }
  for (const char* e : organic)
    if (a.element == e) return true;
  return false;
}

std::string atom_token(const MolGraph& g, const Adjacency& adj, int atom) {
  const Atom& a = g.atoms[atom];
  std::string sym = a.element;
  if (a.aromatic)
    for (char& c : sym) c = static_cast<char>(std::tolower(c));

  bool bracket = !bare_writable(a);
  if (!bracket && a.explicit_h) {
    // keep the bare form when the annotation is redundant
    bracket = *a.explicit_h != implicit_h_count(g, adj, atom);
  }
  if (!bracket) return sym;

  std::string out = "[";
  if (a.isotope) out += std::to_string(*a.isotope);
  out += sym;
  int h = effective_h_adj(g, adj, atom);
  if (h == 1) out += "H";
  else if (h > 1) out += "H" + std::to_string(h);
  if (a.charge == 1) out += "+";
  else if (a.charge == -1) out += "-";
  else if (a.charge > 1) out += "+" + std::to_string(a.charge);
  else if (a.charge < -1) out += "-" + std::to_string(-a.charge);
  if (a.atom_map) out += ":" + std::to_string(*a.atom_map);
  out += "]";
  return out;
}

BondOrder default_order(const Atom& a, const Atom& b) {
  return (a.aromatic && b.aromatic) ? BondOrder::Aromatic : BondOrder::Single;
}

std::string bond_symbol(const MolGraph& g, const Bond& bond) {
  BondOrder def = default_order(g.atoms[bond.a], g.atoms[bond.b]);
  if (bond.order == def) return "";
  switch (bond.order) {
    case BondOrder::Single: return "-";
    case BondOrder::Double: return "=";
    case BondOrder::Triple: return "#";
    case BondOrder::Aromatic: return ":";
  }
  return "";
}

}  // namespace retro::chem::detail
