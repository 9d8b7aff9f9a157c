#pragma once

#include <string>
#include <vector>

#include "retrokit/chem.hpp"

namespace retro::chem::detail {

// Allowed valence states, lowest first; empty means unconstrained.
std::vector<int> allowed_valences(const Atom& a);

// Floored sum of bond orders (aromatic = 1.5, but 1.0 toward O/S/Se).
int bond_order_sum(const MolGraph& g, const Adjacency& adj, int atom);

// Hydrogens implied for a neutral organic-subset atom; -1 if the atom cannot
// carry implicit hydrogens (charged, exotic element, ...).
int implicit_h_count(const MolGraph& g, const Adjacency& adj, int atom);

int effective_h_adj(const MolGraph& g, const Adjacency& adj, int atom);

bool bare_writable(const Atom& a);

// SMILES token for one atom, bracketing only when required. Redundant
// explicit-H annotations are dropped so [CH4] and C render identically.
std::string atom_token(const MolGraph& g, const Adjacency& adj, int atom);

BondOrder default_order(const Atom& a, const Atom& b);

// Bond symbol to emit before an atom/ring digit; empty when the default
// order already encodes it.
std::string bond_symbol(const MolGraph& g, const Bond& bond);

// One component as SMILES, neighbors taken in the order `adj` lists them.
std::string emit_component(const MolGraph& g, const Adjacency& adj, int start);

}  // namespace retro::chem::detail
