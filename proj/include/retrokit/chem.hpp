#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace retro::chem {

enum class BondOrder : uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

struct Atom {
  std::string element;
  int charge = 0;
  bool aromatic = false;
  std::optional<int> explicit_h;  // bracket atoms only; organic-subset H is derived
  std::optional<int> isotope;
  std::optional<int> atom_map;
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;

  int other(int i) const { return i == a ? b : a; }
};

struct MolGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;

  int atom_count() const { return static_cast<int>(atoms.size()); }
  int bond_count() const { return static_cast<int>(bonds.size()); }
};

// (neighbor atom index, bond index) per atom
using Adjacency = std::vector<std::vector<std::pair<int, int>>>;
Adjacency adjacency(const MolGraph& g);

enum class ParseErrorKind {
  EmptyInput,
  UnbalancedParenthesis,
  UnclosedRingBond,
  InvalidRingBond,
  InvalidAtomToken,
  InvalidBond,
  ValenceViolation,
  UnlexableCharacter,
};

const char* to_string(ParseErrorKind k);

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, size_t offset, const std::string& msg)
      : std::runtime_error(std::string(to_string(kind)) + " at offset " + std::to_string(offset) +
                           ": " + msg),
        kind(kind),
        offset(offset) {}

  ParseErrorKind kind;
  size_t offset;
};

struct ParseOptions {
  bool strict_valence = false;
};

// --- parsing / writing -----------------------------------------------------

MolGraph parse_smiles(const std::string& s, const ParseOptions& opts = {},
                      std::vector<std::string>* warnings = nullptr);

// Random depth-first traversal; same (graph, seed) always gives the same string.
std::string write_smiles(const MolGraph& g, uint64_t seed);

// Deterministic representative of the isomorphism class. Multi-component
// graphs render as the '.'-join of each component's canonical string, sorted.
std::string canonicalize(const MolGraph& g);
std::string canonicalize_smiles(const std::string& s);

// --- tokenization ----------------------------------------------------------

// Lexical split only; concatenating the tokens reproduces the input exactly.
std::vector<std::string> tokenize(const std::string& s);
std::string detokenize(const std::vector<std::string>& tokens);

// --- graph queries ---------------------------------------------------------

// Indices of bonds lying on at least one cycle.
std::vector<int> ring_bonds(const MolGraph& g);

int component_count(const MolGraph& g);
std::vector<int> component_labels(const MolGraph& g);
std::vector<MolGraph> split_components(const MolGraph& g);

// Effective hydrogen count: explicit_h when present, else valence-derived.
int effective_h(const MolGraph& g, int atom);

// Warnings (or errors in strict mode) for atoms whose valence exceeds the table.
std::vector<std::string> valence_warnings(const MolGraph& g);

MolGraph strip_atom_maps(const MolGraph& g);

bool is_periodic_symbol(const std::string& s);
bool aromatic_capable(const std::string& element);

// --- molecule sets ---------------------------------------------------------

struct MoleculeSet {
  std::vector<MolGraph> molecules;

  bool empty() const { return molecules.empty(); }
  size_t size() const { return molecules.size(); }
};

MoleculeSet to_molecule_set(const MolGraph& g);

// '.'-joined sorted canonical strings; the multiset identity of the set.
std::string canonical_set_key(const MoleculeSet& ms);

bool molecule_set_equal(const MoleculeSet& a, const MoleculeSet& b);

}  // namespace retro::chem
