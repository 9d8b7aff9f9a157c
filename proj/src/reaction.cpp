#include "retrokit/reaction.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace retro {

const char* to_string(ExampleSource s) {
  switch (s) {
    case ExampleSource::dataset: return "dataset";
    case ExampleSource::random_pretrain: return "random_pretrain";
    case ExampleSource::template_pretrain: return "template_pretrain";
    case ExampleSource::smiles_aug: return "smiles_aug";
  }
  return "dataset";
}

ExampleSource example_source_from(const std::string& s) {
  if (s == "random_pretrain") return ExampleSource::random_pretrain;
  if (s == "template_pretrain") return ExampleSource::template_pretrain;
  if (s == "smiles_aug") return ExampleSource::smiles_aug;
  return ExampleSource::dataset;
}

std::string product_string(const ReactionExample& r) {
  if (!r.product_smiles.empty()) return r.product_smiles;
  return chem::canonicalize(chem::strip_atom_maps(r.product));
}

std::string reactants_string(const ReactionExample& r) {
  std::vector<std::string> parts;
  parts.reserve(r.reactants.size());
  for (const chem::MolGraph& m : r.reactants.molecules)
    parts.push_back(chem::canonicalize(chem::strip_atom_maps(m)));
  std::sort(parts.begin(), parts.end());
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += '.';
    out += parts[i];
  }
  return out;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t t = line.find('\t', pos);
    if (t == std::string::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, t - pos));
    pos = t + 1;
  }
  return out;
}

void check_map_uniqueness(const std::vector<chem::MolGraph>& side, const std::string& file,
                          size_t lineno, const char* label) {
  std::set<int> seen;
  for (const chem::MolGraph& m : side)
    for (const chem::Atom& a : m.atoms)
      if (a.atom_map && !seen.insert(*a.atom_map).second)
        throw DataError(file, lineno,
                        std::string("duplicate atom map ") + std::to_string(*a.atom_map) +
                            " on " + label + " side");
}

}  // namespace

ReactionExample parse_reaction_record(const std::string& line, const std::string& file,
                                      size_t lineno, const LoadOptions& opts) {
  auto cols = split_tabs(line);
  if (cols.size() < 3) throw DataError(file, lineno, "expected id<TAB>class<TAB>reaction");

  ReactionExample r;
  r.id = cols[0];
  if (cols[1] != "-") {
    try {
      r.reaction_class = std::stoi(cols[1]);
    } catch (const std::exception&) {
      throw DataError(file, lineno, "bad class field '" + cols[1] + "'");
    }
    if (r.reaction_class < 1 || r.reaction_class > 10)
      throw DataError(file, lineno, "class out of range 1..10");
  }
  if (cols.size() >= 4) r.source = example_source_from(cols[3]);

  const std::string& rxn = cols[2];
  size_t arrow = rxn.find(">>");
  if (arrow == std::string::npos) throw DataError(file, lineno, "missing '>>' separator");
  std::string lhs = rxn.substr(0, arrow);
  std::string rhs = rxn.substr(arrow + 2);
  if (lhs.empty() || rhs.empty()) throw DataError(file, lineno, "empty reaction side");

  chem::MolGraph reactants_g, product_g;
  try {
    reactants_g = chem::parse_smiles(lhs);
    product_g = chem::parse_smiles(rhs);
  } catch (const chem::ParseError& e) {
    throw DataError(file, lineno, e.what());
  }

  if (chem::component_count(product_g) != 1)
    throw DataError(file, lineno, "product must be a single molecule");
  r.product = std::move(product_g);

  r.reactants = chem::to_molecule_set(reactants_g);
  if (r.reactants.empty()) throw DataError(file, lineno, "no reactant molecules");

  std::set<int> product_maps;
  for (const chem::Atom& a : r.product.atoms)
    if (a.atom_map) product_maps.insert(*a.atom_map);
  r.atom_maps_present = !product_maps.empty();

  check_map_uniqueness({r.product}, file, lineno, "product");
  check_map_uniqueness(r.reactants.molecules, file, lineno, "reactant");

  if (opts.drop_reagents && r.atom_maps_present) {
    std::vector<chem::MolGraph> kept;
    for (chem::MolGraph& m : r.reactants.molecules) {
      bool contributes = false;
      for (const chem::Atom& a : m.atoms)
        if (a.atom_map && product_maps.count(*a.atom_map)) {
          contributes = true;
          break;
        }
      if (contributes) kept.push_back(std::move(m));
    }
    if (!kept.empty()) r.reactants.molecules = std::move(kept);
  }
  return r;
}

std::vector<ReactionExample> load_reactions(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw DataError(path, 0, "cannot open file");
  std::vector<ReactionExample> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.push_back(parse_reaction_record(line, path, lineno, opts));
  }
  return out;
}

std::string format_reaction_record(const ReactionExample& r) {
  std::ostringstream os;
  os << r.id << '\t';
  if (r.reaction_class > 0) os << r.reaction_class;
  else os << '-';
  os << '\t';

  // preserve atom maps on the wire; training-side rendering strips them
  std::vector<std::string> parts;
  for (const chem::MolGraph& m : r.reactants.molecules)
    parts.push_back(chem::canonicalize(m));
  std::sort(parts.begin(), parts.end());
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) os << '.';
    os << parts[i];
  }
  os << ">>";
  if (!r.product_smiles.empty()) os << r.product_smiles;
  else os << chem::canonicalize(r.product);
  os << '\t' << to_string(r.source);
  return os.str();
}

void write_reactions(const std::string& path, const std::vector<ReactionExample>& examples) {
  std::ofstream out(path);
  if (!out) throw DataError(path, 0, "cannot open file for writing");
  for (const ReactionExample& r : examples) out << format_reaction_record(r) << '\n';
}

}  // namespace retro
