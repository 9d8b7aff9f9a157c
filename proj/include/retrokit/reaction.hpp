#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "retrokit/chem.hpp"

namespace retro {

class DataError : public std::runtime_error {
 public:
  DataError(std::string file, size_t line, const std::string& msg)
      : std::runtime_error(file.empty() ? msg
                                        : file + ":" + std::to_string(line) + ": " + msg),
        file(std::move(file)),
        line(line) {}
  explicit DataError(const std::string& msg) : DataError("", 0, msg) {}

  std::string file;
  size_t line = 0;
};

enum class ExampleSource { dataset, random_pretrain, template_pretrain, smiles_aug };

const char* to_string(ExampleSource s);
ExampleSource example_source_from(const std::string& s);

struct ReactionExample {
  std::string id;
  int reaction_class = 0;  // 0 encodes the '-' (unlabeled) class
  chem::MoleculeSet reactants;
  chem::MolGraph product;  // single connected molecule
  bool atom_maps_present = false;
  ExampleSource source = ExampleSource::dataset;
  // Non-canonical product rendering used by SMILES-variation augmentation;
  // empty means "render canonically".
  std::string product_smiles;
};

// Training-side renderings: atom maps stripped, canonical unless overridden.
std::string product_string(const ReactionExample& r);
std::string reactants_string(const ReactionExample& r);

struct LoadOptions {
  bool drop_reagents = true;  // reactant molecules sharing no atom map with the product
};

// One record per line: id<TAB>class<TAB>reactants>>product[<TAB>source].
// Lines starting with '#' are ignored.
std::vector<ReactionExample> load_reactions(const std::string& path, const LoadOptions& opts = {});
ReactionExample parse_reaction_record(const std::string& line, const std::string& file,
                                      size_t lineno, const LoadOptions& opts = {});

void write_reactions(const std::string& path, const std::vector<ReactionExample>& examples);
std::string format_reaction_record(const ReactionExample& r);

}  // namespace retro
