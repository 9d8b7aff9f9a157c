#pragma once

#include <optional>
#include <string>
#include <vector>

#include "retrokit/chem.hpp"
#include "retrokit/reaction.hpp"

namespace retro::augment {

enum class TemplateErrorKind { UnmappedAtoms, NoChange, BadSerialization };

class TemplateError : public std::runtime_error {
 public:
  TemplateError(TemplateErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind(kind) {}
  TemplateErrorKind kind;
};

struct PatternAtom {
  std::string element;
  bool aromatic = false;
  int charge = 0;
  int degree = 0;   // full degree in the source molecule; a match constraint
  bool changed = false;
  std::optional<int> explicit_h;  // reactant side only; carried into rewrites
};

struct PatternBond {
  int a = 0;
  int b = 0;
  chem::BondOrder order = chem::BondOrder::Single;
};

struct PatternGraph {
  std::vector<PatternAtom> atoms;
  std::vector<PatternBond> bonds;
};

// Radius-1 subgraph rewrite rule in the retro direction: match the product
// pattern, break/forms bonds, attach leaving-group atoms.
struct Template {
  std::string id;  // hash of the canonical serialization
  PatternGraph product_pattern;
  struct ReactantPattern {
    PatternGraph graph;
    std::vector<int> product_ref;  // per atom: product_pattern index, or -1 (leaving group)
  };
  std::vector<ReactantPattern> reactant_patterns;
  std::string changed_bond_signature;
  int count = 1;
};

// Requires full product-side atom maps. Throws TemplateError on unmapped
// product atoms or when the two sides are identical.
Template extract_template(const ReactionExample& r);

struct ApplyResult {
  std::vector<ReactionExample> examples;
  bool embedding_cap_hit = false;
};

inline constexpr int kEmbeddingCap = 256;

// One example per distinct embedding of the product pattern, deduplicated by
// the canonical reactant set. Empty when nothing matches.
ApplyResult apply_template(const Template& t, const chem::MolGraph& g);

std::string serialize_template(const Template& t);
Template deserialize_template(const std::string& line);

std::string template_id(const Template& t);

// Count-based changed-bond descriptor computable without atom maps; used by
// the proxy reaction classifier.
std::string unmapped_change_signature(const chem::MolGraph& product,
                                      const chem::MoleculeSet& reactants);

// Store format: id<TAB>count<TAB>serialized-pattern
void write_template_store(const std::string& path, const std::vector<Template>& templates);
std::vector<Template> load_template_store(const std::string& path);

// Extraction over a corpus: unique templates with occurrence counts, plus the
// per-example template id ("" where extraction failed).
struct CorpusTemplates {
  std::vector<Template> templates;
  std::vector<std::string> example_template_id;
  std::vector<std::string> failures;  // "<example id>: reason"
};
CorpusTemplates extract_corpus_templates(const std::vector<ReactionExample>& data);

}  // namespace retro::augment
