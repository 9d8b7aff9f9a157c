#pragma once

#include <string>
#include <vector>

#include "retrokit/reaction.hpp"
#include "retrokit/rng.hpp"
#include "retrokit/templates.hpp"

namespace retro::augment {

class AugmentError : public std::runtime_error {
 public:
  explicit AugmentError(const std::string& msg) : std::runtime_error(msg) {}
};

// One example per broken acyclic single bond, sampled without replacement.
// Throws AugmentError when the molecule has no breakable bond.
std::vector<ReactionExample> random_bond_break(const chem::MolGraph& g, Rng& rng, int cap);

// Indices of bonds random_bond_break may select.
std::vector<int> breakable_bonds(const chem::MolGraph& g);

enum class PretrainMethod { random, template_based };

struct CorpusResult {
  std::vector<ReactionExample> examples;
  std::vector<size_t> skipped_targets;  // targets that yielded nothing
  int cap_hits = 0;                     // embedding-capped (template, molecule) pairs
};

CorpusResult build_pretrain_corpus(const std::vector<chem::MolGraph>& targets,
                                   PretrainMethod method, const std::vector<Template>& templates,
                                   int cap, Rng rng, int workers = 1);

// Up to n copies of r whose product is rendered by a different traversal;
// fewer when no distinct rendering exists.
std::vector<ReactionExample> smiles_augment(const ReactionExample& r, int n, Rng& rng);

struct DatasetSplit {
  std::vector<ReactionExample> train;
  std::vector<ReactionExample> test;
  enum class Mode { random, template_disjoint } mode = Mode::random;
};

DatasetSplit random_split(const std::vector<ReactionExample>& data, Rng rng, double test_fraction);

// Greedy whole-group assignment by template id, then a solvability sweep:
// no emitted test example may be solved by any train-extracted template.
// Throws AugmentError("InsufficientGroups...") when test_fraction is not
// reachable.
DatasetSplit template_split(const std::vector<ReactionExample>& data, Rng rng,
                            double test_fraction);

// Verification used by template_split and the acceptance suite: ids of test
// examples whose gold reactants are produced by some train template.
std::vector<std::string> solvable_test_examples(const std::vector<ReactionExample>& train,
                                                const std::vector<ReactionExample>& test);

// Test examples whose template id occurs at most `threshold` times in `full`.
std::vector<ReactionExample> rare_subset(const std::vector<ReactionExample>& full,
                                         const std::vector<ReactionExample>& test, int threshold);

}  // namespace retro::augment
