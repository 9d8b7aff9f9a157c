#include "retrokit/augment.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <set>
#include <thread>

namespace retro::augment {

using chem::BondOrder;
using chem::MolGraph;

std::vector<int> breakable_bonds(const MolGraph& g) {
  std::vector<int> rings = chem::ring_bonds(g);
  std::set<int> ring_set(rings.begin(), rings.end());
  std::vector<int> out;
  for (int i = 0; i < g.bond_count(); ++i)
    if (g.bonds[i].order == BondOrder::Single && !ring_set.count(i)) out.push_back(i);
  return out;
}

std::vector<ReactionExample> random_bond_break(const MolGraph& g, Rng& rng, int cap) {
  if (chem::component_count(g) != 1)
    throw AugmentError("random_bond_break requires a connected molecule");
  std::vector<int> candidates = breakable_bonds(g);
  if (candidates.empty()) throw AugmentError("NoBreakableBond: no acyclic single bond to break");

  rng.shuffle(candidates);
  if (cap >= 0 && static_cast<int>(candidates.size()) > cap) candidates.resize(cap);

  std::vector<ReactionExample> out;
  for (int bi : candidates) {
    MolGraph broken = g;
    broken.bonds.erase(broken.bonds.begin() + bi);
    ReactionExample ex;
    ex.product = g;
    ex.reactants = chem::to_molecule_set(broken);  // a bridge removal gives two parts
    ex.source = ExampleSource::random_pretrain;
    out.push_back(std::move(ex));
  }
  return out;
}

CorpusResult build_pretrain_corpus(const std::vector<MolGraph>& targets, PretrainMethod method,
                                   const std::vector<Template>& templates, int cap, Rng rng,
                                   int workers) {
  if (method == PretrainMethod::template_based && templates.empty())
    throw AugmentError("template method requires a template store");

  struct Slot {
    std::vector<ReactionExample> examples;
    bool cap_hit = false;
  };
  std::vector<Slot> slots(targets.size());

  auto work = [&](size_t i) {
    Rng local = rng.fork(i);
    Slot& slot = slots[i];
    const MolGraph& g = targets[i];
    if (method == PretrainMethod::random) {
      try {
        slot.examples = random_bond_break(g, local, cap);
      } catch (const AugmentError&) {
        // no breakable bond; recorded as a skip below
      }
    } else {
      std::vector<ReactionExample> pool;
      std::set<std::string> seen;
      for (const Template& t : templates) {
        ApplyResult r = apply_template(t, g);
        if (r.embedding_cap_hit) slot.cap_hit = true;
        for (ReactionExample& ex : r.examples) {
          std::string key = chem::canonical_set_key(ex.reactants);
          if (seen.insert(key).second) pool.push_back(std::move(ex));
        }
      }
      // uniform sample without replacement over all applicable rewrites
      local.shuffle(pool);
      if (cap >= 0 && static_cast<int>(pool.size()) > cap) pool.resize(cap);
      slot.examples = std::move(pool);
    }
  };

  if (workers <= 1) {
    for (size_t i = 0; i < targets.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        while (true) {
          size_t i = next.fetch_add(1);
          if (i >= targets.size()) break;
          work(i);
        }
      });
    for (auto& th : pool) th.join();
  }

  CorpusResult result;
  for (size_t i = 0; i < targets.size(); ++i) {
    if (slots[i].cap_hit) ++result.cap_hits;
    if (slots[i].examples.empty()) {
      result.skipped_targets.push_back(i);
      continue;
    }
    int k = 0;
    for (ReactionExample& ex : slots[i].examples) {
      ex.id = "pt" + std::to_string(i) + "_" + std::to_string(k++);
      result.examples.push_back(std::move(ex));
    }
  }
  return result;
}

std::vector<ReactionExample> smiles_augment(const ReactionExample& r, int n, Rng& rng) {
  std::vector<ReactionExample> out;
  MolGraph stripped = chem::strip_atom_maps(r.product);
  std::string base = product_string(r);
  std::set<std::string> seen = {base};
  int attempts = 0;
  int max_attempts = 20 * std::max(1, n);
  while (static_cast<int>(out.size()) < n && attempts < max_attempts) {
    ++attempts;
    std::string variant = chem::write_smiles(stripped, rng.next());
    if (!seen.insert(variant).second) continue;
    ReactionExample ex = r;
    ex.id = r.id + "_aug" + std::to_string(out.size());
    ex.product_smiles = variant;
    ex.source = ExampleSource::smiles_aug;
    out.push_back(std::move(ex));
  }
  return out;
}

DatasetSplit random_split(const std::vector<ReactionExample>& data, Rng rng,
                          double test_fraction) {
  std::vector<size_t> idx(data.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(idx);
  size_t n_test = static_cast<size_t>(test_fraction * static_cast<double>(data.size()) + 0.5);
  DatasetSplit split;
  split.mode = DatasetSplit::Mode::random;
  for (size_t k = 0; k < idx.size(); ++k)
    (k < n_test ? split.test : split.train).push_back(data[idx[k]]);
  return split;
}

namespace {

std::map<std::string, int> element_census(const MolGraph& g) {
  std::map<std::string, int> out;
  for (const chem::Atom& a : g.atoms) out[a.element] += 1;
  return out;
}

bool pattern_elements_fit(const Template& t, const std::map<std::string, int>& mol_census) {
  std::map<std::string, int> need;
  for (const PatternAtom& a : t.product_pattern.atoms) need[a.element] += 1;
  for (auto& [e, c] : need) {
    auto it = mol_census.find(e);
    if (it == mol_census.end() || it->second < c) return false;
  }
  return true;
}

}  // namespace

std::vector<std::string> solvable_test_examples(const std::vector<ReactionExample>& train,
                                                const std::vector<ReactionExample>& test) {
  CorpusTemplates ct = extract_corpus_templates(train);
  std::vector<std::string> solvable;
  for (const ReactionExample& ex : test) {
    std::string gold = chem::canonical_set_key(ex.reactants);
    // the gold key carries maps; compare in stripped space
    chem::MoleculeSet stripped;
    for (const MolGraph& m : ex.reactants.molecules)
      stripped.molecules.push_back(chem::strip_atom_maps(m));
    gold = chem::canonical_set_key(stripped);

    MolGraph product = chem::strip_atom_maps(ex.product);
    auto census = element_census(product);
    bool hit = false;
    for (const Template& t : ct.templates) {
      if (!pattern_elements_fit(t, census)) continue;
      ApplyResult r = apply_template(t, product);
      for (const ReactionExample& cand : r.examples)
        if (chem::canonical_set_key(cand.reactants) == gold) {
          hit = true;
          break;
        }
      if (hit) break;
    }
    if (hit) solvable.push_back(ex.id);
  }
  return solvable;
}

DatasetSplit template_split(const std::vector<ReactionExample>& data, Rng rng,
                            double test_fraction) {
  DatasetSplit split;
  split.mode = DatasetSplit::Mode::template_disjoint;
  if (data.empty()) return split;

  CorpusTemplates ct = extract_corpus_templates(data);

  // whole groups per template id; extraction failures stay in train
  std::map<std::string, std::vector<size_t>> groups;
  std::vector<size_t> unextractable;
  for (size_t i = 0; i < data.size(); ++i) {
    if (ct.example_template_id[i].empty()) unextractable.push_back(i);
    else groups[ct.example_template_id[i]].push_back(i);
  }

  std::vector<std::string> group_order;
  for (auto& [id, members] : groups) {
    (void)members;
    group_order.push_back(id);
  }
  std::sort(group_order.begin(), group_order.end());
  rng.shuffle(group_order);

  size_t target = static_cast<size_t>(test_fraction * static_cast<double>(data.size()) + 0.5);
  std::set<size_t> test_idx;
  size_t next_group = 0;
  auto refill = [&]() {
    while (test_idx.size() < target && next_group < group_order.size()) {
      for (size_t i : groups[group_order[next_group]]) test_idx.insert(i);
      ++next_group;
    }
    return test_idx.size() >= target;
  };
  if (!refill())
    throw AugmentError("InsufficientGroups: template groups cannot reach the test fraction");

  // solvability sweep to a fixpoint; violators move back to train
  while (true) {
    std::vector<ReactionExample> train, test;
    std::vector<size_t> test_list(test_idx.begin(), test_idx.end());
    for (size_t i = 0; i < data.size(); ++i)
      if (!test_idx.count(i)) train.push_back(data[i]);
    for (size_t i : test_list) test.push_back(data[i]);

    std::vector<std::string> bad = solvable_test_examples(train, test);
    if (bad.empty()) {
      split.train = std::move(train);
      split.test = std::move(test);
      return split;
    }
    std::set<std::string> bad_ids(bad.begin(), bad.end());
    for (size_t i : test_list)
      if (bad_ids.count(data[i].id)) test_idx.erase(i);
    if (!refill())
      throw AugmentError("InsufficientGroups: sweep exhausted the template groups");
  }
}

std::vector<ReactionExample> rare_subset(const std::vector<ReactionExample>& full,
                                         const std::vector<ReactionExample>& test, int threshold) {
  CorpusTemplates full_ct = extract_corpus_templates(full);
  std::map<std::string, int> counts;
  for (const Template& t : full_ct.templates) counts[t.id] = t.count;

  CorpusTemplates test_ct = extract_corpus_templates(test);
  std::vector<ReactionExample> out;
  for (size_t i = 0; i < test.size(); ++i) {
    const std::string& tid = test_ct.example_template_id[i];
    if (tid.empty()) continue;
    auto it = counts.find(tid);
    int c = it == counts.end() ? 0 : it->second;
    if (c <= threshold) out.push_back(test[i]);
  }
  return out;
}

}  // namespace retro::augment
