#include "retrokit/templates.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "retrokit/rng.hpp"

namespace retro::augment {

namespace {

using chem::Adjacency;
using chem::Atom;
using chem::Bond;
using chem::BondOrder;
using chem::MolGraph;

std::pair<int, int> ordered(int a, int b) { return a < b ? std::make_pair(a, b) : std::make_pair(b, a); }

std::string elem_pair(const std::string& a, const std::string& b) {
  return a <= b ? a + "-" + b : b + "-" + a;
}

// --- canonical ordering of pattern graphs -----------------------------------

// Refinement with artificial tie splitting over an arbitrary seeded graph;
// mirrors the molecule canonicalizer but works on pattern attributes.
std::vector<int> pattern_ranks(const PatternGraph& pg, const std::vector<std::string>& seed) {
  int n = static_cast<int>(pg.atoms.size());
  std::vector<std::vector<std::pair<int, int>>> adj(n);
  for (const PatternBond& b : pg.bonds) {
    adj[b.a].push_back({b.b, static_cast<int>(b.order)});
    adj[b.b].push_back({b.a, static_cast<int>(b.order)});
  }
  std::vector<int> ranks(n);
  {
    std::vector<std::pair<std::string, int>> s(n);
    for (int i = 0; i < n; ++i) s[i] = {seed[i], i};
    std::vector<std::pair<std::string, int>> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    int r = -1;
    for (size_t k = 0; k < sorted.size(); ++k) {
      if (k == 0 || sorted[k].first != sorted[k - 1].first) ++r;
      ranks[sorted[k].second] = r;
    }
  }
  auto refine = [&]() {
    while (true) {
      using Sig = std::pair<int, std::vector<std::pair<int, int>>>;
      std::vector<std::pair<Sig, int>> sigs(n);
      for (int i = 0; i < n; ++i) {
        std::vector<std::pair<int, int>> nb;
        for (auto [to, o] : adj[i]) nb.push_back({o, ranks[to]});
        std::sort(nb.begin(), nb.end());
        sigs[i] = {Sig{ranks[i], std::move(nb)}, i};
      }
      auto sorted = sigs;
      std::sort(sorted.begin(), sorted.end());
      std::vector<int> next(n);
      int r = -1;
      for (size_t k = 0; k < sorted.size(); ++k) {
        if (k == 0 || sorted[k].first != sorted[k - 1].first) ++r;
        next[sorted[k].second] = r;
      }
      bool same = std::equal(next.begin(), next.end(), ranks.begin());
      ranks = std::move(next);
      if (same) break;
    }
  };
  refine();
  while (true) {
    std::map<int, std::vector<int>> classes;
    for (int i = 0; i < n; ++i) classes[ranks[i]].push_back(i);
    int tie = -1;
    for (auto& [r, m] : classes) {
      (void)r;
      if (m.size() > 1) {
        tie = m.front();
        break;
      }
    }
    if (tie < 0) break;
    for (int i = 0; i < n; ++i)
      if (i != tie && ranks[i] >= ranks[tie]) ++ranks[i];
    refine();
  }
  return ranks;
}

PatternGraph permute_pattern(const PatternGraph& pg, const std::vector<int>& ranks,
                             std::vector<int>* old_to_new) {
  int n = static_cast<int>(pg.atoms.size());
  PatternGraph out;
  out.atoms.resize(n);
  std::vector<int> o2n(n);
  for (int i = 0; i < n; ++i) {
    o2n[i] = ranks[i];
    out.atoms[ranks[i]] = pg.atoms[i];
  }
  for (const PatternBond& b : pg.bonds) {
    auto [x, y] = ordered(o2n[b.a], o2n[b.b]);
    out.bonds.push_back({x, y, b.order});
  }
  std::sort(out.bonds.begin(), out.bonds.end(), [](const PatternBond& x, const PatternBond& y) {
    return std::tie(x.a, x.b, x.order) < std::tie(y.a, y.b, y.order);
  });
  if (old_to_new) *old_to_new = o2n;
  return out;
}

std::string product_seed(const PatternAtom& a) {
  std::ostringstream os;
  os << a.element << '|' << a.aromatic << '|' << a.charge << '|' << a.degree << '|' << a.changed;
  return os.str();
}

void serialize_atoms(std::ostringstream& os, const PatternGraph& pg,
                     const std::vector<int>* refs) {
  os << '{';
  for (size_t i = 0; i < pg.atoms.size(); ++i) {
    const PatternAtom& a = pg.atoms[i];
    if (i) os << ';';
    os << a.element << ',' << (a.aromatic ? 1 : 0) << ',' << a.charge << ',' << a.degree << ','
       << (a.changed ? 1 : 0);
    if (refs) {
      os << ',' << (*refs)[i] << ',';
      if (a.explicit_h) os << *a.explicit_h;
      else os << '*';
    }
  }
  os << '}';
}

void serialize_bonds(std::ostringstream& os, const PatternGraph& pg) {
  os << '{';
  for (size_t i = 0; i < pg.bonds.size(); ++i) {
    const PatternBond& b = pg.bonds[i];
    if (i) os << ';';
    os << b.a << '-' << b.b << ':' << static_cast<int>(b.order);
  }
  os << '}';
}

}  // namespace

std::string serialize_template(const Template& t) {
  std::ostringstream os;
  os << 'P';
  serialize_atoms(os, t.product_pattern, nullptr);
  serialize_bonds(os, t.product_pattern);
  os << ">>";
  for (size_t i = 0; i < t.reactant_patterns.size(); ++i) {
    if (i) os << '|';
    serialize_atoms(os, t.reactant_patterns[i].graph, &t.reactant_patterns[i].product_ref);
    serialize_bonds(os, t.reactant_patterns[i].graph);
  }
  os << '!' << t.changed_bond_signature;
  return os.str();
}

std::string template_id(const Template& t) {
  std::string s = serialize_template(t);
  uint64_t h = fnv1a64(s.data(), s.size());
  char buf[17];
  snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- extraction --------------------------------------------------------------

Template extract_template(const ReactionExample& r) {
  const MolGraph& prod = r.product;
  int np = prod.atom_count();

  std::map<int, int> prod_by_map;
  for (int i = 0; i < np; ++i) {
    if (!prod.atoms[i].atom_map)
      throw TemplateError(TemplateErrorKind::UnmappedAtoms,
                          "product atom " + std::to_string(i) + " has no atom map");
    prod_by_map[*prod.atoms[i].atom_map] = i;
  }

  struct RLoc {
    int mol;
    int atom;
  };
  std::map<int, RLoc> react_by_map;  // only maps that also appear in the product
  int nmol = static_cast<int>(r.reactants.molecules.size());
  std::vector<std::vector<bool>> absent(nmol);  // per reactant atom: no product counterpart
  for (int m = 0; m < nmol; ++m) {
    const MolGraph& mol = r.reactants.molecules[m];
    absent[m].assign(mol.atom_count(), true);
    for (int i = 0; i < mol.atom_count(); ++i) {
      const Atom& a = mol.atoms[i];
      if (a.atom_map && prod_by_map.count(*a.atom_map)) {
        react_by_map[*a.atom_map] = {m, i};
        absent[m][i] = false;
      }
    }
  }

  // changed-bond detection by atom-map comparison
  std::map<std::pair<int, int>, BondOrder> prod_pairs, react_pairs;
  for (const Bond& b : prod.bonds) {
    int ma = *prod.atoms[b.a].atom_map, mb = *prod.atoms[b.b].atom_map;
    prod_pairs[ordered(ma, mb)] = b.order;
  }
  std::set<int> changed_maps;
  std::vector<std::string> sig_parts;
  for (int m = 0; m < nmol; ++m) {
    const MolGraph& mol = r.reactants.molecules[m];
    for (const Bond& b : mol.bonds) {
      bool aa = absent[m][b.a], ab = absent[m][b.b];
      if (!aa && !ab) {
        int ma = *mol.atoms[b.a].atom_map, mb = *mol.atoms[b.b].atom_map;
        react_pairs[ordered(ma, mb)] = b.order;
      } else if (aa != ab) {
        // attachment of a leaving group to a product atom
        int mapped = aa ? b.b : b.a;
        int leaving = aa ? b.a : b.b;
        int mm = *mol.atoms[mapped].atom_map;
        changed_maps.insert(mm);
        sig_parts.push_back("att:" +
                            elem_pair(mol.atoms[mapped].element, mol.atoms[leaving].element) +
                            ":" + std::to_string(static_cast<int>(b.order)));
      }
    }
  }
  for (auto& [pair, order] : prod_pairs) {
    auto it = react_pairs.find(pair);
    const std::string ea = prod.atoms[prod_by_map[pair.first]].element;
    const std::string eb = prod.atoms[prod_by_map[pair.second]].element;
    if (it == react_pairs.end()) {
      changed_maps.insert(pair.first);
      changed_maps.insert(pair.second);
      sig_parts.push_back("brk:" + elem_pair(ea, eb) + ":" +
                          std::to_string(static_cast<int>(order)));
    } else if (it->second != order) {
      changed_maps.insert(pair.first);
      changed_maps.insert(pair.second);
      sig_parts.push_back("chg:" + elem_pair(ea, eb) + ":" +
                          std::to_string(static_cast<int>(order)) + ">" +
                          std::to_string(static_cast<int>(it->second)));
    }
  }
  for (auto& [pair, order] : react_pairs) {
    if (!prod_pairs.count(pair)) {
      changed_maps.insert(pair.first);
      changed_maps.insert(pair.second);
      const std::string ea = prod.atoms[prod_by_map[pair.first]].element;
      const std::string eb = prod.atoms[prod_by_map[pair.second]].element;
      sig_parts.push_back("frm:" + elem_pair(ea, eb) + ":" +
                          std::to_string(static_cast<int>(order)));
    }
  }
  // attribute-only changes keep the atom in the reaction center
  for (auto& [mapid, loc] : react_by_map) {
    const Atom& pa = prod.atoms[prod_by_map[mapid]];
    const Atom& ra = r.reactants.molecules[loc.mol].atoms[loc.atom];
    if (pa.charge != ra.charge || pa.aromatic != ra.aromatic) changed_maps.insert(mapid);
  }

  if (changed_maps.empty())
    throw TemplateError(TemplateErrorKind::NoChange, "reaction sides are identical");

  // pattern = changed atoms plus product neighbors within radius 1
  Adjacency padj = chem::adjacency(prod);
  std::set<int> pattern_atoms;
  for (int mapid : changed_maps) pattern_atoms.insert(prod_by_map[mapid]);
  for (int a : std::set<int>(pattern_atoms))
    for (auto [nb, bi] : padj[a]) {
      (void)bi;
      pattern_atoms.insert(nb);
    }

  Template t;
  std::vector<int> pat_list(pattern_atoms.begin(), pattern_atoms.end());
  std::map<int, int> prod_to_pat;
  for (size_t k = 0; k < pat_list.size(); ++k) prod_to_pat[pat_list[k]] = static_cast<int>(k);

  for (int a : pat_list) {
    PatternAtom pa;
    pa.element = prod.atoms[a].element;
    pa.aromatic = prod.atoms[a].aromatic;
    pa.charge = prod.atoms[a].charge;
    pa.degree = static_cast<int>(padj[a].size());
    pa.changed = changed_maps.count(*prod.atoms[a].atom_map) > 0;
    t.product_pattern.atoms.push_back(std::move(pa));
  }
  for (const Bond& b : prod.bonds)
    if (pattern_atoms.count(b.a) && pattern_atoms.count(b.b))
      t.product_pattern.bonds.push_back({prod_to_pat[b.a], prod_to_pat[b.b], b.order});

  std::set<int> pattern_maps;
  for (int a : pat_list) pattern_maps.insert(*prod.atoms[a].atom_map);
  for (int mapid : pattern_maps)
    if (!react_by_map.count(mapid))
      throw TemplateError(TemplateErrorKind::UnmappedAtoms,
                          "pattern atom map " + std::to_string(mapid) + " missing on reactant side");

  for (int m = 0; m < nmol; ++m) {
    const MolGraph& mol = r.reactants.molecules[m];
    Adjacency radj = chem::adjacency(mol);
    std::vector<int> local;  // reactant atom indices in this pattern
    std::map<int, int> to_local;
    for (int i = 0; i < mol.atom_count(); ++i) {
      bool core = !absent[m][i] && pattern_maps.count(*mol.atoms[i].atom_map);
      if (core || absent[m][i]) {
        to_local[i] = static_cast<int>(local.size());
        local.push_back(i);
      }
    }
    if (local.empty()) continue;

    Template::ReactantPattern rp;
    for (int i : local) {
      const Atom& a = mol.atoms[i];
      PatternAtom pa;
      pa.element = a.element;
      pa.aromatic = a.aromatic;
      pa.charge = a.charge;
      pa.degree = static_cast<int>(radj[i].size());
      pa.explicit_h = a.explicit_h;
      bool core = !absent[m][i];
      if (core) {
        int mapid = *a.atom_map;
        pa.changed = changed_maps.count(mapid) > 0;
        rp.product_ref.push_back(prod_to_pat[prod_by_map[mapid]]);
      } else {
        pa.changed = true;
        rp.product_ref.push_back(-1);
      }
      rp.graph.atoms.push_back(std::move(pa));
    }
    for (const Bond& b : mol.bonds) {
      auto ia = to_local.find(b.a), ib = to_local.find(b.b);
      if (ia != to_local.end() && ib != to_local.end())
        rp.graph.bonds.push_back({ia->second, ib->second, b.order});
    }
    t.reactant_patterns.push_back(std::move(rp));
  }

  std::sort(sig_parts.begin(), sig_parts.end());
  std::string sig;
  for (size_t i = 0; i < sig_parts.size(); ++i) {
    if (i) sig += ';';
    sig += sig_parts[i];
  }
  t.changed_bond_signature = sig;

  // canonical ordering of both sides, then the stable id
  {
    std::vector<std::string> seeds;
    for (const PatternAtom& a : t.product_pattern.atoms) seeds.push_back(product_seed(a));
    std::vector<int> ranks = pattern_ranks(t.product_pattern, seeds);
    std::vector<int> o2n;
    t.product_pattern = permute_pattern(t.product_pattern, ranks, &o2n);
    for (auto& rp : t.reactant_patterns)
      for (int& ref : rp.product_ref)
        if (ref >= 0) ref = o2n[ref];
  }
  for (auto& rp : t.reactant_patterns) {
    std::vector<std::string> seeds;
    for (size_t i = 0; i < rp.graph.atoms.size(); ++i) {
      std::ostringstream os;
      os << product_seed(rp.graph.atoms[i]) << '|' << rp.product_ref[i] << '|'
         << (rp.graph.atoms[i].explicit_h ? std::to_string(*rp.graph.atoms[i].explicit_h) : "*");
      seeds.push_back(os.str());
    }
    std::vector<int> ranks = pattern_ranks(rp.graph, seeds);
    std::vector<int> o2n;
    rp.graph = permute_pattern(rp.graph, ranks, &o2n);
    std::vector<int> refs(rp.product_ref.size());
    for (size_t i = 0; i < rp.product_ref.size(); ++i) refs[o2n[i]] = rp.product_ref[i];
    rp.product_ref = std::move(refs);
  }
  std::sort(t.reactant_patterns.begin(), t.reactant_patterns.end(),
            [](const Template::ReactantPattern& a, const Template::ReactantPattern& b) {
              std::ostringstream oa, ob;
              serialize_atoms(oa, a.graph, &a.product_ref);
              serialize_bonds(oa, a.graph);
              serialize_atoms(ob, b.graph, &b.product_ref);
              serialize_bonds(ob, b.graph);
              return oa.str() < ob.str();
            });

  t.count = 1;
  t.id = template_id(t);
  return t;
}

// --- application ---------------------------------------------------------------

namespace {

bool atom_matches(const PatternAtom& pa, const MolGraph& g, const Adjacency& adj, int cand) {
  const Atom& a = g.atoms[cand];
  return a.element == pa.element && a.aromatic == pa.aromatic && a.charge == pa.charge &&
         static_cast<int>(adj[cand].size()) == pa.degree;
}

// all embeddings of `pat` into g honoring attributes, bond orders, degrees and
// induced-subgraph semantics; capped
void find_embeddings(const PatternGraph& pat, const MolGraph& g, const Adjacency& adj,
                     std::vector<std::vector<int>>& out, bool& cap_hit) {
  int n = static_cast<int>(pat.atoms.size());
  if (n == 0) return;

  std::vector<std::vector<std::pair<int, BondOrder>>> pat_adj(n);
  for (const PatternBond& b : pat.bonds) {
    pat_adj[b.a].push_back({b.b, b.order});
    pat_adj[b.b].push_back({b.a, b.order});
  }

  // match order: BFS per component so new atoms connect to matched ones
  std::vector<int> order;
  std::vector<bool> seen(n, false);
  for (int root = 0; root < n; ++root) {
    if (seen[root]) continue;
    std::vector<int> q = {root};
    seen[root] = true;
    size_t head = 0;
    while (head < q.size()) {
      int v = q[head++];
      order.push_back(v);
      for (auto [to, o] : pat_adj[v]) {
        (void)o;
        if (!seen[to]) {
          seen[to] = true;
          q.push_back(to);
        }
      }
    }
  }

  std::vector<int> image(n, -1);
  std::vector<bool> used(g.atom_count(), false);

  std::function<void(size_t)> rec = [&](size_t k) {
    if (cap_hit) return;
    if (k == order.size()) {
      // induced check: no extra molecule bonds between matched images
      std::set<int> img(image.begin(), image.end());
      size_t internal = 0;
      for (const Bond& b : g.bonds)
        if (img.count(b.a) && img.count(b.b)) ++internal;
      if (internal != pat.bonds.size()) return;
      out.push_back(image);
      if (out.size() >= static_cast<size_t>(kEmbeddingCap)) cap_hit = true;
      return;
    }
    int p = order[k];
    // candidates: neighbors of an already-matched pattern neighbor, else all atoms
    int anchor = -1;
    BondOrder anchor_order = BondOrder::Single;
    for (auto [to, o] : pat_adj[p])
      if (image[to] >= 0) {
        anchor = to;
        anchor_order = o;
        break;
      }
    auto try_candidate = [&](int cand) {
      if (used[cand] || !atom_matches(pat.atoms[p], g, adj, cand)) return;
      for (auto [to, o] : pat_adj[p]) {
        if (image[to] < 0) continue;
        bool found = false;
        for (auto [gn, gbi] : adj[cand])
          if (gn == image[to] && g.bonds[gbi].order == o) {
            found = true;
            break;
          }
        if (!found) return;
      }
      image[p] = cand;
      used[cand] = true;
      rec(k + 1);
      image[p] = -1;
      used[cand] = false;
    };
    if (anchor >= 0) {
      for (auto [gn, gbi] : adj[image[anchor]]) {
        if (g.bonds[gbi].order != anchor_order) continue;
        try_candidate(gn);
      }
    } else {
      for (int cand = 0; cand < g.atom_count(); ++cand) try_candidate(cand);
    }
  };
  rec(0);
}

}  // namespace

ApplyResult apply_template(const Template& t, const MolGraph& g) {
  ApplyResult result;
  Adjacency adj = chem::adjacency(g);
  std::vector<std::vector<int>> embeddings;
  bool cap_hit = false;
  find_embeddings(t.product_pattern, g, adj, embeddings, cap_hit);
  result.embedding_cap_hit = cap_hit;

  // bond-level diff between the two pattern sides, in product-pattern indices
  std::map<std::pair<int, int>, BondOrder> prod_b, react_b;
  for (const PatternBond& b : t.product_pattern.bonds) prod_b[ordered(b.a, b.b)] = b.order;
  for (const auto& rp : t.reactant_patterns)
    for (const PatternBond& b : rp.graph.bonds) {
      int ra = rp.product_ref[b.a], rb = rp.product_ref[b.b];
      if (ra >= 0 && rb >= 0) react_b[ordered(ra, rb)] = b.order;
    }

  std::set<std::string> seen_keys;
  for (const std::vector<int>& image : embeddings) {
    MolGraph out = g;

    std::vector<Bond> kept;
    for (const Bond& b : out.bonds) kept.push_back(b);
    out.bonds.clear();
    std::map<int, int> g_to_pat;
    for (size_t p = 0; p < image.size(); ++p) g_to_pat[image[p]] = static_cast<int>(p);
    for (Bond& b : kept) {
      auto ia = g_to_pat.find(b.a), ib = g_to_pat.find(b.b);
      if (ia != g_to_pat.end() && ib != g_to_pat.end()) {
        auto key = ordered(ia->second, ib->second);
        auto rit = react_b.find(key);
        if (rit == react_b.end()) continue;  // broken bond
        b.order = rit->second;
      }
      out.bonds.push_back(b);
    }
    for (auto& [pair, order] : react_b)
      if (!prod_b.count(pair))
        out.bonds.push_back({image[pair.first], image[pair.second], order});

    for (const auto& rp : t.reactant_patterns) {
      std::vector<int> local_to_g(rp.graph.atoms.size(), -1);
      for (size_t u = 0; u < rp.graph.atoms.size(); ++u) {
        int ref = rp.product_ref[u];
        if (ref >= 0) {
          local_to_g[u] = image[ref];
          if (rp.graph.atoms[u].changed) {
            Atom& ga = out.atoms[image[ref]];
            ga.charge = rp.graph.atoms[u].charge;
            ga.aromatic = rp.graph.atoms[u].aromatic;
            ga.explicit_h = rp.graph.atoms[u].explicit_h;
          }
        } else {
          Atom na;
          na.element = rp.graph.atoms[u].element;
          na.aromatic = rp.graph.atoms[u].aromatic;
          na.charge = rp.graph.atoms[u].charge;
          na.explicit_h = rp.graph.atoms[u].explicit_h;
          local_to_g[u] = out.atom_count();
          out.atoms.push_back(std::move(na));
        }
      }
      for (const PatternBond& b : rp.graph.bonds) {
        if (rp.product_ref[b.a] >= 0 && rp.product_ref[b.b] >= 0) continue;  // handled above
        out.bonds.push_back({local_to_g[b.a], local_to_g[b.b], b.order});
      }
    }

    ReactionExample ex;
    ex.product = g;
    ex.reactants = chem::to_molecule_set(out);
    ex.source = ExampleSource::template_pretrain;
    std::string key = chem::canonical_set_key(ex.reactants);
    if (seen_keys.insert(key).second) result.examples.push_back(std::move(ex));
  }
  return result;
}

// --- change signature without maps ------------------------------------------

std::string unmapped_change_signature(const MolGraph& product, const chem::MoleculeSet& reactants) {
  auto bond_census = [](const MolGraph& g, std::map<std::string, int>& bonds,
                        std::map<std::string, int>& atoms) {
    for (const Atom& a : g.atoms) atoms[a.element] += 1;
    for (const Bond& b : g.bonds)
      bonds[elem_pair(g.atoms[b.a].element, g.atoms[b.b].element) + ":" +
            std::to_string(static_cast<int>(b.order))] += 1;
  };
  std::map<std::string, int> pb, pa, rb, ra;
  bond_census(product, pb, pa);
  for (const MolGraph& m : reactants.molecules) bond_census(m, rb, ra);

  std::vector<std::string> parts;
  for (auto& [k, c] : pb) {
    int d = c - (rb.count(k) ? rb[k] : 0);
    if (d > 0) parts.push_back("brk:" + k + "x" + std::to_string(d));
  }
  for (auto& [k, c] : rb) {
    int d = c - (pb.count(k) ? pb[k] : 0);
    if (d > 0) parts.push_back("frm:" + k + "x" + std::to_string(d));
  }
  for (auto& [k, c] : ra) {
    int d = c - (pa.count(k) ? pa[k] : 0);
    if (d > 0) parts.push_back("add:" + k + "x" + std::to_string(d));
  }
  std::sort(parts.begin(), parts.end());
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ';';
    out += parts[i];
  }
  return out;
}

// --- store ---------------------------------------------------------------------

namespace {

PatternGraph parse_pattern_block(const std::string& s, size_t& pos, std::vector<int>* refs) {
  auto expect = [&](char c) {
    if (pos >= s.size() || s[pos] != c)
      throw TemplateError(TemplateErrorKind::BadSerialization,
                          "expected '" + std::string(1, c) + "' at " + std::to_string(pos));
    ++pos;
  };
  PatternGraph pg;
  expect('{');
  if (pos < s.size() && s[pos] != '}') {
    while (true) {
      size_t end = s.find_first_of(";}", pos);
      std::string tok = s.substr(pos, end - pos);
      std::vector<std::string> f;
      std::istringstream is(tok);
      std::string part;
      while (std::getline(is, part, ',')) f.push_back(part);
      size_t want = refs ? 7 : 5;
      if (f.size() != want)
        throw TemplateError(TemplateErrorKind::BadSerialization, "bad atom record '" + tok + "'");
      PatternAtom a;
      a.element = f[0];
      a.aromatic = f[1] == "1";
      a.charge = std::stoi(f[2]);
      a.degree = std::stoi(f[3]);
      a.changed = f[4] == "1";
      if (refs) {
        refs->push_back(std::stoi(f[5]));
        if (f[6] != "*") a.explicit_h = std::stoi(f[6]);
      }
      pg.atoms.push_back(std::move(a));
      pos = end;
      if (s[pos] == '}') break;
      ++pos;
    }
  }
  expect('}');
  expect('{');
  if (pos < s.size() && s[pos] != '}') {
    while (true) {
      size_t end = s.find_first_of(";}", pos);
      std::string tok = s.substr(pos, end - pos);
      size_t dash = tok.find('-'), colon = tok.find(':', dash);
      if (dash == std::string::npos || colon == std::string::npos)
        throw TemplateError(TemplateErrorKind::BadSerialization, "bad bond record '" + tok + "'");
      PatternBond b;
      b.a = std::stoi(tok.substr(0, dash));
      b.b = std::stoi(tok.substr(dash + 1, colon - dash - 1));
      b.order = static_cast<BondOrder>(std::stoi(tok.substr(colon + 1)));
      pg.bonds.push_back(b);
      pos = end;
      if (s[pos] == '}') break;
      ++pos;
    }
  }
  expect('}');
  return pg;
}

}  // namespace

Template deserialize_template(const std::string& line) {
  Template t;
  size_t pos = 0;
  if (line.empty() || line[0] != 'P')
    throw TemplateError(TemplateErrorKind::BadSerialization, "missing 'P' prefix");
  pos = 1;
  t.product_pattern = parse_pattern_block(line, pos, nullptr);
  if (line.compare(pos, 2, ">>") != 0)
    throw TemplateError(TemplateErrorKind::BadSerialization, "missing '>>'");
  pos += 2;
  while (pos < line.size() && line[pos] != '!') {
    Template::ReactantPattern rp;
    rp.graph = parse_pattern_block(line, pos, &rp.product_ref);
    t.reactant_patterns.push_back(std::move(rp));
    if (pos < line.size() && line[pos] == '|') ++pos;
  }
  if (pos < line.size() && line[pos] == '!') t.changed_bond_signature = line.substr(pos + 1);
  t.id = template_id(t);
  return t;
}

void write_template_store(const std::string& path, const std::vector<Template>& templates) {
  std::ofstream out(path);
  if (!out) throw DataError(path, 0, "cannot open file for writing");
  for (const Template& t : templates)
    out << t.id << '\t' << t.count << '\t' << serialize_template(t) << '\n';
}

std::vector<Template> load_template_store(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path, 0, "cannot open file");
  std::vector<Template> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    size_t t1 = line.find('\t');
    size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw DataError(path, lineno, "expected id<TAB>count<TAB>pattern");
    try {
      Template t = deserialize_template(line.substr(t2 + 1));
      t.count = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
      if (t.id != line.substr(0, t1))
        throw DataError(path, lineno, "template id does not match serialized pattern");
      out.push_back(std::move(t));
    } catch (const TemplateError& e) {
      throw DataError(path, lineno, e.what());
    }
  }
  return out;
}

CorpusTemplates extract_corpus_templates(const std::vector<ReactionExample>& data) {
  CorpusTemplates ct;
  ct.example_template_id.resize(data.size());
  std::map<std::string, size_t> by_id;
  for (size_t i = 0; i < data.size(); ++i) {
    try {
      Template t = extract_template(data[i]);
      auto it = by_id.find(t.id);
      if (it == by_id.end()) {
        by_id[t.id] = ct.templates.size();
        ct.example_template_id[i] = t.id;
        ct.templates.push_back(std::move(t));
      } else {
        ct.templates[it->second].count += 1;
        ct.example_template_id[i] = t.id;
      }
    } catch (const TemplateError& e) {
      ct.example_template_id[i] = "";
      ct.failures.push_back(data[i].id + ": " + e.what());
    }
  }
  return ct;
}

}  // namespace retro::augment
