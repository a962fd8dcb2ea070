#pragma once

// Slow, independent re-implementations used to pin expected values in tests.
// Deliberately different data layouts and algorithms from the library:
// fixpoint rescans instead of incremental merges, matrices for Heisenberg,
// map-based Dijkstra over rationals instead of scaled-integer search.

#include <array>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <vector>

#include "coarselab/groups.hpp"
#include "coarselab/rational.hpp"
#include "coarselab/rng.hpp"

namespace testoracle {

using coarse::Element;
using coarse::GroupSpec;
using coarse::Rat;

// --- Heisenberg via unitriangular matrices [[1,a,c],[0,1,b],[0,0,1]] ---

using Mat3 = std::array<std::array<long long, 3>, 3>;

inline Mat3 h3_mat(long long a, long long b, long long c) {
  return {{{1, a, c}, {0, 1, b}, {0, 0, 1}}};
}

inline Mat3 mat_mul(const Mat3& m, const Mat3& n) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      long long s = 0;
      for (int k = 0; k < 3; ++k) s += m[i][k] * n[k][j];
      r[i][j] = s;
    }
  return r;
}

inline std::array<long long, 3> h3_coords(const Mat3& m) { return {m[0][1], m[1][2], m[0][2]}; }

// --- free-letter cancellation to exhaustion (restart after each hit) ---

inline std::vector<int> reduce_letters(std::vector<int> w) {
  bool hit = true;
  while (hit) {
    hit = false;
    for (std::size_t i = 0; i + 1 < w.size(); ++i)
      if (w[i] == -w[i + 1]) {
        w.erase(w.begin() + static_cast<long>(i), w.begin() + static_cast<long>(i) + 2);
        hit = true;
        break;
      }
  }
  return w;
}

// --- naive free-product normalizer: rescan-to-fixpoint over raw syllables ---

struct RawSyl {
  int factor;
  std::vector<coarse::AtomElem> parts;
};

inline coarse::AtomElem raw_atom_mul(const coarse::Atom& a, const coarse::AtomElem& x,
                                     const coarse::AtomElem& y) {
  coarse::AtomElem r;
  switch (a.kind) {
    case coarse::AtomKind::FreeAbelian:
      for (std::size_t i = 0; i < x.vec.size(); ++i) r.vec.push_back(x.vec[i] + y.vec[i]);
      break;
    case coarse::AtomKind::Heisenberg: {
      auto c = h3_coords(mat_mul(h3_mat(x.vec[0], x.vec[1], x.vec[2]),
                                 h3_mat(y.vec[0], y.vec[1], y.vec[2])));
      r.vec = {c[0], c[1], c[2]};
      break;
    }
    case coarse::AtomKind::Free: {
      std::vector<int> w = x.word;
      w.insert(w.end(), y.word.begin(), y.word.end());
      r.word = reduce_letters(std::move(w));
      break;
    }
  }
  return r;
}

inline bool raw_is_identity(const coarse::Factor& f, const std::vector<coarse::AtomElem>& p) {
  for (std::size_t i = 0; i < f.atoms.size(); ++i) {
    if (f.atoms[i].kind == coarse::AtomKind::Free) {
      if (!p[i].word.empty()) return false;
    } else {
      for (long long v : p[i].vec)
        if (v != 0) return false;
    }
  }
  return true;
}

inline Element naive_normalize(const GroupSpec& spec, std::vector<RawSyl> raw) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const coarse::Factor& f = spec.factors[static_cast<std::size_t>(raw[i].factor)];
      if (raw_is_identity(f, raw[i].parts)) {
        raw.erase(raw.begin() + static_cast<long>(i));
        changed = true;
        break;
      }
      if (i + 1 < raw.size() && raw[i + 1].factor == raw[i].factor) {
        std::vector<coarse::AtomElem> merged;
        for (std::size_t k = 0; k < f.atoms.size(); ++k)
          merged.push_back(raw_atom_mul(f.atoms[k], raw[i].parts[k], raw[i + 1].parts[k]));
        raw[i].parts = std::move(merged);
        raw.erase(raw.begin() + static_cast<long>(i) + 1);
        changed = true;
        break;
      }
    }
  }
  Element e;
  for (RawSyl& s : raw) e.syllables.push_back(coarse::Syllable{s.factor, std::move(s.parts)});
  return e;
}

inline Element naive_product(const GroupSpec& spec, const std::vector<Element>& elems) {
  std::vector<RawSyl> raw;
  for (const Element& e : elems)
    for (const coarse::Syllable& s : e.syllables) raw.push_back(RawSyl{s.factor, s.parts});
  return naive_normalize(spec, raw);
}

// --- primitive moves: one ±generator step inside one atom ---

inline std::vector<Element> primitive_moves(const GroupSpec& spec) {
  std::vector<Element> out;
  for (std::size_t fi = 0; fi < spec.factors.size(); ++fi) {
    const coarse::Factor& f = spec.factors[fi];
    for (std::size_t ai = 0; ai < f.atoms.size(); ++ai) {
      const coarse::Atom& a = f.atoms[ai];
      int dirs = a.kind == coarse::AtomKind::Free ? a.rank : a.rank;
      for (int d = 0; d < dirs; ++d)
        for (int sgn : {1, -1}) {
          std::vector<coarse::AtomElem> parts;
          for (std::size_t k = 0; k < f.atoms.size(); ++k)
            parts.push_back(coarse::detail::atom_identity(f.atoms[k]));
          if (a.kind == coarse::AtomKind::Free)
            parts[ai].word = {sgn * (d + 1)};
          else
            parts[ai].vec[static_cast<std::size_t>(d)] = sgn;
          out.push_back(coarse::make_syllable(spec, static_cast<int>(fi), std::move(parts)));
        }
    }
  }
  return out;
}

inline Element random_element(const GroupSpec& spec, coarse::Substream& rng, int max_moves) {
  static std::map<std::string, std::vector<Element>> cache;
  auto& moves = cache.emplace(spec.fingerprint(), primitive_moves(spec)).first->second;
  Element acc = coarse::identity();
  int n = static_cast<int>(rng.below(static_cast<unsigned long long>(max_moves) + 1));
  for (int i = 0; i < n; ++i) acc = coarse::multiply(spec, acc, rng.pick(moves));
  return acc;
}

// --- map-based Dijkstra over exact rationals (weighted word metric) ---

inline std::map<std::string, Rat> dijkstra_ball(const GroupSpec& spec,
                                                const std::vector<std::pair<Element, Rat>>& gens,
                                                const Rat& radius) {
  std::map<std::string, Rat> dist;
  std::set<std::pair<Rat, std::string>> frontier;
  std::map<std::string, Element> elems;
  dist["e"] = Rat(0);
  elems["e"] = coarse::identity();
  frontier.insert({Rat(0), "e"});
  while (!frontier.empty()) {
    auto [d, key] = *frontier.begin();
    frontier.erase(frontier.begin());
    Element cur = elems[key];
    for (const auto& [g, w] : gens) {
      Rat nd = d + w;
      if (nd > radius) continue;
      Element nxt = coarse::multiply(spec, cur, g);
      std::string nkey = coarse::serialize(nxt);
      auto it = dist.find(nkey);
      if (it == dist.end() || nd < it->second) {
        if (it != dist.end()) frontier.erase({it->second, nkey});
        dist[nkey] = nd;
        elems[nkey] = nxt;
        frontier.insert({nd, nkey});
      }
    }
  }
  return dist;
}

}  // namespace testoracle
