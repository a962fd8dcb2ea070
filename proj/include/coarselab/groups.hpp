#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace coarse {

struct GroupParseError : std::runtime_error {
  explicit GroupParseError(const std::string& m, std::size_t pos)
      : std::runtime_error(m + " (position " + std::to_string(pos) + ")"), position(pos) {}
  std::size_t position;
};

inline long long add_ll(long long a, long long b) {
  long long r;
  if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("integer overflow");
  return r;
}
inline long long mul_ll(long long a, long long b) {
  long long r;
  if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("integer overflow");
  return r;
}

enum class AtomKind { FreeAbelian, Free, Heisenberg };

struct Atom {
  AtomKind kind;
  int rank;  // n for Z^n, k for F(k), 3 for H3 (fixed)

  std::string str() const {
    switch (kind) {
      case AtomKind::FreeAbelian: return "Z^" + std::to_string(rank);
      case AtomKind::Free: return "F(" + std::to_string(rank) + ")";
      case AtomKind::Heisenberg: return "H3";
    }
    return "?";
  }
  friend bool operator==(const Atom& a, const Atom& b) {
    return a.kind == b.kind && a.rank == b.rank;
  }
};

/** One free-product factor: a direct product of atoms (often a single atom). */
struct Factor {
  std::vector<Atom> atoms;

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (i) out += "x";
      out += atoms[i].str();
    }
    return out;
  }
};

/**
 * Compositional group description. factors.size() >= 2 means a free product;
 * a single factor is just that (possibly direct) product group. Peripheral
 * structure: free-abelian free-product factors of rank >= 2, plus rank-1 ones
 * when `peripheral_rank1` is set.
 */
struct GroupSpec {
  std::vector<Factor> factors;
  bool peripheral_rank1 = false;

  bool is_free_product() const { return factors.size() >= 2; }

  std::vector<int> peripherals() const {
    std::vector<int> out;
    if (!is_free_product()) return out;
    for (std::size_t i = 0; i < factors.size(); ++i) {
      const Factor& f = factors[i];
      if (f.atoms.size() == 1 && f.atoms[0].kind == AtomKind::FreeAbelian &&
          (f.atoms[0].rank >= 2 || peripheral_rank1))
        out.push_back(static_cast<int>(i));
    }
    return out;
  }

  bool is_peripheral_factor(int idx) const {
    auto p = peripherals();
    return std::find(p.begin(), p.end(), idx) != p.end();
  }

  /** Free product of free-abelian and/or free atoms (or a single such atom). */
  bool is_toral_rel_hyp() const {
    for (const Factor& f : factors) {
      if (f.atoms.size() != 1) return false;
      AtomKind k = f.atoms[0].kind;
      if (k != AtomKind::FreeAbelian && k != AtomKind::Free) return false;
    }
    return !factors.empty();
  }

  std::string fingerprint() const {
    std::string out;
    for (std::size_t i = 0; i < factors.size(); ++i) {
      if (i) out += "*";
      out += factors[i].str();
    }
    if (peripheral_rank1) out += "[p1]";
    return out;
  }
};

// ---------------------------------------------------------------------------
// Group spec grammar:  expr := term ('*' term)* ; term := unit ('x' unit)* ;
// unit := atom | '(' expr ')' ; atom := Z^n | F(k) | H3.
// 'x' binds tighter than '*'. Free products inside direct products and nested
// free products are rejected. Whitespace is free.
// ---------------------------------------------------------------------------

namespace detail {

struct SpecLexer {
  const std::string& s;
  std::size_t i = 0;

  void skip_ws() {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  }
  bool eof() {
    skip_ws();
    return i >= s.size();
  }
  char peek() {
    skip_ws();
    return i < s.size() ? s[i] : '\0';
  }

  long long parse_int() {
    skip_ws();
    std::size_t start = i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i == start) throw GroupParseError("expected integer", start);
    return std::stoll(s.substr(start, i - start));
  }

  Atom parse_atom() {
    skip_ws();
    std::size_t start = i;
    if (s.compare(i, 2, "H3") == 0) {
      i += 2;
      return Atom{AtomKind::Heisenberg, 3};
    }
    if (s[i] == 'Z') {
      ++i;
      if (i >= s.size() || s[i] != '^') throw GroupParseError("expected '^' after Z", i);
      ++i;
      long long n = parse_int();
      if (n < 1) throw GroupParseError("free-abelian rank must be >= 1", start);
      return Atom{AtomKind::FreeAbelian, static_cast<int>(n)};
    }
    if (s[i] == 'F') {
      ++i;
      if (i >= s.size() || s[i] != '(') throw GroupParseError("expected '(' after F", i);
      ++i;
      long long k = parse_int();
      skip_ws();
      if (i >= s.size() || s[i] != ')') throw GroupParseError("expected ')'", i);
      ++i;
      if (k < 1) throw GroupParseError("free rank must be >= 1", start);
      return Atom{AtomKind::Free, static_cast<int>(k)};
    }
    throw GroupParseError("expected atom (Z^n, F(k), or H3)", start);
  }
};

struct SpecParser {
  SpecLexer lex;

  // unit := atom | '(' expr ')'; returns factors of the sub-expression
  std::vector<Factor> parse_unit() {
    if (lex.peek() == '(') {
      std::size_t open = lex.i;
      ++lex.i;
      std::vector<Factor> inner = parse_expr();
      if (lex.peek() != ')') throw GroupParseError("expected ')'", lex.i);
      ++lex.i;
      (void)open;
      return inner;
    }
    return {Factor{{lex.parse_atom()}}};
  }

  std::vector<Factor> parse_term() {
    std::size_t start = lex.i;
    std::vector<Factor> acc = parse_unit();
    while (lex.peek() == 'x') {
      ++lex.i;
      std::vector<Factor> rhs = parse_unit();
      if (acc.size() > 1 || rhs.size() > 1)
        throw GroupParseError("free products inside direct products are not supported", start);
      for (const Atom& a : rhs[0].atoms) acc[0].atoms.push_back(a);
    }
    return acc;
  }

  std::vector<Factor> parse_expr() {
    std::vector<Factor> acc = parse_term();
    while (lex.peek() == '*') {
      ++lex.i;
      std::vector<Factor> rhs = parse_term();
      for (Factor& f : rhs) acc.push_back(std::move(f));
    }
    return acc;
  }
};

}  // namespace detail

inline GroupSpec parse_group(const std::string& text, bool peripheral_rank1 = false) {
  detail::SpecParser p{detail::SpecLexer{text}};
  GroupSpec spec;
  spec.factors = p.parse_expr();
  spec.peripheral_rank1 = peripheral_rank1;
  if (!p.lex.eof()) throw GroupParseError("trailing input", p.lex.i);
  return spec;
}

// ---------------------------------------------------------------------------
// Elements: canonical normal form as alternating syllable sequences.
// ---------------------------------------------------------------------------

/**
 * Element of one atom. FreeAbelian and Heisenberg use `vec` (coordinates;
 * Heisenberg as (a,b,c) with (a,b,c)(a',b',c') = (a+a', b+b', c+c'+a*b')).
 * Free uses `word`: freely reduced letters, letter +i / -i for the i-th
 * standard generator (1-based) and its inverse.
 */
struct AtomElem {
  std::vector<long long> vec;
  std::vector<int> word;

  friend bool operator==(const AtomElem& a, const AtomElem& b) {
    return a.vec == b.vec && a.word == b.word;
  }
};

struct Syllable {
  int factor = 0;
  std::vector<AtomElem> parts;  // one per atom of the factor

  friend bool operator==(const Syllable& a, const Syllable& b) {
    return a.factor == b.factor && a.parts == b.parts;
  }
};

struct Element {
  std::vector<Syllable> syllables;  // empty = identity

  bool is_identity() const { return syllables.empty(); }
  friend bool operator==(const Element& a, const Element& b) {
    return a.syllables == b.syllables;
  }
  friend bool operator!=(const Element& a, const Element& b) { return !(a == b); }
};

namespace detail {

inline AtomElem atom_identity(const Atom& a) {
  AtomElem e;
  if (a.kind != AtomKind::Free) e.vec.assign(static_cast<std::size_t>(a.rank), 0);
  return e;
}

inline bool atom_is_identity(const Atom& a, const AtomElem& e) {
  if (a.kind == AtomKind::Free) return e.word.empty();
  for (long long v : e.vec)
    if (v != 0) return false;
  return true;
}

inline AtomElem atom_mul(const Atom& a, const AtomElem& x, const AtomElem& y) {
  AtomElem out;
  switch (a.kind) {
    case AtomKind::FreeAbelian:
      out.vec.resize(x.vec.size());
      for (std::size_t i = 0; i < x.vec.size(); ++i) out.vec[i] = add_ll(x.vec[i], y.vec[i]);
      break;
    case AtomKind::Heisenberg:
      out.vec = {add_ll(x.vec[0], y.vec[0]), add_ll(x.vec[1], y.vec[1]),
                 add_ll(add_ll(x.vec[2], y.vec[2]), mul_ll(x.vec[0], y.vec[1]))};
      break;
    case AtomKind::Free: {
      out.word = x.word;
      for (int letter : y.word) {
        if (!out.word.empty() && out.word.back() == -letter)
          out.word.pop_back();
        else
          out.word.push_back(letter);
      }
      break;
    }
  }
  return out;
}

inline AtomElem atom_inv(const Atom& a, const AtomElem& x) {
  AtomElem out;
  switch (a.kind) {
    case AtomKind::FreeAbelian:
      out.vec.resize(x.vec.size());
      for (std::size_t i = 0; i < x.vec.size(); ++i) out.vec[i] = -x.vec[i];
      break;
    case AtomKind::Heisenberg:
      out.vec = {-x.vec[0], -x.vec[1], add_ll(-x.vec[2], mul_ll(x.vec[0], x.vec[1]))};
      break;
    case AtomKind::Free:
      out.word.reserve(x.word.size());
      for (auto it = x.word.rbegin(); it != x.word.rend(); ++it) out.word.push_back(-*it);
      break;
  }
  return out;
}

inline std::vector<AtomElem> factor_identity(const Factor& f) {
  std::vector<AtomElem> out;
  out.reserve(f.atoms.size());
  for (const Atom& a : f.atoms) out.push_back(atom_identity(a));
  return out;
}

inline bool factor_is_identity(const Factor& f, const std::vector<AtomElem>& parts) {
  for (std::size_t i = 0; i < f.atoms.size(); ++i)
    if (!atom_is_identity(f.atoms[i], parts[i])) return false;
  return true;
}

inline std::vector<AtomElem> factor_mul(const Factor& f, const std::vector<AtomElem>& x,
                                        const std::vector<AtomElem>& y) {
  std::vector<AtomElem> out;
  out.reserve(f.atoms.size());
  for (std::size_t i = 0; i < f.atoms.size(); ++i)
    out.push_back(atom_mul(f.atoms[i], x[i], y[i]));
  return out;
}

inline std::vector<AtomElem> factor_inv(const Factor& f, const std::vector<AtomElem>& x) {
  std::vector<AtomElem> out;
  out.reserve(f.atoms.size());
  for (std::size_t i = 0; i < f.atoms.size(); ++i) out.push_back(atom_inv(f.atoms[i], x[i]));
  return out;
}

}  // namespace detail

inline Element identity() { return Element{}; }

/** Normal-form product: concatenate and merge across the syllable boundary. */
inline Element multiply(const GroupSpec& spec, const Element& x, const Element& y) {
  Element out = x;
  for (const Syllable& syl : y.syllables) {
    if (!out.syllables.empty() && out.syllables.back().factor == syl.factor) {
      const Factor& f = spec.factors[static_cast<std::size_t>(syl.factor)];
      Syllable merged{syl.factor, detail::factor_mul(f, out.syllables.back().parts, syl.parts)};
      out.syllables.pop_back();
      if (!detail::factor_is_identity(f, merged.parts)) out.syllables.push_back(std::move(merged));
    } else {
      out.syllables.push_back(syl);
    }
  }
  return out;
}

inline Element invert(const GroupSpec& spec, const Element& x) {
  Element out;
  out.syllables.reserve(x.syllables.size());
  for (auto it = x.syllables.rbegin(); it != x.syllables.rend(); ++it) {
    const Factor& f = spec.factors[static_cast<std::size_t>(it->factor)];
    out.syllables.push_back(Syllable{it->factor, detail::factor_inv(f, it->parts)});
  }
  return out;
}

/** Builds the canonical element for a single-factor part, dropping identities. */
inline Element make_syllable(const GroupSpec& spec, int factor, std::vector<AtomElem> parts) {
  const Factor& f = spec.factors.at(static_cast<std::size_t>(factor));
  if (f.atoms.size() != parts.size())
    throw std::invalid_argument("syllable parts do not match factor shape");
  if (detail::factor_is_identity(f, parts)) return identity();
  Element e;
  e.syllables.push_back(Syllable{factor, std::move(parts)});
  return e;
}

/** Validates the normal-form invariants; used by tests and deserialization. */
inline void validate(const GroupSpec& spec, const Element& e) {
  int prev = -1;
  bool single = !spec.is_free_product();
  if (single && e.syllables.size() > 1)
    throw std::invalid_argument("non-free-product element with several syllables");
  for (const Syllable& s : e.syllables) {
    if (s.factor < 0 || s.factor >= static_cast<int>(spec.factors.size()))
      throw std::invalid_argument("syllable factor out of range");
    if (s.factor == prev) throw std::invalid_argument("adjacent syllables in the same factor");
    const Factor& f = spec.factors[static_cast<std::size_t>(s.factor)];
    if (s.parts.size() != f.atoms.size())
      throw std::invalid_argument("syllable parts do not match factor shape");
    if (detail::factor_is_identity(f, s.parts))
      throw std::invalid_argument("identity syllable in normal form");
    for (std::size_t i = 0; i < f.atoms.size(); ++i) {
      const Atom& a = f.atoms[i];
      const AtomElem& p = s.parts[i];
      if (a.kind == AtomKind::Free) {
        if (!p.vec.empty()) throw std::invalid_argument("free atom with coordinates");
        for (std::size_t j = 0; j < p.word.size(); ++j) {
          int letter = p.word[j];
          int abs_l = letter < 0 ? -letter : letter;
          if (abs_l < 1 || abs_l > a.rank) throw std::invalid_argument("letter out of range");
          if (j && p.word[j - 1] == -letter)
            throw std::invalid_argument("free word not reduced");
        }
      } else {
        if (!p.word.empty()) throw std::invalid_argument("coordinate atom with letters");
        if (p.vec.size() != static_cast<std::size_t>(a.rank))
          throw std::invalid_argument("coordinate count does not match rank");
      }
    }
    prev = s.factor;
  }
}

// ---------------------------------------------------------------------------
// Serialization: deterministic, factor-tagged. Identity is "e"; otherwise
// syllables joined by '|', each "<factor>:<atom>;<atom>..." with atom parts
// rendered as comma-separated decimal integers (coordinates or letters).
// ---------------------------------------------------------------------------

inline std::string serialize(const Element& e) {
  if (e.is_identity()) return "e";
  std::string out;
  for (std::size_t si = 0; si < e.syllables.size(); ++si) {
    if (si) out += "|";
    const Syllable& s = e.syllables[si];
    out += std::to_string(s.factor);
    out += ":";
    for (std::size_t pi = 0; pi < s.parts.size(); ++pi) {
      if (pi) out += ";";
      const AtomElem& p = s.parts[pi];
      const bool lettered = p.vec.empty() && !p.word.empty();
      const std::vector<long long>* vv = nullptr;
      std::vector<long long> tmp;
      if (lettered) {
        tmp.assign(p.word.begin(), p.word.end());
        vv = &tmp;
      } else {
        vv = &p.vec;
      }
      for (std::size_t i = 0; i < vv->size(); ++i) {
        if (i) out += ",";
        out += std::to_string((*vv)[i]);
      }
      if (vv->empty()) out += "_";  // empty free word inside a direct product part
    }
  }
  return out;
}

inline std::string serialize(const GroupSpec&, const Element& e) { return serialize(e); }

inline Element parse_element(const GroupSpec& spec, const std::string& text) {
  if (text == "e") return identity();
  Element out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t bar = text.find('|', pos);
    std::string syl = text.substr(pos, bar == std::string::npos ? std::string::npos : bar - pos);
    std::size_t colon = syl.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("bad element: missing ':'");
    int factor = std::stoi(syl.substr(0, colon));
    if (factor < 0 || factor >= static_cast<int>(spec.factors.size()))
      throw std::invalid_argument("bad element: factor out of range");
    const Factor& f = spec.factors[static_cast<std::size_t>(factor)];
    Syllable s{factor, {}};
    std::string rest = syl.substr(colon + 1);
    std::size_t p = 0;
    for (std::size_t ai = 0; ai < f.atoms.size(); ++ai) {
      std::size_t semi = rest.find(';', p);
      std::string part =
          rest.substr(p, semi == std::string::npos ? std::string::npos : semi - p);
      AtomElem el;
      const Atom& a = f.atoms[ai];
      if (part != "_" && !part.empty()) {
        std::istringstream in(part);
        std::string tok;
        while (std::getline(in, tok, ',')) {
          long long v = std::stoll(tok);
          if (a.kind == AtomKind::Free)
            el.word.push_back(static_cast<int>(v));
          else
            el.vec.push_back(v);
        }
      }
      if (a.kind != AtomKind::Free && el.vec.size() != static_cast<std::size_t>(a.rank))
        throw std::invalid_argument("bad element: coordinate count");
      s.parts.push_back(std::move(el));
      if (semi == std::string::npos) {
        if (ai + 1 != f.atoms.size()) throw std::invalid_argument("bad element: missing parts");
        break;
      }
      p = semi + 1;
    }
    out.syllables.push_back(std::move(s));
    if (bar == std::string::npos) break;
    pos = bar + 1;
  }
  validate(spec, out);
  return out;
}

// ---------------------------------------------------------------------------

/** word as (generator index, exponent) pairs over a caller-supplied list. */
inline Element evaluate_word(const GroupSpec& spec, const std::vector<Element>& gens,
                             const std::vector<std::pair<int, int>>& word) {
  Element acc = identity();
  for (auto [idx, exp] : word) {
    if (idx < 0 || idx >= static_cast<int>(gens.size()))
      throw std::invalid_argument("generator index out of range");
    Element g = exp < 0 ? invert(spec, gens[static_cast<std::size_t>(idx)])
                        : gens[static_cast<std::size_t>(idx)];
    for (int i = 0; i < (exp < 0 ? -exp : exp); ++i) acc = multiply(spec, acc, g);
  }
  return acc;
}

struct CyclicReduction {
  Element core;
  Element conjugator;  // g = conjugator * core * conjugator^-1
};

/** Cyclic reduction of an element of a free atom (letters only). */
inline CyclicReduction cyclic_reduce(const GroupSpec& spec, const Element& g) {
  if (g.is_identity()) return {identity(), identity()};
  if (g.syllables.size() != 1) throw std::invalid_argument("cyclic_reduce: not in a free factor");
  const Syllable& s = g.syllables[0];
  const Factor& f = spec.factors[static_cast<std::size_t>(s.factor)];
  if (f.atoms.size() != 1 || f.atoms[0].kind != AtomKind::Free)
    throw std::invalid_argument("cyclic_reduce: not in a free factor");
  std::vector<int> w = s.parts[0].word;
  std::vector<int> conj;
  while (w.size() >= 2 && w.front() == -w.back()) {
    conj.push_back(w.front());
    w.erase(w.begin());
    w.pop_back();
  }
  auto mk = [&](std::vector<int> letters) {
    AtomElem e;
    e.word = std::move(letters);
    return make_syllable(spec, s.factor, {std::move(e)});
  };
  return {mk(std::move(w)), mk(std::move(conj))};
}

/** One ±1 step in each atom coordinate / letter: the default generator pool. */
inline std::vector<Element> standard_moves(const GroupSpec& spec) {
  std::vector<Element> out;
  for (std::size_t fi = 0; fi < spec.factors.size(); ++fi) {
    const Factor& f = spec.factors[fi];
    for (std::size_t ai = 0; ai < f.atoms.size(); ++ai) {
      const Atom& a = f.atoms[ai];
      // Heisenberg is generated by the first two coordinates; (0,0,1) is derived.
      int dirs = a.kind == AtomKind::Heisenberg ? 2 : a.rank;
      for (int d = 0; d < dirs; ++d)
        for (int sgn : {1, -1}) {
          std::vector<AtomElem> parts;
          parts.reserve(f.atoms.size());
          for (const Atom& other : f.atoms) parts.push_back(detail::atom_identity(other));
          if (a.kind == AtomKind::Free)
            parts[ai].word = {sgn * (d + 1)};
          else
            parts[ai].vec[static_cast<std::size_t>(d)] = sgn;
          out.push_back(make_syllable(spec, static_cast<int>(fi), std::move(parts)));
        }
    }
  }
  return out;
}

/** g^n by repeated squaring on normal forms. */
inline Element power(const GroupSpec& spec, const Element& g, long long n) {
  if (n < 0) return power(spec, invert(spec, g), -n);
  Element acc = identity(), base = g;
  while (n > 0) {
    if (n & 1) acc = multiply(spec, acc, base);
    base = multiply(spec, base, base);
    n >>= 1;
  }
  return acc;
}

}  // namespace coarse
