#pragma once

#include <optional>
#include <string>
#include <vector>

#include "coarselab/groups.hpp"
#include "coarselab/metrics.hpp"
#include "coarselab/rational.hpp"
#include "coarselab/surd.hpp"

namespace coarse {

// ---------------------------------------------------------------------------
// Translation lengths |g| = lim d(1,g^n)/n
// ---------------------------------------------------------------------------

/**
 * All estimates are computed on the underlying word distances: the shipped
 * derivations add a bounded or sublinear term, so limits and two-point slopes
 * are unchanged, and the word values stay rational. `upper` uses the additive
 * derivation's exact rational view when it applies.
 */
struct TranslationLengthEstimate {
  Element g;
  Rat upper;         // Fekete infimum of d(1,g^n)/n over computed n
  Rat recent_slope;  // (d(1,g^{2m}) - d(1,g^m))/m at the largest m, clamped to [0, upper]
  long long n_requested = 0;
  long long n_used = 0;
  bool truncated = false;
  std::optional<Rat> exact;     // oracle value when one applies
  std::vector<Rat> word_dists;  // d_word(1,g^n) for n = 1..n_used
};

enum class HypClass { Hyperbolic, NonHyperbolic, Inconclusive };

inline const char* hyp_class_name(HypClass c) {
  switch (c) {
    case HypClass::Hyperbolic: return "hyperbolic";
    case HypClass::NonHyperbolic: return "non-hyperbolic";
    case HypClass::Inconclusive: return "inconclusive";
  }
  return "?";
}

namespace detail {

/** Unique solution of (dim x k) A·x = t over rationals; nullopt when the
 *  columns are dependent or the system is inconsistent. */
inline std::optional<std::vector<Rat>> solve_unique(std::vector<std::vector<Rat>> a,
                                                    std::vector<Rat> t) {
  std::size_t dim = a.size(), k = a.empty() ? 0 : a[0].size();
  std::vector<std::size_t> pivot_row(k);
  std::vector<bool> used(dim, false);
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t pr = dim;
    for (std::size_t r = 0; r < dim; ++r)
      if (!used[r] && !a[r][col].is_zero()) {
        pr = r;
        break;
      }
    if (pr == dim) return std::nullopt;  // dependent columns: no unique solution
    used[pr] = true;
    pivot_row[col] = pr;
    Rat inv = Rat(1) / a[pr][col];
    for (std::size_t c = col; c < k; ++c) a[pr][c] *= inv;
    t[pr] *= inv;
    for (std::size_t r = 0; r < dim; ++r) {
      if (r == pr || a[r][col].is_zero()) continue;
      Rat f = a[r][col];
      for (std::size_t c = col; c < k; ++c) a[r][c] -= f * a[pr][c];
      t[r] -= f * t[pr];
    }
  }
  for (std::size_t r = 0; r < dim; ++r)
    if (!used[r] && !t[r].is_zero()) return std::nullopt;  // inconsistent
  std::vector<Rat> x(k);
  for (std::size_t col = 0; col < k; ++col) x[col] = t[pivot_row[col]];
  return x;
}

/**
 * min Σ wᵢλᵢ with Σ λᵢvᵢ = target, λ ≥ 0, solved exactly by enumerating
 * basic solutions over column subsets of size ≤ dim. This is the stable norm
 * of the lattice vector for the symmetric weighted generating set.
 */
inline std::optional<Rat> stable_norm_lp(const std::vector<std::pair<std::vector<Rat>, Rat>>& cols,
                                         const std::vector<Rat>& target) {
  std::size_t dim = target.size();
  bool zero = true;
  for (const Rat& t : target) zero = zero && t.is_zero();
  if (zero) return Rat(0);
  std::optional<Rat> best;
  std::vector<std::size_t> idx;
  std::function<void(std::size_t)> rec = [&](std::size_t from) {
    if (!idx.empty()) {
      std::vector<std::vector<Rat>> a(dim, std::vector<Rat>(idx.size()));
      for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = 0; c < idx.size(); ++c) a[r][c] = cols[idx[c]].first[r];
      if (auto x = solve_unique(a, target)) {
        bool nonneg = true;
        Rat cost(0);
        for (std::size_t c = 0; c < idx.size(); ++c) {
          if ((*x)[c].sign() < 0) {
            nonneg = false;
            break;
          }
          cost += (*x)[c] * cols[idx[c]].second;
        }
        if (nonneg && (!best || cost < *best)) best = cost;
      }
    }
    if (idx.size() == dim) return;
    for (std::size_t i = from; i < cols.size(); ++i) {
      idx.push_back(i);
      rec(i + 1);
      idx.pop_back();
    }
  };
  rec(0);
  return best;
}

}  // namespace detail

/**
 * Exact |g| when the structure admits one:
 *  - free atom, single-letter generators: weighted cyclically reduced length;
 *  - free-abelian atom: stable norm via the exact rational LP;
 *  - Heisenberg atom: stable norm of the abelianized vector (the center is
 *    sublinearly distorted, so the LP on the (x,y) projection is the limit);
 *  - free product with factor-supported generators, single-syllable g:
 *    delegate to the factor.
 * Anything else — multi-syllable elements, mixed-support generators —
 * returns nullopt and callers fall back to the Fekete estimate.
 */
inline std::optional<Rat> exact_translation_length_oracle(const MetricSpec& metric,
                                                          const Element& g) {
  const GroupSpec& spec = metric.group();
  if (g.is_identity()) return Rat(0);
  const auto& gens = metric.gens().all();

  if (spec.factors.size() > 1) {
    if (g.syllables.size() != 1) return std::nullopt;
    int fi = g.syllables[0].factor;
    for (const Generator& gen : gens)
      if (gen.g.syllables.size() != 1) return std::nullopt;
    GroupSpec sub;
    sub.factors = {spec.factors[static_cast<std::size_t>(fi)]};
    std::vector<Generator> subgens;
    for (const Generator& gen : gens)
      if (gen.g.syllables[0].factor == fi)
        subgens.push_back(
            {gen.label, make_syllable(sub, 0, gen.g.syllables[0].parts), gen.weight});
    if (subgens.empty()) return std::nullopt;
    MetricSpec sub_metric(GeneratingSet(sub, std::move(subgens)), metric.derivation());
    return exact_translation_length_oracle(sub_metric,
                                           make_syllable(sub, 0, g.syllables[0].parts));
  }

  const Factor& f = spec.factors[0];
  if (f.atoms.size() != 1 || g.syllables.size() != 1) return std::nullopt;
  const Atom& atom = f.atoms[0];
  const AtomElem& part = g.syllables[0].parts[0];

  if (atom.kind == AtomKind::Free) {
    std::map<int, Rat> wt;
    for (const Generator& gen : gens) {
      const auto& w = gen.g.syllables[0].parts[0].word;
      if (w.size() != 1) return std::nullopt;
      wt[w[0]] = gen.weight;
    }
    CyclicReduction cr = cyclic_reduce(spec, g);
    Rat total(0);
    if (!cr.core.is_identity())
      for (int letter : cr.core.syllables[0].parts[0].word) {
        auto it = wt.find(letter);
        if (it == wt.end()) return std::nullopt;
        total += it->second;
      }
    return total;
  }

  // abelian target, or a Heisenberg element through its abelianization
  std::size_t dim = atom.kind == AtomKind::Heisenberg ? 2 : part.vec.size();
  std::vector<std::pair<std::vector<Rat>, Rat>> cols;
  for (const Generator& gen : gens) {
    const auto& v = gen.g.syllables[0].parts[0].vec;
    std::vector<Rat> col(dim);
    for (std::size_t i = 0; i < dim; ++i) col[i] = Rat(v[i]);
    cols.push_back({std::move(col), gen.weight});
  }
  std::vector<Rat> target(dim);
  for (std::size_t i = 0; i < dim; ++i) target[i] = Rat(part.vec[i]);
  return detail::stable_norm_lp(cols, target);
}

inline TranslationLengthEstimate translation_length(const Window& win, const Element& g,
                                                    long long n_max) {
  if (n_max < 2) throw ConfigError("translation length needs n_max >= 2");
  const MetricSpec& metric = win.metric();
  const GroupSpec& spec = metric.group();
  TranslationLengthEstimate est;
  est.g = g;
  est.n_requested = n_max;
  Element p = identity();
  for (long long n = 1; n <= n_max; ++n) {
    p = multiply(spec, p, g);
    auto d = win.word_dist(p);
    if (!d) break;
    est.word_dists.push_back(*d);
  }
  est.n_used = static_cast<long long>(est.word_dists.size());
  est.truncated = est.n_used < n_max;
  if (est.n_used == 0) throw OutOfBall(serialize(g), false);

  // Fekete infimum; the additive offset keeps an exact rational view, the
  // concave root is sublinear so the word view already bounds the limit
  const Derivation& der = metric.derivation();
  auto view = [&](const Rat& w) {
    if (der.kind == DerivationKind::Additive && w.sign() > 0) return w + der.c;
    return w;
  };
  est.upper = view(est.word_dists[0]);
  for (long long n = 2; n <= est.n_used; ++n) {
    Rat q = view(est.word_dists[static_cast<std::size_t>(n - 1)]) / Rat(n);
    est.upper = min(est.upper, q);
  }

  long long m = est.n_used / 2;
  if (m >= 1) {
    Rat raw = (est.word_dists[static_cast<std::size_t>(2 * m - 1)] -
               est.word_dists[static_cast<std::size_t>(m - 1)]) /
              Rat(m);
    est.recent_slope = min(max(raw, Rat(0)), est.upper);
  } else {
    est.recent_slope = est.upper;
  }
  est.exact = exact_translation_length_oracle(metric, g);
  return est;
}

/**
 * Hyperbolic ⟺ |g| > 0. Oracle values decide exactly; upper = 0 certifies
 * non-hyperbolic. Otherwise two sampled-window heuristics: a vanishing
 * recent slope with a concave-increasing deviation profile reads as
 * non-hyperbolic (distorted-center pattern); a recent slope keeping pace
 * with the Fekete bound (slope ≥ upper/2, so d(1,gⁿ) ≥ (upper/2)·n holds at
 * every computed n with room to spare) reads as hyperbolic. Anything between
 * stays inconclusive rather than guessing.
 */
inline HypClass classify_translation(const TranslationLengthEstimate& est) {
  if (est.exact) return est.exact->sign() > 0 ? HypClass::Hyperbolic : HypClass::NonHyperbolic;
  if (est.upper.is_zero()) return HypClass::NonHyperbolic;
  if (est.n_used >= 4 && est.recent_slope <= Rat(1, est.n_used)) {
    bool monotone = true;
    Rat prev_dev(0);
    std::vector<Rat> inc;
    for (long long n = 1; n <= est.n_used; ++n) {
      Rat dev = est.word_dists[static_cast<std::size_t>(n - 1)] - Rat(n) * est.recent_slope;
      if (n > 1) {
        if (dev < prev_dev) monotone = false;
        inc.push_back(dev - prev_dev);
      }
      prev_dev = dev;
    }
    if (monotone) {
      Rat first_half(0), last_half(0);
      std::size_t h = inc.size() / 2;
      for (std::size_t i = 0; i < inc.size(); ++i) (i < h ? first_half : last_half) += inc[i];
      if (last_half <= first_half && prev_dev.sign() > 0) return HypClass::NonHyperbolic;
    }
  }
  if (est.n_used >= 2 && est.recent_slope >= est.upper / Rat(2)) return HypClass::Hyperbolic;
  return HypClass::Inconclusive;
}

inline std::pair<Rat, Rat> certified_bracket(const TranslationLengthEstimate& est) {
  if (est.exact) return {*est.exact, *est.exact};
  return {Rat(0), est.upper};
}

// ---------------------------------------------------------------------------
// Spectrum tables and comparison
// ---------------------------------------------------------------------------

struct SpectrumEntry {
  Element g;
  TranslationLengthEstimate est;
  HypClass cls;
};

inline std::vector<SpectrumEntry> spectrum_table(const Window& win,
                                                 const std::vector<Element>& elements,
                                                 long long n_max) {
  std::vector<SpectrumEntry> rows;
  for (const Element& g : elements) {
    SpectrumEntry row;
    row.g = g;
    row.est = translation_length(win, g, n_max);
    row.cls = classify_translation(row.est);
    rows.push_back(std::move(row));
  }
  return rows;
}

enum class SpectrumVerdict { Same, Different, Inconclusive };

inline const char* verdict_name(SpectrumVerdict v) {
  switch (v) {
    case SpectrumVerdict::Same: return "SAME";
    case SpectrumVerdict::Different: return "DIFFERENT";
    case SpectrumVerdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

struct SpectrumComparisonRow {
  Element g;
  TranslationLengthEstimate a, b;
  HypClass ca = HypClass::Inconclusive, cb = HypClass::Inconclusive;
  bool certified_different = false;
  bool exact_equal = false;
  bool insufficient = false;
  std::string note;
};

struct SpectrumComparison {
  SpectrumVerdict verdict = SpectrumVerdict::Inconclusive;
  std::vector<SpectrumComparisonRow> rows;
  std::optional<std::size_t> witness;  // first certified-different row
};

/**
 * SAME: every element has equal exact values or overlapping certified
 * brackets (within tol). DIFFERENT: some element's certified brackets are
 * disjoint — that element is the reported witness. (A certified hyperbolicity
 * disagreement — exact 0 on one side, exact positive on the other — is the
 * same thing: those brackets are disjoint. Heuristic class labels are
 * reported per row but never drive the verdict.) INCONCLUSIVE: no witness,
 * some element with no exact value on both sides had too little usable data
 * (n_used < 2) for its bracket to mean anything.
 */
inline SpectrumComparison compare_spectra(const Window& wa, const Window& wb,
                                          const std::vector<Element>& elements, long long n_max,
                                          const Rat& tol = Rat(0)) {
  if (elements.empty()) throw ConfigError("compare_spectra needs at least one element");
  SpectrumComparison out;
  bool any_insufficient = false;
  for (const Element& g : elements) {
    SpectrumComparisonRow row;
    row.g = g;
    row.a = translation_length(wa, g, n_max);
    row.b = translation_length(wb, g, n_max);
    row.ca = classify_translation(row.a);
    row.cb = classify_translation(row.b);
    auto [alo, ahi] = certified_bracket(row.a);
    auto [blo, bhi] = certified_bracket(row.b);
    bool disjoint = alo > bhi + tol || blo > ahi + tol;
    if (disjoint) {
      row.certified_different = true;
      row.note = "certified brackets disjoint";
      if (!out.witness) out.witness = out.rows.size();
    } else if (row.a.exact && row.b.exact && (*row.a.exact - *row.b.exact).abs() <= tol) {
      row.exact_equal = true;
    } else if (row.a.n_used < 2 || row.b.n_used < 2) {
      row.insufficient = true;
      row.note = "window too small for an estimate";
      any_insufficient = true;
    }
    out.rows.push_back(std::move(row));
  }
  if (out.witness)
    out.verdict = SpectrumVerdict::Different;
  else if (any_insufficient)
    out.verdict = SpectrumVerdict::Inconclusive;
  else
    out.verdict = SpectrumVerdict::Same;
  return out;
}

// ---------------------------------------------------------------------------
// Burago bound: |d(1,g^n) - n|g|| <= C on abelian-flavored windows
// ---------------------------------------------------------------------------

struct BuragoElementReport {
  Element g;
  Rat exact;     // oracle translation length
  Surd max_dev;  // sup over computed n of |d(1,g^n) - n·exact| in the metric
  long long n_used = 0;
  bool truncated = false;
  bool growing = false;  // deviation strictly increased across the last 5 steps
};

struct BuragoReport {
  std::vector<BuragoElementReport> elements;
  Surd c_hat;
  bool any_growth = false;
};

inline BuragoReport burago_check(const Window& win, const std::vector<Element>& elements,
                                 long long n_max) {
  if (n_max < 2) throw ConfigError("burago check needs n_max >= 2");
  const MetricSpec& metric = win.metric();
  const GroupSpec& spec = metric.group();
  BuragoReport rep;
  for (const Element& g : elements) {
    auto exact = exact_translation_length_oracle(metric, g);
    if (!exact)
      throw ConfigError("burago check needs an exact translation length for " + serialize(g));
    BuragoElementReport el;
    el.g = g;
    el.exact = *exact;
    Element p = identity();
    std::vector<Surd> devs;
    for (long long n = 1; n <= n_max; ++n) {
      p = multiply(spec, p, g);
      auto w = win.word_dist(p);
      if (!w) break;
      Surd dev = metric.eval(*w) - Surd(Rat(n) * el.exact);
      if (dev < Surd()) dev = Surd() - dev;
      devs.push_back(dev);
      el.max_dev = max(el.max_dev, dev);
    }
    el.n_used = static_cast<long long>(devs.size());
    el.truncated = el.n_used < n_max;
    if (el.n_used >= 5) {
      el.growing = true;
      for (std::size_t i = devs.size() - 4; i < devs.size(); ++i)
        el.growing = el.growing && devs[i - 1] < devs[i];
    }
    rep.c_hat = max(rep.c_hat, el.max_dev);
    rep.any_growth = rep.any_growth || el.growing;
    rep.elements.push_back(std::move(el));
  }
  return rep;
}

}  // namespace coarse
