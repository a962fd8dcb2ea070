#pragma once

// Relative Cayley-graph geometry for free products with abelian peripheral
// factors: relative distances and geodesics, lifts back to the word metric,
// coset projections, neighborhood intersections, and almost-convexity of the
// peripheral flats. Everything here works with exact rational word distances;
// derived (non-word) metrics are rejected up front.

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "coarselab/metrics.hpp"
#include "coarselab/rng.hpp"

namespace coarse {

// ---------------------------------------------------------------------------
// Cosets of peripheral factors
// ---------------------------------------------------------------------------

/**
 * A left coset g·H of a peripheral factor H, named by its canonical
 * representative: the normal form of g with a trailing H-syllable stripped.
 * Two elements name the same coset iff they differ by right multiplication
 * by an H-element, which exactly matches this canonicalization.
 */
struct CosetId {
  int factor = -1;
  Element rep;
  std::string rep_key;

  friend bool operator==(const CosetId& a, const CosetId& b) {
    return a.factor == b.factor && a.rep_key == b.rep_key;
  }
  friend bool operator!=(const CosetId& a, const CosetId& b) { return !(a == b); }
  friend bool operator<(const CosetId& a, const CosetId& b) {
    if (a.factor != b.factor) return a.factor < b.factor;
    return a.rep_key < b.rep_key;
  }
};

inline void require_peripheral(const GroupSpec& spec, int factor) {
  if (!spec.is_peripheral_factor(factor))
    throw ConfigError("factor " + std::to_string(factor) + " is not peripheral");
}

inline CosetId coset_of(const GroupSpec& spec, int factor, const Element& g) {
  require_peripheral(spec, factor);
  Element rep = g;
  if (!rep.syllables.empty() && rep.syllables.back().factor == factor) rep.syllables.pop_back();
  CosetId id;
  id.factor = factor;
  id.rep = std::move(rep);
  id.rep_key = serialize(id.rep);
  return id;
}

inline bool in_coset(const GroupSpec& spec, const CosetId& coset, const Element& g) {
  return coset_of(spec, coset.factor, g) == coset;
}

// ---------------------------------------------------------------------------
// Factor sub-metrics and syllable bookkeeping
// ---------------------------------------------------------------------------

namespace reldetail {

/** Generators supported in `factor`, re-rooted as a standalone group. */
inline MetricSpec factor_submetric(const MetricSpec& metric, int factor, bool unit_weights) {
  const GroupSpec& spec = metric.group();
  GroupSpec sub;
  sub.factors = {spec.factors[static_cast<std::size_t>(factor)]};
  std::vector<Generator> gens;
  for (const Generator& gen : metric.gens().all()) {
    if (gen.g.syllables.size() != 1 || gen.g.syllables[0].factor != factor) continue;
    gens.push_back({gen.label, make_syllable(sub, 0, gen.g.syllables[0].parts),
                    unit_weights ? Rat(1) : gen.weight});
  }
  if (gens.empty())
    throw ConfigError("no generators supported in factor " + std::to_string(factor));
  return MetricSpec(GeneratingSet(sub, std::move(gens)), Derivation::word());
}

inline void require_relative_structure(const MetricSpec& metric) {
  if (!metric.is_word()) throw NonWordMetric();
  const GroupSpec& spec = metric.group();
  if (spec.peripherals().empty())
    throw ConfigError("group has no peripheral factors: " + spec.fingerprint());
  if (!detail::factor_supported(metric.gens()))
    throw ConfigError("relative operations need factor-supported generators");
}

/** Word distance by the exact per-syllable oracle; throws if unavailable. */
inline Rat oracle_dist(const MetricSpec& metric, const Element& g) {
  auto d = point_distance(metric, g);
  if (!d) throw ConfigError("exact distance oracle unavailable for " + serialize(g));
  return *d;
}

}  // namespace reldetail

/**
 * Exact word distance from g to the coset aH of a peripheral flat. Writing
 * w = a^-1 g in normal form, only a leading H-syllable of w can cancel into
 * the flat, so d(g, aH) = |w| - |leading H-syllable| when w starts in H and
 * |w| otherwise. Requires the exact distance oracle (factor-supported
 * generators on a word metric).
 */
inline Rat distance_to_coset(const MetricSpec& metric, const CosetId& coset,
                             const Element& g) {
  const GroupSpec& spec = metric.group();
  reldetail::require_relative_structure(metric);
  require_peripheral(spec, coset.factor);
  Element w = multiply(spec, invert(spec, coset.rep), g);
  if (w.is_identity()) return Rat(0);
  Rat dw = reldetail::oracle_dist(metric, w);
  if (w.syllables.front().factor != coset.factor) return dw;
  Element head;
  head.syllables = {w.syllables.front()};
  return dw - reldetail::oracle_dist(metric, head);
}

/**
 * Edge counter for the relative graph: a peripheral syllable is one coset
 * edge; any other syllable is walked with generator edges, each a single
 * edge regardless of weight. Unit-weight factor metrics are cached so bulk
 * sweeps do not rebuild them per element.
 */
class RelLength {
 public:
  explicit RelLength(const MetricSpec& metric) : metric_(&metric) {}

  long long syllable(const Syllable& s) {
    const GroupSpec& spec = metric_->group();
    if (spec.is_peripheral_factor(s.factor)) return 1;
    auto it = unit_.find(s.factor);
    if (it == unit_.end())
      it = unit_.emplace(s.factor, reldetail::factor_submetric(*metric_, s.factor, true)).first;
    Element inner = make_syllable(it->second.group(), 0, s.parts);
    return reldetail::oracle_dist(it->second, inner).floor_ll();
  }

  /** The syllable formula for d_{G'}(1,g) on free products. */
  long long element(const Element& g) {
    long long total = 0;
    for (const Syllable& s : g.syllables) total += syllable(s);
    return total;
  }

 private:
  const MetricSpec* metric_;
  std::map<int, MetricSpec> unit_;
};

inline long long syllable_relative_length(const MetricSpec& metric, const Syllable& s) {
  return RelLength(metric).syllable(s);
}

inline long long relative_length_formula(const MetricSpec& metric, const Element& g) {
  return RelLength(metric).element(g);
}

// ---------------------------------------------------------------------------
// Relative breadth-first search over an enumerated window
// ---------------------------------------------------------------------------

struct RelStep {
  bool jump = false;
  std::string label;  // generator label, or "jump" for coset edges
  int factor = -1;    // peripheral factor of a jump
  Element to;
};

struct RelPath {
  std::vector<Element> points;  // points.front() = identity
  std::vector<RelStep> steps;
  long long length() const { return static_cast<long long>(steps.size()); }
};

namespace reldetail {

struct RelSearch {
  std::map<std::string, long long> dist;
  std::map<std::string, std::pair<std::string, RelStep>> parent;  // key -> (prev key, step)
};

/**
 * BFS from the identity over the relative graph restricted to the window:
 * neighbors are generator translates plus, lazily, every window element in
 * the same peripheral coset. A coset bucket is exhausted the first time the
 * search enters it — later arrivals cannot improve any member's distance.
 */
inline RelSearch relative_bfs(const Window& win) {
  require_relative_structure(win.metric());
  if (!win.is_enumerated())
    throw ConfigError("relative search needs an enumerated window");
  const GroupSpec& spec = win.metric().group();
  const std::vector<Generator>& gens = win.metric().gens().all();
  const Ball& ball = *win.ball();

  std::map<std::pair<int, std::string>, std::vector<std::pair<std::string, Element>>> buckets;
  for (int fi : spec.peripherals()) {
    ball.for_each([&](const std::string& key, const Element& g, const Rat&) {
      buckets[{fi, coset_of(spec, fi, g).rep_key}].push_back({key, g});
    });
  }
  for (auto& [id, members] : buckets)
    std::sort(members.begin(), members.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

  RelSearch out;
  std::deque<std::pair<std::string, Element>> queue;
  std::set<std::pair<int, std::string>> consumed;
  out.dist[serialize(identity())] = 0;
  queue.push_back({serialize(identity()), identity()});
  while (!queue.empty()) {
    auto [key, g] = queue.front();
    queue.pop_front();
    long long d = out.dist.at(key);
    for (const Generator& gen : gens) {
      Element next = multiply(spec, g, gen.g);
      std::string nkey = serialize(next);
      if (!ball.contains(nkey) || out.dist.count(nkey)) continue;
      out.dist[nkey] = d + 1;
      RelStep step;
      step.label = gen.label;
      step.to = next;
      out.parent[nkey] = {key, std::move(step)};
      queue.push_back({nkey, std::move(next)});
    }
    for (int fi : spec.peripherals()) {
      std::pair<int, std::string> id{fi, coset_of(spec, fi, g).rep_key};
      if (consumed.count(id)) continue;
      consumed.insert(id);
      for (const auto& [mkey, member] : buckets.at(id)) {
        if (out.dist.count(mkey)) continue;
        out.dist[mkey] = d + 1;
        RelStep step;
        step.jump = true;
        step.label = "jump";
        step.factor = fi;
        step.to = member;
        out.parent[mkey] = {key, std::move(step)};
        queue.push_back({mkey, member});
      }
    }
  }
  return out;
}

/**
 * Reconcile a searched distance with the syllable formula. The restricted
 * search can never beat the true relative distance, so search < formula
 * convicts the formula (a genuine bug); search > formula means the window
 * clipped every formula-length path, which wider enumeration fixes.
 */
inline long long checked_relative(RelLength& len, const Element& g, long long searched) {
  long long formula = len.element(g);
  if (searched < formula)
    throw std::logic_error("syllable formula overshoots the search: " + serialize(g) + " gives " +
                           std::to_string(formula) + " vs " + std::to_string(searched));
  if (searched > formula)
    throw WindowTooSmall("window clips every relative geodesic to " + serialize(g));
  return searched;
}

}  // namespace reldetail

/**
 * Exact d_{G'}(1,g) by breadth-first search over the window, cross-validated
 * against the syllable formula on every call. The window must contain g;
 * syllable-prefix points of g are never farther from 1 than g is, so a
 * window that holds g holds a relative geodesic to it.
 */
inline long long relative_distance(const Window& win, const Element& g) {
  reldetail::RelSearch search = reldetail::relative_bfs(win);
  auto it = search.dist.find(serialize(g));
  if (it == search.dist.end()) throw OutOfBall(serialize(g), true);
  RelLength len(win.metric());
  return reldetail::checked_relative(len, g, it->second);
}

/**
 * Every relative distance the window supports, from a single search, each
 * entry cross-validated against the syllable formula (key -> d_{G'}).
 */
inline std::map<std::string, long long> relative_distances(const Window& win) {
  reldetail::RelSearch search = reldetail::relative_bfs(win);
  RelLength len(win.metric());
  for (const auto& [key, d] : search.dist)
    reldetail::checked_relative(len, win.ball()->element(key), d);
  return std::move(search.dist);
}

/** A relative geodesic 1 -> g realized by the same search. */
inline RelPath relative_geodesic(const Window& win, const Element& g) {
  reldetail::RelSearch search = reldetail::relative_bfs(win);
  std::string key = serialize(g);
  if (!search.dist.count(key)) throw OutOfBall(key, true);
  RelPath path;
  std::vector<std::pair<std::string, RelStep>> back;
  while (key != serialize(identity())) {
    auto& [prev, step] = search.parent.at(key);
    back.push_back({prev, step});
    key = prev;
  }
  path.points.push_back(identity());
  for (auto it = back.rbegin(); it != back.rend(); ++it) {
    path.steps.push_back(it->second);
    path.points.push_back(it->second.to);
  }
  // a relative geodesic never uses two coset edges of the same coset
  std::set<std::pair<int, std::string>> seen;
  const GroupSpec& spec = win.metric().group();
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    if (!path.steps[i].jump) continue;
    CosetId id = coset_of(spec, path.steps[i].factor, path.points[i]);
    if (!seen.insert({id.factor, id.rep_key}).second)
      throw std::logic_error("relative geodesic revisited coset " + id.rep_key);
  }
  return path;
}

// ---------------------------------------------------------------------------
// Lifting relative geodesics to the word metric
// ---------------------------------------------------------------------------

struct LiftReport {
  Path path;        // word-metric path, identity to the relative endpoint
  Rat lambda_hat;   // max over point pairs of (arc length)/(distance)
  Rat eps_hat;      // max over point pairs of (arc length) - (distance)
  long long jumps = 0;
};

/**
 * Replace every coset edge of a relative geodesic by a word geodesic inside
 * the peripheral flat (generator edges lift to themselves). The fit constants
 * measure how far the lift is from a word geodesic: a geodesic lift reports
 * exactly (1, 0).
 */
inline LiftReport lift_relative_geodesic(const Window& win, const RelPath& relpath) {
  reldetail::require_relative_structure(win.metric());
  const GroupSpec& spec = win.metric().group();
  const MetricSpec& metric = win.metric();
  std::map<std::string, Rat> weight_of;
  for (const Generator& gen : metric.gens().all()) weight_of[gen.label] = gen.weight;
  LiftReport out;
  out.path.points.push_back(identity());
  out.path.total = Rat(0);
  std::vector<Rat> arc{Rat(0)};

  for (std::size_t i = 0; i < relpath.steps.size(); ++i) {
    const RelStep& step = relpath.steps[i];
    const Element& from = relpath.points[i];
    if (!step.jump) {
      // arc length advances by the traversed edge's weight, which can exceed
      // the endpoint distance when the generating set is redundant
      out.path.points.push_back(step.to);
      out.path.labels.push_back(step.label);
      out.path.total += weight_of.at(step.label);
      arc.push_back(out.path.total);
      continue;
    }
    ++out.jumps;
    Element inner = multiply(spec, invert(spec, from), step.to);
    MetricSpec sub = reldetail::factor_submetric(metric, step.factor, false);
    Element sub_inner = make_syllable(sub.group(), 0, inner.syllables[0].parts);
    Ball flat = enumerate_ball(sub, reldetail::oracle_dist(sub, sub_inner));
    Path seg = geodesic(sub, flat, sub_inner);
    for (std::size_t k = 1; k < seg.points.size(); ++k) {
      Element abs_pt = multiply(
          spec, from, make_syllable(spec, step.factor, seg.points[k].syllables[0].parts));
      out.path.points.push_back(abs_pt);
      out.path.labels.push_back(seg.labels[k - 1]);
    }
    out.path.total += seg.total;
    // arc positions of the interior points
    Rat base = arc.back();
    Rat run(0);
    for (std::size_t k = 1; k < seg.points.size(); ++k) {
      Element sub_step = multiply(sub.group(), invert(sub.group(), seg.points[k - 1]),
                                  seg.points[k]);
      run += reldetail::oracle_dist(sub, sub_step);
      arc.push_back(base + run);
    }
  }

  out.lambda_hat = Rat(1);
  out.eps_hat = Rat(0);
  for (std::size_t i = 0; i < out.path.points.size(); ++i)
    for (std::size_t j = i + 1; j < out.path.points.size(); ++j) {
      Element diff = multiply(spec, invert(spec, out.path.points[i]), out.path.points[j]);
      Rat d = reldetail::oracle_dist(metric, diff);
      Rat a = arc[j] - arc[i];
      out.eps_hat = max(out.eps_hat, a - d);
      if (d.sign() > 0) out.lambda_hat = max(out.lambda_hat, a / d);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Coset projections
// ---------------------------------------------------------------------------

struct ProjectionReport {
  std::vector<Element> points;  // key-sorted projection set
  Rat dist;                     // d(g, aH)
  Rat diameter;
};

/**
 * π_{aH}(g): the coset points within d(g, aH) + 1 of g. Certified only when
 * the window radius covers d(1,g) + d(g,aH) + 1, which guarantees that no
 * coset point outside the window could enter the set; otherwise an explicit
 * WindowTooSmall is thrown rather than a truncated answer.
 */
inline ProjectionReport coset_projection(const Window& win, const CosetId& coset,
                                         const Element& g) {
  reldetail::require_relative_structure(win.metric());
  if (!win.is_enumerated()) throw ConfigError("coset projection needs an enumerated window");
  const GroupSpec& spec = win.metric().group();
  const MetricSpec& metric = win.metric();
  Rat dg = win.word_dist_checked(g);

  std::optional<Rat> best;
  std::vector<std::pair<Element, Rat>> reach;  // window's coset points, with d(g, .)
  win.for_each([&](const std::string&, const Element& y, const Rat&) {
    if (!in_coset(spec, coset, y)) return;
    Rat d = reldetail::oracle_dist(metric, multiply(spec, invert(spec, g), y));
    reach.push_back({y, d});
    if (!best || d < *best) best = d;
  });
  if (!best) throw ConfigError("coset does not meet the window: " + coset.rep_key);
  // any coset point within best+1 of g sits inside radius dg+best+1, so the
  // window is exhaustive for the projection only from that radius on
  if (win.word_radius() < dg + *best + Rat(1))
    throw WindowTooSmall("projection of " + serialize(g) + " needs radius >= " +
                         (dg + *best + Rat(1)).str());

  ProjectionReport out;
  out.dist = *best;
  for (const auto& [y, d] : reach)
    if (d <= *best + Rat(1)) out.points.push_back(y);
  out.diameter = Rat(0);
  for (std::size_t i = 0; i < out.points.size(); ++i)
    for (std::size_t j = i + 1; j < out.points.size(); ++j) {
      Element diff = multiply(spec, invert(spec, out.points[i]), out.points[j]);
      out.diameter = max(out.diameter, reldetail::oracle_dist(metric, diff));
    }
  return out;
}

struct PassageReport {
  Rat max_miss;  // worst over targets of the closest approach to π(g)
  long long targets = 0;
};

/**
 * How closely word geodesics from g into the coset pass by π_{aH}(g):
 * for each target, the minimum over path points of the distance to the
 * projection set; the report keeps the maximum of those minima.
 */
inline PassageReport projection_passage_check(const Window& win, const CosetId& coset,
                                              const Element& g,
                                              const std::vector<Element>& targets) {
  ProjectionReport proj = coset_projection(win, coset, g);
  const GroupSpec& spec = win.metric().group();
  const MetricSpec& metric = win.metric();
  PassageReport out;
  out.max_miss = Rat(0);
  for (const Element& y : targets) {
    if (!in_coset(spec, coset, y))
      throw ConfigError("passage target is not in the coset: " + serialize(y));
    Path path = win.geodesic_to(multiply(spec, invert(spec, g), y));
    std::optional<Rat> miss;
    for (const Element& q : path.points) {
      Element p = multiply(spec, g, q);
      for (const Element& pt : proj.points) {
        Rat d = reldetail::oracle_dist(metric, multiply(spec, invert(spec, p), pt));
        if (!miss || d < *miss) miss = d;
      }
    }
    out.max_miss = max(out.max_miss, *miss);
    ++out.targets;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coset neighborhood intersections
// ---------------------------------------------------------------------------

struct IntersectionReport {
  std::vector<Element> points;  // key-sorted intersection of the two D-neighborhoods
  Rat diameter;                 // 0 when empty
};

/**
 * Diameter of N_D(aH_i) ∩ N_D(bH_j). The D-neighborhood of a·H is exactly
 * {a·h·u : h ∈ H, |u| ≤ D}, so both sets are built directly from a coset
 * sweep of radius `coset_radius` (in the factor's own word metric) and a
 * radius-D ball of the ambient metric — no ambient-ball enumeration, which
 * keeps large sweep radii affordable. Distances use the exact per-syllable
 * oracle.
 */
inline IntersectionReport coset_intersection_diameter(const MetricSpec& metric,
                                                      const CosetId& a, const CosetId& b,
                                                      const Rat& D, const Rat& coset_radius) {
  reldetail::require_relative_structure(metric);
  if (a == b) throw ConfigError("coset intersection needs two distinct cosets");
  const GroupSpec& spec = metric.group();

  Ball pad = enumerate_ball(metric, D);
  std::vector<Element> us;
  pad.for_each([&](const std::string&, const Element& u, const Rat&) { us.push_back(u); });

  auto neighborhood = [&](const CosetId& c) {
    MetricSpec sub = reldetail::factor_submetric(metric, c.factor, false);
    Ball flat = enumerate_ball(sub, coset_radius);
    std::map<std::string, Element> out;
    flat.for_each([&](const std::string&, const Element& h, const Rat&) {
      Element base = multiply(spec, c.rep,
                              h.is_identity()
                                  ? identity()
                                  : make_syllable(spec, c.factor, h.syllables[0].parts));
      for (const Element& u : us) {
        Element y = multiply(spec, base, u);
        out.emplace(serialize(y), y);
      }
    });
    return out;
  };

  std::map<std::string, Element> na = neighborhood(a);
  std::map<std::string, Element> nb = neighborhood(b);
  IntersectionReport out;
  out.diameter = Rat(0);
  for (const auto& [key, y] : na)
    if (nb.count(key)) out.points.push_back(y);
  for (std::size_t i = 0; i < out.points.size(); ++i)
    for (std::size_t j = i + 1; j < out.points.size(); ++j) {
      Element diff = multiply(spec, invert(spec, out.points[i]), out.points[j]);
      out.diameter = max(out.diameter, reldetail::oracle_dist(metric, diff));
    }
  return out;
}

// ---------------------------------------------------------------------------
// Almost convexity of the peripheral flats
// ---------------------------------------------------------------------------

struct ConvexityReport {
  Rat max_excursion;      // worst distance from a geodesic point to the flat
  Rat coarse_constant;    // 2 * max_excursion, the induced-metric chain constant
  long long pairs = 0;
};

/**
 * Word geodesics between points of a peripheral flat H: how far do they
 * stray from H? Distance to the flat is exact by syllable bookkeeping:
 * d(p, H) = |p| - |first syllable| when that syllable lies in H, else |p|.
 * The restriction metric on H is then coarsely geodesic with constant
 * 2 * (max excursion).
 */
inline ConvexityReport almost_convexity_check(const Window& win, int factor,
                                              std::uint64_t seed, long long pairs) {
  reldetail::require_relative_structure(win.metric());
  if (!win.is_enumerated()) throw ConfigError("convexity check needs an enumerated window");
  const GroupSpec& spec = win.metric().group();
  require_peripheral(spec, factor);

  // points of H within half the window radius: differences stay enumerable
  Rat half = win.word_radius() / Rat(2);
  CosetId flat = coset_of(spec, factor, identity());
  std::vector<Element> hs;
  win.for_each([&](const std::string&, const Element& g, const Rat& d) {
    if (d <= half && in_coset(spec, flat, g)) hs.push_back(g);
  });
  if (hs.size() < 2) throw ConfigError("flat meets the window in fewer than two points");

  Substream rng(seed, "almost-convexity");
  ConvexityReport out;
  out.max_excursion = Rat(0);
  for (long long i = 0; i < pairs; ++i) {
    const Element& h1 = hs[static_cast<std::size_t>(rng.below(hs.size()))];
    const Element& h2 = hs[static_cast<std::size_t>(rng.below(hs.size()))];
    if (h1 == h2) continue;
    Path path = win.geodesic_to(multiply(spec, invert(spec, h1), h2));
    for (const Element& q : path.points)
      out.max_excursion =
          max(out.max_excursion, distance_to_coset(win.metric(), flat, multiply(spec, h1, q)));
    ++out.pairs;
  }
  out.coarse_constant = Rat(2) * out.max_excursion;
  return out;
}

}  // namespace coarse
