#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "coarselab/groups.hpp"
#include "coarselab/rational.hpp"
#include "coarselab/rng.hpp"
#include "coarselab/surd.hpp"

namespace coarse {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/** Lookup outside the enumerated/certified region. `beyond_radius` separates
 *  "provably farther than R" from "not enumerated under this budget". */
struct OutOfBall : std::runtime_error {
  OutOfBall(const std::string& key, bool beyond)
      : std::runtime_error("element outside window: " + key +
                           (beyond ? " (beyond radius)" : " (not enumerated)")),
        beyond_radius(beyond) {}
  bool beyond_radius;
};

struct BudgetExceeded : std::runtime_error {
  BudgetExceeded(std::size_t n, const Rat& done)
      : std::runtime_error("ball budget exceeded after " + std::to_string(n) +
                           " elements; completed radius " + done.str()),
        count(n),
        completed_radius(done) {}
  std::size_t count;
  Rat completed_radius;
};

struct NonWordMetric : std::runtime_error {
  NonWordMetric() : std::runtime_error("operation requires a word metric (derived metric given)") {}
};

struct CacheMismatch : std::runtime_error {
  explicit CacheMismatch(const std::string& m) : std::runtime_error("stale cache: " + m) {}
};

struct WindowTooSmall : std::runtime_error {
  explicit WindowTooSmall(const std::string& m)
      : std::runtime_error("window too small to certify: " + m) {}
};

// ---------------------------------------------------------------------------
// Generating sets
// ---------------------------------------------------------------------------

struct Generator {
  std::string label;
  Element g;
  Rat weight;
};

/**
 * Finite symmetric weighted generating set. Construction closes the given
 * list under inversion (labels gain a ^-1 suffix), rejects identity
 * generators, nonpositive weights, duplicate labels, and inconsistent
 * weights on g vs g^-1.
 */
class GeneratingSet {
 public:
  GeneratingSet(GroupSpec spec, std::vector<Generator> gens) : spec_(std::move(spec)) {
    if (gens.empty()) throw ConfigError("empty generating set");
    std::map<std::string, std::size_t> by_key;
    for (Generator& gen : gens) {
      if (gen.g.is_identity()) throw ConfigError("identity generator: " + gen.label);
      if (gen.weight.sign() <= 0) throw ConfigError("nonpositive weight: " + gen.label);
      validate(spec_, gen.g);
      std::string key = serialize(gen.g);
      if (by_key.count(key)) throw ConfigError("duplicate generator element: " + gen.label);
      by_key[key] = gens_.size();
      gens_.push_back(gen);
    }
    // symmetric closure
    std::size_t given = gens_.size();
    for (std::size_t i = 0; i < given; ++i) {
      Element inv = invert(spec_, gens_[i].g);
      std::string ikey = serialize(inv);
      auto it = by_key.find(ikey);
      if (it != by_key.end()) {
        if (gens_[it->second].weight != gens_[i].weight)
          throw ConfigError("asymmetric weights on " + gens_[i].label);
        continue;
      }
      by_key[ikey] = gens_.size();
      gens_.push_back(Generator{gens_[i].label + "^-1", inv, gens_[i].weight});
    }
    std::set<std::string> labels;
    for (const Generator& gen : gens_)
      if (!labels.insert(gen.label).second) throw ConfigError("duplicate label: " + gen.label);
    wmin_ = wmax_ = gens_[0].weight;
    Int l = 1;
    for (const Generator& gen : gens_) {
      wmin_ = min(wmin_, gen.weight);
      wmax_ = max(wmax_, gen.weight);
      l = l / boost::multiprecision::gcd(l, gen.weight.den()) * gen.weight.den();
    }
    scale_ = l.convert_to<long long>();
  }

  const GroupSpec& group() const { return spec_; }
  const std::vector<Generator>& all() const { return gens_; }
  const Rat& wmin() const { return wmin_; }
  const Rat& wmax() const { return wmax_; }
  /** Common denominator: weight*scale() is integral for every generator. */
  long long scale() const { return scale_; }

  std::string fingerprint() const {
    std::vector<std::string> parts;
    for (const Generator& g : gens_)
      parts.push_back(g.label + "=" + serialize(g.g) + "@" + g.weight.str());
    std::sort(parts.begin(), parts.end());
    std::string out = spec_.fingerprint() + "{";
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
    return out + "}";
  }

 private:
  GroupSpec spec_;
  std::vector<Generator> gens_;
  Rat wmin_, wmax_;
  long long scale_ = 1;
};

// ---------------------------------------------------------------------------
// Metric = generating set + derivation
// ---------------------------------------------------------------------------

enum class DerivationKind { Word, Additive, Concave };

struct Derivation {
  DerivationKind kind = DerivationKind::Word;
  Rat c;  // additive offset

  static Derivation word() { return {}; }
  static Derivation additive(Rat off) {
    if (off.sign() < 0) throw ConfigError("additive offset must be >= 0");
    return Derivation{DerivationKind::Additive, std::move(off)};
  }
  static Derivation concave() { return Derivation{DerivationKind::Concave, Rat(0)}; }

  /** f(t) applied to a word distance t >= 0; f(0) = 0 for all derivations. */
  Surd apply(const Rat& t) const {
    switch (kind) {
      case DerivationKind::Word: return Surd(t);
      case DerivationKind::Additive: return t.is_zero() ? Surd() : Surd(t + c);
      case DerivationKind::Concave: return Surd(t) + Surd::sqrt(t);
    }
    return Surd(t);
  }

  std::string tag() const {
    switch (kind) {
      case DerivationKind::Word: return "word";
      case DerivationKind::Additive: return "add(" + c.str() + ")";
      case DerivationKind::Concave: return "concave";
    }
    return "?";
  }
};

class MetricSpec {
 public:
  MetricSpec(GeneratingSet gens, Derivation der = Derivation::word())
      : gens_(std::move(gens)), der_(der) {}

  const GroupSpec& group() const { return gens_.group(); }
  const GeneratingSet& gens() const { return gens_; }
  const Derivation& derivation() const { return der_; }
  bool is_word() const { return der_.kind == DerivationKind::Word; }
  Surd eval(const Rat& word_dist) const { return der_.apply(word_dist); }
  std::string fingerprint() const { return gens_.fingerprint() + ";" + der_.tag(); }

  /** Largest word radius t with f(t) <= derived radius r (exact). */
  Rat word_radius_for(const Rat& derived_radius) const {
    if (is_word()) return derived_radius;
    long long s = gens_.scale();
    long long lo = 0, hi = (derived_radius * Rat(s)).floor_ll() + 1;
    // f is increasing; binary search over multiples of 1/scale
    while (lo < hi) {
      long long mid = lo + (hi - lo + 1) / 2;
      if (der_.apply(Rat(mid, s)) <= Surd(derived_radius))
        lo = mid;
      else
        hi = mid - 1;
    }
    return Rat(lo, s);
  }

 private:
  GeneratingSet gens_;
  Derivation der_;
};

// ---------------------------------------------------------------------------
// Paths
// ---------------------------------------------------------------------------

struct Path {
  std::vector<Element> points;      // p_0 .. p_L
  std::vector<std::string> labels;  // labels.size() + 1 == points.size()
  Rat total;
};

// ---------------------------------------------------------------------------
// Ball: exhaustive enumeration of { g : d_word(1,g) <= R }
// ---------------------------------------------------------------------------

class Ball {
 public:
  struct Record {
    long long sdist;  // word distance * scale
    int pred;         // generator index, -1 at the identity
  };

  Ball(std::string group_fp, std::string metric_fp, Rat radius, long long scale)
      : group_fp_(std::move(group_fp)),
        metric_fp_(std::move(metric_fp)),
        radius_(std::move(radius)),
        scale_(scale) {}

  const std::string& group_fingerprint() const { return group_fp_; }
  const std::string& metric_fingerprint() const { return metric_fp_; }
  const Rat& radius() const { return radius_; }
  long long scale() const { return scale_; }
  std::size_t size() const { return records_.size(); }

  bool contains(const std::string& key) const { return records_.count(key) != 0; }
  bool contains(const Element& g) const { return contains(serialize(g)); }

  const Record& record(const std::string& key) const {
    auto it = records_.find(key);
    if (it == records_.end()) throw OutOfBall(key, /*beyond=*/complete_);
    return it->second;
  }

  Rat word_distance(const Element& g) const { return Rat(record(serialize(g)).sdist, scale_); }
  Rat word_distance(const std::string& key) const { return Rat(record(key).sdist, scale_); }

  std::optional<Rat> try_word_distance(const Element& g) const {
    auto it = records_.find(serialize(g));
    if (it == records_.end()) return std::nullopt;
    return Rat(it->second.sdist, scale_);
  }

  const Element& element(const std::string& key) const {
    auto it = elems_.find(key);
    if (it == elems_.end()) throw OutOfBall(key, complete_);
    return it->second;
  }

  /** Ascending key order (deterministic). */
  void for_each(const std::function<void(const std::string&, const Element&, const Rat&)>& fn)
      const {
    for (const auto& [key, rec] : records_) fn(key, elems_.at(key), Rat(rec.sdist, scale_));
  }

  void insert(const std::string& key, Element g, long long sdist, int pred) {
    records_[key] = Record{sdist, pred};
    elems_[key] = std::move(g);
  }
  void mark_complete(bool v) { complete_ = v; }
  bool complete() const { return complete_; }

 private:
  std::string group_fp_, metric_fp_;
  Rat radius_;
  long long scale_;
  bool complete_ = true;  // false when loaded from a partial/unknown source
  std::map<std::string, Record> records_;
  std::map<std::string, Element> elems_;
};

/**
 * Uniform-cost search over the weighted Cayley graph. Deterministic: the
 * frontier is ordered by (scaled distance, element key), and among equal
 * relaxations the predecessor with the smaller generator label wins.
 * The radius is interpreted in the *word* metric; callers with derived
 * metrics convert via MetricSpec::word_radius_for.
 */
inline Ball enumerate_ball(const MetricSpec& metric, const Rat& radius,
                           std::size_t budget = 400000) {
  if (radius.sign() < 0) throw ConfigError("negative ball radius");
  const GroupSpec& spec = metric.group();
  const auto& gens = metric.gens().all();
  long long scale = metric.gens().scale();
  std::vector<long long> sw;
  sw.reserve(gens.size());
  for (const Generator& g : gens) sw.push_back((g.weight * Rat(scale)).floor_ll());
  long long sradius = (radius * Rat(scale)).floor_ll();  // exact when radius is on-grid

  Ball ball(spec.fingerprint(), metric.fingerprint(), radius, scale);
  struct Tent {
    long long d;
    int pred;
    Element g;
  };
  std::map<std::string, Tent> tentative;
  std::set<std::pair<long long, std::string>> frontier;

  tentative["e"] = Tent{0, -1, identity()};
  frontier.insert({0, "e"});

  while (!frontier.empty()) {
    auto [d, key] = *frontier.begin();
    frontier.erase(frontier.begin());
    Tent cur = tentative.at(key);
    ball.insert(key, cur.g, d, cur.pred);
    if (ball.size() > budget) {
      // completed radius: everything strictly below the frontier minimum is settled
      long long done = frontier.empty() ? d : std::min(d, frontier.begin()->first - 1);
      throw BudgetExceeded(ball.size(), Rat(done, scale));
    }
    for (std::size_t i = 0; i < gens.size(); ++i) {
      long long nd = d + sw[i];
      if (nd > sradius) continue;
      Element nxt = multiply(spec, cur.g, gens[i].g);
      std::string nkey = serialize(nxt);
      if (ball.contains(nkey)) continue;
      auto it = tentative.find(nkey);
      if (it == tentative.end() || nd < it->second.d ||
          (nd == it->second.d && gens[static_cast<std::size_t>(i)].label <
                                     gens[static_cast<std::size_t>(it->second.pred)].label)) {
        if (it != tentative.end()) frontier.erase({it->second.d, nkey});
        tentative[nkey] = Tent{nd, static_cast<int>(i), std::move(nxt)};
        frontier.insert({nd, nkey});
      }
    }
  }
  return ball;
}

/** Derived-metric distance through a ball lookup. */
inline Surd distance(const MetricSpec& metric, const Ball& ball, const Element& g) {
  return metric.eval(ball.word_distance(g));
}

/** Word-metric geodesic 1 -> g recovered from predecessor labels. */
inline Path geodesic(const MetricSpec& metric, const Ball& ball, const Element& g) {
  if (!metric.is_word()) throw NonWordMetric();
  const auto& gens = metric.gens().all();
  Path path;
  Element cur = g;
  std::vector<std::string> rlabels;
  std::vector<Element> rpoints;
  rpoints.push_back(cur);
  while (true) {
    const Ball::Record& rec = ball.record(serialize(cur));
    if (rec.pred < 0) break;
    const Generator& gen = gens[static_cast<std::size_t>(rec.pred)];
    rlabels.push_back(gen.label);
    cur = multiply(metric.group(), cur, invert(metric.group(), gen.g));
    rpoints.push_back(cur);
  }
  path.points.assign(rpoints.rbegin(), rpoints.rend());
  path.labels.assign(rlabels.rbegin(), rlabels.rend());
  path.total = ball.word_distance(g);
  return path;
}

// ---------------------------------------------------------------------------
// Exact point oracles (no enumeration)
// ---------------------------------------------------------------------------

namespace detail {

/** True when every generator is one syllable supported in one factor; gives
 *  the syllable-wise distance decomposition on free products. */
inline bool factor_supported(const GeneratingSet& gens) {
  for (const Generator& g : gens.all())
    if (g.g.syllables.size() != 1) return false;
  return true;
}

/** Free atom with single-letter generators: weighted reduced length is exact. */
inline std::optional<Rat> free_letter_length(const GeneratingSet& gens, int factor,
                                             const std::vector<int>& word) {
  // letter -> weight, require every +/- letter present as a one-letter generator
  std::map<int, Rat> wt;
  for (const Generator& g : gens.all()) {
    if (g.g.syllables.size() != 1) return std::nullopt;
    const Syllable& s = g.g.syllables[0];
    if (s.factor != factor) continue;
    if (s.parts.size() != 1 || s.parts[0].word.size() != 1) return std::nullopt;
    wt[s.parts[0].word[0]] = g.weight;
  }
  Rat total(0);
  for (int letter : word) {
    auto it = wt.find(letter);
    if (it == wt.end()) return std::nullopt;
    total += it->second;
  }
  return total;
}

/** Abelian atom: bounded-box Dijkstra. The box pads the coordinate range by
 *  4*max-generator-span+1, enough for some optimal multiset ordering to fit
 *  (rearrangement bound in rank <= 3). */
inline std::optional<Rat> abelian_point_distance(const GeneratingSet& gens, int factor,
                                                 std::size_t atom_index,
                                                 const std::vector<long long>& target) {
  struct Move {
    std::vector<long long> v;
    Rat w;
  };
  std::vector<Move> moves;
  for (const Generator& g : gens.all()) {
    if (g.g.syllables.size() != 1) return std::nullopt;
    const Syllable& s = g.g.syllables[0];
    if (s.factor != factor) continue;
    // generator must move only this atom within the factor
    for (std::size_t k = 0; k < s.parts.size(); ++k) {
      if (k == atom_index) continue;
      const AtomElem& p = s.parts[k];
      if (!p.word.empty()) return std::nullopt;
      for (long long v : p.vec)
        if (v != 0) return std::nullopt;
    }
    moves.push_back(Move{s.parts[atom_index].vec, g.weight});
  }
  if (moves.empty()) return std::nullopt;
  long long span = 1;
  for (const Move& m : moves)
    for (long long v : m.v) span = std::max(span, v < 0 ? -v : v);
  long long pad = 4 * span + 1;
  std::vector<long long> lo(target.size()), hi(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    lo[i] = std::min(0LL, target[i]) - pad;
    hi[i] = std::max(0LL, target[i]) + pad;
  }
  auto key = [](const std::vector<long long>& v) {
    std::string k;
    for (long long x : v) k += std::to_string(x) + ",";
    return k;
  };
  std::map<std::string, Rat> dist;
  std::set<std::pair<Rat, std::string>> pq;
  std::map<std::string, std::vector<long long>> pts;
  std::vector<long long> origin(target.size(), 0);
  dist[key(origin)] = Rat(0);
  pts[key(origin)] = origin;
  pq.insert({Rat(0), key(origin)});
  std::string tkey = key(target);
  while (!pq.empty()) {
    auto [d, k] = *pq.begin();
    pq.erase(pq.begin());
    if (k == tkey) return d;
    if (d != dist.at(k)) continue;
    const auto& p = pts.at(k);
    for (const Move& m : moves) {
      std::vector<long long> q(p);
      bool ok = true;
      for (std::size_t i = 0; i < q.size(); ++i) {
        q[i] += m.v[i];
        if (q[i] < lo[i] || q[i] > hi[i]) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      Rat nd = d + m.w;
      std::string qk = key(q);
      auto it = dist.find(qk);
      if (it == dist.end() || nd < it->second) {
        if (it != dist.end()) pq.erase({it->second, qk});
        dist[qk] = nd;
        pts[qk] = q;
        pq.insert({nd, qk});
      }
    }
  }
  return std::nullopt;  // target unreachable from these generators
}

}  // namespace detail

/**
 * Exact word distance d(1,g) without ball enumeration, when the structure
 * allows: free atoms with letter generators (reduced weighted length),
 * abelian atoms (bounded-lattice search), and free products of such pieces
 * with factor-supported generators (distance is the sum over syllables).
 * Returns nullopt when no exact oracle applies.
 */
inline std::optional<Rat> point_distance(const MetricSpec& metric, const Element& g) {
  const GroupSpec& spec = metric.group();
  if (!detail::factor_supported(metric.gens())) return std::nullopt;
  Rat total(0);
  for (const Syllable& s : g.syllables) {
    const Factor& f = spec.factors[static_cast<std::size_t>(s.factor)];
    // one syllable may span several atoms of a direct-product factor; handle
    // only single-atom factors plus direct products where the syllable moves
    // one atom (others identity) — sufficient for factor-supported gens only
    // when atoms decouple; otherwise bail out.
    Rat syl_total(0);
    for (std::size_t ai = 0; ai < f.atoms.size(); ++ai) {
      const Atom& a = f.atoms[ai];
      const AtomElem& p = s.parts[ai];
      if (a.kind == AtomKind::Free) {
        if (p.word.empty()) continue;
        auto r = detail::free_letter_length(metric.gens(), s.factor, p.word);
        if (!r) return std::nullopt;
        syl_total += *r;
      } else {
        bool trivial = true;
        for (long long v : p.vec) trivial = trivial && v == 0;
        if (trivial) continue;
        if (a.kind == AtomKind::Heisenberg) return std::nullopt;
        auto r = detail::abelian_point_distance(metric.gens(), s.factor, ai, p.vec);
        if (!r) return std::nullopt;
        syl_total += *r;
      }
    }
    total += syl_total;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Window: a certified finite view of (G, d)
// ---------------------------------------------------------------------------

/**
 * Facade over either an enumerated Ball or, for free atoms with letter
 * generators, an implicit oracle window (reduced words of weight <= R).
 * Distances are certified exact inside the window and refuse to answer
 * outside it.
 */
class Window {
 public:
  static Window enumerated(MetricSpec metric, Ball ball) {
    Window w(std::move(metric));
    w.ball_ = std::make_shared<Ball>(std::move(ball));
    w.word_radius_ = w.ball_->radius();
    return w;
  }

  /** Oracle window; valid only for a single Free atom with letter gens. */
  static Window free_oracle(MetricSpec metric, Rat word_radius) {
    const GroupSpec& spec = metric.group();
    bool ok = spec.factors.size() == 1 && spec.factors[0].atoms.size() == 1 &&
              spec.factors[0].atoms[0].kind == AtomKind::Free;
    for (const Generator& gen : metric.gens().all())
      ok = ok && gen.g.syllables.size() == 1 && gen.g.syllables[0].parts.size() == 1 &&
           gen.g.syllables[0].parts[0].word.size() == 1;
    for (int r = 1; ok && r <= spec.factors[0].atoms[0].rank; ++r) {
      Element probe = make_syllable(spec, 0, {AtomElem{{}, {r}}});
      ok = point_distance(metric, probe).has_value();
    }
    if (!ok) throw ConfigError("oracle window requires a free atom with letter generators");
    Window w(std::move(metric));
    w.word_radius_ = std::move(word_radius);
    return w;
  }

  const MetricSpec& metric() const { return metric_; }
  const Rat& word_radius() const { return word_radius_; }
  bool is_enumerated() const { return ball_ != nullptr; }
  const Ball* ball() const { return ball_.get(); }

  std::optional<Rat> word_dist(const Element& g) const {
    if (ball_) return ball_->try_word_distance(g);
    auto d = point_distance(metric_, g);
    if (d && *d <= word_radius_) return d;
    return std::nullopt;
  }

  Rat word_dist_checked(const Element& g) const {
    auto d = word_dist(g);
    if (!d) throw OutOfBall(serialize(g), true);
    return *d;
  }

  std::optional<Surd> dist(const Element& g) const {
    auto d = word_dist(g);
    if (!d) return std::nullopt;
    return metric_.eval(*d);
  }

  Surd dist_checked(const Element& g) const { return metric_.eval(word_dist_checked(g)); }

  /** d(x,y) through left invariance; both arguments must keep x^-1 y inside. */
  std::optional<Surd> dist(const Element& x, const Element& y) const {
    return dist(multiply(metric_.group(), invert(metric_.group(), x), y));
  }

  std::size_t size() const {
    if (ball_) return ball_->size();
    std::size_t n = 0;
    for_each([&n](const std::string&, const Element&, const Rat&) { ++n; });
    return n;
  }

  /** Deterministic iteration (ascending key for balls; generation order,
   *  then key-sorted, for oracle windows). */
  void for_each(const std::function<void(const std::string&, const Element&, const Rat&)>& fn)
      const {
    if (ball_) {
      ball_->for_each(fn);
      return;
    }
    std::vector<std::pair<std::string, std::pair<Element, Rat>>> items;
    enumerate_reduced(identity(), Rat(0), items);
    std::sort(items.begin(), items.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [k, v] : items) fn(k, v.first, v.second);
  }

  /** Word geodesic 1 -> g. Ball windows follow predecessors; oracle windows
   *  peel letters off the reduced word. */
  Path geodesic_to(const Element& g) const {
    if (!metric_.is_word()) throw NonWordMetric();
    if (ball_) return coarse::geodesic(metric_, *ball_, g);
    Path p;
    p.points.push_back(identity());
    p.total = Rat(0);
    if (g.is_identity()) return p;
    const std::vector<int>& word = g.syllables[0].parts[0].word;
    Element cur = identity();
    for (int letter : word) {
      Element step = make_syllable(metric_.group(), 0, {AtomElem{{}, {letter}}});
      cur = multiply(metric_.group(), cur, step);
      p.points.push_back(cur);
      p.labels.push_back(letter_label(letter));
      p.total += *point_distance(metric_, step);
    }
    if (p.total > word_radius_) throw OutOfBall(serialize(g), true);
    return p;
  }

  /**
   * Near-geodesic tube: every z with d(1,z) + d(z,g) <= d(1,g) + slack,
   * *in the word metric*. Ball windows scan records (requires radius >=
   * d(1,g) + slack so that membership of z^-1 g is decisive); oracle windows
   * enumerate prefix·u decompositions directly.
   */
  std::vector<Element> tube(const Element& g, const Rat& slack) const {
    Rat dg = word_dist_checked(g);
    if (dg + slack > word_radius_)
      throw WindowTooSmall("tube needs radius >= " + (dg + slack).str());
    std::vector<Element> out;
    if (ball_) {
      const GroupSpec& spec = metric_.group();
      ball_->for_each([&](const std::string&, const Element& z, const Rat& dz) {
        if (dz > dg + slack) return;
        auto rest = ball_->try_word_distance(multiply(spec, invert(spec, z), g));
        if (rest && dz + *rest <= dg + slack) out.push_back(z);
      });
      return out;
    }
    // free oracle: z = p·u with p a geodesic prefix, u reduced, off-cone
    const GroupSpec& spec = metric_.group();
    const std::vector<int> word =
        g.is_identity() ? std::vector<int>{} : g.syllables[0].parts[0].word;
    Rat half = slack / Rat(2);
    std::set<std::string> seen;
    Element prefix = identity();
    for (std::size_t i = 0; i <= word.size(); ++i) {
      int next_letter = i < word.size() ? word[i] : 0;
      int last_letter = i > 0 ? word[i - 1] : 0;
      // all u with weight(u) <= half, first letter != next_letter, != -last_letter
      std::vector<std::pair<Element, Rat>> stack{{identity(), Rat(0)}};
      std::vector<int> ustack{0};  // last letter of u (0 = none)
      while (!stack.empty()) {
        auto [u, wu] = stack.back();
        stack.pop_back();
        int ulast = ustack.back();
        ustack.pop_back();
        Element z = multiply(spec, prefix, u);
        std::string zk = serialize(z);
        if (seen.insert(zk).second) out.push_back(z);
        for (const Generator& gen : metric_.gens().all()) {
          int letter = gen.g.syllables[0].parts[0].word[0];
          if (u.is_identity() && (letter == next_letter || letter == -last_letter)) continue;
          if (!u.is_identity() && letter == -ulast) continue;
          Rat nw = wu + gen.weight;
          if (nw > half) continue;
          stack.push_back({multiply(spec, u, gen.g), nw});
          ustack.push_back(letter);
        }
      }
      if (i < word.size()) {
        Element step = make_syllable(spec, 0, {AtomElem{{}, {word[i]}}});
        prefix = multiply(spec, prefix, step);
      }
    }
    std::sort(out.begin(), out.end(), [](const Element& a, const Element& b) {
      return serialize(a) < serialize(b);
    });
    return out;
  }

 private:
  explicit Window(MetricSpec metric) : metric_(std::move(metric)), word_radius_(0) {}

  std::string letter_label(int letter) const {
    for (const Generator& gen : metric_.gens().all())
      if (gen.g.syllables.size() == 1 && gen.g.syllables[0].parts[0].word ==
                                             std::vector<int>{letter})
        return gen.label;
    return "?";
  }

  void enumerate_reduced(
      const Element& cur, const Rat& d,
      std::vector<std::pair<std::string, std::pair<Element, Rat>>>& items) const {
    items.push_back({serialize(cur), {cur, d}});
    int last =
        cur.is_identity() ? 0 : cur.syllables[0].parts[0].word.back();
    for (const Generator& gen : metric_.gens().all()) {
      int letter = gen.g.syllables[0].parts[0].word[0];
      if (letter == -last) continue;
      Rat nd = d + gen.weight;
      if (nd > word_radius_) continue;
      enumerate_reduced(multiply(metric_.group(), cur, gen.g), nd, items);
    }
  }

  MetricSpec metric_;
  std::shared_ptr<Ball> ball_;
  Rat word_radius_;
};

// ---------------------------------------------------------------------------
// build_metric with the generation heuristic
// ---------------------------------------------------------------------------

/**
 * Constructor with a cheap necessary check: the ball of radius r0 (default
 * 3*wmax) must contain every standard one-step move of the group. Catches
 * e.g. {±2} on Z or a missing free letter; not a completeness proof.
 */
inline MetricSpec build_metric(const GroupSpec& spec, std::vector<Generator> gens,
                               Derivation der = Derivation::word(), Rat r0 = Rat(0),
                               std::size_t check_budget = 60000) {
  GeneratingSet gs(spec, std::move(gens));
  MetricSpec metric(gs, der);
  if (r0.is_zero()) r0 = Rat(3) * gs.wmax();
  MetricSpec word_view(gs, Derivation::word());
  Ball probe = enumerate_ball(word_view, r0, check_budget);
  for (const Element& m : standard_moves(spec))
    if (!probe.contains(m))
      throw ConfigError("generating set fails to reach " + serialize(m) + " within radius " +
                        r0.str() + " (non-generating or too sparse)");
  return metric;
}

// ---------------------------------------------------------------------------
// Coarse-geodesic checking
// ---------------------------------------------------------------------------

struct ChainPoint {
  Element z;
  Surd t;  // pinned parameter time d(1,z)
};

struct ChainPairResult {
  Element target;
  bool verified = false;
  bool inconclusive = false;
  std::size_t chain_length = 0;
  std::size_t candidates = 0;
  std::string note;
};

struct CoarseGeodesicReport {
  Rat C;
  std::vector<ChainPairResult> pairs;
  std::size_t verified = 0, failed = 0, inconclusive = 0;
  Rat fraction_verified() const {
    return pairs.empty() ? Rat(1)
                         : Rat(static_cast<long long>(verified),
                               static_cast<long long>(pairs.size()));
  }
};

/**
 * Chain semantics: a pair (1,g) is C-verified when there is a chain
 * 1 = q_0, ..., q_m = g through window elements, with *pinned* parameter
 * times t_i = d(1,q_i), such that
 *   (a) |t_i - t_j| differs from d(q_i,q_j) by at most C for all i<j, and
 *   (b) consecutive times advance by at most C + s_max, where s_max is the
 *       largest one-generator step in the derived metric.
 * Pinning the times at the natural parameter keeps the search decidable and
 * makes the verdict a strict witness: any verified pair genuinely admits a
 * C-chain. The search is greedy along candidates ordered by time, with
 * bounded backtracking; exhausting the backtrack budget yields "inconclusive"
 * for that pair rather than a failure.
 */
inline CoarseGeodesicReport check_coarse_geodesic(const Window& win,
                                                  const std::vector<Element>& targets,
                                                  const Rat& C, std::size_t dfs_budget = 200000) {
  const MetricSpec& metric = win.metric();
  const GroupSpec& spec = metric.group();
  if (win.word_radius() < Rat(2) * C)
    throw ConfigError("coarse-geodesic check needs radius >= 2C");
  Surd s_max;
  for (const Generator& g : metric.gens().all())
    s_max = max(s_max, metric.eval(g.weight));
  Surd gap_cap = s_max + Surd(C);

  CoarseGeodesicReport report;
  report.C = C;
  for (const Element& g : targets) {
    ChainPairResult res;
    res.target = g;
    Surd D = win.dist_checked(g);
    // candidate set: word tube with slack C (derived defect dominates word defect)
    std::vector<Element> tube = win.tube(g, C);
    std::vector<ChainPoint> cand;
    for (const Element& z : tube) {
      Surd dz = win.dist_checked(z);
      auto rest = win.dist(multiply(spec, invert(spec, z), g));
      if (!rest) continue;
      if (dz + *rest - D <= Surd(C)) cand.push_back(ChainPoint{z, dz});
    }
    std::sort(cand.begin(), cand.end(), [](const ChainPoint& a, const ChainPoint& b) {
      if (a.t != b.t) return a.t < b.t;
      return serialize(a.z) < serialize(b.z);
    });
    res.candidates = cand.size();

    // locate forced endpoints
    std::string gkey = serialize(g);
    std::size_t goal = cand.size();
    for (std::size_t i = 0; i < cand.size(); ++i)
      if (serialize(cand[i].z) == gkey) goal = i;
    if (goal == cand.size()) {
      res.note = "target missing from candidate set";
      report.pairs.push_back(res);
      ++report.failed;
      continue;
    }

    // DFS over candidates in time order; chain must satisfy all-pairs bound
    std::vector<std::size_t> chain{0};  // index 0 is the identity (t = 0)
    std::size_t spent = 0;
    bool found = false, out_of_budget = false;
    auto pair_ok = [&](std::size_t zi, std::size_t prev) {
      const ChainPoint& a = cand[prev];
      const ChainPoint& b = cand[zi];
      auto d = win.dist(multiply(spec, invert(spec, a.z), b.z));
      if (!d) return false;
      Surd gap = b.t - a.t;
      return gap - *d <= Surd(C) && *d - gap <= Surd(C);
    };
    std::function<bool(std::size_t)> dfs = [&](std::size_t last) -> bool {
      if (++spent > dfs_budget) {
        out_of_budget = true;
        return false;
      }
      if (last == goal) return true;
      for (std::size_t next = last + 1; next < cand.size(); ++next) {
        if (cand[next].t - cand[last].t > gap_cap) break;  // time-sorted: no further options
        bool ok = true;
        for (std::size_t idx : chain)
          if (!pair_ok(next, idx)) {
            ok = false;
            break;
          }
        if (!ok) continue;
        chain.push_back(next);
        if (dfs(next)) return true;
        chain.pop_back();
        if (out_of_budget) return false;
      }
      return false;
    };
    // candidate 0 must be the identity
    if (cand.empty() || !cand[0].z.is_identity()) {
      res.note = "identity missing from candidate set";
      report.pairs.push_back(res);
      ++report.failed;
      continue;
    }
    found = dfs(0);
    res.chain_length = chain.size();
    if (found) {
      res.verified = true;
      ++report.verified;
    } else if (out_of_budget) {
      res.inconclusive = true;
      res.note = "backtrack budget exhausted";
      ++report.inconclusive;
    } else {
      res.note = "no admissible chain over " + std::to_string(cand.size()) + " candidates";
      ++report.failed;
    }
    report.pairs.push_back(res);
  }
  return report;
}

/**
 * Sampled-pair front end: draws pairs (x,y) from an enumerated window,
 * reduces each to x^-1 y by invariance, and checks the ones whose quotient
 * stays inside the checkable region (d_word(1,x^-1 y) + C <= radius).
 * Identity quotients are uninformative and redrawn.
 */
inline CoarseGeodesicReport sample_coarse_geodesic(const Window& win, const Rat& C,
                                                   uint64_t seed, std::size_t pairs,
                                                   std::size_t dfs_budget = 200000) {
  if (!win.is_enumerated())
    throw ConfigError("pair sampling needs an enumerated window; pass explicit targets instead");
  const GroupSpec& spec = win.metric().group();
  std::vector<Element> elems;
  win.for_each([&](const std::string&, const Element& g, const Rat&) { elems.push_back(g); });
  Substream rng(seed, "coarse-geodesic-pairs");
  std::vector<Element> targets;
  std::set<std::string> seen;
  std::size_t attempts = 0;
  while (targets.size() < pairs && attempts < pairs * 64) {
    ++attempts;
    const Element& x = elems[static_cast<std::size_t>(rng.below(elems.size()))];
    const Element& y = elems[static_cast<std::size_t>(rng.below(elems.size()))];
    Element z = multiply(spec, invert(spec, x), y);
    if (z.is_identity()) continue;
    auto dz = win.word_dist(z);
    if (!dz || *dz + C > win.word_radius()) continue;
    if (seen.insert(serialize(z)).second) targets.push_back(std::move(z));
  }
  return check_coarse_geodesic(win, targets, C, dfs_budget);
}

// ---------------------------------------------------------------------------
// Ball cache files
// ---------------------------------------------------------------------------

inline std::string cache_file_name(const MetricSpec& metric, const Rat& radius) {
  uint64_t h = Substream::fnv1a(metric.group().fingerprint() + "|" + metric.fingerprint());
  std::ostringstream name;
  name << "ball_" << std::hex << h << "_r" << std::dec << radius.num() << "_" << radius.den()
       << ".tsv";
  return name.str();
}

inline void save_ball(const Ball& ball, const MetricSpec& metric, std::ostream& out) {
  out << "group=" << ball.group_fingerprint() << "\n";
  out << "metric=" << ball.metric_fingerprint() << "\n";
  out << "radius=" << ball.radius().str() << "\n";
  const auto& gens = metric.gens().all();
  ball.for_each([&](const std::string& key, const Element&, const Rat& d) {
    const Ball::Record& rec = ball.record(key);
    out << key << "\t" << d.str() << "\t"
        << (rec.pred < 0 ? "-" : gens[static_cast<std::size_t>(rec.pred)].label) << "\n";
  });
}

inline Ball load_ball(const MetricSpec& metric, std::istream& in) {
  std::string line;
  auto expect = [&](const std::string& prefix) {
    if (!std::getline(in, line) || line.rfind(prefix, 0) != 0)
      throw CacheMismatch("missing header " + prefix);
    return line.substr(prefix.size());
  };
  std::string gfp = expect("group=");
  std::string mfp = expect("metric=");
  std::string rs = expect("radius=");
  if (gfp != metric.group().fingerprint()) throw CacheMismatch("group fingerprint differs");
  if (mfp != metric.fingerprint()) throw CacheMismatch("metric fingerprint differs");
  Rat radius = Rat::parse(rs);
  long long scale = metric.gens().scale();
  Ball ball(gfp, mfp, radius, scale);
  std::map<std::string, int> label_index;
  const auto& gens = metric.gens().all();
  for (std::size_t i = 0; i < gens.size(); ++i) label_index[gens[i].label] = static_cast<int>(i);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t t1 = line.find('\t'), t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw CacheMismatch("malformed record: " + line);
    std::string key = line.substr(0, t1);
    Rat d = Rat::parse(line.substr(t1 + 1, t2 - t1 - 1));
    std::string pred = line.substr(t2 + 1);
    int pi = -1;
    if (pred != "-") {
      auto it = label_index.find(pred);
      if (it == label_index.end()) throw CacheMismatch("unknown predecessor label " + pred);
      pi = it->second;
    }
    Element g = parse_element(metric.group(), key);
    ball.insert(key, std::move(g), (d * Rat(scale)).floor_ll(), pi);
  }
  if (!ball.contains(std::string("e"))) throw CacheMismatch("cache has no identity record");
  return ball;
}

struct AuditReport {
  std::size_t checked = 0;
  std::size_t mismatches = 0;
  std::vector<std::string> details;
};

/**
 * Cache soundness audit over a seeded sample (default 1%): predecessor-chain
 * replay (distances must decrease by exactly the predecessor's weight down to
 * the identity), d(g) = d(g^-1) whenever both are recorded, and one-step
 * triangle consistency against every generator.
 */
inline AuditReport audit_ball(const Ball& ball, const MetricSpec& metric, uint64_t seed,
                              const Rat& fraction = Rat(1, 100)) {
  AuditReport rep;
  const GroupSpec& spec = metric.group();
  const auto& gens = metric.gens().all();
  std::vector<std::string> keys;
  ball.for_each([&](const std::string& k, const Element&, const Rat&) { keys.push_back(k); });
  Substream rng(seed, "cache-audit");
  std::size_t want = std::max<std::size_t>(
      1, static_cast<std::size_t>((fraction * Rat(static_cast<long long>(keys.size()))).ceil_ll()));
  auto flag = [&rep](const std::string& what) {
    ++rep.mismatches;
    if (rep.details.size() < 16) rep.details.push_back(what);
  };
  for (std::size_t n = 0; n < want; ++n) {
    const std::string& key = keys[static_cast<std::size_t>(rng.below(keys.size()))];
    ++rep.checked;
    Element cur = ball.element(key);
    // (1) predecessor replay
    long long sd = ball.record(key).sdist;
    std::size_t steps = 0;
    bool ok = true;
    Element walk = cur;
    long long wd = sd;
    while (true) {
      const Ball::Record& rec = ball.record(serialize(walk));
      if (rec.sdist != wd) {
        ok = false;
        break;
      }
      if (rec.pred < 0) break;
      const Generator& gen = gens[static_cast<std::size_t>(rec.pred)];
      walk = multiply(spec, walk, invert(spec, gen.g));
      wd -= (gen.weight * Rat(ball.scale())).floor_ll();
      if (++steps > keys.size()) {
        ok = false;
        break;
      }
    }
    if (!ok || !walk.is_identity() || wd != 0) flag("pred chain broken at " + key);
    // (2) symmetry
    auto di = ball.try_word_distance(invert(spec, cur));
    if (di && *di != Rat(sd, ball.scale())) flag("asymmetric distance at " + key);
    // (3) one-step triangle
    for (const Generator& gen : gens) {
      auto dn = ball.try_word_distance(multiply(spec, cur, gen.g));
      if (dn && (*dn - Rat(sd, ball.scale()) > gen.weight ||
                 Rat(sd, ball.scale()) - *dn > gen.weight))
        flag("triangle violation at " + key + " via " + gen.label);
    }
  }
  return rep;
}

}  // namespace coarse
