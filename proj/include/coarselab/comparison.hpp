#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coarselab/metrics.hpp"
#include "coarselab/relhyp.hpp"
#include "coarselab/rng.hpp"

namespace coarse {

// ---------------------------------------------------------------------------
// Metric pairs and the difference function Delta(x, y) = d1(x,y) - d2(x,y)
// ---------------------------------------------------------------------------

/** Coarse fit between the two metrics, measured over the shared domain. */
struct PairFit {
  Surd c_hat;                  // max |d1 - d2| (additive gap)
  std::string c_witness = "e";
  double l_hat = 1.0;          // max two-sided ratio d1/d2, d2/d1 (multiplicative gap)
  std::string l_witness = "e";
  long long evaluated = 0;     // points where both metrics answered
};

/**
 * Two metrics on the same group, each certified inside its own window.
 * All comparison operations read distances through the windows, so every
 * reported number is exact inside the certified region and the pair refuses
 * to answer outside it.
 *
 * Iteration happens over the pair's *domain*: the enumerated window (the
 * smaller one when both are enumerated), falling back to the first window
 * when both are oracles.
 */
class MetricPair {
 public:
  MetricPair(Window w1, Window w2) : w1_(std::move(w1)), w2_(std::move(w2)) {
    if (w1_.metric().group().fingerprint() != w2_.metric().group().fingerprint())
      throw ConfigError("metric pair needs both metrics on the same group");
    if (w1_.is_enumerated() && w2_.is_enumerated())
      domain_second_ = w2_.ball()->size() < w1_.ball()->size();
    else
      domain_second_ = !w1_.is_enumerated() && w2_.is_enumerated();
  }

  const Window& first() const { return w1_; }
  const Window& second() const { return w2_; }
  const Window& domain() const { return domain_second_ ? w2_ : w1_; }

  /** Delta at (1, g), or nothing when either window cannot certify g. */
  std::optional<Surd> try_delta(const Element& g) const {
    auto d1 = w1_.dist(g);
    if (!d1) return std::nullopt;
    auto d2 = w2_.dist(g);
    if (!d2) return std::nullopt;
    return *d1 - *d2;
  }

  /** Delta at (1, g); asserts the symmetry Delta(g) = Delta(g^-1). */
  Surd delta(const Element& g) const {
    auto v = try_delta(g);
    if (!v) throw OutOfBall(serialize(g), false);
    auto vi = try_delta(invert(w1_.metric().group(), g));
    if (!vi || !(*vi == *v))
      throw std::logic_error("delta is not symmetric at " + serialize(g));
    return *v;
  }

  /** Delta at (x, y) through left invariance. */
  Surd delta(const Element& x, const Element& y) const {
    const GroupSpec& spec = w1_.metric().group();
    return delta(multiply(spec, invert(spec, x), y));
  }

  /** Additive and multiplicative gaps over the domain (computed once). */
  const PairFit& fit() const {
    if (!fit_) fit_ = compute_fit();
    return *fit_;
  }

 private:
  PairFit compute_fit() const {
    PairFit f;
    // exact argmax of the ratio, tracked as a positive fraction rn/rd >= 1
    Surd rn(Rat(1)), rd(Rat(1));
    domain().for_each([&](const std::string& key, const Element& g, const Rat& d) {
      std::optional<Rat> d1 = domain_second_ ? w1_.word_dist(g) : std::optional<Rat>(d);
      if (!d1) return;
      std::optional<Rat> d2 = domain_second_ ? std::optional<Rat>(d) : w2_.word_dist(g);
      if (!d2) return;
      ++f.evaluated;
      Surd s1 = w1_.metric().eval(*d1);
      Surd s2 = w2_.metric().eval(*d2);
      Surd gap = (s1 - s2).abs();
      if (gap > f.c_hat) {
        f.c_hat = gap;
        f.c_witness = key;
      }
      if (s1.sign() > 0 && s2.sign() > 0) {
        const Surd& big = s1 >= s2 ? s1 : s2;
        const Surd& small = s1 >= s2 ? s2 : s1;
        if (big * rd > rn * small) {
          rn = big;
          rd = small;
          f.l_witness = key;
        }
      }
    });
    f.l_hat = rn.to_double() / rd.to_double();
    return f;
  }

  Window w1_;
  Window w2_;
  bool domain_second_ = false;
  mutable std::optional<PairFit> fit_;
};

inline Surd delta(const MetricPair& pair, const Element& g) { return pair.delta(g); }
inline Surd delta(const MetricPair& pair, const Element& x, const Element& y) {
  return pair.delta(x, y);
}

// ---------------------------------------------------------------------------
// Sampling pool: elements within half of both windows, stratified by shell
// ---------------------------------------------------------------------------

namespace cmpdetail {

/** Elements with d1 <= R1/2 and d2 <= R2/2, bucketed by floor(d1), so that
 *  every pairwise difference of drawn points stays evaluable in both windows. */
inline std::vector<std::vector<Element>> half_pool(const MetricPair& pair) {
  Rat h1 = pair.first().word_radius() / Rat(2);
  Rat h2 = pair.second().word_radius() / Rat(2);
  std::map<long long, std::vector<Element>> shells;
  pair.domain().for_each([&](const std::string&, const Element& g, const Rat&) {
    auto d1 = pair.first().word_dist(g);
    if (!d1 || *d1 > h1) return;
    auto d2 = pair.second().word_dist(g);
    if (!d2 || *d2 > h2) return;
    shells[d1->floor_ll()].push_back(g);
  });
  std::vector<std::vector<Element>> strata;
  for (auto& [k, v] : shells) strata.push_back(std::move(v));
  if (strata.empty()) throw ConfigError("no sample pool inside half the windows");
  return strata;
}

inline const Element& draw(const std::vector<std::vector<Element>>& strata, Substream& rng) {
  const std::vector<Element>& s = strata[static_cast<std::size_t>(rng.below(strata.size()))];
  return s[static_cast<std::size_t>(rng.below(s.size()))];
}

}  // namespace cmpdetail

// ---------------------------------------------------------------------------
// Triangle inequality for Delta
// ---------------------------------------------------------------------------

struct TriangleReport {
  long long samples = 0;
  long long violations = 0;  // must be zero: Delta satisfies the bound exactly
  Surd min_slack;            // tightest observed rhs - lhs
  std::string witness;       // "x;y;z" at the tightest triple
};

/**
 * |Delta(x,y) - Delta(x,z)| <= d1(y,z) + d2(y,z) holds pointwise (each Delta
 * term obeys its own triangle inequality); sampled triples confirm it with
 * exact arithmetic. Points are drawn shell-stratified from half the windows
 * so every difference stays certified.
 */
inline TriangleReport triangle_check(const MetricPair& pair, long long samples,
                                     std::uint64_t seed) {
  std::vector<std::vector<Element>> strata = cmpdetail::half_pool(pair);
  Substream rng(seed, "triangle-check");
  const GroupSpec& spec = pair.first().metric().group();
  TriangleReport out;
  bool started = false;
  for (long long i = 0; i < samples; ++i) {
    const Element& x = cmpdetail::draw(strata, rng);
    const Element& y = cmpdetail::draw(strata, rng);
    const Element& z = cmpdetail::draw(strata, rng);
    Surd lhs = (pair.delta(x, y) - pair.delta(x, z)).abs();
    Element yz = multiply(spec, invert(spec, y), z);
    auto r1 = pair.first().dist(yz);
    auto r2 = pair.second().dist(yz);
    if (!r1 || !r2) throw std::logic_error("half-window pool produced an uncertified pair");
    Surd slack = *r1 + *r2 - lhs;
    ++out.samples;
    if (slack.sign() < 0) ++out.violations;
    if (!started || slack < out.min_slack) {
      started = true;
      out.min_slack = slack;
      out.witness = serialize(x) + ";" + serialize(y) + ";" + serialize(z);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Additivity defect along geodesics
// ---------------------------------------------------------------------------

/** |Delta(x,z) + Delta(z,y) - Delta(x,y)| for z = path.points[z_index],
 *  with x and y the path endpoints. */
inline Surd additivity_defect(const MetricPair& pair, const Path& path, std::size_t z_index) {
  if (path.points.empty()) throw ConfigError("additivity defect needs a nonempty path");
  if (z_index >= path.points.size()) throw ConfigError("z index falls outside the path");
  const Element& x = path.points.front();
  const Element& z = path.points[z_index];
  const Element& y = path.points.back();
  return (pair.delta(x, z) + pair.delta(z, y) - pair.delta(x, y)).abs();
}

struct AdditivityScan {
  Surd max_defect;
  std::string witness;  // "target[index]" achieving the maximum
  long long paths = 0;
  long long points = 0;
};

/** Max additivity defect over every vertex of a first-metric word geodesic
 *  to each target. */
inline AdditivityScan additivity_scan(const MetricPair& pair,
                                      const std::vector<Element>& targets) {
  AdditivityScan out;
  for (const Element& t : targets) {
    Path p = pair.first().geodesic_to(t);
    ++out.paths;
    for (std::size_t i = 0; i < p.points.size(); ++i) {
      Surd d = additivity_defect(pair, p, i);
      ++out.points;
      if (d > out.max_defect) {
        out.max_defect = d;
        out.witness = serialize(t) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Constancy of Delta along peripheral cosets
// ---------------------------------------------------------------------------

struct ConstancyRow {
  std::string z;    // reference point
  Surd spread;      // max - min of Delta(z, y) over the thickened coset
  Surd max_delta;
  Surd min_delta;
  long long count = 0;
};

struct ConstancyReport {
  Surd l_hat;           // largest spread across reference points
  std::string witness;  // reference point achieving it
  long long coset_points = 0;
  std::vector<ConstancyRow> rows;
};

/**
 * How far Delta(z, .) is from constant on a thickened peripheral coset:
 * for each reference point z, the spread of Delta(z, y) over window points y
 * with d1(y, coset) <= thickening, excluding y = z itself (at y = z the value
 * is pinned to zero and would report the off-coset jump, not the variation
 * along the coset).
 */
inline ConstancyReport coset_constancy(const MetricPair& pair, const CosetId& coset,
                                       const Rat& thickening, const std::vector<Element>& zs) {
  if (zs.empty()) throw ConfigError("constancy check needs at least one reference point");
  const MetricSpec& m1 = pair.first().metric();
  const GroupSpec& spec = m1.group();
  std::vector<Element> ys;
  pair.domain().for_each([&](const std::string&, const Element& g, const Rat&) {
    if (distance_to_coset(m1, coset, g) <= thickening) ys.push_back(g);
  });
  if (ys.empty()) throw ConfigError("coset does not meet the window");

  ConstancyReport out;
  out.coset_points = static_cast<long long>(ys.size());
  for (const Element& z : zs) {
    ConstancyRow row;
    row.z = serialize(z);
    Element zi = invert(spec, z);
    bool started = false;
    for (const Element& y : ys) {
      if (y == z) continue;
      auto d = pair.try_delta(multiply(spec, zi, y));
      if (!d) continue;
      if (!started) {
        started = true;
        row.max_delta = *d;
        row.min_delta = *d;
      } else {
        row.max_delta = max(row.max_delta, *d);
        row.min_delta = min(row.min_delta, *d);
      }
      ++row.count;
    }
    if (!started)
      throw ConfigError("no certified coset points near reference " + row.z);
    row.spread = row.max_delta - row.min_delta;
    if (out.rows.empty() || row.spread > out.l_hat) {
      out.l_hat = row.spread;
      out.witness = row.z;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lipschitz control of Delta differences by the relative metric
// ---------------------------------------------------------------------------

struct LipschitzOutlier {
  Surd ratio;
  long long rel = 0;  // relative distance between the moved endpoints
  std::string x, y, z;
};

struct LipschitzReport {
  Surd p_hat;           // max |Delta(x,y) - Delta(x,z)| / d_rel(y,z)
  std::string witness;  // "x;y;z" at the maximum
  long long samples = 0;
  long long skipped = 0;  // draws with d_rel(y,z) = 0
  std::vector<LipschitzOutlier> outliers;  // ten largest ratios
};

/**
 * Whether moving one argument by relative distance r can change Delta by
 * more than P * r: samples shell-stratified triples and reports the largest
 * ratio with its witnesses. Denominators use the exact syllable formula for
 * the relative metric of the first window's generators.
 */
inline LipschitzReport relative_lipschitz(const MetricPair& pair, long long samples,
                                          std::uint64_t seed) {
  reldetail::require_relative_structure(pair.first().metric());
  std::vector<std::vector<Element>> strata = cmpdetail::half_pool(pair);
  Substream rng(seed, "relative-lipschitz");
  const GroupSpec& spec = pair.first().metric().group();
  RelLength rel(pair.first().metric());

  LipschitzReport out;
  std::vector<LipschitzOutlier> all;
  for (long long i = 0; i < samples; ++i) {
    const Element& x = cmpdetail::draw(strata, rng);
    const Element& y = cmpdetail::draw(strata, rng);
    const Element& z = cmpdetail::draw(strata, rng);
    ++out.samples;
    long long r = rel.element(multiply(spec, invert(spec, y), z));
    if (r == 0) {
      ++out.skipped;
      continue;
    }
    Surd num = (pair.delta(x, y) - pair.delta(x, z)).abs();
    LipschitzOutlier o;
    o.ratio = (Rat(1) / Rat(r)) * num;
    o.rel = r;
    o.x = serialize(x);
    o.y = serialize(y);
    o.z = serialize(z);
    if (all.empty() || o.ratio > out.p_hat) {
      out.p_hat = o.ratio;
      out.witness = o.x + ";" + o.y + ";" + o.z;
    }
    all.push_back(std::move(o));
  }
  std::sort(all.begin(), all.end(), [](const LipschitzOutlier& a, const LipschitzOutlier& b) {
    if (a.ratio != b.ratio) return b.ratio < a.ratio;
    return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z);
  });
  if (all.size() > 10) all.resize(10);
  out.outliers = std::move(all);
  return out;
}

// ---------------------------------------------------------------------------
// Growth verdict for max |Delta| over increasing radii
// ---------------------------------------------------------------------------

enum class GrowthVerdict { Bounded, Growing, Inconclusive };

inline const char* to_string(GrowthVerdict v) {
  switch (v) {
    case GrowthVerdict::Bounded: return "BOUNDED";
    case GrowthVerdict::Growing: return "GROWING";
    case GrowthVerdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

struct ProfileRow {
  Rat radius;
  Surd max_abs;        // max |Delta(1,g)| over certified g with d1 <= radius
  std::string argmax;  // lexicographically smallest key achieving it
  long long evaluated = 0;  // certified elements with d1 <= radius
};

struct DeltaReport {
  std::vector<ProfileRow> rows;
  GrowthVerdict verdict = GrowthVerdict::Inconclusive;
  Surd bound;           // BOUNDED: the plateau value
  std::string shape;    // GROWING: "linear" or "sqrt"
  double rate = 0.0;    // GROWING: fitted slope against radius or sqrt(radius)
  double residual = 0.0;  // rms residual of the best fit (when fits ran)
  double range = 0.0;     // spread of the profile maxima (fit acceptance bar = range/10)
};

/**
 * Profile r -> max |Delta| over the certified domain, then a verdict:
 * BOUNDED when the last third of the profile (at least two rows) is constant;
 * GROWING when a linear or sqrt least-squares fit has positive slope and rms
 * residual under a tenth of the profile's range; INCONCLUSIVE otherwise.
 * Elements the second window cannot certify are skipped and reported via the
 * per-radius evaluated counts.
 */
inline DeltaReport coarse_equality_verdict(const MetricPair& pair, std::vector<Rat> radii) {
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
  if (radii.size() < 3) throw ConfigError("growth verdict needs at least three radii");
  if (radii.front().sign() <= 0) throw ConfigError("radii must be positive");
  if (radii.back() > pair.first().word_radius())
    throw ConfigError("radius " + radii.back().str() + " exceeds the first window");

  // one pass: each element lands in the smallest covering radius bucket,
  // then a prefix fold turns buckets into cumulative per-radius maxima
  struct Bucket {
    bool any = false;
    Surd max;
    std::string key;
    long long n = 0;
  };
  std::vector<Bucket> buckets(radii.size());
  pair.domain().for_each([&](const std::string& key, const Element& g, const Rat& d) {
    std::optional<Rat> d1 =
        &pair.domain() == &pair.first() ? std::optional<Rat>(d) : pair.first().word_dist(g);
    if (!d1 || *d1 > radii.back()) return;
    std::optional<Rat> d2 =
        &pair.domain() == &pair.second() ? std::optional<Rat>(d) : pair.second().word_dist(g);
    if (!d2) return;
    std::size_t i = static_cast<std::size_t>(
        std::lower_bound(radii.begin(), radii.end(), *d1) - radii.begin());
    Surd gap = (pair.first().metric().eval(*d1) - pair.second().metric().eval(*d2)).abs();
    Bucket& b = buckets[i];
    ++b.n;
    if (!b.any || gap > b.max) {
      b.any = true;
      b.max = gap;
      b.key = key;
    } else if (gap == b.max && key < b.key) {
      b.key = key;
    }
  });

  DeltaReport out;
  Surd run;
  std::string runkey = "e";
  long long total = 0;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const Bucket& b = buckets[i];
    if (b.any) {
      total += b.n;
      if (b.max > run) {
        run = b.max;
        runkey = b.key;
      } else if (b.max == run && b.key < runkey) {
        runkey = b.key;
      }
    }
    out.rows.push_back(ProfileRow{radii[i], run, runkey, total});
  }

  std::vector<double> ys;
  for (const ProfileRow& row : out.rows) ys.push_back(row.max_abs.to_double());
  out.range = *std::max_element(ys.begin(), ys.end()) - *std::min_element(ys.begin(), ys.end());

  std::size_t n = out.rows.size();
  std::size_t tail = std::max<std::size_t>(2, (n + 2) / 3);
  bool plateau = true;
  for (std::size_t i = n - tail; i + 1 < n; ++i)
    plateau = plateau && out.rows[i].max_abs == out.rows[i + 1].max_abs;
  if (plateau) {
    out.verdict = GrowthVerdict::Bounded;
    out.bound = out.rows.back().max_abs;
    return out;
  }

  auto fit = [&ys](const std::vector<double>& xs) {
    double m = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    double icpt = (sy - slope * sx) / m;
    double rss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double res = ys[i] - (icpt + slope * xs[i]);
      rss += res * res;
    }
    return std::pair<double, double>(slope, std::sqrt(rss / m));
  };
  std::vector<double> xs_lin, xs_sqrt;
  for (const ProfileRow& row : out.rows) {
    xs_lin.push_back(row.radius.to_double());
    xs_sqrt.push_back(std::sqrt(xs_lin.back()));
  }
  auto [slope_lin, rms_lin] = fit(xs_lin);
  auto [slope_sqrt, rms_sqrt] = fit(xs_sqrt);
  bool linear = rms_lin <= rms_sqrt;
  double slope = linear ? slope_lin : slope_sqrt;
  out.residual = linear ? rms_lin : rms_sqrt;
  if (slope > 0 && out.residual < out.range / 10.0) {
    out.verdict = GrowthVerdict::Growing;
    out.shape = linear ? "linear" : "sqrt";
    out.rate = slope;
  }
  return out;
}

}  // namespace coarse
