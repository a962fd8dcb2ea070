#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "coarselab/relhyp.hpp"
#include "oracles.hpp"

using coarse::AtomElem;
using coarse::ConvexityReport;
using coarse::CosetId;
using coarse::Derivation;
using coarse::Element;
using coarse::Generator;
using coarse::GroupSpec;
using coarse::IntersectionReport;
using coarse::LiftReport;
using coarse::MetricSpec;
using coarse::ProjectionReport;
using coarse::Rat;
using coarse::RelPath;
using coarse::Window;

namespace {

Element syl(const GroupSpec& s, int f, AtomElem p) {
  return coarse::make_syllable(s, f, {std::move(p)});
}
AtomElem vec(std::vector<long long> v) { return AtomElem{std::move(v), {}}; }

const GroupSpec& zz() {
  static GroupSpec s = coarse::parse_group("Z^2 * Z^1");
  return s;
}

MetricSpec zz_metric() {
  return coarse::build_metric(zz(), {{"x", syl(zz(), 0, vec({1, 0})), Rat(1)},
                                     {"y", syl(zz(), 0, vec({0, 1})), Rat(1)},
                                     {"t", syl(zz(), 1, vec({1})), Rat(1)}});
}

MetricSpec zz_diag_metric(Rat diag_weight = Rat(1)) {
  return coarse::build_metric(zz(),
                              {{"x", syl(zz(), 0, vec({1, 0})), Rat(1)},
                               {"y", syl(zz(), 0, vec({0, 1})), Rat(1)},
                               {"d", syl(zz(), 0, vec({1, 1})), diag_weight},
                               {"t", syl(zz(), 1, vec({1})), Rat(1)}},
                              Derivation::word(), Rat(4));
}

Window enum_window(const MetricSpec& m, const Rat& radius) {
  return Window::enumerated(m, coarse::enumerate_ball(m, radius));
}

/** Shared windows: the radius-7 ball costs a few seconds, build it once. */
const Window& win6() {
  static Window w = enum_window(zz_metric(), Rat(6));
  return w;
}
const Window& win7() {
  static Window w = enum_window(zz_metric(), Rat(7));
  return w;
}

Element elem_x() { return syl(zz(), 0, vec({1, 0})); }
Element elem_t() { return syl(zz(), 1, vec({1})); }

std::string path_string(const RelPath& p) {
  std::ostringstream os;
  for (std::size_t i = 0; i < p.steps.size(); ++i)
    os << p.steps[i].label << ">" << coarse::serialize(p.steps[i].to) << ";";
  return os.str();
}

}  // namespace

TEST_CASE("cosets are named by trailing-syllable canonicalization") {
  const GroupSpec& s = zz();
  Element t = elem_t();
  Element h = syl(s, 0, vec({2, -1}));

  CosetId H = coarse::coset_of(s, 0, coarse::identity());
  CHECK(H.rep_key == "e");
  CHECK(coarse::coset_of(s, 0, h) == H);                    // h lies in H
  CHECK(coarse::in_coset(s, H, syl(s, 0, vec({-4, 9}))));   // so does every (a,b)
  CHECK(!coarse::in_coset(s, H, t));

  CosetId tH = coarse::coset_of(s, 0, t);
  CHECK(tH.rep_key == coarse::serialize(t));
  CHECK(tH != H);
  CHECK(coarse::in_coset(s, tH, coarse::multiply(s, t, h)));
  CHECK(coarse::coset_of(s, 0, coarse::multiply(s, t, h)) == tH);
  // right multiplication by the *other* factor leaves the coset
  CHECK(!coarse::in_coset(s, tH, coarse::multiply(s, t, coarse::multiply(s, h, t))));

  // only peripheral factors have cosets here: the free Z factor is rejected
  CHECK_THROWS_AS(coarse::coset_of(s, 1, t), coarse::ConfigError);

  // unless rank-1 factors are flagged peripheral at parse time
  GroupSpec flagged = coarse::parse_group("Z^2 * Z^1", /*peripheral_rank1=*/true);
  CHECK(coarse::coset_of(flagged, 1, syl(flagged, 1, vec({5}))).rep_key == "e");
}

TEST_CASE("relative distance: peripheral syllables collapse to single hops") {
  const GroupSpec& s = zz();
  const Window& w = win7();

  CHECK(coarse::relative_distance(w, coarse::identity()) == 0);
  // any nonzero flat element is one coset hop, whatever its word length
  CHECK(coarse::relative_distance(w, syl(s, 0, vec({1, 0}))) == 1);
  CHECK(coarse::relative_distance(w, syl(s, 0, vec({3, 2}))) == 1);
  CHECK(coarse::relative_distance(w, syl(s, 0, vec({-4, 3}))) == 1);
  // the free Z factor is walked edge by edge
  CHECK(coarse::relative_distance(w, syl(s, 1, vec({1}))) == 1);
  CHECK(coarse::relative_distance(w, syl(s, 1, vec({-2}))) == 2);
  CHECK(coarse::relative_distance(w, syl(s, 1, vec({7}))) == 7);

  // the worked example: (2,3) t (1,0) needs hop + edge + hop
  Element g = coarse::multiply(s, coarse::multiply(s, syl(s, 0, vec({2, 3})), elem_t()),
                               syl(s, 0, vec({1, 0})));
  CHECK(w.word_dist_checked(g) == Rat(7));
  CHECK(coarse::relative_distance(w, g) == 3);

  // syllable-level pieces agree
  CHECK(coarse::relative_length_formula(w.metric(), g) == 3);
  CHECK(coarse::syllable_relative_length(w.metric(), g.syllables[0]) == 1);
  CHECK(coarse::syllable_relative_length(w.metric(), g.syllables[1]) == 1);
}

TEST_CASE("relative search equals the syllable formula across a whole window") {
  const Window& w = win6();
  auto table = coarse::relative_distances(w);  // validates every entry internally
  REQUIRE(table.size() == w.size());

  const GroupSpec& s = zz();
  long long max_rel = 0;
  w.for_each([&](const std::string& key, const Element& g, const Rat& d) {
    long long r = table.at(key);
    // collapsing flats only shrinks distances, and weights here are 1
    CHECK(Rat(r) <= d);
    // the relative metric is still a metric: symmetric under inversion
    CHECK(table.at(coarse::serialize(coarse::invert(s, g))) == r);
    max_rel = std::max(max_rel, r);
  });
  // radius-6 words can spend at most 6 edges, and some do
  CHECK(max_rel == 6);

  // spot checks on the bigger window, where whole-ball sweeps get pricey
  const Window& w7 = win7();
  Element deep = coarse::multiply(
      s, coarse::multiply(s, syl(s, 1, vec({2})), syl(s, 0, vec({1, 1}))), syl(s, 1, vec({2})));
  CHECK(w7.word_dist_checked(deep) == Rat(6));
  CHECK(coarse::relative_distance(w7, deep) == 5);  // t t hop t t
}

TEST_CASE("relative geodesics realize the distance without reusing cosets") {
  const GroupSpec& s = zz();
  const Window& w = win7();
  Element g = coarse::multiply(s, coarse::multiply(s, syl(s, 0, vec({2, 3})), elem_t()),
                               syl(s, 0, vec({1, 0})));

  RelPath p = coarse::relative_geodesic(w, g);
  REQUIRE(p.length() == 3);
  REQUIRE(p.points.size() == 4);
  CHECK(p.points.front().is_identity());
  CHECK(p.points.back() == g);
  // the far side of the first flat is one hop away
  CHECK(p.steps[0].jump);
  CHECK(p.steps[0].to == syl(s, 0, vec({2, 3})));
  CHECK(!p.steps[1].jump);
  CHECK(p.steps[1].label == "t");

  // jump steps stay inside one coset of their factor
  for (std::size_t i = 0; i < p.steps.size(); ++i) {
    if (!p.steps[i].jump) continue;
    CosetId c = coarse::coset_of(s, p.steps[i].factor, p.points[i]);
    CHECK(coarse::in_coset(s, c, p.steps[i].to));
  }

  // deterministic: a rebuilt search yields the identical path
  CHECK(path_string(coarse::relative_geodesic(w, g)) == path_string(p));

  // a trailing two-step syllable forces a second hop
  Element g2 = coarse::multiply(s, coarse::multiply(s, syl(s, 0, vec({1, 1})), elem_t()),
                                syl(s, 0, vec({1, 1})));
  RelPath p2 = coarse::relative_geodesic(w, g2);
  REQUIRE(p2.length() == coarse::relative_distance(w, g2));
  CHECK(p2.steps[0].jump);
  CHECK(p2.steps[2].jump);

  // out-of-window targets are refused loudly
  CHECK_THROWS_AS(coarse::relative_geodesic(w, syl(s, 0, vec({6, 6}))), coarse::OutOfBall);
  CHECK_THROWS_AS(coarse::relative_distance(w, syl(s, 0, vec({6, 6}))), coarse::OutOfBall);
}

TEST_CASE("lifting a relative geodesic recovers word geodesics on flats") {
  const GroupSpec& s = zz();
  const Window& w = win7();

  // pure flat move: one hop lifts to a five-step staircase, exactly geodesic
  RelPath flat = coarse::relative_geodesic(w, syl(s, 0, vec({2, 3})));
  REQUIRE(flat.length() == 1);
  LiftReport lf = coarse::lift_relative_geodesic(w, flat);
  CHECK(lf.jumps == 1);
  CHECK(lf.path.total == Rat(5));
  CHECK(lf.path.points.size() == 6);
  CHECK(lf.lambda_hat == Rat(1));
  CHECK(lf.eps_hat == Rat(0));

  // mixed word: hops and edges interleave and the lift is still geodesic
  Element g = coarse::multiply(s, coarse::multiply(s, syl(s, 0, vec({2, 3})), elem_t()),
                               syl(s, 0, vec({1, 0})));
  LiftReport lg = coarse::lift_relative_geodesic(w, coarse::relative_geodesic(w, g));
  CHECK(lg.path.total == Rat(7));
  CHECK(lg.path.points.back() == g);
  CHECK(lg.lambda_hat == Rat(1));
  CHECK(lg.eps_hat == Rat(0));
  CHECK(lg.path.labels.size() + 1 == lg.path.points.size());

  Element g2 = coarse::multiply(s, coarse::multiply(s, syl(s, 0, vec({1, 1})), elem_t()),
                                syl(s, 0, vec({1, 1})));
  LiftReport l2 = coarse::lift_relative_geodesic(w, coarse::relative_geodesic(w, g2));
  CHECK(l2.jumps == 2);
  CHECK(l2.path.total == Rat(5));
  CHECK(l2.lambda_hat == Rat(1));
  CHECK(l2.eps_hat == Rat(0));

  // a redundant heavy diagonal makes the relative geodesic lift off the word
  // geodesics: the t->d route spends 4 against a word distance of 3
  MetricSpec hm = zz_diag_metric(Rat(3));
  Window hw = enum_window(hm, Rat(5));
  Element td = coarse::multiply(s, elem_t(), syl(s, 0, vec({1, 1})));
  RelPath hp = coarse::relative_geodesic(hw, td);
  REQUIRE(hp.length() == 2);
  CHECK(!hp.steps[1].jump);
  CHECK(hp.steps[1].label == "d");
  LiftReport hl = coarse::lift_relative_geodesic(hw, hp);
  CHECK(hl.path.total == Rat(4));
  CHECK(hl.lambda_hat == Rat(3, 2));
  CHECK(hl.eps_hat == Rat(1));
}

TEST_CASE("coset projection: slack-one wells with certified windows") {
  const GroupSpec& s = zz();
  CosetId H = coarse::coset_of(s, 0, coarse::identity());
  Element t = elem_t();

  // the classic well: off-flat by one edge, the projection is the unit cross
  MetricSpec m = zz_metric();
  Window w3 = enum_window(m, Rat(3));
  ProjectionReport pr = coarse::coset_projection(w3, H, t);
  CHECK(pr.dist == Rat(1));
  CHECK(pr.diameter == Rat(2));
  REQUIRE(pr.points.size() == 5);
  std::set<std::string> keys;
  for (const Element& p : pr.points) keys.insert(coarse::serialize(p));
  CHECK(keys == std::set<std::string>{"e", "0:1,0", "0:-1,0", "0:0,1", "0:0,-1"});

  // a flat point projects to its own unit neighborhood in the flat
  ProjectionReport on = coarse::coset_projection(win6(), H, syl(s, 0, vec({1, 1})));
  CHECK(on.dist == Rat(0));
  CHECK(on.diameter == Rat(2));
  CHECK(on.points.size() == 5);

  // conjugating pushes the well far away: certification then demands more
  // window than the projection itself would seem to need
  Element far = coarse::multiply(
      s, coarse::multiply(s, t, syl(s, 0, vec({3, 0}))), coarse::invert(s, t));
  CHECK_THROWS_AS(coarse::coset_projection(win6(), H, far), coarse::WindowTooSmall);

  // cosets entirely beyond the window cannot be projected onto at all
  CosetId farH = coarse::coset_of(s, 0, coarse::multiply(s, syl(s, 0, vec({5, 5})), t));
  CHECK_THROWS_AS(coarse::coset_projection(win6(), farH, t), coarse::ConfigError);
}

TEST_CASE("certified projections are stable as the window grows") {
  const GroupSpec& s = zz();
  MetricSpec m = zz_metric();
  Window w4 = enum_window(m, Rat(4));
  Window w5 = enum_window(m, Rat(5));
  std::vector<const Window*> wins = {&w4, &w5, &win6()};

  std::vector<CosetId> cosets = {coarse::coset_of(s, 0, coarse::identity()),
                                 coarse::coset_of(s, 0, elem_t())};
  long long compared = 0;
  win6().for_each([&](const std::string&, const Element& g, const Rat& d) {
    if (d > Rat(2)) return;
    for (const CosetId& c : cosets) {
      std::vector<ProjectionReport> got;
      for (const Window* w : wins) {
        try {
          got.push_back(coarse::coset_projection(*w, c, g));
        } catch (const coarse::WindowTooSmall&) {
        } catch (const coarse::OutOfBall&) {
        }
      }
      for (std::size_t i = 1; i < got.size(); ++i) {
        ++compared;
        CHECK(got[i].dist == got[0].dist);
        CHECK(got[i].diameter == got[0].diameter);
        REQUIRE(got[i].points.size() == got[0].points.size());
        for (std::size_t k = 0; k < got[i].points.size(); ++k)
          CHECK(got[i].points[k] == got[0].points[k]);
      }
    }
  });
  // plenty of (coset, point) pairs certify on at least two of the windows
  CHECK(compared >= 25);
}

TEST_CASE("word geodesics into a flat pass through the projection well") {
  const GroupSpec& s = zz();
  CosetId H = coarse::coset_of(s, 0, coarse::identity());

  std::vector<Element> targets;
  for (long long n = 1; n <= 5; ++n) targets.push_back(syl(s, 0, vec({n, 0})));
  auto rep = coarse::projection_passage_check(win6(), H, elem_t(), targets);
  CHECK(rep.targets == 5);
  CHECK(rep.max_miss == Rat(0));

  // from deeper in the branch the geodesics still brush the well
  Element g = coarse::multiply(s, elem_t(), syl(s, 0, vec({1, 0})));
  std::vector<Element> near;
  for (long long n = 0; n <= 3; ++n) near.push_back(syl(s, 0, vec({n, 1})));
  auto rep2 = coarse::projection_passage_check(win6(), H, g, near);
  CHECK(rep2.targets == 4);
  CHECK(rep2.max_miss <= Rat(1));

  // targets outside the coset are a caller error
  CHECK_THROWS_AS(coarse::projection_passage_check(win6(), H, elem_t(), {elem_t()}),
                  coarse::ConfigError);
}

TEST_CASE("neighborhood intersections of two flats stay uniformly bounded") {
  const GroupSpec& s = zz();
  MetricSpec m = zz_metric();
  CosetId H = coarse::coset_of(s, 0, coarse::identity());
  CosetId tH = coarse::coset_of(s, 0, elem_t());

  // zero padding: distinct cosets are disjoint
  IntersectionReport i0 = coarse::coset_intersection_diameter(m, H, tH, Rat(0), Rat(6));
  CHECK(i0.points.empty());
  CHECK(i0.diameter == Rat(0));

  // padding one: exactly the two points that straddle the connecting edge
  IntersectionReport i1 = coarse::coset_intersection_diameter(m, H, tH, Rat(1), Rat(6));
  REQUIRE(i1.points.size() == 2);
  CHECK(coarse::serialize(i1.points[0]) == "1:1");
  CHECK(coarse::serialize(i1.points[1]) == "e");
  CHECK(i1.diameter == Rat(1));

  // padding two: a fixed twelve-point lens whatever the sweep radius, so the
  // overlap of thickened flats does not grow with the flats themselves
  std::vector<Rat> sweeps = {Rat(6), Rat(8), Rat(10)};
  std::vector<IntersectionReport> lens;
  for (const Rat& r : sweeps)
    lens.push_back(coarse::coset_intersection_diameter(m, H, tH, Rat(2), r));
  for (const IntersectionReport& rep : lens) {
    REQUIRE(rep.points.size() == 12);
    CHECK(rep.diameter == Rat(3));
  }
  for (std::size_t k = 0; k < lens[0].points.size(); ++k) {
    CHECK(lens[1].points[k] == lens[0].points[k]);
    CHECK(lens[2].points[k] == lens[0].points[k]);
  }

  // flats further apart intersect less even with padding one
  CosetId ttH = coarse::coset_of(s, 0, syl(s, 1, vec({2})));
  IntersectionReport far = coarse::coset_intersection_diameter(m, H, ttH, Rat(1), Rat(6));
  CHECK(far.points.size() == 1);
  CHECK(coarse::serialize(far.points[0]) == "1:1");
  CHECK(far.diameter == Rat(0));

  CHECK_THROWS_AS(coarse::coset_intersection_diameter(m, H, H, Rat(1), Rat(6)),
                  coarse::ConfigError);
}

TEST_CASE("flats are convex for their own word geodesics") {
  ConvexityReport rep = coarse::almost_convexity_check(win6(), 0, 20260818, 40);
  CHECK(rep.pairs > 20);
  CHECK(rep.max_excursion == Rat(0));
  CHECK(rep.coarse_constant == Rat(0));

  // same conclusion with a redundant diagonal generator in the flat
  Window dw = enum_window(zz_diag_metric(), Rat(6));
  ConvexityReport drep = coarse::almost_convexity_check(dw, 0, 20260818, 40);
  CHECK(drep.max_excursion == Rat(0));

  // deterministic for a fixed seed
  ConvexityReport again = coarse::almost_convexity_check(win6(), 0, 20260818, 40);
  CHECK(again.pairs == rep.pairs);
  CHECK(again.max_excursion == rep.max_excursion);

  // the free factor has no flat to check
  CHECK_THROWS_AS(coarse::almost_convexity_check(win6(), 1, 7, 10), coarse::ConfigError);
}

TEST_CASE("relative operations insist on word metrics over usable groups") {
  const GroupSpec& s = zz();

  // derived metrics have no relative graph
  MetricSpec add = coarse::build_metric(s,
                                        {{"x", syl(s, 0, vec({1, 0})), Rat(1)},
                                         {"y", syl(s, 0, vec({0, 1})), Rat(1)},
                                         {"t", syl(s, 1, vec({1})), Rat(1)}},
                                        Derivation::additive(Rat(1)));
  Window aw = Window::enumerated(add, coarse::enumerate_ball(add, Rat(4)));
  CHECK_THROWS_AS(coarse::relative_distance(aw, elem_x()), coarse::NonWordMetric);

  // no peripheral factors, no relative geometry
  GroupSpec f2 = coarse::parse_group("F(2)");
  MetricSpec fm = coarse::build_metric(
      f2, {{"a", syl(f2, 0, AtomElem{{}, {1}}), Rat(1)}, {"b", syl(f2, 0, AtomElem{{}, {2}}), Rat(1)}});
  Window fw = Window::enumerated(fm, coarse::enumerate_ball(fm, Rat(3)));
  CHECK_THROWS_AS(coarse::relative_distances(fw), coarse::ConfigError);

  // generators that straddle factors break the syllable decomposition
  Element xt = coarse::multiply(s, elem_x(), elem_t());
  MetricSpec mixed = coarse::build_metric(s, {{"x", syl(s, 0, vec({1, 0})), Rat(1)},
                                              {"y", syl(s, 0, vec({0, 1})), Rat(1)},
                                              {"t", syl(s, 1, vec({1})), Rat(1)},
                                              {"xt", xt, Rat(1)}});
  Window mw = Window::enumerated(mixed, coarse::enumerate_ball(mixed, Rat(3)));
  CHECK_THROWS_AS(coarse::relative_distance(mw, elem_x()), coarse::ConfigError);

  // flagging rank-1 factors peripheral turns every t-power into one hop
  GroupSpec flagged = coarse::parse_group("Z^1 * Z^1", /*peripheral_rank1=*/true);
  MetricSpec fm2 = coarse::build_metric(flagged, {{"u", syl(flagged, 0, vec({1})), Rat(1)},
                                                  {"v", syl(flagged, 1, vec({1})), Rat(1)}});
  Window w2 = Window::enumerated(fm2, coarse::enumerate_ball(fm2, Rat(6)));
  CHECK(coarse::relative_distance(w2, syl(flagged, 1, vec({5}))) == 1);
  Element uvu = coarse::multiply(
      flagged, coarse::multiply(flagged, syl(flagged, 0, vec({2})), syl(flagged, 1, vec({-3}))),
      syl(flagged, 0, vec({1})));
  CHECK(w2.word_dist_checked(uvu) == Rat(6));
  CHECK(coarse::relative_distance(w2, uvu) == 3);
}
