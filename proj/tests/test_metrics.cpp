#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "coarselab/metrics.hpp"
#include "oracles.hpp"

using coarse::AtomElem;
using coarse::Ball;
using coarse::Derivation;
using coarse::Element;
using coarse::GeneratingSet;
using coarse::Generator;
using coarse::GroupSpec;
using coarse::MetricSpec;
using coarse::Rat;
using coarse::Surd;
using coarse::Window;

namespace {

Element syl(const GroupSpec& s, int f, AtomElem p) {
  return coarse::make_syllable(s, f, {std::move(p)});
}
AtomElem vec(std::vector<long long> v) { return AtomElem{std::move(v), {}}; }
AtomElem word(std::vector<int> w) { return AtomElem{{}, std::move(w)}; }

MetricSpec f2_metric(Derivation der = Derivation::word(), Rat wa = Rat(1), Rat wb = Rat(1)) {
  GroupSpec s = coarse::parse_group("F(2)");
  return coarse::build_metric(
      s, {{"a", syl(s, 0, word({1})), wa}, {"b", syl(s, 0, word({2})), wb}}, der);
}

MetricSpec z2_metric(bool with_diag = false) {
  GroupSpec s = coarse::parse_group("Z^2");
  std::vector<Generator> gens = {{"x", syl(s, 0, vec({1, 0})), Rat(1)},
                                 {"y", syl(s, 0, vec({0, 1})), Rat(1)}};
  if (with_diag) gens.push_back({"d", syl(s, 0, vec({1, 1})), Rat(1)});
  return coarse::build_metric(s, gens);
}

MetricSpec z23_metric(Derivation der = Derivation::word()) {
  GroupSpec s = coarse::parse_group("Z^1");
  return coarse::build_metric(
      s, {{"p2", syl(s, 0, vec({2})), Rat(1)}, {"p3", syl(s, 0, vec({3})), Rat(1)}}, der,
      Rat(6));  // 1 = 3-2 needs radius 2 anyway; generous check radius
}

std::vector<std::pair<Element, Rat>> oracle_gens(const MetricSpec& m) {
  std::vector<std::pair<Element, Rat>> out;
  for (const Generator& g : m.gens().all()) out.push_back({g.g, g.weight});
  return out;
}

void compare_with_oracle(const MetricSpec& m, const Rat& radius) {
  Ball ball = coarse::enumerate_ball(m, radius);
  auto expect = testoracle::dijkstra_ball(m.group(), oracle_gens(m), radius);
  REQUIRE(ball.size() == expect.size());
  for (const auto& [key, d] : expect) {
    REQUIRE(ball.contains(key));
    REQUIRE(ball.word_distance(key) == d);
  }
}

}  // namespace

TEST_CASE("generating sets close symmetrically and validate input") {
  GroupSpec s = coarse::parse_group("F(2)");
  GeneratingSet gs(s, {{"a", syl(s, 0, word({1})), Rat(1)}, {"b", syl(s, 0, word({2})), Rat(2)}});
  REQUIRE(gs.all().size() == 4);
  bool saw_ainv = false;
  for (const Generator& g : gs.all())
    if (g.label == "a^-1") {
      saw_ainv = true;
      REQUIRE(g.g == coarse::invert(s, syl(s, 0, word({1}))));
      REQUIRE(g.weight == Rat(1));
    }
  REQUIRE(saw_ainv);
  REQUIRE(gs.wmin() == Rat(1));
  REQUIRE(gs.wmax() == Rat(2));
  REQUIRE(gs.scale() == 1);

  // explicit inverse with matching weight is accepted, not duplicated
  GeneratingSet explicit_inv(
      s, {{"a", syl(s, 0, word({1})), Rat(1)}, {"A", syl(s, 0, word({-1})), Rat(1)}});
  REQUIRE(explicit_inv.all().size() == 2);

  REQUIRE_THROWS_AS(GeneratingSet(s, {{"e", coarse::identity(), Rat(1)}}), coarse::ConfigError);
  REQUIRE_THROWS_AS(GeneratingSet(s, {{"a", syl(s, 0, word({1})), Rat(0)}}), coarse::ConfigError);
  REQUIRE_THROWS_AS(GeneratingSet(s, {{"a", syl(s, 0, word({1})), Rat(1)},
                                      {"A", syl(s, 0, word({-1})), Rat(2)}}),
                    coarse::ConfigError);
  REQUIRE_THROWS_AS(GeneratingSet(s, {{"a", syl(s, 0, word({1})), Rat(1)},
                                      {"also_a", syl(s, 0, word({1})), Rat(1)}}),
                    coarse::ConfigError);

  // fractional weights set the scale
  GeneratingSet frac(s, {{"a", syl(s, 0, word({1})), Rat(1, 2)},
                         {"b", syl(s, 0, word({2})), Rat(2, 3)}});
  REQUIRE(frac.scale() == 6);
}

TEST_CASE("build_metric rejects non-generating sets") {
  GroupSpec z = coarse::parse_group("Z^1");
  REQUIRE_THROWS_AS(
      coarse::build_metric(z, {{"p2", syl(z, 0, vec({2})), Rat(1)}}, Derivation::word()),
      coarse::ConfigError);
  // {2,3} does generate
  REQUIRE_NOTHROW(z23_metric());
  GroupSpec f2 = coarse::parse_group("F(2)");
  REQUIRE_THROWS_AS(
      coarse::build_metric(f2, {{"a", syl(f2, 0, word({1})), Rat(1)}}, Derivation::word()),
      coarse::ConfigError);
}

TEST_CASE("ball sizes match closed-form counts") {
  // free rank 2: 1 + 4 + 12 within radius 2
  Ball f2 = coarse::enumerate_ball(f2_metric(), Rat(2));
  REQUIRE(f2.size() == 17);
  // rank-2 lattice, L1 ball of radius 1
  Ball z2 = coarse::enumerate_ball(z2_metric(), Rat(1));
  REQUIRE(z2.size() == 5);
  // adding the diagonal pair grows the unit sphere by 2
  Ball z2d = coarse::enumerate_ball(z2_metric(true), Rat(1));
  REQUIRE(z2d.size() == 7);
}

TEST_CASE("distances: lattice L1, perturbed letters, sparse generators") {
  GroupSpec z2 = coarse::parse_group("Z^2");
  MetricSpec m = z2_metric();
  Ball ball = coarse::enumerate_ball(m, Rat(8));
  REQUIRE(ball.word_distance(syl(z2, 0, vec({3, 4}))) == Rat(7));
  REQUIRE(ball.word_distance(coarse::identity()) == Rat(0));

  MetricSpec pert = f2_metric(Derivation::additive(Rat(1)));
  Ball fb = coarse::enumerate_ball(pert, Rat(4));
  GroupSpec f2 = pert.group();
  REQUIRE(coarse::distance(pert, fb, syl(f2, 0, word({1}))) == Surd(Rat(2)));
  REQUIRE(coarse::distance(pert, fb, coarse::identity()) == Surd());
  REQUIRE(fb.word_distance(syl(f2, 0, word({1, 2, 1, 2}))) == Rat(4));

  MetricSpec z23 = z23_metric();
  GroupSpec z = z23.group();
  Ball zb = coarse::enumerate_ball(z23, Rat(6));
  REQUIRE(zb.word_distance(syl(z, 0, vec({1}))) == Rat(2));  // 1 = 3 - 2
  REQUIRE(zb.word_distance(syl(z, 0, vec({7}))) == Rat(3));  // 7 = 2 + 2 + 3
}

TEST_CASE("balls agree with an independent exact search") {
  compare_with_oracle(f2_metric(), Rat(3));
  compare_with_oracle(z2_metric(), Rat(4));
  compare_with_oracle(z2_metric(true), Rat(3));
  compare_with_oracle(z23_metric(), Rat(8));
  // weighted letters exercise the scaled queue
  compare_with_oracle(f2_metric(Derivation::word(), Rat(1, 2), Rat(3, 2)), Rat(3));
  // Heisenberg and a free product: no closed form, oracle only
  GroupSpec h3 = coarse::parse_group("H3");
  MetricSpec mh = coarse::build_metric(
      h3, {{"x", syl(h3, 0, vec({1, 0, 0})), Rat(1)}, {"y", syl(h3, 0, vec({0, 1, 0})), Rat(1)}});
  compare_with_oracle(mh, Rat(5));
  GroupSpec t = coarse::parse_group("Z^2 * Z^1");
  MetricSpec mt = coarse::build_metric(t, {{"x", syl(t, 0, AtomElem{{1, 0}, {}}), Rat(1)},
                                           {"y", syl(t, 0, AtomElem{{0, 1}, {}}), Rat(1)},
                                           {"t", syl(t, 1, vec({1})), Rat(1)}});
  compare_with_oracle(mt, Rat(4));
}

TEST_CASE("ball budget reports the radius actually completed") {
  try {
    coarse::enumerate_ball(f2_metric(), Rat(6), 30);  // B(6) has 1457 elements
    FAIL("expected budget stop");
  } catch (const coarse::BudgetExceeded& e) {
    REQUIRE(e.count == 31);
    REQUIRE(e.completed_radius >= Rat(1));
    REQUIRE(e.completed_radius < Rat(3));  // 31 elements cannot finish radius 3 (53 needed)
  }
}

TEST_CASE("metric axioms hold exactly on random triples") {
  struct Case {
    MetricSpec m;
    Rat radius;
  };
  std::vector<Case> cases;
  cases.push_back({f2_metric(), Rat(6)});
  cases.push_back({f2_metric(Derivation::additive(Rat(1))), Rat(6)});
  cases.push_back({f2_metric(Derivation::concave()), Rat(6)});
  cases.push_back({z23_metric(Derivation::additive(Rat(2))), Rat(20)});
  for (const Case& c : cases) {
    const GroupSpec& spec = c.m.group();
    Ball ball = coarse::enumerate_ball(c.m, c.radius);
    std::vector<Element> elems;
    std::vector<std::string> keys;
    Rat half = c.radius / Rat(2);
    ball.for_each([&](const std::string& k, const Element& g, const Rat& d) {
      if (d <= half) {
        elems.push_back(g);
        keys.push_back(k);
      }
    });
    coarse::Substream rng(20260818, "axioms:" + c.m.fingerprint());
    for (int trial = 0; trial < 2500; ++trial) {
      const Element& x = elems[static_cast<std::size_t>(rng.below(elems.size()))];
      const Element& y = elems[static_cast<std::size_t>(rng.below(elems.size()))];
      const Element& z = elems[static_cast<std::size_t>(rng.below(elems.size()))];
      Element xy = coarse::multiply(spec, coarse::invert(spec, x), y);
      Element yz = coarse::multiply(spec, coarse::invert(spec, y), z);
      Element xz = coarse::multiply(spec, coarse::invert(spec, x), z);
      Surd dxy = coarse::distance(c.m, ball, xy);
      Surd dyz = coarse::distance(c.m, ball, yz);
      Surd dxz = coarse::distance(c.m, ball, xz);
      REQUIRE(dxy == coarse::distance(c.m, ball, coarse::invert(spec, xy)));
      REQUIRE(dxz <= dxy + dyz);
      REQUIRE((dxy == Surd()) == (coarse::serialize(xy) == "e"));
    }
  }
}

TEST_CASE("left invariance through translated lookups") {
  MetricSpec m = z2_metric(true);
  const GroupSpec& spec = m.group();
  Ball ball = coarse::enumerate_ball(m, Rat(6));
  coarse::Substream rng(20260818, "invariance");
  std::vector<Element> elems;
  ball.for_each([&](const std::string&, const Element& g, const Rat& d) {
    if (d <= Rat(3)) elems.push_back(g);
  });
  for (int trial = 0; trial < 500; ++trial) {
    const Element& h = elems[static_cast<std::size_t>(rng.below(elems.size()))];
    const Element& g = elems[static_cast<std::size_t>(rng.below(elems.size()))];
    Element hg = coarse::multiply(spec, h, g);
    // d(h, hg) = d(1, g)
    Element quotient = coarse::multiply(spec, coarse::invert(spec, h), hg);
    REQUIRE(ball.word_distance(quotient) == ball.word_distance(g));
  }
}

TEST_CASE("geodesics replay to the exact distance") {
  MetricSpec m = z2_metric();
  GroupSpec z2 = m.group();
  Ball ball = coarse::enumerate_ball(m, Rat(5));

  coarse::Path trivial = coarse::geodesic(m, ball, coarse::identity());
  REQUIRE(trivial.labels.empty());
  REQUIRE(trivial.points.size() == 1);
  REQUIRE(trivial.total == Rat(0));

  coarse::Path straight = coarse::geodesic(m, ball, syl(z2, 0, vec({3, 0})));
  REQUIRE(straight.labels == std::vector<std::string>{"x", "x", "x"});
  REQUIRE(straight.total == Rat(3));

  MetricSpec md = z2_metric(true);
  Ball bd = coarse::enumerate_ball(md, Rat(3));
  coarse::Path diag = coarse::geodesic(md, bd, syl(z2, 0, vec({1, 1})));
  REQUIRE(diag.labels == std::vector<std::string>{"d"});
  REQUIRE(diag.total == Rat(1));

  // derived metrics have no step paths
  MetricSpec pert = f2_metric(Derivation::additive(Rat(1)));
  Ball fb = coarse::enumerate_ball(pert, Rat(3));
  REQUIRE_THROWS_AS(coarse::geodesic(pert, fb, syl(pert.group(), 0, word({1}))),
                    coarse::NonWordMetric);

  // every path step multiplies out and weights sum to the distance
  MetricSpec wm = f2_metric(Derivation::word(), Rat(1, 2), Rat(3, 2));
  Ball wb = coarse::enumerate_ball(wm, Rat(4));
  std::map<std::string, Rat> weight_of;
  std::map<std::string, Element> gen_of;
  for (const Generator& g : wm.gens().all()) {
    weight_of[g.label] = g.weight;
    gen_of[g.label] = g.g;
  }
  wb.for_each([&](const std::string&, const Element& g, const Rat& d) {
    coarse::Path p = coarse::geodesic(wm, wb, g);
    REQUIRE(p.total == d);
    Rat sum(0);
    Element acc = coarse::identity();
    for (std::size_t i = 0; i < p.labels.size(); ++i) {
      sum += weight_of.at(p.labels[i]);
      acc = coarse::multiply(wm.group(), acc, gen_of.at(p.labels[i]));
      REQUIRE(acc == p.points[i + 1]);
    }
    REQUIRE(sum == d);
  });
}

TEST_CASE("ball monotonicity in the radius") {
  MetricSpec m = z23_metric();
  Ball small = coarse::enumerate_ball(m, Rat(5));
  Ball big = coarse::enumerate_ball(m, Rat(9));
  REQUIRE(small.size() <= big.size());
  small.for_each([&](const std::string& key, const Element&, const Rat& d) {
    REQUIRE(big.contains(key));
    REQUIRE(big.word_distance(key) == d);
  });
}

TEST_CASE("predecessor chains descend by one generator weight") {
  MetricSpec m = f2_metric(Derivation::word(), Rat(1, 2), Rat(3, 2));
  const GroupSpec& spec = m.group();
  Ball ball = coarse::enumerate_ball(m, Rat(4));
  std::map<std::string, std::pair<Element, Rat>> by_label;
  for (const Generator& g : m.gens().all()) by_label[g.label] = {g.g, g.weight};
  ball.for_each([&](const std::string& key, const Element& g, const Rat& d) {
    if (key == "e") return;
    coarse::Path p = coarse::geodesic(m, ball, g);
    Rat prev(0);
    Element acc = coarse::identity();
    for (const std::string& label : p.labels) {
      acc = coarse::multiply(spec, acc, by_label.at(label).first);
      Rat now = ball.word_distance(acc);
      REQUIRE(now - prev == by_label.at(label).second);
      prev = now;
    }
    REQUIRE(prev == d);
  });
}

TEST_CASE("out-of-ball lookups are errors, not estimates") {
  MetricSpec m = z2_metric();
  GroupSpec z2 = m.group();
  Ball ball = coarse::enumerate_ball(m, Rat(2));
  try {
    ball.word_distance(syl(z2, 0, vec({5, 5})));
    FAIL("expected OutOfBall");
  } catch (const coarse::OutOfBall& e) {
    REQUIRE(e.beyond_radius);
  }
  REQUIRE(!ball.try_word_distance(syl(z2, 0, vec({5, 5}))).has_value());
}

TEST_CASE("exact point oracle agrees with enumeration") {
  struct Case {
    MetricSpec m;
    Rat radius;
  };
  std::vector<Case> cases;
  cases.push_back({f2_metric(), Rat(5)});
  cases.push_back({f2_metric(Derivation::word(), Rat(1, 2), Rat(3, 2)), Rat(4)});
  cases.push_back({z2_metric(true), Rat(5)});
  cases.push_back({z23_metric(), Rat(10)});
  GroupSpec t = coarse::parse_group("Z^2 * Z^1");
  cases.push_back({coarse::build_metric(t, {{"x", syl(t, 0, AtomElem{{1, 0}, {}}), Rat(1)},
                                            {"y", syl(t, 0, AtomElem{{0, 1}, {}}), Rat(1)},
                                            {"t", syl(t, 1, vec({1})), Rat(1)}}),
                   Rat(4)});
  for (const Case& c : cases) {
    Ball ball = coarse::enumerate_ball(c.m, c.radius);
    std::size_t checked = 0;
    ball.for_each([&](const std::string&, const Element& g, const Rat& d) {
      auto exact = coarse::point_distance(c.m, g);
      REQUIRE(exact.has_value());
      REQUIRE(*exact == d);
      ++checked;
    });
    REQUIRE(checked == ball.size());
  }
  // far outside any feasible ball
  GroupSpec z = coarse::parse_group("Z^1");
  MetricSpec z23 = z23_metric();
  auto far = coarse::point_distance(z23, syl(z, 0, vec({10007})));
  REQUIRE(far.has_value());
  REQUIRE(*far == Rat(3336));  // 3*3335 + 2, and 3335 steps cannot reach an odd remainder
  // no oracle for the Heisenberg group
  GroupSpec h3 = coarse::parse_group("H3");
  MetricSpec mh = coarse::build_metric(
      h3, {{"x", syl(h3, 0, vec({1, 0, 0})), Rat(1)}, {"y", syl(h3, 0, vec({0, 1, 0})), Rat(1)}});
  REQUIRE(!coarse::point_distance(mh, syl(h3, 0, vec({0, 0, 1}))).has_value());
}

TEST_CASE("oracle window matches the enumerated window on free groups") {
  MetricSpec m = f2_metric();
  Window enumerated = Window::enumerated(m, coarse::enumerate_ball(m, Rat(4)));
  Window oracle = Window::free_oracle(m, Rat(4));
  REQUIRE(enumerated.size() == oracle.size());
  enumerated.for_each([&](const std::string& key, const Element& g, const Rat& d) {
    auto od = oracle.word_dist(g);
    REQUIRE(od.has_value());
    REQUIRE(*od == d);
    REQUIRE(key == coarse::serialize(g));
  });
  // identical geodesic lengths and endpoints
  GroupSpec f2 = m.group();
  Element g = syl(f2, 0, word({1, 2, -1}));
  coarse::Path pe = enumerated.geodesic_to(g);
  coarse::Path po = oracle.geodesic_to(g);
  REQUIRE(pe.total == po.total);
  REQUIRE(pe.points.back() == po.points.back());
  REQUIRE(po.labels == std::vector<std::string>{"a", "b", "a^-1"});
  // non-letter generating sets are rejected
  GroupSpec f = coarse::parse_group("F(2)");
  MetricSpec tok = coarse::build_metric(f, {{"a", syl(f, 0, word({1})), Rat(1)},
                                            {"b", syl(f, 0, word({2})), Rat(1)},
                                            {"c", syl(f, 0, word({1, 2})), Rat(1)}});
  REQUIRE_THROWS_AS(Window::free_oracle(tok, Rat(4)), coarse::ConfigError);
}

TEST_CASE("near-geodesic tubes match the defect definition") {
  MetricSpec m = f2_metric();
  const GroupSpec& spec = m.group();
  Window win = Window::enumerated(m, coarse::enumerate_ball(m, Rat(7)));
  Element g = syl(spec, 0, word({1, 2, 1}));
  Rat dg = win.word_dist_checked(g);
  for (Rat slack : {Rat(0), Rat(2), Rat(4)}) {
    std::vector<Element> tube = win.tube(g, slack);
    std::set<std::string> tube_keys;
    for (const Element& z : tube) tube_keys.insert(coarse::serialize(z));
    // brute force over the whole ball
    std::size_t expected = 0;
    win.for_each([&](const std::string& key, const Element& z, const Rat& dz) {
      auto rest = win.word_dist(coarse::multiply(spec, coarse::invert(spec, z), g));
      bool in_tube = rest && dz + *rest - dg <= slack;
      if (in_tube) ++expected;
      REQUIRE(tube_keys.count(key) == (in_tube ? 1u : 0u));
    });
    REQUIRE(tube_keys.size() == expected);
    // oracle window produces the same tube
    Window oracle = Window::free_oracle(m, Rat(7));
    std::vector<Element> otube = oracle.tube(g, slack);
    std::set<std::string> okeys;
    for (const Element& z : otube) okeys.insert(coarse::serialize(z));
    REQUIRE(okeys == tube_keys);
  }
  REQUIRE_THROWS_AS(win.tube(g, Rat(6)), coarse::WindowTooSmall);
}

TEST_CASE("coarse geodesic: word metrics verify with zero slack") {
  for (MetricSpec m : {f2_metric(), z2_metric(true)}) {
    Window win = Window::enumerated(m, coarse::enumerate_ball(m, Rat(5)));
    auto report = coarse::sample_coarse_geodesic(win, Rat(0), 20260818, 40);
    REQUIRE(report.pairs.size() == 40);
    REQUIRE(report.verified == 40);
    REQUIRE(report.failed == 0);
    REQUIRE(report.inconclusive == 0);
    REQUIRE(report.fraction_verified() == Rat(1));
  }
}

TEST_CASE("coarse geodesic: an additive bump is absorbed by C = 1") {
  MetricSpec m = f2_metric(Derivation::additive(Rat(1)));
  Window win = Window::enumerated(m, coarse::enumerate_ball(m, Rat(6)));
  auto report = coarse::sample_coarse_geodesic(win, Rat(1), 20260818, 30);
  REQUIRE(report.pairs.size() == 30);
  REQUIRE(report.verified == 30);
  // times are pinned at d(x, q_i): the chain along the word geodesic works
  GroupSpec f2 = m.group();
  auto single = coarse::check_coarse_geodesic(win, {syl(f2, 0, word({1, 2, 1, -2, 1}))}, Rat(1));
  REQUIRE(single.verified == 1);
}

TEST_CASE("coarse geodesic: concave growth escapes any small slack") {
  // on Z the defect sqrt(k) + sqrt(16-k) - 4 prunes all interior chain points
  GroupSpec z = coarse::parse_group("Z^1");
  MetricSpec m = coarse::build_metric(z, {{"s", syl(z, 0, vec({1})), Rat(1)}},
                                      Derivation::concave());
  Window win = Window::enumerated(m, coarse::enumerate_ball(m, Rat(21)));
  Element g16 = syl(z, 0, vec({16}));
  auto report = coarse::check_coarse_geodesic(win, {g16}, Rat(1));
  REQUIRE(report.failed == 1);
  REQUIRE(report.verified == 0);
  REQUIRE(report.inconclusive == 0);
  // the same scale passes once C covers the whole defect profile: max defect
  // over midpoints is 2*sqrt(8) - 4 < 1.66, and gaps stay under C + s_max
  auto loose = coarse::check_coarse_geodesic(win, {g16}, Rat(9, 2));
  REQUIRE(loose.verified == 1);

  // free-group flavor at word distance 81 through the letter oracle
  MetricSpec fm = f2_metric(Derivation::concave());
  Window fwin = Window::free_oracle(fm, Rat(85));
  std::vector<int> w;
  for (int i = 0; i < 81; ++i) w.push_back(i % 2 ? 2 : 1);
  Element g81 = syl(fm.group(), 0, word(w));
  for (Rat c : {Rat(1), Rat(2)}) {
    auto r = coarse::check_coarse_geodesic(fwin, {g81}, c);
    REQUIRE(r.failed == 1);
  }
}

TEST_CASE("coarse geodesic rejects windows below the 2C floor") {
  MetricSpec m = f2_metric();
  Window win = Window::enumerated(m, coarse::enumerate_ball(m, Rat(3)));
  REQUIRE_THROWS_AS(coarse::check_coarse_geodesic(win, {}, Rat(2)), coarse::ConfigError);
}

TEST_CASE("ball cache round-trips and rejects stale headers") {
  MetricSpec m = z23_metric();
  Ball ball = coarse::enumerate_ball(m, Rat(7));
  std::ostringstream out;
  coarse::save_ball(ball, m, out);
  std::string text = out.str();
  REQUIRE(text.rfind("group=Z", 0) == 0);

  std::istringstream in(text);
  Ball loaded = coarse::load_ball(m, in);
  REQUIRE(loaded.size() == ball.size());
  ball.for_each([&](const std::string& key, const Element&, const Rat& d) {
    REQUIRE(loaded.word_distance(key) == d);
    REQUIRE(loaded.record(key).pred == ball.record(key).pred);
  });

  // wrong metric: same group, different weights
  MetricSpec other(GeneratingSet(m.group(), {{"p2", syl(m.group(), 0, vec({2})), Rat(2)},
                                             {"p3", syl(m.group(), 0, vec({3})), Rat(1)}}),
                   Derivation::word());
  std::istringstream in2(text);
  REQUIRE_THROWS_AS(coarse::load_ball(other, in2), coarse::CacheMismatch);

  // truncated header
  std::istringstream in3("group=Z\n");
  REQUIRE_THROWS_AS(coarse::load_ball(m, in3), coarse::CacheMismatch);

  // same name scheme is stable
  REQUIRE(coarse::cache_file_name(m, Rat(7)) == coarse::cache_file_name(m, Rat(7)));
  REQUIRE(coarse::cache_file_name(m, Rat(7)) != coarse::cache_file_name(m, Rat(8)));
}

TEST_CASE("cache audit passes sound balls and flags tampering") {
  MetricSpec m = f2_metric();
  Ball ball = coarse::enumerate_ball(m, Rat(4));
  auto clean = coarse::audit_ball(ball, m, 20260818, Rat(1));  // audit everything
  REQUIRE(clean.mismatches == 0);
  REQUIRE(clean.checked == ball.size());

  // corrupt one record's distance via a rebuilt ball
  Ball bad(ball.group_fingerprint(), ball.metric_fingerprint(), ball.radius(), ball.scale());
  ball.for_each([&](const std::string& key, const Element& g, const Rat&) {
    const Ball::Record& rec = ball.record(key);
    long long d = rec.sdist;
    if (key == coarse::serialize(syl(m.group(), 0, word({1, 2})))) d += 1;
    bad.insert(key, g, d, rec.pred);
  });
  auto flagged = coarse::audit_ball(bad, m, 20260818, Rat(1));
  REQUIRE(flagged.mismatches > 0);
}

TEST_CASE("window distances refuse to answer outside the certified region") {
  MetricSpec m = f2_metric();
  Window oracle = Window::free_oracle(m, Rat(3));
  GroupSpec f2 = m.group();
  REQUIRE(!oracle.word_dist(syl(f2, 0, word({1, 2, 1, 2}))).has_value());
  REQUIRE_THROWS_AS(oracle.word_dist_checked(syl(f2, 0, word({1, 2, 1, 2}))),
                    coarse::OutOfBall);
  REQUIRE(oracle.word_dist(syl(f2, 0, word({1, 2, 1}))) == Rat(3));
  // derived reads go through the same certification
  MetricSpec md = f2_metric(Derivation::concave());
  Window wd = Window::free_oracle(md, Rat(4));
  REQUIRE(wd.dist_checked(syl(f2, 0, word({1, 2, 1, 2}))) == Surd(Rat(4)) + Surd::sqrt(Rat(4)));
}
