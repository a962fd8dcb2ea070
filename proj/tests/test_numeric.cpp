#include <catch2/catch_amalgamated.hpp>

#include "coarselab/rational.hpp"
#include "coarselab/rng.hpp"
#include "coarselab/surd.hpp"

using coarse::Rat;
using coarse::Substream;
using coarse::Surd;

TEST_CASE("rational arithmetic is exact and normalized") {
  Rat a(1, 3), b(1, 6);
  CHECK((a + b).str() == "1/2");
  CHECK((a - b).str() == "1/6");
  CHECK((a * b).str() == "1/18");
  CHECK((a / b).str() == "2/1");
  CHECK(Rat(4, -6).str() == "-2/3");
  CHECK(Rat(0, 5) == Rat(0));
  CHECK(Rat(7) == Rat(14, 2));
}

TEST_CASE("rational comparison, floor, ceil") {
  CHECK(Rat(2, 3) < Rat(3, 4));
  CHECK(Rat(-5, 2) < Rat(-2));
  CHECK(Rat(7, 2).floor() == 3);
  CHECK(Rat(-7, 2).floor() == -4);
  CHECK(Rat(7, 2).ceil() == 4);
  CHECK(Rat(6, 3).floor() == 2);
  CHECK(coarse::min(Rat(1, 2), Rat(1, 3)) == Rat(1, 3));
  CHECK(coarse::max(Rat(1, 2), Rat(1, 3)) == Rat(1, 2));
}

TEST_CASE("rational parse round-trips") {
  CHECK(Rat::parse("-7/21") == Rat(-1, 3));
  CHECK(Rat::parse("5") == Rat(5));
  CHECK(Rat::parse("0/9") == Rat(0));
  CHECK_THROWS(Rat::parse("1/0"));
  CHECK_THROWS(Rat::parse("x"));
  for (long long p : {-9LL, 0LL, 3LL, 17LL})
    for (long long q : {1LL, 2LL, 12LL}) CHECK(Rat::parse(Rat(p, q).str()) == Rat(p, q));
}

TEST_CASE("rational decimal rendering is deterministic") {
  CHECK(Rat(1, 3).decimal(4) == "0.3333");
  CHECK(Rat(-1, 8).decimal(3) == "-0.125");
  CHECK(Rat(1, 2).decimal(0) == "1");  // round half away from zero
  CHECK(Rat(2).decimal(2) == "2.00");
}

TEST_CASE("surd: square roots simplify through square factors") {
  CHECK(Surd::sqrt(Rat(8)).str() == "2/1*sqrt(2)");
  CHECK(Surd::sqrt(Rat(9)).str() == "3/1");
  CHECK(Surd::sqrt(Rat(0)).str() == "0/1");
  CHECK(Surd::sqrt(Rat(18)) == Rat(3) * Surd::sqrt(Rat(2)));
}

TEST_CASE("surd: exact signs and ordering") {
  Surd golden = Surd(Rat(1, 2)) + Rat(1, 2) * Surd::sqrt(Rat(5));
  CHECK(golden.sign() == 1);
  CHECK((golden - Surd(Rat(2))).sign() < 0);
  CHECK((golden - Surd(Rat(8, 5))).sign() > 0);
  // sqrt(2)+sqrt(3) vs sqrt(10): squares 5+2sqrt(6) vs 10, and 2sqrt(6) < 5
  Surd lhs = Surd::sqrt(Rat(2)) + Surd::sqrt(Rat(3));
  CHECK(lhs < Surd::sqrt(Rat(10)));
  CHECK(Surd::sqrt(Rat(2)) + Surd::sqrt(Rat(8)) == Surd::sqrt(Rat(18)));
  CHECK((Surd::sqrt(Rat(2)) - Surd::sqrt(Rat(2))).sign() == 0);
}

TEST_CASE("surd: decimal digits are correct") {
  CHECK(Surd::sqrt(Rat(2)).decimal(6) == "1.414214");
  CHECK((Surd(Rat(16)) + Surd::sqrt(Rat(16))).decimal(1) == "20.0");
  CHECK((-Surd::sqrt(Rat(3))).decimal(4) == "-1.7321");
}

TEST_CASE("substreams: same name same stream, different names decouple") {
  Substream a1(99, "pairs"), a2(99, "pairs"), b(99, "triples");
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 200; ++i) {
    auto x = a1.below(1000000), y = a2.below(1000000), z = b.below(1000000);
    all_equal = all_equal && x == y;
    any_diff = any_diff || x != z;
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("substreams: below is in range and range() hits endpoints") {
  Substream s(7, "range");
  for (int i = 0; i < 500; ++i) {
    auto v = s.below(7);
    CHECK(v < 7u);
  }
  bool lo = false, hi = false;
  for (int i = 0; i < 500; ++i) {
    auto v = s.range(-2, 2);
    CHECK(v >= -2);
    CHECK(v <= 2);
    lo = lo || v == -2;
    hi = hi || v == 2;
  }
  CHECK(lo);
  CHECK(hi);
}

TEST_CASE("surd products expand through shared radicands") {
  Surd r2 = Surd::sqrt(Rat(2)), r3 = Surd::sqrt(Rat(3)), r6 = Surd::sqrt(Rat(6));
  CHECK(r2 * r3 == r6);
  CHECK(r2 * r2 == Surd(Rat(2)));
  CHECK((Surd(Rat(1)) + r2) * (Surd(Rat(1)) - r2) == Surd(Rat(-1)));
  CHECK((r2 + r3) * (r2 + r3) == Surd(Rat(5)) + Rat(2) * r6);
  CHECK((Surd::sqrt(Rat(8)) * Surd::sqrt(Rat(18))).as_rational() == Rat(12));
  CHECK((Surd::sqrt(Rat(1, 2)) * Surd::sqrt(Rat(2))).as_rational() == Rat(1));
}
