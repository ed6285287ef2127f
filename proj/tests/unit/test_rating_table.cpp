#include <set>
#include <sstream>
#include <string>

#include "doctest.h"
#include "generators.hpp"
#include "prefcf/error.hpp"
#include "prefcf/rating_table.hpp"

using namespace prefcf;

namespace {

RatingTable parse(const std::string& text, DataFormat f = DataFormat::canonical_tsv,
                  std::optional<int> scale = std::nullopt) {
  std::istringstream in(text);
  return parse_dataset(in, f, scale);
}

}  // namespace

TEST_SUITE("rating_table") {
  TEST_CASE("canonical read-back") {
    const auto t = parse("u1\ti1\t4\nu1\ti2\t2\nu2\ti1\t5\n", DataFormat::canonical_tsv, 5);
    CHECK(t.num_users() == 2);
    CHECK(t.num_items() == 2);
    CHECK(t.size() == 3);
    CHECK(t.scale() == 5);
    CHECK(t.rating(1, 0) == 5);
    CHECK_FALSE(t.rating(1, 1).has_value());
    CHECK(t.item_label(1) == "i2");
    CHECK(t.find_user("u2") == UserId(1));
  }

  TEST_CASE("empty input") {
    const auto t = parse("");
    CHECK(t.num_users() == 0);
    CHECK(t.num_items() == 0);
    CHECK(t.empty());
  }

  TEST_CASE("scale header and inference") {
    CHECK(parse("# scale=7\na\tb\t3\n").scale() == 7);
    CHECK(parse("a\tb\t3\na\tc\t4\n").scale() == 4);
  }

  TEST_CASE("movielens rows drop the timestamp") {
    const std::string sample =
        "196\t242\t3\t881250949\n186\t302\t3\t891717742\n22\t377\t1\t878887116\n"
        "244\t51\t2\t880606923\n166\t346\t1\t886397596\n298\t474\t4\t884182806\n"
        "115\t265\t2\t881171488\n253\t465\t5\t891628467\n305\t451\t3\t886324817\n"
        "6\t86\t3\t883603013\n";
    const auto t = parse(sample, DataFormat::movielens_100k);
    REQUIRE(t.size() == 10);
    CHECK(t.user_label(t.triple(0).user) == "196");
    CHECK(t.item_label(t.triple(0).item) == "242");
    CHECK(t.triple(0).rating == 3);
    CHECK(t.item_label(t.triple(7).item) == "465");
    CHECK(t.triple(7).rating == 5);
    CHECK(t.scale() == 5);
  }

  TEST_CASE("errors carry the line number") {
    try {
      parse("a\tb\t3\nbroken line\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse("a\tb\tx\n"), ParseError);
    CHECK_THROWS_AS(parse("a\tb\t6\n", DataFormat::canonical_tsv, 5), ValidationError);
    CHECK_THROWS_AS(parse("a\tb\t0\n"), ValidationError);
    CHECK_THROWS_AS(parse("a\tb\t3\na\tb\t4\n"), ValidationError);
  }

  TEST_CASE("build validates ids and ratings") {
    CHECK_THROWS_AS(RatingTable::build(1, 1, 5, {{0, 1, 3}}), ValidationError);
    CHECK_THROWS_AS(RatingTable::build(1, 1, 5, {{0, 0, 9}}), ValidationError);
    CHECK_THROWS_AS(RatingTable::build(1, 2, 5, {{0, 0, 3}, {0, 0, 4}}), ValidationError);
  }

  TEST_CASE("indexes cover every triple exactly once") {
    testgen::Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const auto t = testgen::random_table(rng, 15, 12, 5, 1, 9);
      std::size_t via_users = 0, via_items = 0;
      for (UserId u = 0; u < t.num_users(); ++u) {
        via_users += t.user_count(u);
        const auto prof = t.profile(u);
        for (std::size_t k = 1; k < prof.size(); ++k) CHECK(prof[k - 1].item < prof[k].item);
        for (auto idx : t.user_triples(u)) CHECK(t.triple(idx).user == u);
      }
      for (ItemId i = 0; i < t.num_items(); ++i) via_items += t.item_triples(i).size();
      CHECK(via_users == t.size());
      CHECK(via_items == t.size());
    }
  }

  TEST_CASE("canonical tsv round-trips") {
    testgen::Rng rng(5);
    const auto t = parse("x\tp\t2\ny\tq\t5\nx\tq\t1\n", DataFormat::canonical_tsv, 5);
    std::ostringstream out;
    write_canonical_tsv(t, out);
    CHECK(parse(out.str()) == t);
  }

  TEST_CASE("user mean") {
    const auto t = RatingTable::build(
        4, 4, 5, {{0, 0, 2}, {0, 1, 4}, {1, 0, 5}, {2, 0, 1}, {2, 1, 1}, {2, 2, 1}, {2, 3, 4}});
    CHECK(user_mean(t, 0) == 3.0);
    CHECK(user_mean(t, 1) == 5.0);
    CHECK(user_mean(t, 2) == 1.75);
    CHECK_THROWS_AS(user_mean(t, 3), ValidationError);
  }

  TEST_CASE("split protocol") {
    testgen::Rng rng(2);
    const auto t = testgen::random_table(rng, 50, 20, 5, 3, 15);
    SplitProtocol p{20, 5, GivenSelection::first_in_file, 0};
    const auto s = split(t, p);
    CHECK(s.train.num_users() == 20);
    CHECK(s.train.size() + s.test_observed.size() + s.test_heldout.size() <= t.size());
    for (auto u : s.test_users) {
      CHECK(u >= 20);
      CHECK(s.test_observed.user_count(u) == 5);
      CHECK(s.test_heldout.user_count(u) == t.user_count(u) - 5);
      const auto order = t.ratings_in_order(u);
      const auto given = s.test_observed.ratings_in_order(u);
      for (std::size_t k = 0; k < 5; ++k) CHECK(given[k] == order[k]);
      std::set<ItemId> seen;
      for (auto ir : s.test_observed.profile(u)) seen.insert(ir.item);
      for (auto ir : s.test_heldout.profile(u)) CHECK(seen.count(ir.item) == 0);
    }
    for (UserId u = 20; u < t.num_users(); ++u)
      if (t.user_count(u) <= 5) CHECK(s.test_observed.user_count(u) == 0);

    CHECK_THROWS_AS(split(t, {50, 5}), ProtocolError);
    CHECK_THROWS_AS(split(t, {10, 0}), ProtocolError);
  }

  TEST_CASE("seeded random selection is reproducible") {
    testgen::Rng rng(8);
    const auto t = testgen::random_table(rng, 30, 20, 5, 8, 15);
    SplitProtocol p{10, 5, GivenSelection::seeded_random, 42};
    const auto a = split(t, p), b = split(t, p);
    CHECK(a.test_observed == b.test_observed);
    CHECK(a.test_heldout == b.test_heldout);
    CHECK(a.test_users == b.test_users);
  }
}
