#include <doctest.h>

#include "lfpw/error.hpp"
#include "support.hpp"

using namespace lfpw;

namespace {

std::set<Tuple> rel(const FiniteStructure& m, const std::string& name) { return testing::as_set(m.relation(name)); }

std::uint64_t qr_power(std::uint64_t a, std::uint64_t e, std::uint64_t q) {
  std::uint64_t r = 1;
  a %= q;
  while (e > 0) {
    if (e & 1U) r = r * a % q;
    a = a * a % q;
    e >>= 1U;
  }
  return r;
}

}  // namespace

TEST_CASE("loading structures from JSON") {
  auto m = parse_structure_json(R"({"size":3,"relations":{"S":[[0,1],[1,2]]}})");
  CHECK(m.size() == 3);
  CHECK(rel(m, "S") == std::set<Tuple>{{0, 1}, {1, 2}});
  CHECK(m.name() == "structure");

  auto one = parse_structure_json(R"({"size":1,"relations":{}})");
  CHECK(one.size() == 1);
  CHECK(one.relations().empty());

  auto named = parse_structure_json(R"({"name":"k","size":2,"relations":{"P":[]},"arities":{"P":1}})");
  CHECK(named.name() == "k");
  CHECK(named.relation("P").arity() == 1);
  CHECK(named.relation("P").empty());

  CHECK_THROWS_AS(parse_structure_json(R"({"size":2,"relations":{"S":[[0,5]]}})"), FormatError);
  CHECK_THROWS_AS(parse_structure_json(R"({"size":2,"relations":{"S":[[0,1],[1]]}})"), FormatError);
  CHECK_THROWS_AS(parse_structure_json(R"({"size":0,"relations":{}})"), FormatError);
  CHECK_THROWS_AS(parse_structure_json(R"({"relations":{}})"), FormatError);
  CHECK_THROWS_AS(parse_structure_json(R"({"size":2,"relations":{"S":[[0,-1]]}})"), FormatError);
  CHECK_THROWS_AS(parse_structure_json("{not json"), FormatError);
  CHECK_THROWS_AS(load_structure("/nonexistent/file.json"), FormatError);
}

TEST_CASE("JSON round trip") {
  for (const auto& m : testing::small_corpus(6)) {
    auto back = parse_structure_json(structure_to_json(m));
    CHECK(back.name() == m.name());
    CHECK(back.size() == m.size());
    CHECK(back.relations() == m.relations());
  }
}

TEST_CASE("tuple codes are row-major and order-preserving") {
  for (std::size_t n = 1; n <= 5; ++n) {
    for (std::size_t k = 0; k <= 3; ++k) {
      const auto space = tuple_space(n, k);
      Tuple prev;
      for (std::uint64_t c = 0; c < space; ++c) {
        auto t = decode_tuple(c, k, n);
        CHECK(encode_tuple(t, n) == c);
        if (c > 0) CHECK(prev < t);
        prev = t;
      }
    }
  }
  CHECK_THROWS_AS(tuple_space(1000, 10), EvalError);
}

TEST_CASE("generators") {
  auto lo = generate_family(FamilySpec::parse("linord:2..4"));
  REQUIRE(lo.size() == 3);
  CHECK(rel(lo[1], "<") == std::set<Tuple>{{0, 1}, {0, 2}, {1, 2}});
  CHECK(rel(successor_structure(4), "S") == std::set<Tuple>{{0, 1}, {1, 2}, {2, 3}});
  CHECK(pure_set(3).relations().empty());
  CHECK(lo[0].name() == "linord:2");

  // paley(5) from the quadratic residues {1,4}: the 5-cycle
  std::set<Tuple> cycle;
  for (Element i = 0; i < 5; ++i) {
    cycle.insert({i, (i + 1) % 5});
    cycle.insert({i, (i + 4) % 5});
  }
  CHECK(rel(paley_graph(5), "E") == cycle);
  CHECK_THROWS_AS(paley_graph(7), FormatError);
  CHECK_THROWS_AS(paley_graph(9), FormatError);
}

TEST_CASE("linear orders are strict total orders") {
  for (std::size_t m = 1; m <= 12; ++m) {
    auto s = linear_order(m);
    const auto& lt = s.relation("<");
    for (Element a = 0; a < m; ++a) {
      CHECK_FALSE(lt.contains({a, a}));
      for (Element b = 0; b < m; ++b) {
        if (a != b) CHECK(lt.contains({a, b}) != lt.contains({b, a}));
        for (Element c = 0; c < m; ++c) {
          if (lt.contains({a, b}) && lt.contains({b, c})) CHECK(lt.contains({a, c}));
        }
      }
    }
  }
}

TEST_CASE("paley graphs are symmetric and match residues") {
  for (std::size_t q : {5, 13, 17, 29}) {
    CHECK(qr_power(q - 1, (q - 1) / 2, q) == 1);  // -1 is a residue
    auto g = paley_graph(q);
    const auto& e = g.relation("E");
    std::set<std::uint64_t> residues;
    for (std::uint64_t x = 1; x < q; ++x) residues.insert(x * x % q);
    for (Element a = 0; a < q; ++a) {
      CHECK_FALSE(e.contains({a, a}));
      for (Element b = 0; b < q; ++b) {
        CHECK(e.contains({a, b}) == e.contains({b, a}));
        if (a != b) CHECK(e.contains({a, b}) == (residues.count((a + q - b) % q) != 0));
      }
    }
    CHECK(e.size() == q * (q - 1) / 2);
  }
}

TEST_CASE("disjoint unions") {
  auto u = disjoint_union(successor_structure(2), linear_order(2));
  CHECK(u.size() == 4);
  CHECK(rel(u, "S") == std::set<Tuple>{{0, 1}});
  CHECK(rel(u, "<") == std::set<Tuple>{{2, 3}});
  CHECK(rel(u, "L") == std::set<Tuple>{{0}, {1}});
  CHECK(rel(u, "R") == std::set<Tuple>{{2}, {3}});

  auto m = successor_structure(3);
  auto v = disjoint_union(m, pure_set(1));
  CHECK(v.size() == 4);
  CHECK(rel(v, "S") == rel(m, "S"));

  auto pp = disjoint_union(paley_graph(5), paley_graph(5));
  CHECK(pp.size() == 10);
  CHECK(pp.relation("E").size() / 2 + pp.relation("E_2").size() / 2 == 10);
  for (const auto& t : pp.relation("E_2").tuples()) CHECK((t[0] >= 5 && t[1] >= 5));

  // markers collide with existing L/R
  auto w = disjoint_union(u, pure_set(1));
  CHECK(w.find("L_2") != nullptr);
  CHECK(rel(w, "L_2") == std::set<Tuple>{{0}, {1}, {2}, {3}});
}

TEST_CASE("family specs") {
  auto s = FamilySpec::parse("rg:8..16:seed=7");
  CHECK(s.kind == FamilyKind::RandomGraph);
  CHECK(s.sizes.size() == 9);
  CHECK(s.seed == 7);
  CHECK(FamilySpec::parse(s.to_string()).to_string() == s.to_string());

  auto u = FamilySpec::parse("union(succ:2..10, linord:2..10)");
  CHECK(u.kind == FamilyKind::Union);
  auto members = generate_family(u);
  REQUIRE(members.size() == 9);
  CHECK(members[0].size() == 4);
  CHECK(members[8].size() == 20);

  CHECK(FamilySpec::parse("paley:5,13,17").sizes == std::vector<std::size_t>{5, 13, 17});
  CHECK_THROWS_AS(FamilySpec::parse("paley:7"), FormatError);
  CHECK_THROWS_AS(FamilySpec::parse("succ:5..2"), FormatError);
  CHECK_THROWS_AS(FamilySpec::parse("foo:1..3"), FormatError);
  CHECK_THROWS_AS(FamilySpec::parse("succ:"), FormatError);
  CHECK_THROWS_AS(FamilySpec::parse("union(succ:2)"), FormatError);
}

TEST_CASE("random graphs are deterministic and undirected") {
  for (std::uint64_t seed : {1, 7, 42}) {
    auto a = generate_family(FamilySpec::parse("rg:3..9:seed=" + std::to_string(seed)));
    auto b = generate_family(FamilySpec::parse("rg:3..9:seed=" + std::to_string(seed)));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].relations() == b[i].relations());
      const auto& e = a[i].relation("E");
      for (const auto& t : e.tuples()) {
        CHECK(t[0] != t[1]);
        CHECK(e.contains({t[1], t[0]}));
      }
    }
  }
  CHECK(random_graph(12, 1).relations() != random_graph(12, 2).relations());
}

TEST_CASE("resolve_structure accepts specs and JSON") {
  CHECK(resolve_structure("succ:4").size() == 4);
  CHECK(resolve_structure(R"({"size":2,"relations":{}})").size() == 2);
  CHECK_THROWS(resolve_structure("succ:2..4"));
}
