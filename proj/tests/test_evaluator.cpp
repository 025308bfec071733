#include <doctest.h>

#include "lfpw/error.hpp"
#include "support.hpp"

using namespace lfpw;
using testing::Oracle;
using testing::parse;

namespace {

Valuation env(std::map<std::string, Element> e) { return Valuation{std::move(e), {}}; }

const LfpBody kHeight = testing::body("A y'. ((y' < x & !(x < y' | x = y')) -> T(y'))", "T", {"x"});

}  // namespace

TEST_CASE("evaluation examples") {
  auto lo3 = linear_order(3);
  CHECK(eval(parse("x < y"), lo3, env({{"x", 1}, {"y", 2}})));
  CHECK_FALSE(eval(parse("x < y"), lo3, env({{"x", 2}, {"y", 1}})));
  CHECK(eval(parse("E x. A y. (x = y | x < y)"), lo3));
  auto reach = parse("[lfp T(x). (A y. !S(y,x)) | E y. (S(y,x) & T(y))](u)");
  CHECK(eval(reach, successor_structure(4), env({{"u", 3}})));
  CHECK_THROWS_AS(eval(parse("x < y"), lo3, env({{"x", 1}})), EvalError);
  CHECK_THROWS_AS(eval(parse("Q(x)"), lo3, env({{"x", 1}})), EvalError);
}

TEST_CASE("stage examples") {
  auto t = lfp_stages(testing::reach_body(), successor_structure(4));
  CHECK(t.closure == 4);
  for (Element e = 0; e < 4; ++e) CHECK(t.stage_of({e}) == e + 1);
  CHECK(testing::as_set(t.stage_set(2)) == std::set<Tuple>{{0}, {1}});

  auto all = testing::body("x = x", "T", {"x"});
  for (const auto& m : testing::small_corpus(4)) {
    auto s = lfp_stages(all, m);
    CHECK(s.closure == 1);
    CHECK(s.fixpoint.size() == m.size());
  }
  auto none = lfp_stages(testing::body("false", "T", {"x"}), linear_order(3));
  CHECK(none.closure == 0);
  CHECK(none.fixpoint.empty());

  for (std::size_t m = 1; m <= 8; ++m) {
    CHECK(closure_ordinal(testing::reach_body(), successor_structure(m)) == m);
    CHECK(closure_ordinal(kHeight, linear_order(m)) == m);
  }
}

TEST_CASE("stage comparison examples") {
  auto r = stage_comparison(testing::reach_body(), successor_structure(3));
  CHECK(testing::as_set(r) ==
        std::set<Tuple>{{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}});
  auto all = stage_comparison(testing::body("x = x", "T", {"x"}), successor_structure(3));
  CHECK(all.size() == 9);
  auto h = lfp_stages(kHeight, linear_order(3));
  for (std::size_t k = 1; k <= 3; ++k) CHECK(h.level(k) == std::vector<Tuple>{{static_cast<Element>(k - 1)}});
}

TEST_CASE("engine agrees with the direct evaluator on random formulas") {
  testing::FormulaGen gen(3, {"x", "y", "z"});
  for (int i = 0; i < 400; ++i) {
    auto f = gen.make(4);
    const std::size_t n = 1 + i % 5;
    auto m = testing::random_eu_structure(n, 1000 + i);
    Oracle o(m);
    Evaluator ev(m);
    auto expect = o.defined(f, {"x", "y", "z"});
    CHECK_MESSAGE(testing::as_set(ev.satisfying(f, {"x", "y", "z"})) == expect, render(f));
  }
}

TEST_CASE("engine agrees with the direct evaluator on random lfp formulas") {
  testing::FormulaGen gen(8, {"x", "y", "z"});
  int used = 0;
  for (int i = 0; i < 300; ++i) {
    auto b = gen.make(3, "T", 1);
    auto f = Formula::conj(Formula::lfp("T", {"x"}, b, {"z"}), gen.make(1));
    const std::size_t n = 1 + i % 5;
    auto m = testing::random_eu_structure(n, 77 + i);
    Oracle o(m);
    Evaluator ev(m);
    CHECK_MESSAGE(testing::as_set(ev.satisfying(f, {"x", "y", "z"})) == o.defined(f, {"x", "y", "z"}), render(f));
    ++used;
  }
  CHECK(used == 300);
}

TEST_CASE("corpus bodies: stages match the oracle, naive equals semi-naive") {
  for (const auto& m : testing::small_corpus(6)) {
    Oracle o(m);
    for (const auto& cb : testing::corpus_bodies()) {
      if (!testing::has_relation(m, cb.relation)) continue;
      const auto& b = cb.body;
      auto semi = lfp_stages(b, m, {}, Iteration::SemiNaive);
      auto naive = lfp_stages(b, m, {}, Iteration::Naive);
      CHECK(semi == naive);
      auto expect = o.stages(b);
      REQUIRE(semi.closure + 1 == expect.size());
      for (std::size_t k = 0; k < expect.size(); ++k) CHECK(testing::as_set(semi.stage_set(k)) == expect[k]);
      CHECK(semi.closure <= tuple_space(m.size(), b.vars.size()));
    }
  }
}

TEST_CASE("stage soundness and comparison classes") {
  for (const auto& m : testing::small_corpus(6)) {
    for (const auto& cb : testing::corpus_bodies()) {
      if (!testing::has_relation(m, cb.relation)) continue;
      Evaluator ev(m);
      auto t = ev.stages(cb.body);
      for (std::size_t k = 0; k <= t.closure; ++k) {
        CHECK(ev.gamma(cb.body, t.stage_set(k)) == t.stage_set(std::min(k + 1, t.closure)));
        if (k >= 1) CHECK_FALSE(t.level(k).empty());
      }
      // comparison: reflexive, transitive, total; classes = closure
      auto cmp = stage_comparison(t);
      const auto tuples = t.fixpoint.tuples();
      auto related = [&](const Tuple& a, const Tuple& b) {
        Tuple ab = a;
        ab.insert(ab.end(), b.begin(), b.end());
        return cmp.contains(ab);
      };
      std::size_t classes = 0;
      for (std::size_t i = 0; i < tuples.size(); ++i) {
        CHECK(related(tuples[i], tuples[i]));
        bool first = true;
        for (std::size_t j = 0; j < tuples.size(); ++j) {
          CHECK((related(tuples[i], tuples[j]) || related(tuples[j], tuples[i])));
          if (j < i && related(tuples[i], tuples[j]) && related(tuples[j], tuples[i])) first = false;
        }
        if (first) ++classes;
      }
      CHECK(classes == t.closure);
      if (tuples.size() <= 12) {
        for (const auto& a : tuples)
          for (const auto& b : tuples)
            for (const auto& c : tuples)
              if (related(a, b) && related(b, c)) CHECK(related(a, c));
      }
    }
  }
}

TEST_CASE("monotonicity of the operator") {
  std::mt19937_64 rng(5);
  int trials = 0;
  const auto bodies = testing::corpus_bodies();
  for (std::size_t i = 0; trials < 1000; ++i) {
    const auto& cb = bodies[i % bodies.size()];
    {
      const std::size_t n = 1 + rng() % 5;
      std::vector<FiniteStructure> pool{successor_structure(n), linear_order(n), random_graph(n, rng())};
      const auto& m = pool[rng() % pool.size()];
      if (!testing::has_relation(m, cb.relation)) continue;
      const std::size_t k = cb.body.vars.size();
      Relation x(k, n), y(k, n);
      for (std::uint64_t c = 0; c < tuple_space(n, k); ++c) {
        const auto r = rng() % 3;
        if (r == 0) x.insert_code(c);
        if (r <= 1) y.insert_code(c);
      }
      Evaluator ev(m);
      auto gx = testing::as_set(ev.gamma(cb.body, x));
      auto gy = testing::as_set(ev.gamma(cb.body, y));
      CHECK(std::includes(gy.begin(), gy.end(), gx.begin(), gx.end()));
      ++trials;
    }
  }
  CHECK(trials >= 1000);
}

TEST_CASE("unfolding") {
  auto reach = testing::reach_body();
  CHECK(render(unfold_lfp(reach, 0)) == "false");
  auto t2 = unfold_lfp(reach, 2);
  CHECK(is_first_order(t2));
  CHECK(free_relation_symbols(t2) == std::set<std::string>{"S"});
  auto succ4 = successor_structure(4);
  Evaluator ev(succ4);
  CHECK(testing::as_set(ev.satisfying(t2, {"x"})) == std::set<Tuple>{{0}, {1}});

  for (const auto& m : testing::small_corpus(5)) {
    for (const auto& cb : testing::corpus_bodies()) {
      if (!testing::has_relation(m, cb.relation)) continue;
      Evaluator e(m);
      auto t = e.stages(cb.body);
      for (std::size_t k = 0; k <= t.closure + 2; ++k) {
        CHECK(e.satisfying(unfold_lfp(cb.body, k), cb.body.vars) == t.stage_set(std::min(k, t.closure)));
      }
    }
  }
}

TEST_CASE("unfolding over families") {
  auto succ5 = generate_family(FamilySpec::parse("succ:1..5"));
  CHECK(unfold_over_family(testing::reach_body(), succ5, 10) == 5);
  CHECK(unfold_over_family(testing::body("x = x", "T", {"x"}), succ5, 10) == 1);
  CHECK(unfold_over_family(testing::body("x = x", "T", {"x"}), generate_family(FamilySpec::parse("paley:5,13")), 3) ==
        1);
  auto succ50 = generate_family(FamilySpec::parse("succ:1..50"));
  CHECK_FALSE(unfold_over_family(testing::reach_body(), succ50, 10).has_value());
}

TEST_CASE("nested fixed points") {
  // T collects elements all of whose S-successor chains reach a sink within the inner closure
  auto f = parse("[lfp T(x). [lfp U(y). (A z. !S(y,z)) | E z. (S(y,z) & U(z))](x) & (A w. (S(w,x) -> T(w)) | x = x)](u)");
  for (std::size_t n = 1; n <= 6; ++n) {
    auto m = successor_structure(n);
    Oracle o(m);
    Evaluator ev(m);
    CHECK(testing::as_set(ev.satisfying(f, {"u"})) == o.defined(f, {"u"}));
  }
}

TEST_CASE("free relation variables come from the valuation") {
  auto f = parse("E y. (S(x,y) & T(y))", {{"T", 1}});
  auto m = successor_structure(4);
  Relation t(1, 4);
  t.insert({2});
  Valuation v;
  v.relations["T"] = t;
  CHECK(testing::as_set(Evaluator(m).satisfying(f, {"x"}, v)) == std::set<Tuple>{{1}});
  CHECK_THROWS_AS(Evaluator(m).satisfying(f, {"x"}), EvalError);
}
