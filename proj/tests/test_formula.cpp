#include <doctest.h>

#include <algorithm>

#include "lfpw/error.hpp"
#include "support.hpp"

using namespace lfpw;
using testing::Oracle;
using testing::parse;

namespace {

const Signature kSig{{"R", 2}, {"S", 2}, {"U", 1}};

FormulaPtr p(const std::string& s) { return parse_formula(s, kSig); }

// Nested lfp formulas of the given depth, built programmatically.
FormulaPtr nested_lfp(int depth, const std::string& rel = "T") {
  if (depth == 0) return Formula::atom("S", {"x", "y"});
  FormulaPtr inner = nested_lfp(depth - 1, rel + "x");
  FormulaPtr body = Formula::disj(inner, Formula::exists("z", Formula::conj(Formula::atom("S", {"x", "z"}),
                                                                             Formula::atom(rel, {"z", "y"}))));
  return Formula::lfp(rel, {"x", "y"}, body, {"x", "y"});
}

}  // namespace

TEST_CASE("parsing the grammar") {
  auto f = p("E x. A y. (x = y | R(x,y))");
  REQUIRE(f->kind() == Connective::Exists);
  CHECK(f->variable() == "x");
  CHECK(f->body()->kind() == Connective::Forall);
  CHECK(f->body()->body()->kind() == Connective::Or);
  CHECK(f->body()->body()->left()->kind() == Connective::Equal);

  auto reach = p("[lfp T(x). (A y. !S(y,x)) | E y. (S(y,x) & T(y))](u)");
  REQUIRE(reach->kind() == Connective::Lfp);
  CHECK(reach->symbol() == "T");
  CHECK(reach->bound() == std::vector<std::string>{"x"});
  CHECK(reach->args() == std::vector<std::string>{"u"});
  CHECK(polarity(reach->body(), "T") == Polarity::Positive);

  // precedence ! > & > | > ->, implication to the right
  auto g = p("U(x) | U(y) & U(z) -> U(x) -> U(y)");
  REQUIRE(g->kind() == Connective::Implies);
  CHECK(g->left()->kind() == Connective::Or);
  CHECK(g->left()->right()->kind() == Connective::And);
  CHECK(g->right()->kind() == Connective::Implies);

  // quantifiers extend to the right
  auto h = p("E x. U(x) & U(y)");
  CHECK(h->kind() == Connective::Exists);
  CHECK(h->body()->kind() == Connective::And);

  CHECK(p("true")->kind() == Connective::True);
  CHECK(p("!false")->left()->kind() == Connective::False);
}

TEST_CASE("parse errors carry positions and kinds") {
  CHECK_THROWS_AS(p("[lfp T(x). !T(x)](u)"), PolarityError);
  CHECK_THROWS_AS(p("[lfp T(x). T(x) -> U(x)](u)"), PolarityError);
  CHECK_THROWS_AS(p("Q(x)"), SignatureError);
  CHECK_THROWS_AS(p("R(x)"), SignatureError);
  CHECK_THROWS_AS(p("[lfp T(x,y). T(x)](u,v)"), SignatureError);
  try {
    p("E x. (x");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.position() == 7);
  }
  CHECK_THROWS_AS(p("U(x) &"), ParseError);
  CHECK_THROWS_AS(p("U(x))"), ParseError);
  CHECK_THROWS_AS(p("foo(x)"), ParseError);
}

TEST_CASE("free variables in first-occurrence order") {
  CHECK(free_variables(p("E x. R(x,y)")) == std::vector<std::string>{"y"});
  CHECK(free_variables(p("x = y & R(y,z)")) == std::vector<std::string>{"x", "y", "z"});
  CHECK(free_variables(p("[lfp T(x). T(x) | U(x)](u)")) == std::vector<std::string>{"u"});
  CHECK(free_variables(p("true")).empty());
}

TEST_CASE("polarity") {
  const std::vector<RelationSymbol> t{{"T", 1}};
  CHECK(polarity(parse("S(x,y) & T(y)", t), "T") == Polarity::Positive);
  CHECK(polarity(parse("T(x) -> S(x,x)", t), "T") == Polarity::Negative);
  CHECK(polarity(parse("T(x) & !T(x)", t), "T") == Polarity::Mixed);
  CHECK(polarity(parse("S(x,x)", t), "T") == Polarity::Absent);
  CHECK(polarity(parse("!(T(x) -> S(x,x))", t), "T") == Polarity::Positive);
  // a shadowing lfp binder hides the outer variable
  CHECK(polarity(parse("[lfp T(y). !S(y,y) | T(y)](x)", t), "T") == Polarity::Absent);
}

TEST_CASE("implication polarity agrees with the desugared formula") {
  testing::FormulaGen gen(5, {"x", "y"});
  for (int i = 0; i < 200; ++i) {
    auto a = gen.make(2, "T", 1);
    auto b = gen.make(2, "T", 1);
    auto imp = Formula::implies(a, b);
    auto desugared = Formula::disj(Formula::negation(a), b);
    CHECK(polarity(imp, "T") == polarity(desugared, "T"));
  }
}

TEST_CASE("polarity soundness: positive occurrences are monotone") {
  testing::FormulaGen gen(17, {"x", "y", "z"});
  int checked = 0;
  for (int i = 0; i < 150; ++i) {
    auto f = gen.make(3, "T", 1);
    if (polarity(f, "T") != Polarity::Positive) continue;
    std::mt19937_64& rng = gen.rng();
    const std::size_t n = 1 + rng() % 5;
    auto m = testing::random_eu_structure(n, rng());
    std::set<Tuple> x, y;
    for (Element e = 0; e < n; ++e) {
      const auto r = rng() % 3;
      if (r == 0) x.insert({e});
      if (r <= 1) y.insert({e});
    }
    Oracle o(m);
    auto sx = o.defined(f, {"x", "y", "z"}, {}, {{"T", x}});
    auto sy = o.defined(f, {"x", "y", "z"}, {}, {{"T", y}});
    CHECK(std::includes(sy.begin(), sy.end(), sx.begin(), sx.end()));
    ++checked;
  }
  CHECK(checked > 20);
}

TEST_CASE("render round-trips") {
  std::vector<std::string> texts{
      "E x. A y. (x = y | R(x,y))",
      "[lfp T(x). (A y. !S(y,x)) | E y. (S(y,x) & T(y))](u)",
      "(U(x) -> U(y)) -> U(z)",
      "U(x) -> U(y) -> U(z)",
      "!(U(x) & U(y)) | !!U(z)",
      "A x. (E y. R(x,y)) & U(x)",
      "(A x. U(x)) & U(y)",
      "x < y & !(y = x)",
      "[lfp T(x,y). R(x,y) | E z. (R(x,z) & T(z,y))](y,x) & true",
  };
  for (const auto& t : texts) {
    auto f = parse(t);
    auto g = parse(render(f));
    CHECK_MESSAGE(*f == *g, t << " -> " << render(f));
  }
  CHECK(render(p("E x. U(x)")) == "E x. U(x)");
  for (int d = 1; d <= 3; ++d) {
    auto f = nested_lfp(d);
    CHECK(*parse(render(f)) == *f);
  }
  testing::FormulaGen gen(99, {"x", "y", "z"});
  for (int i = 0; i < 300; ++i) {
    auto f = gen.make(4);
    CHECK_MESSAGE(*parse(render(f)) == *f, render(f));
  }
}

TEST_CASE("lfp well-formedness: parse rejects exactly the non-positive bodies") {
  testing::FormulaGen gen(23, {"x", "y"});
  for (int i = 0; i < 200; ++i) {
    auto a = gen.make(2, "T", 1);
    auto body = (i % 2 == 0) ? Formula::negation(a) : a;
    const Polarity pol = polarity(body, "T");
    const std::string text = "[lfp T(x). " + render(body) + "](y)";
    const bool bad = pol == Polarity::Negative || pol == Polarity::Mixed;
    if (bad) {
      CHECK_THROWS_AS(parse(text), PolarityError);
    } else {
      CHECK_NOTHROW(parse(text));
    }
  }
}

TEST_CASE("substitute_relation") {
  const std::vector<RelationSymbol> t{{"T", 1}};
  auto f = parse("S(y,x) & T(y)", t);
  CHECK(render(substitute_relation(f, "T", Formula::truth(false), {"w"})) == "S(y,x) & false");
  auto g = parse("E y. (S(y,x) & T(y))", t);
  CHECK(*substitute_relation(g, "T", parse("w = w"), {"w"}) == *parse("E y. (S(y,x) & y = y)"));

  // capture: the bound z of the substituted formula must not capture x = z
  auto h = parse("E x. T(z)", t);
  auto sub = substitute_relation(h, "T", parse("E z. S(z,w) & S(w,x)"), {"w"});
  const auto fv = free_variables(sub);
  CHECK(std::find(fv.begin(), fv.end(), "x") != fv.end());
  auto m = testing::random_eu_structure(3, 4);
  FiniteStructure ms("s", 3);
  ms.add_relation("S", m.relation("E"));
  Oracle o(ms);
  for (Element x = 0; x < 3; ++x) {
    for (Element z = 0; z < 3; ++z) {
      bool expect = false;
      for (Element zz = 0; zz < 3; ++zz) expect = expect || (ms.relation("S").contains({zz, z}) && ms.relation("S").contains({z, x}));
      CHECK(o.eval(sub, {{"x", x}, {"z", z}}) == expect);
    }
  }
  CHECK(free_relation_symbols(sub).count("T") == 0);
}

TEST_CASE("rename_variables avoids capture") {
  auto f = parse("E y. R(x,y)");
  auto g = rename_variables(f, {{"x", "y"}});
  CHECK(free_variables(g) == std::vector<std::string>{"y"});
  CHECK(g->variable() != "y");
}

TEST_CASE("macros expand with renamed parameters") {
  MacroTable t;
  t.define("succ", {"x", "y"}, "x < y & !(E w. x < w & w < y)");
  t.define("two", {"a", "b"}, "E m. succ(a,m) & succ(m,b)");
  ParseOptions o;
  o.check_signature = false;
  o.macros = &t;
  auto f = parse_formula("two(u,v)", Signature{}, o);
  CHECK(free_variables(f) == std::vector<std::string>{"u", "v"});
  auto m = linear_order(5);
  for (Element u = 0; u < 5; ++u) {
    for (Element v = 0; v < 5; ++v) {
      CHECK(eval(f, m, Valuation{{{"u", u}, {"v", v}}, {}}) == (v == u + 2));
    }
  }
  CHECK_THROWS_AS(t.define("bad", {"x", "x"}, "x = x"), FormatError);
  CHECK_THROWS_AS(t.define("free", {"x"}, "x = y"), FormatError);
  CHECK_THROWS(parse_formula("nope(u)", Signature{}, o));
}

TEST_CASE("partitioned formulas") {
  auto f = parse("R(x,y) & U(z)");
  auto d = PartitionedFormula::with_default_split(f);
  CHECK(d.x == std::vector<std::string>{"x"});
  CHECK(d.y == std::vector<std::string>{"y", "z"});
  CHECK(d.transposed().x == d.y);
  CHECK_THROWS_AS(PartitionedFormula::make(f, {"x"}, {"y"}), SignatureError);
  CHECK_THROWS_AS(PartitionedFormula::make(f, {"x", "y"}, {"y", "z"}), SignatureError);
  CHECK_NOTHROW(PartitionedFormula::make(Formula::truth(true), {"x"}, {"y"}));
}
