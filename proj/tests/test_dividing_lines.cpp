#include <doctest.h>

#include "lfpw/error.hpp"
#include "support.hpp"

using namespace lfpw;
using testing::parse;

namespace {

constexpr PropertyKind kAll[] = {PropertyKind::OP, PropertyKind::sOP, PropertyKind::IP, PropertyKind::TP2};

std::size_t max_n(PropertyKind k) { return k == PropertyKind::TP2 ? 2 : 3; }

PartitionedFormula pf(const std::string& text) { return PartitionedFormula::make(parse(text), {"x"}, {"y"}); }

std::vector<Tuple> singles(std::initializer_list<Element> es) {
  std::vector<Tuple> out;
  for (auto e : es) out.push_back({e});
  return out;
}

}  // namespace

TEST_CASE("kind names") {
  for (auto k : kAll) CHECK(parse_kind(to_string(k)) == k);
  CHECK(parse_kind("sop") == PropertyKind::sOP);
  CHECK_THROWS_AS(parse_kind("SOP1"), FormatError);
}

TEST_CASE("detector examples") {
  auto lo4 = linear_order(4);
  auto op = detect(PropertyKind::OP, pf("x < y"), lo4, 3);
  REQUIRE(op);
  CHECK(op->a == singles({0, 1, 2}));
  CHECK(op->b == singles({0, 1, 2}));
  CHECK(op->structure == "linord:4");

  for (const auto& m : {pure_set(3), linear_order(5), successor_structure(6), paley_graph(5)}) {
    CHECK_FALSE(detect(PropertyKind::OP, pf("x = y"), m, 3));
  }

  auto sop = detect(PropertyKind::sOP, pf("x < y"), linear_order(3), 3);
  REQUIRE(sop);
  CHECK(sop->b == singles({0, 1, 2}));
  CHECK(sop->a.empty());

  const auto& lib = arithmetic_library();
  auto lo8 = linear_order(8);
  auto ip = detect(PropertyKind::IP, lib.bit, lo8, 2);
  REQUIRE(ip);
  CHECK(ip->a == singles({1, 2}));
  CHECK(ip->b == singles({0, 1, 2, 3}));
}

TEST_CASE("factor has TP2(2) on ([37],<)") {
  const auto& lib = arithmetic_library();
  auto m = linear_order(37);
  auto c = detect(PropertyKind::TP2, lib.factor, m, 2);
  REQUIRE(c);
  CHECK(verify_witness(*c, lib.factor, m));
  REQUIRE(c->b.size() == 4);
  CHECK(c->b[0][0] == 2);
  CHECK(c->b[1][0] == 2);
  CHECK(c->b[2][0] == 3);
  CHECK(c->b[3][0] == 3);

  // b_{i,j} = (p_i, j), a_f = 2^f(1) * 3^f(2) with f in lexicographic order
  PropertyCertificate lit{PropertyKind::TP2, 2, m.name(), singles({6, 18, 12, 36}), {{2, 1}, {2, 2}, {3, 1}, {3, 2}}};
  CHECK(verify_witness(lit, lib.factor, m));
  auto bad = lit;
  bad.a[0] = {12};
  CHECK_FALSE(verify_witness(bad, lib.factor, m));
}

TEST_CASE("verify_witness rejects broken payloads") {
  auto phi = pf("x < y");
  auto lo4 = linear_order(4);
  PropertyCertificate op{PropertyKind::OP, 3, "linord:4", singles({0, 1, 2}), singles({0, 1, 2})};
  CHECK(verify_witness(op, phi, lo4));
  auto bad = op;
  bad.b = singles({0, 1, 1});
  CHECK_FALSE(verify_witness(bad, phi, lo4));

  PropertyCertificate sop{PropertyKind::sOP, 3, "linord:4", {}, singles({0, 1, 1})};
  CHECK_FALSE(verify_witness(sop, phi, lo4));
  sop.b = singles({0, 2, 3});
  CHECK(verify_witness(sop, phi, lo4));

  const auto& lib = arithmetic_library();
  auto m = linear_order(37);
  PropertyCertificate tp2{PropertyKind::TP2, 2, m.name(), singles({6, 18, 12, 36}), {{2, 1}, {2, 1}, {3, 1}, {3, 2}}};
  CHECK_FALSE(verify_witness(tp2, lib.factor, m));

  auto short_b = op;
  short_b.b.pop_back();
  CHECK_THROWS_AS(verify_witness(short_b, phi, lo4), FormatError);
  auto wide = op;
  wide.a[0] = {0, 1};
  CHECK_THROWS_AS(verify_witness(wide, phi, lo4), FormatError);
  auto range = op;
  range.a[0] = {9};
  CHECK_THROWS_AS(verify_witness(range, phi, lo4), FormatError);
}

TEST_CASE("detect agrees with brute force on the corpus") {
  for (const auto& m : testing::small_corpus(5)) {
    for (const auto& cf : testing::corpus_formulas()) {
      if (!testing::has_relation(m, cf.relation)) continue;
      for (auto k : kAll) {
        for (std::size_t n = 1; n <= max_n(k); ++n) {
          auto c = detect(k, cf.phi, m, n);
          CHECK_MESSAGE(c.has_value() == testing::brute_has(k, cf.phi, m, n),
                        cf.name << " " << to_string(k) << "(" << n << ") on " << m.name());
          if (c) CHECK(verify_witness(*c, cf.phi, m));
        }
      }
    }
  }
}

TEST_CASE("monotone in n, deterministic, bounded") {
  for (const auto& m : testing::small_corpus(5)) {
    for (const auto& cf : testing::corpus_formulas()) {
      if (!testing::has_relation(m, cf.relation)) continue;
      for (auto k : kAll) {
        bool seen_absent = false;
        for (std::size_t n = 1; n <= max_n(k) + 1; ++n) {
          auto c = detect(k, cf.phi, m, n);
          if (c) {
            CHECK_FALSE(seen_absent);
            CHECK(n <= trivial_bound(k, m.size(), 1, 1));
            auto again = detect(k, cf.phi, m, n);
            REQUIRE(again);
            CHECK(*again == *c);
          } else {
            seen_absent = true;
          }
        }
      }
    }
  }
}

TEST_CASE("trivial bound refuses without searching") {
  CHECK(trivial_bound(PropertyKind::OP, 4, 1, 1) == 4);
  CHECK(trivial_bound(PropertyKind::sOP, 4, 1, 1) == 4);
  CHECK(trivial_bound(PropertyKind::sOP, 4, 1, 2) == 5);
  CHECK(trivial_bound(PropertyKind::IP, 4, 1, 1) == 2);
  CHECK(trivial_bound(PropertyKind::TP2, 4, 1, 1) == 2);
  Budget one;
  one.nodes = 1;
  auto lo4 = linear_order(4);
  CHECK_FALSE(detect(PropertyKind::OP, pf("x < y"), lo4, 5, one));
  CHECK_FALSE(detect(PropertyKind::IP, pf("x < y"), lo4, 3, one));
  CHECK_THROWS_AS(detect(PropertyKind::OP, pf("x = y"), linear_order(12), 3, one), BudgetExhausted);
  Budget quick;
  quick.wall = std::chrono::milliseconds(0);
  CHECK_THROWS_AS(detect(PropertyKind::OP, pf("E(x,y)"), paley_graph(41), 8, quick), BudgetExhausted);
}

TEST_CASE("property sentences agree with detection") {
  auto lt = pf("x < y");
  auto s = build_property_sentence(PropertyKind::sOP, lt, 2);
  CHECK(*s == *parse("E y1. E y2. ((A x. (x < y1 -> x < y2)) & E x. (x < y2 & !(x < y1)))"));
  CHECK(eval(build_property_sentence(PropertyKind::OP, lt, 2), linear_order(3)));
  CHECK_FALSE(eval(build_property_sentence(PropertyKind::IP, pf("x = y"), 2), pure_set(5)));
  CHECK_THROWS_AS(build_property_sentence(PropertyKind::IP, lt, 4), FormatError);
  CHECK_THROWS_AS(build_property_sentence(PropertyKind::TP2, lt, 3), FormatError);
  CHECK_THROWS_AS(build_property_sentence(PropertyKind::OP, lt, 0), FormatError);

  for (const auto& m : testing::small_corpus(4)) {
    for (const auto& cf : testing::corpus_formulas()) {
      if (!testing::has_relation(m, cf.relation)) continue;
      for (auto k : kAll) {
        const std::size_t top = (k == PropertyKind::OP || k == PropertyKind::sOP) ? 3 : 2;
        for (std::size_t n = 1; n <= top; ++n) {
          auto sentence = build_property_sentence(k, cf.phi, n);
          CHECK(free_variables(sentence).empty());
          CHECK_MESSAGE(eval(sentence, m) == detect(k, cf.phi, m, n).has_value(),
                        cf.name << " " << to_string(k) << "(" << n << ") on " << m.name());
        }
      }
    }
  }
}

TEST_CASE("sentences for wider tuples") {
  // x and y blocks of width two; block names must not collide
  auto phi = PartitionedFormula::make(parse("x1 < y1 & x2 = y2"), {"x1", "x2"}, {"y1", "y2"});
  CHECK(block_names({"y1", "y2"}, 3) == std::vector<std::string>{"y1_3", "y2_3"});
  CHECK(block_names({"y"}, 2) == std::vector<std::string>{"y2"});
  for (std::size_t m = 2; m <= 4; ++m) {
    auto s = linear_order(m);
    for (auto k : kAll) {
      for (std::size_t n = 1; n <= 2; ++n) {
        CHECK(eval(build_property_sentence(k, phi, n), s) == detect(k, phi, s, n).has_value());
      }
    }
  }
}

TEST_CASE("certificate transformers") {
  std::size_t converted = 0;
  for (const auto& m : testing::small_corpus(5)) {
    for (const auto& cf : testing::corpus_formulas()) {
      if (!testing::has_relation(m, cf.relation)) continue;
      for (std::size_t n = 1; n <= 3; ++n) {
        if (auto c = detect(PropertyKind::sOP, cf.phi, m, n)) {
          auto op = sop_to_op(*c, cf.phi, m);
          if (n > 1) REQUIRE(op);
          if (op) {
            CHECK(op->kind == PropertyKind::OP);
            CHECK(op->n + 1 >= n);
            CHECK(verify_witness(*op, cf.phi, m));
            ++converted;
          }
        }
        if (auto c = detect(PropertyKind::IP, cf.phi, m, n)) {
          auto op = ip_to_op(*c);
          CHECK(op.n == n);
          CHECK(verify_witness(op, cf.phi, m));
          ++converted;
        }
        if (n <= 2) {
          if (auto c = detect(PropertyKind::TP2, cf.phi, m, n)) {
            auto ip = tp2_to_ip_transposed(*c, cf.phi, m);
            if (n > 1) REQUIRE(ip);
            if (ip) {
              CHECK(ip->kind == PropertyKind::IP);
              CHECK(verify_witness(*ip, cf.phi.transposed(), m));
              ++converted;
            }
          }
        }
      }
    }
  }
  CHECK(converted > 100);

  // sOP(n) with the top set everything gives only OP(n-1)
  auto le = pf("x < y | x = y");
  auto lo3 = linear_order(3);
  auto sop = detect(PropertyKind::sOP, le, lo3, 3);
  REQUIRE(sop);
  auto op = sop_to_op(*sop, le, lo3);
  REQUIRE(op);
  CHECK(op->n == 2);
  CHECK(verify_witness(*op, le, lo3));
}

TEST_CASE("certificate JSON round trip") {
  auto phi = pf("x < y");
  auto c = detect(PropertyKind::OP, phi, linear_order(4), 3);
  REQUIRE(c);
  CHECK(certificate_from_json(certificate_to_json(*c)) == *c);
  CHECK(certificate_from_json(certificate_to_json(*c, &phi, 2)) == *c);
  const auto& lib = arithmetic_library();
  auto t = detect(PropertyKind::TP2, lib.factor, linear_order(37), 2);
  REQUIRE(t);
  CHECK(certificate_from_json(certificate_to_json(*t, &lib.factor)) == *t);
  CHECK_THROWS_AS(certificate_from_json("{"), FormatError);
  CHECK_THROWS_AS(certificate_from_json(R"({"kind":"XP","n":1,"structure":"s","a":[],"b":[]})"), FormatError);
  CHECK_THROWS_AS(certificate_from_json(R"({"kind":"OP","n":1,"structure":"s","a":[[-1]],"b":[]})"), FormatError);
}

TEST_CASE("growth verdicts") {
  using V = GrowthVerdict;
  CHECK(growth_verdict({}) == V::Plateaued);
  CHECK(growth_verdict({3}) == V::Plateaued);
  CHECK(growth_verdict({1, 1, 1, 1}) == V::Plateaued);
  CHECK(growth_verdict({1, 2, 3, 4}) == V::UnboundedWithinPrefix);
  CHECK(growth_verdict({1, 3, 3, 3, 3, 3}) == V::Plateaued);
  CHECK(growth_verdict({2, 2, 2, 3}) == V::UnboundedWithinPrefix);
  CHECK(growth_verdict({2, 3, 3, 4, 5, 4}) == V::UnboundedWithinPrefix);
  CHECK(std::string(to_string(V::Plateaued)) != to_string(V::UnboundedWithinPrefix));
}

TEST_CASE("family profiles") {
  auto family = generate_family(FamilySpec::parse("linord:2..6"));
  std::vector<NamedFormula> formulas{{"lt", pf("x < y")}, {"eq", pf("x = y")}, {"edge", pf("E(x,y)")}};
  std::vector<PropertyKind> kinds{kAll, kAll + 4};
  std::vector<NamedBody> closures{{"height", testing::body("A y. (y < x -> T(y))", "T", {"x"})}};
  auto p1 = profile_family("linord", family, formulas, kinds, 8, {}, closures, 1);
  auto p4 = profile_family("linord", family, formulas, kinds, 8, {}, closures, 4);
  CHECK(p1.to_csv() == p4.to_csv());

  CHECK(p1.column(0, 1) == std::vector<std::size_t>{2, 3, 4, 5, 6});  // sOP of x<y
  CHECK(p1.column(0, 0) == std::vector<std::size_t>{2, 3, 4, 5, 6});  // OP of x<y
  CHECK(growth_verdict(p1.column(0, 1)) == GrowthVerdict::UnboundedWithinPrefix);
  CHECK(growth_verdict(p1.column(1, 0)) == GrowthVerdict::Plateaued);
  CHECK(p1.closure_column(0) == std::vector<std::size_t>{2, 3, 4, 5, 6});
  for (std::size_t r = 0; r < p1.rows.size(); ++r) {
    CHECK_FALSE(p1.cell(r, 2, 0).applicable);
    for (std::size_t f = 0; f < 2; ++f) {
      for (std::size_t k = 0; k < kinds.size(); ++k) {
        const auto& cell = p1.cell(r, f, k);
        CHECK(cell.applicable);
        CHECK_FALSE(cell.budget_exhausted);
        if (cell.max_n > 0) {
          REQUIRE(cell.certificate);
          CHECK(cell.certificate->n == cell.max_n);
          CHECK(verify_witness(*cell.certificate, formulas[f].phi, family[r]));
        }
      }
    }
  }

  const auto csv = p1.to_csv();
  CHECK(csv.rfind("structure,size,lt:OP,lt:sOP,lt:IP,lt:TP2,eq:OP,", 0) == 0);
  CHECK(csv.find("closure:height") != std::string::npos);
  CHECK(csv.find("\nlinord:2,2,2,2,") != std::string::npos);
  CHECK(csv.find("n/a") != std::string::npos);
  CHECK(csv.find("\nverdict,,") != std::string::npos);

  // a node budget too small to finish marks cells as lower bounds
  Budget tiny;
  tiny.nodes = 2;
  auto pb = profile_family("paley", generate_family(FamilySpec::parse("paley:13")), {{"edge", pf("E(x,y)")}},
                           {PropertyKind::IP}, 4, tiny, {}, 2);
  CHECK(pb.rows[0].cells[0].budget_exhausted);
  CHECK(pb.to_csv().find('?') != std::string::npos);
}
