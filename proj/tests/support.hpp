#pragma once

// Shared test corpus and independent oracles: a direct recursive evaluator
// with naive fixed points, brute-force property checkers and a random
// formula generator.

#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "lfpw/constructions.hpp"
#include "lfpw/dividing_lines.hpp"
#include "lfpw/evaluator.hpp"
#include "lfpw/family.hpp"
#include "lfpw/syntax.hpp"

namespace testing {

using namespace lfpw;

inline FormulaPtr parse(const std::string& text, const std::vector<RelationSymbol>& free_rel = {}) {
  ParseOptions o;
  o.check_signature = false;
  o.free_relation_variables = free_rel;
  return parse_formula(text, Signature{}, o);
}

inline LfpBody body(const std::string& text, const std::string& relvar, std::vector<std::string> vars) {
  const std::size_t arity = vars.size();
  return LfpBody{parse(text, {{relvar, arity}}), relvar, std::move(vars)};
}

inline const std::string kReachBody = "(A y. !S(y,x)) | E y. (S(y,x) & T(y))";

inline LfpBody reach_body() { return body(kReachBody, "T", {"x"}); }

// ---------------------------------------------------------------------------
// Direct evaluator: Tarskian recursion, fixed points by naive iteration over
// all tuples. Shares no code with the engine beyond the AST.

class Oracle {
 public:
  using Env = std::map<std::string, Element>;
  using Rels = std::map<std::string, std::set<Tuple>>;

  explicit Oracle(const FiniteStructure& m) : m_(m) {}

  bool eval(const FormulaPtr& f, Env env = {}, Rels rels = {}) { return go(f, env, rels); }

  std::set<Tuple> defined(const FormulaPtr& f, const std::vector<std::string>& vars, const Env& env = {},
                          const Rels& rels = {}) {
    std::set<Tuple> out;
    for_each_tuple(vars.size(), [&](const Tuple& t) {
      Env e = env;
      for (std::size_t i = 0; i < vars.size(); ++i) e[vars[i]] = t[i];
      Rels r = rels;
      if (go(f, e, r)) out.insert(t);
    });
    return out;
  }

  // Stage sets I^0 = {}, I^1, ... up to the fixed point.
  std::vector<std::set<Tuple>> stages(const LfpBody& b, const Env& env = {}) {
    std::vector<std::set<Tuple>> out{{}};
    for (;;) {
      Rels r;
      r[b.relvar] = out.back();
      auto next = defined(b.body, b.vars, env, r);
      if (next == out.back()) return out;
      out.push_back(std::move(next));
    }
  }

  void for_each_tuple(std::size_t k, const std::function<void(const Tuple&)>& f) const {
    Tuple t(k, 0);
    if (k == 0) {
      f(t);
      return;
    }
    for (;;) {
      f(t);
      std::size_t i = k;
      while (i > 0 && t[i - 1] + 1 == m_.size()) t[--i] = 0;
      if (i == 0) return;
      ++t[i - 1];
    }
  }

 private:
  bool go(const FormulaPtr& f, Env& env, Rels& rels) {
    switch (f->kind()) {
      case Connective::True: return true;
      case Connective::False: return false;
      case Connective::Equal: return env.at(f->args()[0]) == env.at(f->args()[1]);
      case Connective::Atom: {
        Tuple t;
        for (const auto& a : f->args()) t.push_back(env.at(a));
        if (f->derived()) return f->derived()->materialize(m_).contains(t);
        auto it = rels.find(f->symbol());
        if (it != rels.end()) return it->second.count(t) != 0;
        return m_.relation(f->symbol()).contains(t);
      }
      case Connective::Not: return !go(f->left(), env, rels);
      case Connective::And: return go(f->left(), env, rels) && go(f->right(), env, rels);
      case Connective::Or: return go(f->left(), env, rels) || go(f->right(), env, rels);
      case Connective::Implies: return !go(f->left(), env, rels) || go(f->right(), env, rels);
      case Connective::Exists:
      case Connective::Forall: {
        const bool ex = f->kind() == Connective::Exists;
        auto saved = env.find(f->variable()) == env.end() ? std::optional<Element>{} : env[f->variable()];
        bool result = !ex;
        for (Element e = 0; e < m_.size(); ++e) {
          env[f->variable()] = e;
          if (go(f->body(), env, rels) == ex) {
            result = ex;
            break;
          }
        }
        if (saved) {
          env[f->variable()] = *saved;
        } else {
          env.erase(f->variable());
        }
        return result;
      }
      case Connective::Lfp: {
        std::set<Tuple> x;
        for (;;) {
          Rels r = rels;
          r[f->symbol()] = x;
          auto next = defined(f->body(), f->bound(), env, r);
          if (next == x) break;
          x = std::move(next);
        }
        Tuple t;
        for (const auto& a : f->args()) t.push_back(env.at(a));
        return x.count(t) != 0;
      }
    }
    return false;
  }

  const FiniteStructure& m_;
};

// ---------------------------------------------------------------------------
// Brute-force property checks for phi(x;y) with |x| = |y| = 1.

inline std::vector<std::vector<bool>> incidence(const PartitionedFormula& phi, const FiniteStructure& m) {
  Oracle o(m);
  std::vector<std::vector<bool>> r(m.size(), std::vector<bool>(m.size()));
  for (Element a = 0; a < m.size(); ++a) {
    for (Element b = 0; b < m.size(); ++b) {
      r[a][b] = o.eval(phi.formula, {{phi.x[0], a}, {phi.y[0], b}});
    }
  }
  return r;
}

// All sequences of length len over [0, m), first coordinate most significant.
inline bool any_sequence(std::size_t len, std::size_t m, const std::function<bool(const std::vector<Element>&)>& f) {
  std::vector<Element> s(len, 0);
  if (len == 0) return f(s);
  for (;;) {
    if (f(s)) return true;
    std::size_t i = len;
    while (i > 0 && s[i - 1] + 1 == m) s[--i] = 0;
    if (i == 0) return false;
    ++s[i - 1];
  }
}

inline bool brute_has(PropertyKind kind, const PartitionedFormula& phi, const FiniteStructure& m, std::size_t n) {
  const auto r = incidence(phi, m);
  const std::size_t size = m.size();
  switch (kind) {
    case PropertyKind::OP:
      return any_sequence(n, size, [&](const std::vector<Element>& a) {
        return any_sequence(n, size, [&](const std::vector<Element>& b) {
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
              if (r[a[i]][b[j]] != (i < j)) return false;
            }
          }
          return true;
        });
      });
    case PropertyKind::sOP:
      return any_sequence(n, size, [&](const std::vector<Element>& b) {
        for (std::size_t i = 0; i + 1 < n; ++i) {
          bool grew = false;
          for (std::size_t x = 0; x < size; ++x) {
            if (r[x][b[i]] && !r[x][b[i + 1]]) return false;
            if (!r[x][b[i]] && r[x][b[i + 1]]) grew = true;
          }
          if (!grew) return false;
        }
        return true;
      });
    case PropertyKind::IP:
      return any_sequence(n, size, [&](const std::vector<Element>& a) {
        for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
          bool found = false;
          for (std::size_t b = 0; b < size && !found; ++b) {
            bool ok = true;
            for (std::size_t i = 0; i < n && ok; ++i) ok = r[a[i]][b] == (((mask >> i) & 1U) != 0);
            found = ok;
          }
          if (!found) return false;
        }
        return true;
      });
    case PropertyKind::TP2:
      return any_sequence(n * n, size, [&](const std::vector<Element>& b) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = j + 1; k < n; ++k) {
              for (std::size_t x = 0; x < size; ++x) {
                if (r[x][b[i * n + j]] && r[x][b[i * n + k]]) return false;
              }
            }
          }
        }
        return !any_sequence(n, n, [&](const std::vector<Element>& f) {
          for (std::size_t x = 0; x < size; ++x) {
            bool ok = true;
            for (std::size_t i = 0; i < n && ok; ++i) ok = r[x][b[i * n + f[i]]];
            if (ok) return false;
          }
          return true;  // path f has no realization
        });
      });
  }
  return false;
}

// ---------------------------------------------------------------------------
// Corpus

inline std::vector<FiniteStructure> small_corpus(std::size_t max_size) {
  std::vector<FiniteStructure> out;
  for (std::size_t n = 1; n <= max_size; ++n) {
    out.push_back(pure_set(n));
    out.push_back(successor_structure(n));
    out.push_back(linear_order(n));
    out.push_back(random_graph(n, 11));
  }
  if (max_size >= 5) out.push_back(paley_graph(5));
  if (max_size >= 4) out.push_back(disjoint_union(successor_structure(2), linear_order(2)));
  return out;
}

struct CorpusBody {
  std::string name;
  std::string relation;  // structure relation the body reads ("" for none)
  LfpBody body;
};

inline std::vector<CorpusBody> corpus_bodies() {
  return {
      {"reach", "S", reach_body()},
      {"tc", "S", body("S(x,y) | E z. (S(x,z) & T(z,y))", "T", {"x", "y"})},
      {"even", "S", body("(A y. !S(y,x)) | E y. E z. (S(z,y) & S(y,x) & T(z))", "T", {"x"})},
      {"height", "<", body("A y. (y < x -> T(y))", "T", {"x"})},
      {"height_strict", "<", body("A y'. ((y' < x & !(x < y' | x = y')) -> T(y'))", "T", {"x"})},
      {"pairs", "<", body("A z. ((z < x -> T(z,y)) & (z < y -> T(x,z)))", "T", {"x", "y"})},
      {"edge_tc", "E", body("E(x,y) | E z. (E(x,z) & T(z,y))", "T", {"x", "y"})},
      {"all", "", body("x = x", "T", {"x"})},
      {"none", "", body("false", "T", {"x"})},
  };
}

struct CorpusFormula {
  std::string name;
  std::string relation;
  PartitionedFormula phi;
};

// Partitioned formulas phi(x;y) with |x| = |y| = 1.
inline std::vector<CorpusFormula> corpus_formulas() {
  auto pf = [](const std::string& text) { return PartitionedFormula::make(parse(text), {"x"}, {"y"}); };
  return {
      {"eq", "", pf("x = y")},
      {"neq", "", pf("!(x = y)")},
      {"lt", "<", pf("x < y")},
      {"le", "<", pf("x < y | x = y")},
      {"succ", "S", pf("S(x,y)")},
      {"succ2", "S", pf("E z. (S(x,z) & S(z,y))")},
      {"edge", "E", pf("E(x,y)")},
      {"common", "E", pf("E z. (E(x,z) & E(z,y))")},
      {"reach", "S", pf("[lfp T(u,v). S(u,v) | E w. (S(u,w) & T(w,v))](x,y)")},
  };
}

inline bool has_relation(const FiniteStructure& m, const std::string& r) { return r.empty() || m.find(r) != nullptr; }

// Random formulas over E/2 (binary) and U/1 with variables from vars, plus
// a positive occurrence of a relation variable when relvar is given.
class FormulaGen {
 public:
  FormulaGen(std::uint64_t seed, std::vector<std::string> vars) : rng_(seed), vars_(std::move(vars)) {}

  FormulaPtr make(int depth, const std::string& relvar = "", std::size_t rel_arity = 0, bool positive = true) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 3 : 9);
    const int c = pick(rng_);
    switch (c) {
      case 0: return Formula::atom("E", {var(), var()});
      case 1: return Formula::equal(var(), var());
      case 2: return Formula::atom("U", {var()});
      case 3: {
        if (relvar.empty()) return Formula::atom("E", {var(), var()});
        std::vector<std::string> args;
        for (std::size_t i = 0; i < rel_arity; ++i) args.push_back(var());
        FormulaPtr a = Formula::atom(relvar, args);
        return positive ? a : Formula::atom("U", {var()});
      }
      case 4: return Formula::negation(make(depth - 1, "", 0, positive));
      case 5: return Formula::conj(make(depth - 1, relvar, rel_arity, positive), make(depth - 1, relvar, rel_arity, positive));
      case 6: return Formula::disj(make(depth - 1, relvar, rel_arity, positive), make(depth - 1, relvar, rel_arity, positive));
      case 7: return Formula::implies(make(depth - 1, "", 0, positive), make(depth - 1, relvar, rel_arity, positive));
      case 8: return Formula::exists(var(), make(depth - 1, relvar, rel_arity, positive));
      default: return Formula::forall(var(), make(depth - 1, relvar, rel_arity, positive));
    }
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::string var() {
    std::uniform_int_distribution<std::size_t> d(0, vars_.size() - 1);
    return vars_[d(rng_)];
  }

  std::mt19937_64 rng_;
  std::vector<std::string> vars_;
};

inline FiniteStructure random_eu_structure(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FiniteStructure m("eu", n);
  Relation e(2, n);
  Relation u(1, n);
  for (Element a = 0; a < n; ++a) {
    if (rng() & 1U) u.insert({a});
    for (Element b = 0; b < n; ++b) {
      if ((rng() % 3) == 0) e.insert({a, b});
    }
  }
  m.add_relation("E", e);
  m.add_relation("U", u);
  return m;
}

inline std::set<Tuple> as_set(const Relation& r) {
  auto ts = r.tuples();
  return {ts.begin(), ts.end()};
}

}  // namespace testing
