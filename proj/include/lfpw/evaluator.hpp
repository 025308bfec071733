#pragma once

// Model checking of FO+LFP formulas over finite structures, fixed-point
// stages, closure ordinals, stage comparison, and unfolding into FO.
//
// Stage convention: I^0 is empty and I^{k+1} = Gamma(I^k); a tuple's stage is
// the least k with the tuple in I^k, and the closure ordinal is the number of
// strict growth steps.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lfpw/formula.hpp"
#include "lfpw/structure.hpp"

namespace lfpw {

struct Valuation {
  std::map<std::string, Element> elements;
  std::map<std::string, Relation> relations;
};

enum class Iteration { Naive, SemiNaive };

struct StageTable {
  std::string relvar;
  std::vector<std::string> vars;
  std::size_t universe = 0;
  Relation fixpoint;
  // stage[i] is the stage of fixpoint.codes()[i].
  std::vector<std::uint32_t> stage;
  std::size_t closure = 0;

  std::optional<std::size_t> stage_of(const Tuple& t) const;
  // I^k: tuples of stage at most k.
  Relation stage_set(std::size_t k) const;
  // Tuples of stage exactly k, in lexicographic order.
  std::vector<Tuple> level(std::size_t k) const;

  friend bool operator==(const StageTable& a, const StageTable& b) {
    return a.vars == b.vars && a.universe == b.universe && a.fixpoint == b.fixpoint && a.stage == b.stage &&
           a.closure == b.closure;
  }
};

struct EvalOptions {
  Iteration iteration = Iteration::SemiNaive;
};

namespace detail {
struct Node;
struct IndexedRelation;
class Engine;
}  // namespace detail

// Evaluation context bound to one structure. Caches compiled formulas,
// materialized derived relations and lfp results, so repeated queries are
// cheap. Not thread-safe; use one Evaluator per thread.
class Evaluator {
 public:
  explicit Evaluator(const FiniteStructure& m, EvalOptions options = {});
  ~Evaluator();
  Evaluator(const Evaluator&) = delete;
  Evaluator& operator=(const Evaluator&) = delete;

  const FiniteStructure& structure() const { return m_; }

  // Every free variable of f must be bound by v, every free relation variable
  // supplied by v. Throws EvalError otherwise.
  bool eval(const FormulaPtr& f, const Valuation& v = {});

  // Tuples over vars (in that order) satisfying f. Variables of vars that do
  // not occur free range over the whole universe; other free variables of f
  // come from v.
  Relation satisfying(const FormulaPtr& f, const std::vector<std::string>& vars, const Valuation& v = {});

  // Gamma(X) for the operator of b: tuples over b.vars satisfying b.body with b.relvar := X.
  Relation gamma(const LfpBody& b, const Relation& x, const Valuation& v = {});

  StageTable stages(const LfpBody& b, const Valuation& v = {});
  StageTable stages(const LfpBody& b, const Valuation& v, Iteration iteration);

 private:
  const FiniteStructure& m_;
  EvalOptions options_;
  std::unique_ptr<detail::Engine> engine_;
};

// Convenience wrappers creating a fresh Evaluator.
bool eval(const FormulaPtr& f, const FiniteStructure& m, const Valuation& v = {});
StageTable lfp_stages(const LfpBody& b, const FiniteStructure& m, const Valuation& v = {},
                      Iteration iteration = Iteration::SemiNaive);
std::size_t closure_ordinal(const LfpBody& b, const FiniteStructure& m, const Valuation& v = {});

// {(b,c) in I x I : stage(b) <= stage(c)} as a relation of arity 2|vars|.
Relation stage_comparison(const LfpBody& b, const FiniteStructure& m, const Valuation& v = {});
Relation stage_comparison(const StageTable& table);

// theta_0 = false, theta_{k+1} = body[relvar := theta_k]; free variables are b.vars.
FormulaPtr unfold_lfp(const LfpBody& b, std::size_t k);

// Least k <= max_k such that theta_k and theta_{k+1} define the same set on
// every member of the family, or nullopt.
std::optional<std::size_t> unfold_over_family(const LfpBody& b, const std::vector<FiniteStructure>& family,
                                               std::size_t max_k);

}  // namespace lfpw
