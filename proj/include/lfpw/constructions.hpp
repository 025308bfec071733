#pragma once

// Formula transformers and gadgets: preorders and heights, the arithmetic
// library over <, tuple interpretation, relativization, the phi_eta family,
// indiscernible extraction and IP-witness derivation.

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lfpw/dividing_lines.hpp"
#include "lfpw/evaluator.hpp"
#include "lfpw/formula.hpp"
#include "lfpw/syntax.hpp"

namespace lfpw {

// lambda(y1;y2) with equally long parts, defining a preorder on tuples.
struct PreorderFormula {
  PartitionedFormula formula;
  bool linear = false;

  std::size_t width() const { return formula.x.size(); }
};

// psi(y1;y2) = A x. phi(x;y1) -> phi(x;y2).
PreorderFormula containment_preorder(const PartitionedFormula& phi);

// Body phi(y;T) = A y'. ((lambda(y',y) & !lambda(y,y')) -> T(y')), whose
// stage set I^k is the set of tuples of lambda-height < k.
LfpBody height_formula(const PreorderFormula& lambda, const std::string& relvar = "T");

// Stage comparison of an lfp body as a derived relation of arity 2|vars|.
// Tuples outside the fixed point form one top class.
class StagePreorder : public DerivedRelation {
 public:
  explicit StagePreorder(LfpBody body);
  std::string name() const override { return name_; }
  std::size_t arity() const override { return 2 * body_.vars.size(); }
  Relation materialize(const FiniteStructure& m) const override;
  std::vector<std::string> required_relations() const override;
  const LfpBody& body() const { return body_; }

 private:
  LfpBody body_;
  std::string name_;
};

// Throws PolarityError if the relation variable is not positive, EvalError if
// the body has free variables beyond its lfp variables.
PreorderFormula stage_preorder_formula(const LfpBody& body);

// Any lambda-chain b_1 < ... < b_n (strict in lambda) is an sOP(n) witness for
// lambda itself. Throws EvalError if the chain is not strictly increasing.
PropertyCertificate sop_from_preorder_chain(const PreorderFormula& lambda, const FiniteStructure& m,
                                            const std::vector<Tuple>& chain);

// A longest strictly increasing chain of lambda over M^width (lexicographically
// least among the longest ones).
std::vector<Tuple> longest_preorder_chain(const PreorderFormula& lambda, const FiniteStructure& m);

// Graphs of arithmetic over ([m],<), truncated at m, built by lfp recursion
// along the successor relation.
struct ArithmeticLibrary {
  MacroTable macros;  // succ, zero, one, plus, times, exp, pow2, odd, bit, factor
  FormulaPtr plus;    // plus(x,y,z): x+y=z
  FormulaPtr times;   // times(x,y,z): x*y=z
  FormulaPtr exp;     // exp(x,y,z): x^y=z, with 0^0=1
  PartitionedFormula bit;     // bit(x;y): bit x of y is 1, bits numbered from 1
  PartitionedFormula factor;  // factor(x;y,z): y^z is the largest power of y dividing x
};

const ArithmeticLibrary& arithmetic_library();

// Replaces each variable v by a block v_1..v_n, v<w by the strict part of
// lambda and v=w by lambda-equivalence. phi may use only < and = besides lfp;
// an lfp-bound relation of arity k becomes one of arity k*n.
PartitionedFormula interpret(const PartitionedFormula& phi, const PreorderFormula& lambda);

// Quantifiers bounded by marker; free variables guarded by marker conjuncts.
FormulaPtr relativize(const FormulaPtr& f, const std::string& marker);
PartitionedFormula relativize(const PartitionedFormula& phi, const std::string& marker);

// y-blocks of the i-th copy (1-based) used by build_phi_eta.
std::vector<std::string> phi_eta_block(const PartitionedFormula& phi, std::size_t i);

// /\_{i in eta} phi(x;y_i) & /\_{i not in eta} !phi(x;y_i); eta holds 1-based indices.
FormulaPtr build_phi_eta(const PartitionedFormula& phi, const std::vector<std::size_t>& eta, std::size_t k);

struct IndiscernibleResult {
  std::vector<std::size_t> positions;  // indices into seq, increasing
  std::vector<Element> subsequence;
};

// Searches subsequences of seq (lexicographic order of index sets) of length
// r on which each formula of delta (with free variables vars, |vars| = k) has
// one truth value over all increasing k-subsequences. Throws BudgetExhausted.
std::optional<IndiscernibleResult> extract_indiscernible(const FiniteStructure& m,
                                                          const std::vector<FormulaPtr>& delta,
                                                          const std::vector<std::string>& vars,
                                                          const std::vector<Element>& seq, std::size_t r,
                                                          Budget budget = {});

// Outcome of derive_ip_witness: either an IP(k) certificate for the transpose,
// or the diagnostic of the selection step.
struct IpDerivation {
  std::optional<PropertyCertificate> certificate;
  // First eta (1-based indices) that no d selected, if any.
  std::vector<std::size_t> failed_eta;
  // A strictly increasing chain of length N for a containment preorder
  // derived from phi, when one was found.
  std::optional<PropertyCertificate> chain;
  // The formula the chain certificate refers to.
  std::optional<PartitionedFormula> chain_formula;
  std::string message;
};

// Works on the b-sequence of op_witness; throws EvalError when the witness is
// too short (n < k*N) or does not verify.
IpDerivation derive_ip_witness(const PartitionedFormula& phi, const FiniteStructure& m, std::size_t k, std::size_t n,
                               const PropertyCertificate& op_witness, Budget budget = {});

}  // namespace lfpw
