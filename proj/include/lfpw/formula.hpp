#pragma once

// Abstract syntax of first-order logic extended with the lfp quantifier.
//
// Formulas are immutable and shared: every constructor returns a
// FormulaPtr, and transformations build new trees that reuse unchanged
// subtrees. First-order variables are lowercase identifiers, relation
// symbols and relation variables are uppercase identifiers (plus the infix
// symbol "<").

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lfpw {

class FiniteStructure;
class Relation;

class Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

enum class Connective { True, False, Atom, Equal, Not, And, Or, Implies, Forall, Exists, Lfp };

// A relation that is not stored in the structure but computed from it when a
// formula is evaluated (for instance a stage-comparison preorder). Atoms over
// a derived relation render by name but do not re-parse.
class DerivedRelation {
 public:
  virtual ~DerivedRelation() = default;
  virtual std::string name() const = 0;
  virtual std::size_t arity() const = 0;
  virtual Relation materialize(const FiniteStructure& m) const = 0;
  // Structure relations the computation reads; used to match formulas to families.
  virtual std::vector<std::string> required_relations() const = 0;
};

struct RelationSymbol {
  std::string name;
  std::size_t arity = 0;
  bool operator==(const RelationSymbol&) const = default;
};

class Signature {
 public:
  Signature() = default;
  Signature(std::initializer_list<RelationSymbol> symbols);

  // Throws SignatureError on duplicate names or zero arity.
  void add(const std::string& name, std::size_t arity);
  std::optional<std::size_t> arity_of(const std::string& name) const;
  bool contains(const std::string& name) const { return arity_of(name).has_value(); }
  const std::vector<RelationSymbol>& symbols() const { return symbols_; }

 private:
  std::vector<RelationSymbol> symbols_;
};

class Formula {
 public:
  Connective kind() const { return kind_; }

  // Atom: relation symbol or relation variable. Lfp: the bound relation variable.
  const std::string& symbol() const { return symbol_; }
  // Quantifiers: the bound first-order variable.
  const std::string& variable() const { return symbol_; }
  // Atom and Equal arguments; for Lfp, the tuple the fixed point is applied to.
  const std::vector<std::string>& args() const { return args_; }
  // Lfp: the bound variable tuple.
  const std::vector<std::string>& bound() const { return bound_; }
  // Not, quantifiers, Lfp: the single operand. Binary connectives: the left operand.
  const FormulaPtr& left() const { return left_; }
  const FormulaPtr& body() const { return left_; }
  const FormulaPtr& right() const { return right_; }
  const std::shared_ptr<const DerivedRelation>& derived() const { return derived_; }

  bool is_binary() const {
    return kind_ == Connective::And || kind_ == Connective::Or || kind_ == Connective::Implies;
  }
  bool is_quantifier() const { return kind_ == Connective::Forall || kind_ == Connective::Exists; }

  static FormulaPtr truth(bool value);
  static FormulaPtr atom(std::string relation, std::vector<std::string> args);
  static FormulaPtr derived_atom(std::shared_ptr<const DerivedRelation> relation, std::vector<std::string> args);
  static FormulaPtr equal(std::string lhs, std::string rhs);
  static FormulaPtr negation(FormulaPtr f);
  static FormulaPtr conj(FormulaPtr a, FormulaPtr b);
  static FormulaPtr disj(FormulaPtr a, FormulaPtr b);
  static FormulaPtr implies(FormulaPtr a, FormulaPtr b);
  static FormulaPtr forall(std::string var, FormulaPtr body);
  static FormulaPtr exists(std::string var, FormulaPtr body);
  static FormulaPtr lfp(std::string relvar, std::vector<std::string> bound, FormulaPtr body,
                        std::vector<std::string> args);

  // Structural equality; derived atoms compare by relation identity.
  friend bool operator==(const Formula& a, const Formula& b);

 private:
  Formula() = default;
  static FormulaPtr binary(Connective kind, FormulaPtr a, FormulaPtr b);

  Connective kind_ = Connective::True;
  std::string symbol_;
  std::vector<std::string> args_;
  std::vector<std::string> bound_;
  FormulaPtr left_;
  FormulaPtr right_;
  std::shared_ptr<const DerivedRelation> derived_;
};

bool same_formula(const FormulaPtr& a, const FormulaPtr& b);

// Left-folded n-ary connectives; empty lists give true resp. false.
FormulaPtr conjunction(const std::vector<FormulaPtr>& parts);
FormulaPtr disjunction(const std::vector<FormulaPtr>& parts);
FormulaPtr exists_all(const std::vector<std::string>& vars, FormulaPtr body);
FormulaPtr forall_all(const std::vector<std::string>& vars, FormulaPtr body);

// A formula phi(x;y) with declared object variables x and parameter variables y.
// The two lists are disjoint and together cover the free variables of formula;
// listed variables that do not occur free are allowed (dummy coordinates).
struct PartitionedFormula {
  FormulaPtr formula;
  std::vector<std::string> x;
  std::vector<std::string> y;

  // Validates disjointness and coverage; throws SignatureError.
  static PartitionedFormula make(FormulaPtr formula, std::vector<std::string> x, std::vector<std::string> y);
  // Default split: first free variable is x, the rest are y.
  static PartitionedFormula with_default_split(FormulaPtr formula);

  PartitionedFormula transposed() const { return PartitionedFormula{formula, y, x}; }
};

// Free variable tuple, a relation-variable name and the body: the pieces of
// [lfp S x. body] without an application.
struct LfpBody {
  FormulaPtr body;
  std::string relvar;
  std::vector<std::string> vars;

  // The lfp formula applied to args.
  FormulaPtr applied_to(std::vector<std::string> args) const;
};

}  // namespace lfpw
