#include "lfpw/formula.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "lfpw/error.hpp"
#include "lfpw/syntax.hpp"

namespace lfpw {

Signature::Signature(std::initializer_list<RelationSymbol> symbols) {
  for (const auto& s : symbols) add(s.name, s.arity);
}

void Signature::add(const std::string& name, std::size_t arity) {
  if (arity == 0) throw SignatureError("relation " + name + " must have positive arity");
  if (contains(name)) throw SignatureError("duplicate relation symbol " + name);
  symbols_.push_back({name, arity});
}

std::optional<std::size_t> Signature::arity_of(const std::string& name) const {
  for (const auto& s : symbols_) {
    if (s.name == name) return s.arity;
  }
  return std::nullopt;
}

FormulaPtr Formula::truth(bool value) {
  static const FormulaPtr t = [] {
    auto f = std::shared_ptr<Formula>(new Formula());
    f->kind_ = Connective::True;
    return f;
  }();
  static const FormulaPtr fa = [] {
    auto f = std::shared_ptr<Formula>(new Formula());
    f->kind_ = Connective::False;
    return f;
  }();
  return value ? t : fa;
}

FormulaPtr Formula::atom(std::string relation, std::vector<std::string> args) {
  auto f = std::shared_ptr<Formula>(new Formula());
  f->kind_ = Connective::Atom;
  f->symbol_ = std::move(relation);
  f->args_ = std::move(args);
  return f;
}

FormulaPtr Formula::derived_atom(std::shared_ptr<const DerivedRelation> relation, std::vector<std::string> args) {
  auto f = std::shared_ptr<Formula>(new Formula());
  f->kind_ = Connective::Atom;
  f->symbol_ = relation->name();
  f->args_ = std::move(args);
  f->derived_ = std::move(relation);
  return f;
}

FormulaPtr Formula::equal(std::string lhs, std::string rhs) {
  auto f = std::shared_ptr<Formula>(new Formula());
  f->kind_ = Connective::Equal;
  f->args_ = {std::move(lhs), std::move(rhs)};
  return f;
}

FormulaPtr Formula::negation(FormulaPtr g) {
  auto f = std::shared_ptr<Formula>(new Formula());
  f->kind_ = Connective::Not;
  f->left_ = std::move(g);
  return f;
}

FormulaPtr Formula::binary(Connective kind, FormulaPtr a, FormulaPtr b) {
  auto f = std::shared_ptr<Formula>(new Formula());
  f->kind_ = kind;
  f->left_ = std::move(a);
  f->right_ = std::move(b);
  return f;
}

FormulaPtr Formula::conj(FormulaPtr a, FormulaPtr b) { return binary(Connective::And, std::move(a), std::move(b)); }
FormulaPtr Formula::disj(FormulaPtr a, FormulaPtr b) { return binary(Connective::Or, std::move(a), std::move(b)); }
FormulaPtr Formula::implies(FormulaPtr a, FormulaPtr b) {
  return binary(Connective::Implies, std::move(a), std::move(b));
}

FormulaPtr Formula::forall(std::string var, FormulaPtr body) {
  auto f = std::shared_ptr<Formula>(new Formula());
  f->kind_ = Connective::Forall;
  f->symbol_ = std::move(var);
  f->left_ = std::move(body);
  return f;
}

FormulaPtr Formula::exists(std::string var, FormulaPtr body) {
  auto f = std::shared_ptr<Formula>(new Formula());
  f->kind_ = Connective::Exists;
  f->symbol_ = std::move(var);
  f->left_ = std::move(body);
  return f;
}

FormulaPtr Formula::lfp(std::string relvar, std::vector<std::string> bound, FormulaPtr body,
                        std::vector<std::string> args) {
  auto f = std::shared_ptr<Formula>(new Formula());
  f->kind_ = Connective::Lfp;
  f->symbol_ = std::move(relvar);
  f->bound_ = std::move(bound);
  f->left_ = std::move(body);
  f->args_ = std::move(args);
  return f;
}

bool operator==(const Formula& a, const Formula& b) {
  if (&a == &b) return true;
  if (a.kind_ != b.kind_ || a.symbol_ != b.symbol_ || a.args_ != b.args_ || a.bound_ != b.bound_) return false;
  if (a.derived_ != b.derived_) return false;
  return same_formula(a.left_, b.left_) && same_formula(a.right_, b.right_);
}

bool same_formula(const FormulaPtr& a, const FormulaPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

FormulaPtr conjunction(const std::vector<FormulaPtr>& parts) {
  if (parts.empty()) return Formula::truth(true);
  FormulaPtr acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) acc = Formula::conj(acc, parts[i]);
  return acc;
}

FormulaPtr disjunction(const std::vector<FormulaPtr>& parts) {
  if (parts.empty()) return Formula::truth(false);
  FormulaPtr acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) acc = Formula::disj(acc, parts[i]);
  return acc;
}

FormulaPtr exists_all(const std::vector<std::string>& vars, FormulaPtr body) {
  for (auto it = vars.rbegin(); it != vars.rend(); ++it) body = Formula::exists(*it, std::move(body));
  return body;
}

FormulaPtr forall_all(const std::vector<std::string>& vars, FormulaPtr body) {
  for (auto it = vars.rbegin(); it != vars.rend(); ++it) body = Formula::forall(*it, std::move(body));
  return body;
}

PartitionedFormula PartitionedFormula::make(FormulaPtr formula, std::vector<std::string> x,
                                            std::vector<std::string> y) {
  std::set<std::string> xs(x.begin(), x.end());
  std::set<std::string> ys(y.begin(), y.end());
  if (xs.size() != x.size() || ys.size() != y.size()) {
    throw SignatureError("partition lists must not repeat variables");
  }
  for (const auto& v : xs) {
    if (ys.count(v) != 0) throw SignatureError("variable " + v + " is in both the x-part and the y-part");
  }
  for (const auto& v : free_variables(formula)) {
    if (xs.count(v) == 0 && ys.count(v) == 0) {
      throw SignatureError("free variable " + v + " is missing from the partition");
    }
  }
  return PartitionedFormula{std::move(formula), std::move(x), std::move(y)};
}

PartitionedFormula PartitionedFormula::with_default_split(FormulaPtr formula) {
  auto vars = free_variables(formula);
  std::vector<std::string> x;
  std::vector<std::string> y;
  if (!vars.empty()) {
    x.push_back(vars.front());
    y.assign(vars.begin() + 1, vars.end());
  }
  return make(std::move(formula), std::move(x), std::move(y));
}

FormulaPtr LfpBody::applied_to(std::vector<std::string> args) const {
  return Formula::lfp(relvar, vars, body, std::move(args));
}

}  // namespace lfpw
