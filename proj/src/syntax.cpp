#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lfpw/error.hpp"
#include "lfpw/syntax.hpp"

namespace lfpw {

const char* to_string(Polarity p) {
  switch (p) {
    case Polarity::Absent: return "absent";
    case Polarity::Positive: return "positive";
    case Polarity::Negative: return "negative";
    case Polarity::Mixed: return "mixed";
  }
  return "?";
}

namespace {

void collect_free(const FormulaPtr& f, std::vector<std::string>& bound_stack, std::vector<std::string>& out,
                  std::set<std::string>& seen) {
  auto note = [&](const std::string& v) {
    if (std::find(bound_stack.begin(), bound_stack.end(), v) != bound_stack.end()) return;
    if (seen.insert(v).second) out.push_back(v);
  };
  switch (f->kind()) {
    case Connective::True:
    case Connective::False:
      return;
    case Connective::Atom:
    case Connective::Equal:
      for (const auto& a : f->args()) note(a);
      return;
    case Connective::Not:
      collect_free(f->left(), bound_stack, out, seen);
      return;
    case Connective::And:
    case Connective::Or:
    case Connective::Implies:
      collect_free(f->left(), bound_stack, out, seen);
      collect_free(f->right(), bound_stack, out, seen);
      return;
    case Connective::Forall:
    case Connective::Exists:
      bound_stack.push_back(f->variable());
      collect_free(f->body(), bound_stack, out, seen);
      bound_stack.pop_back();
      return;
    case Connective::Lfp:
      for (const auto& v : f->bound()) bound_stack.push_back(v);
      collect_free(f->body(), bound_stack, out, seen);
      bound_stack.resize(bound_stack.size() - f->bound().size());
      for (const auto& a : f->args()) note(a);
      return;
  }
}

void collect_relations(const FormulaPtr& f, std::vector<std::string>& bound, std::set<std::string>& out) {
  switch (f->kind()) {
    case Connective::Atom:
      if (!f->derived() && std::find(bound.begin(), bound.end(), f->symbol()) == bound.end()) {
        out.insert(f->symbol());
      }
      return;
    case Connective::Not:
    case Connective::Forall:
    case Connective::Exists:
      collect_relations(f->left(), bound, out);
      return;
    case Connective::And:
    case Connective::Or:
    case Connective::Implies:
      collect_relations(f->left(), bound, out);
      collect_relations(f->right(), bound, out);
      return;
    case Connective::Lfp:
      bound.push_back(f->symbol());
      collect_relations(f->body(), bound, out);
      bound.pop_back();
      return;
    default:
      return;
  }
}

void collect_names(const FormulaPtr& f, std::set<std::string>& out) {
  switch (f->kind()) {
    case Connective::Atom:
    case Connective::Equal:
      out.insert(f->args().begin(), f->args().end());
      return;
    case Connective::Not:
      collect_names(f->left(), out);
      return;
    case Connective::And:
    case Connective::Or:
    case Connective::Implies:
      collect_names(f->left(), out);
      collect_names(f->right(), out);
      return;
    case Connective::Forall:
    case Connective::Exists:
      out.insert(f->variable());
      collect_names(f->body(), out);
      return;
    case Connective::Lfp:
      out.insert(f->bound().begin(), f->bound().end());
      out.insert(f->args().begin(), f->args().end());
      collect_names(f->body(), out);
      return;
    default:
      return;
  }
}

void collect_polarity(const FormulaPtr& f, const std::string& v, bool negated, bool& pos, bool& neg) {
  switch (f->kind()) {
    case Connective::Atom:
      if (!f->derived() && f->symbol() == v) (negated ? neg : pos) = true;
      return;
    case Connective::Not:
      collect_polarity(f->left(), v, !negated, pos, neg);
      return;
    case Connective::And:
    case Connective::Or:
      collect_polarity(f->left(), v, negated, pos, neg);
      collect_polarity(f->right(), v, negated, pos, neg);
      return;
    case Connective::Implies:
      collect_polarity(f->left(), v, !negated, pos, neg);
      collect_polarity(f->right(), v, negated, pos, neg);
      return;
    case Connective::Forall:
    case Connective::Exists:
      collect_polarity(f->body(), v, negated, pos, neg);
      return;
    case Connective::Lfp:
      if (f->symbol() == v) return;  // shadowed
      collect_polarity(f->body(), v, negated, pos, neg);
      return;
    default:
      return;
  }
}

std::vector<std::string> map_args(const std::vector<std::string>& args,
                                  const std::map<std::string, std::string>& renaming) {
  std::vector<std::string> out;
  out.reserve(args.size());
  for (const auto& a : args) {
    auto it = renaming.find(a);
    out.push_back(it == renaming.end() ? a : it->second);
  }
  return out;
}

bool contains_var(const std::vector<std::string>& vs, const std::string& v) {
  return std::find(vs.begin(), vs.end(), v) != vs.end();
}

class Renamer {
 public:
  explicit Renamer(std::set<std::string> used) : used_(std::move(used)) {}

  FormulaPtr run(const FormulaPtr& f, std::map<std::string, std::string> renaming) {
    // Only free variables of f matter.
    const auto fv = free_variables(f);
    for (auto it = renaming.begin(); it != renaming.end();) {
      if (!contains_var(fv, it->first) || it->first == it->second) {
        it = renaming.erase(it);
      } else {
        ++it;
      }
    }
    if (renaming.empty()) return f;

    switch (f->kind()) {
      case Connective::True:
      case Connective::False:
        return f;
      case Connective::Atom:
        if (f->derived()) return Formula::derived_atom(f->derived(), map_args(f->args(), renaming));
        return Formula::atom(f->symbol(), map_args(f->args(), renaming));
      case Connective::Equal: {
        auto args = map_args(f->args(), renaming);
        return Formula::equal(args[0], args[1]);
      }
      case Connective::Not:
        return Formula::negation(run(f->left(), renaming));
      case Connective::And:
        return Formula::conj(run(f->left(), renaming), run(f->right(), renaming));
      case Connective::Or:
        return Formula::disj(run(f->left(), renaming), run(f->right(), renaming));
      case Connective::Implies:
        return Formula::implies(run(f->left(), renaming), run(f->right(), renaming));
      case Connective::Forall:
      case Connective::Exists: {
        std::string var = f->variable();
        FormulaPtr body = f->body();
        renaming.erase(var);
        if (renaming.empty()) return f;
        if (captures(var, renaming)) {
          const std::string fresh = fresh_for(var);
          body = run(body, {{var, fresh}});
          var = fresh;
        }
        body = run(body, renaming);
        return f->kind() == Connective::Forall ? Formula::forall(var, body) : Formula::exists(var, body);
      }
      case Connective::Lfp: {
        auto args = map_args(f->args(), renaming);
        auto inner = renaming;
        for (const auto& b : f->bound()) inner.erase(b);
        std::vector<std::string> bound = f->bound();
        FormulaPtr body = f->body();
        if (!inner.empty()) {
          for (auto& b : bound) {
            if (captures(b, inner)) {
              const std::string fresh = fresh_for(b);
              body = run(body, {{b, fresh}});
              b = fresh;
            }
          }
          body = run(body, inner);
        }
        return Formula::lfp(f->symbol(), bound, body, args);
      }
    }
    return f;
  }

  std::string fresh_for(const std::string& base) {
    std::string name = fresh_name(base, used_);
    used_.insert(name);
    return name;
  }

  std::set<std::string>& used() { return used_; }

 private:
  static bool captures(const std::string& var, const std::map<std::string, std::string>& renaming) {
    for (const auto& [from, to] : renaming) {
      if (to == var) return true;
    }
    return false;
  }

  std::set<std::string> used_;
};

class RelationSubstituter {
 public:
  RelationSubstituter(const std::string& v, const FormulaPtr& g, const std::vector<std::string>& params,
                      std::set<std::string> used)
      : v_(v), g_(g), params_(params), renamer_(std::move(used)) {
    for (const auto& fv : free_variables(g)) {
      if (!contains_var(params, fv)) context_vars_.insert(fv);
    }
  }

  FormulaPtr run(const FormulaPtr& f) {
    switch (f->kind()) {
      case Connective::True:
      case Connective::False:
      case Connective::Equal:
        return f;
      case Connective::Atom: {
        if (f->derived() || f->symbol() != v_) return f;
        if (f->args().size() != params_.size()) {
          throw SignatureError("substitution for " + v_ + " expects " + std::to_string(params_.size()) +
                               " arguments, atom has " + std::to_string(f->args().size()));
        }
        std::map<std::string, std::string> renaming;
        for (std::size_t i = 0; i < params_.size(); ++i) renaming[params_[i]] = f->args()[i];
        return renamer_.run(g_, renaming);
      }
      case Connective::Not:
        return Formula::negation(run(f->left()));
      case Connective::And:
        return Formula::conj(run(f->left()), run(f->right()));
      case Connective::Or:
        return Formula::disj(run(f->left()), run(f->right()));
      case Connective::Implies:
        return Formula::implies(run(f->left()), run(f->right()));
      case Connective::Forall:
      case Connective::Exists: {
        std::string var = f->variable();
        FormulaPtr body = f->body();
        if (context_vars_.count(var) != 0) {
          const std::string fresh = renamer_.fresh_for(var);
          body = renamer_.run(body, {{var, fresh}});
          var = fresh;
        }
        body = run(body);
        return f->kind() == Connective::Forall ? Formula::forall(var, body) : Formula::exists(var, body);
      }
      case Connective::Lfp: {
        if (f->symbol() == v_) return f;  // shadowed
        std::vector<std::string> bound = f->bound();
        FormulaPtr body = f->body();
        for (auto& b : bound) {
          if (context_vars_.count(b) != 0) {
            const std::string fresh = renamer_.fresh_for(b);
            body = renamer_.run(body, {{b, fresh}});
            b = fresh;
          }
        }
        return Formula::lfp(f->symbol(), bound, run(body), f->args());
      }
    }
    return f;
  }

 private:
  std::string v_;
  FormulaPtr g_;
  std::vector<std::string> params_;
  std::set<std::string> context_vars_;
  Renamer renamer_;
};

}  // namespace

std::vector<std::string> free_variables(const FormulaPtr& f) {
  std::vector<std::string> bound;
  std::vector<std::string> out;
  std::set<std::string> seen;
  collect_free(f, bound, out, seen);
  return out;
}

std::set<std::string> free_relation_symbols(const FormulaPtr& f) {
  std::vector<std::string> bound;
  std::set<std::string> out;
  collect_relations(f, bound, out);
  return out;
}

std::set<std::string> variable_names(const FormulaPtr& f) {
  std::set<std::string> out;
  collect_names(f, out);
  return out;
}

Polarity polarity(const FormulaPtr& f, const std::string& v) {
  bool pos = false;
  bool neg = false;
  collect_polarity(f, v, false, pos, neg);
  if (pos && neg) return Polarity::Mixed;
  if (pos) return Polarity::Positive;
  if (neg) return Polarity::Negative;
  return Polarity::Absent;
}

std::string fresh_name(const std::string& base, const std::set<std::string>& used) {
  std::string name = base + "'";
  while (used.count(name) != 0) name += "'";
  return name;
}

FormulaPtr rename_variables(const FormulaPtr& f, const std::map<std::string, std::string>& renaming) {
  std::set<std::string> used = variable_names(f);
  for (const auto& [from, to] : renaming) {
    used.insert(from);
    used.insert(to);
  }
  Renamer r(std::move(used));
  return r.run(f, renaming);
}

FormulaPtr substitute_relation(const FormulaPtr& f, const std::string& v, const FormulaPtr& g,
                               const std::vector<std::string>& params) {
  std::set<std::string> used = variable_names(f);
  const auto gnames = variable_names(g);
  used.insert(gnames.begin(), gnames.end());
  used.insert(params.begin(), params.end());
  RelationSubstituter s(v, g, params, std::move(used));
  return s.run(f);
}

bool is_first_order(const FormulaPtr& f) {
  switch (f->kind()) {
    case Connective::Lfp:
      return false;
    case Connective::Not:
    case Connective::Forall:
    case Connective::Exists:
      return is_first_order(f->left());
    case Connective::And:
    case Connective::Or:
    case Connective::Implies:
      return is_first_order(f->left()) && is_first_order(f->right());
    default:
      return true;
  }
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

int precedence(const Formula& f) {
  switch (f.kind()) {
    case Connective::Implies: return 1;
    case Connective::Or: return 2;
    case Connective::And: return 3;
    case Connective::Forall:
    case Connective::Exists: return 0;
    default: return 4;
  }
}

std::string join(const std::vector<std::string>& vs) {
  std::string out;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i != 0) out += ",";
    out += vs[i];
  }
  return out;
}

std::string render_node(const Formula& f);

std::string parenthesize_if(bool cond, const std::string& s) { return cond ? "(" + s + ")" : s; }

std::string render_node(const Formula& f) {
  switch (f.kind()) {
    case Connective::True: return "true";
    case Connective::False: return "false";
    case Connective::Atom:
      if (f.symbol() == "<" && f.args().size() == 2 && !f.derived()) return f.args()[0] + " < " + f.args()[1];
      return f.symbol() + "(" + join(f.args()) + ")";
    case Connective::Equal: return f.args()[0] + " = " + f.args()[1];
    case Connective::Not: {
      const Formula& c = *f.left();
      return "!" + parenthesize_if(precedence(c) < 4, render_node(c));
    }
    case Connective::And:
    case Connective::Or: {
      const int p = precedence(f);
      const Formula& l = *f.left();
      const Formula& r = *f.right();
      const char* op = f.kind() == Connective::And ? " & " : " | ";
      return parenthesize_if(precedence(l) < p, render_node(l)) + op +
             parenthesize_if(precedence(r) <= p, render_node(r));
    }
    case Connective::Implies: {
      const Formula& l = *f.left();
      const Formula& r = *f.right();
      return parenthesize_if(precedence(l) <= 1, render_node(l)) + " -> " +
             parenthesize_if(precedence(r) < 1, render_node(r));
    }
    case Connective::Forall:
    case Connective::Exists:
      return std::string(f.kind() == Connective::Forall ? "A " : "E ") + f.variable() + ". " +
             render_node(*f.body());
    case Connective::Lfp:
      return "[lfp " + f.symbol() + "(" + join(f.bound()) + "). " + render_node(*f.body()) + "](" +
             join(f.args()) + ")";
  }
  return "?";
}

}  // namespace

std::string render(const FormulaPtr& f) { return render_node(*f); }

// ---------------------------------------------------------------------------
// Validation

namespace {

struct Validator {
  const Signature& sig;
  std::vector<RelationSymbol> scope;
  bool check_symbols = true;

  std::optional<std::size_t> relvar_arity(const std::string& name) const {
    for (auto it = scope.rbegin(); it != scope.rend(); ++it) {
      if (it->name == name) return it->arity;
    }
    return std::nullopt;
  }

  void run(const FormulaPtr& f) {
    switch (f->kind()) {
      case Connective::Atom: {
        std::optional<std::size_t> arity;
        if (f->derived()) {
          arity = f->derived()->arity();
        } else {
          arity = relvar_arity(f->symbol());
          if (!arity) arity = sig.arity_of(f->symbol());
        }
        if (!arity) {
          if (!check_symbols) return;
          throw SignatureError("undeclared relation symbol " + f->symbol());
        }
        if (*arity != f->args().size()) {
          throw SignatureError("arity mismatch for " + f->symbol() + ": expected " + std::to_string(*arity) +
                               ", got " + std::to_string(f->args().size()));
        }
        return;
      }
      case Connective::Not:
      case Connective::Forall:
      case Connective::Exists:
        run(f->left());
        return;
      case Connective::And:
      case Connective::Or:
      case Connective::Implies:
        run(f->left());
        run(f->right());
        return;
      case Connective::Lfp: {
        if (f->bound().size() != f->args().size() || f->bound().empty()) {
          throw SignatureError("lfp over " + f->symbol() + " binds " + std::to_string(f->bound().size()) +
                               " variables but is applied to " + std::to_string(f->args().size()));
        }
        std::set<std::string> distinct(f->bound().begin(), f->bound().end());
        if (distinct.size() != f->bound().size()) {
          throw SignatureError("lfp over " + f->symbol() + " binds a variable twice");
        }
        const Polarity p = polarity(f->body(), f->symbol());
        if (p == Polarity::Negative || p == Polarity::Mixed) {
          throw PolarityError("relation variable " + f->symbol() + " occurs " + to_string(p) + "ly in lfp body");
        }
        scope.push_back({f->symbol(), f->bound().size()});
        run(f->body());
        scope.pop_back();
        return;
      }
      default:
        return;
    }
  }
};

}  // namespace

void validate(const FormulaPtr& f, const Signature& sig, const std::vector<RelationSymbol>& free_relation_variables) {
  Validator v{sig, free_relation_variables};
  v.run(f);
}

void check_lfp_nodes(const FormulaPtr& f) {
  Signature none;
  Validator v{none, {}, false};
  v.run(f);
}

// ---------------------------------------------------------------------------
// Macros

void MacroTable::define(const std::string& name, const std::vector<std::string>& params, std::string_view body_text) {
  ParseOptions opts;
  opts.macros = this;
  opts.check_signature = false;
  FormulaPtr body = parse_formula(body_text, Signature{}, opts);
  define(name, Macro{params, std::move(body)});
}

void MacroTable::define(const std::string& name, Macro macro) {
  std::set<std::string> distinct(macro.params.begin(), macro.params.end());
  if (distinct.size() != macro.params.size()) throw FormatError("macro " + name + " repeats a parameter");
  for (const auto& v : free_variables(macro.body)) {
    if (distinct.count(v) == 0) throw FormatError("macro " + name + " has free variable " + v + " not a parameter");
  }
  macros_[name] = std::move(macro);
}

const Macro* MacroTable::find(const std::string& name) const {
  auto it = macros_.find(name);
  return it == macros_.end() ? nullptr : &it->second;
}

std::vector<std::string> MacroTable::names() const {
  std::vector<std::string> out;
  for (const auto& [name, m] : macros_) out.push_back(name);
  return out;
}

FormulaPtr MacroTable::expand(const std::string& name, const std::vector<std::string>& args) const {
  const Macro* m = find(name);
  if (m == nullptr) throw FormatError("unknown macro " + name);
  if (m->params.size() != args.size()) {
    throw SignatureError("macro " + name + " takes " + std::to_string(m->params.size()) + " arguments, got " +
                         std::to_string(args.size()));
  }
  std::map<std::string, std::string> renaming;
  for (std::size_t i = 0; i < args.size(); ++i) renaming[m->params[i]] = args[i];
  return rename_variables(m->body, renaming);
}

}  // namespace lfpw
